//! Minimal nonnegative solutions of the matrix quadratic equations attached
//! to each coordinate axis, and the one-dimensional QBD stationary solver
//! built on them.
//!
//! For axis 1 the coefficient triple at `z` is `A_{*,j}(z), j in {-1,0,1}`,
//! and `G` is the minimal nonnegative solution of
//!
//! ```text
//! A_{*,-1}(z) + A_{*,0}(z) X + A_{*,1}(z) X^2 = X.
//! ```
//!
//! The companion kernels follow from `G`: `H = A_{*,0}(z) + A_{*,1}(z) G`,
//! `N = (I - H)^{-1}`, `R = A_{*,1}(z) N`; together they factor
//! `I - C(z, w)` as `(w^{-1} I - R)(I - H)(w I - G)` for every nonzero `w`.
//! Axis 2 exchanges the roles of the coordinates.
//!
//! The default solver rescales the triple by the lower branch root and the
//! Perron vector there — an exact similarity that makes the triple row
//! stochastic — and applies logarithmic reduction, which stays fast at the
//! tangent endpoints where the plain fixed-point iteration degrades to
//! sublinear. The fixed-point (natural) iteration is kept available behind
//! the same contract; its iterates are entrywise monotone, which the tests
//! exercise.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::matrix;
use crate::model::QbdModel;
use crate::spectral::{self, BranchRoots, SpectralError};

/// Coordinate axis of a kernel family: `One` parameterizes by `z1` and moves
/// in the `x2` direction, `Two` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

/// Errors from the kernel solvers.
#[derive(Debug, Error)]
pub enum KernelError {
    #[error(
        "z = {z} admits no real branch roots; the minimal nonnegative kernels exist only for z \
         inside the extreme-value interval of axis {axis:?}"
    )]
    OutsideInterval { axis: Axis, z: f64 },
    #[error(
        "kernel iteration diverged (entry reached {value:.3e} after {iterations} iterations); \
         z is likely outside the admissible interval"
    )]
    Diverged { value: f64, iterations: usize },
    #[error(
        "kernel iteration hit the cap of {cap} iterations (last increment {increment:.3e}); \
         z may be outside the admissible interval or the tolerance too tight"
    )]
    IterationCap { cap: usize, increment: f64 },
    #[error("singular matrix while {context}")]
    Singular { context: &'static str },
    #[error("face-{face} chain is not positive recurrent (spr(R_star) = {spr})")]
    NotPositiveRecurrent { face: u8, spr: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
}

/// Max-norm residuals of the defining kernel identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelResiduals {
    /// `A_- + A_0 G + A_+ G^2 - G`.
    pub quadratic_g: f64,
    /// `R^2 A_- + R A_0 + A_+ - R`.
    pub quadratic_r: f64,
    /// `G - N A_-`.
    pub g_from_n: f64,
    /// `R - A_+ N`.
    pub r_from_n: f64,
    /// `(I - H) N - I`.
    pub n_inverse: f64,
}

impl KernelResiduals {
    /// Largest of the five residuals.
    pub fn max(&self) -> f64 {
        self.quadratic_g
            .max(self.quadratic_r)
            .max(self.g_from_n)
            .max(self.r_from_n)
            .max(self.n_inverse)
    }
}

/// Converged kernel family on one axis at one parameter value.
#[derive(Debug, Clone)]
pub struct AxisKernels {
    /// Axis the quadratic equation lives on.
    pub axis: Axis,
    /// Parameter value (the fixed coordinate).
    pub z: f64,
    /// Minimal nonnegative solution of the quadratic equation.
    pub g: DMatrix<f64>,
    /// Companion rate matrix.
    pub r: DMatrix<f64>,
    /// Fundamental matrix `(I - H)^{-1}`.
    pub n: DMatrix<f64>,
    /// Local kernel `A_0 + A_+ G`.
    pub h: DMatrix<f64>,
    /// Residuals of the defining identities.
    pub residuals: KernelResiduals,
    /// Iterations taken by the solver.
    pub iterations: usize,
    /// Rough condition estimate `||N|| * ||I - H||` of the fundamental
    /// system; values above 1e12 should be treated as a warning.
    pub condition_estimate: f64,
}

fn triple(model: &QbdModel, axis: Axis, z: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    match axis {
        Axis::One => (model.a_col_z(-1, z), model.a_col_z(0, z), model.a_col_z(1, z)),
        Axis::Two => (model.a_row_z(-1, z), model.a_row_z(0, z), model.a_row_z(1, z)),
    }
}

fn branch_roots_for_axis(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    settings: &Settings,
) -> Result<BranchRoots, SpectralError> {
    match axis {
        Axis::One => spectral::branch_roots_2(model, z, settings),
        Axis::Two => spectral::branch_roots_1(model, z, settings),
    }
}

/// Lower branch root used to stochasticize the triple; points whose section
/// minimum exceeds 1 by more than the root tolerance are rejected.
fn admissible_lower_root(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    settings: &Settings,
) -> Result<f64, KernelError> {
    match branch_roots_for_axis(model, axis, z, settings)? {
        BranchRoots::TwoRoots { lower, .. } => Ok(lower),
        BranchRoots::Tangent { root } => Ok(root),
        BranchRoots::NoRoot => Err(KernelError::OutsideInterval { axis, z }),
    }
}

/// Logarithmic reduction for `G = A_- + A_0 G + A_+ G^2` on a (sub)stochastic
/// triple. Quadratically convergent in the interior, linear with ratio 1/2 at
/// null recurrence.
fn log_reduction(
    a_minus: &DMatrix<f64>,
    a_zero: &DMatrix<f64>,
    a_plus: &DMatrix<f64>,
    cap: usize,
) -> Result<(DMatrix<f64>, usize), KernelError> {
    let n = a_zero.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let lu0 = (&eye - a_zero).lu();
    let solve = |lu: &nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
                 rhs: DMatrix<f64>,
                 context: &'static str|
     -> Result<DMatrix<f64>, KernelError> {
        lu.solve(&rhs).ok_or(KernelError::Singular { context })
    };
    let mut l = solve(&lu0, a_minus.clone(), "initializing logarithmic reduction")?;
    let mut h = solve(&lu0, a_plus.clone(), "initializing logarithmic reduction")?;
    let mut g = l.clone();
    let mut t = h.clone();
    let mut last_increment = f64::INFINITY;
    for it in 1..=cap {
        // At null recurrence I - U approaches singularity as the increments
        // shrink (they halve each step); once the factorization breaks down
        // numerically the remaining tail is of the order of the last
        // increment, so a small tail counts as converged.
        let breakdown = |last: f64, iterations: usize| {
            if last <= 1e-10 {
                Ok(())
            } else {
                Err(KernelError::Diverged {
                    value: last,
                    iterations,
                })
            }
        };
        let u = &h * &l + &l * &h;
        let lu_u = (&eye - &u).lu();
        let step = (|| {
            let h_next = lu_u.solve(&(&h * &h))?;
            let l_next = lu_u.solve(&(&l * &l))?;
            let increment = &t * &l_next;
            let inc_norm = increment.amax();
            if !inc_norm.is_finite() || !h_next.amax().is_finite() || !l_next.amax().is_finite() {
                return None;
            }
            Some((h_next, l_next, increment, inc_norm))
        })();
        let (h_next, l_next, increment, inc_norm) = match step {
            Some(s) => s,
            None => {
                breakdown(last_increment, it)?;
                return Ok((g, it));
            }
        };
        if inc_norm > 1e12 {
            return Err(KernelError::Diverged {
                value: inc_norm,
                iterations: it,
            });
        }
        g += &increment;
        let scale = g.amax().max(1.0);
        if inc_norm <= 1e-15 * scale {
            return Ok((g, it));
        }
        // Increments contract in exact arithmetic; growth near the noise
        // floor marks the same breakdown.
        if inc_norm >= last_increment && inc_norm <= 1e-10 {
            return Ok((g, it));
        }
        last_increment = inc_norm;
        t = &t * &h_next;
        h = h_next;
        l = l_next;
    }
    Err(KernelError::IterationCap {
        cap,
        increment: last_increment,
    })
}

fn residuals(
    a_minus: &DMatrix<f64>,
    a_zero: &DMatrix<f64>,
    a_plus: &DMatrix<f64>,
    g: &DMatrix<f64>,
    r: &DMatrix<f64>,
    n: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> KernelResiduals {
    let eye = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    KernelResiduals {
        quadratic_g: (a_minus + a_zero * g + a_plus * (g * g) - g).amax(),
        quadratic_r: ((r * r) * a_minus + r * a_zero + a_plus - r).amax(),
        g_from_n: (g - n * a_minus).amax(),
        r_from_n: (r - a_plus * n).amax(),
        n_inverse: ((&eye - h) * n - &eye).amax(),
    }
}

fn assemble(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    g: DMatrix<f64>,
    iterations: usize,
) -> Result<AxisKernels, KernelError> {
    let (a_minus, a_zero, a_plus) = triple(model, axis, z);
    let n_dim = g.nrows();
    let eye = DMatrix::<f64>::identity(n_dim, n_dim);
    let h = &a_zero + &a_plus * &g;
    let i_minus_h = &eye - &h;
    let n = i_minus_h
        .clone()
        .lu()
        .solve(&eye)
        .ok_or(KernelError::Singular {
            context: "inverting I - H",
        })?;
    let r = &a_plus * &n;
    let res = residuals(&a_minus, &a_zero, &a_plus, &g, &r, &n, &h);
    let condition_estimate = inf_norm(&n) * inf_norm(&i_minus_h);
    Ok(AxisKernels {
        axis,
        z,
        g,
        r,
        n,
        h,
        residuals: res,
        iterations,
        condition_estimate,
    })
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves the axis kernels at `z` by stochasticized logarithmic reduction.
pub fn solve_axis(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    settings: &Settings,
) -> Result<AxisKernels, KernelError> {
    let w_low = admissible_lower_root(model, axis, z, settings)?;
    let (a_minus, a_zero, a_plus) = triple(model, axis, z);
    let (z1, z2) = match axis {
        Axis::One => (z, w_low),
        Axis::Two => (w_low, z),
    };
    let c = spectral::c_matrix(model, z1, z2)?;
    let rho = matrix::spectral_radius(&c)?;
    let (_, v) = matrix::perron_pair(&c, rho)?;
    // Similarity transform: Atilde_k = w^k D^{-1} A_k D with D = diag(v).
    // Exact for any positive (w, v); this choice makes the triple row
    // stochastic up to the branch-root tolerance.
    let s0 = model.s0();
    let scale = |m: &DMatrix<f64>, wk: f64| {
        DMatrix::from_fn(s0, s0, |i, j| wk * m[(i, j)] * v[j] / v[i])
    };
    let am_t = scale(&a_minus, 1.0 / w_low);
    let a0_t = scale(&a_zero, 1.0);
    let ap_t = scale(&a_plus, w_low);
    // The transformed G is stochastic (its Perron pair is (1, ones)), so the
    // rank-one shift G = G_hat + ones u^T deflates the unit eigenvalue to
    // zero. The shifted equation splits the branch roots that coincide at
    // tangency, keeping the reduction quadratic and well conditioned there.
    let u_shift = DMatrix::<f64>::from_element(s0, s0, 1.0 / s0 as f64);
    let am_hat = &am_t - &am_t * &u_shift;
    let a0_hat = &a0_t + &ap_t * &u_shift;
    let (g_hat, iterations) = log_reduction(&am_hat, &a0_hat, &ap_t, settings.max_lr_iter)?;
    let g_t = g_hat + u_shift;
    let g = DMatrix::from_fn(s0, s0, |i, j| w_low * v[i] * g_t[(i, j)] / v[j]);
    assemble(model, axis, z, g, iterations)
}

/// Axis-1 kernels: coefficients `A_{*,j}(z1)`, movement in the x2 direction.
pub fn solve_axis1(
    model: &QbdModel,
    z1: f64,
    settings: &Settings,
) -> Result<AxisKernels, KernelError> {
    solve_axis(model, Axis::One, z1, settings)
}

/// Axis-2 kernels: coefficients `A_{i,*}(z2)`, movement in the x1 direction.
pub fn solve_axis2(
    model: &QbdModel,
    z2: f64,
    settings: &Settings,
) -> Result<AxisKernels, KernelError> {
    solve_axis(model, Axis::Two, z2, settings)
}

/// The fixed-point iteration `X <- A_- + A_0 X + A_+ X^2` from `X = 0`,
/// reporting geometrically spaced iterates to `on_sample`. Iterates increase
/// entrywise and converge to the minimal nonnegative solution; convergence is
/// sublinear at the interval endpoints, where the relaxed tolerance and the
/// raised cap apply (`at_extreme`).
pub fn natural_g_iteration<F: FnMut(usize, &DMatrix<f64>)>(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    at_extreme: bool,
    settings: &Settings,
    mut on_sample: F,
) -> Result<(DMatrix<f64>, usize), KernelError> {
    let (a_minus, a_zero, a_plus) = triple(model, axis, z);
    let (tol, cap) = if at_extreme {
        (settings.kernel_tol_extreme, settings.max_natural_iter_extreme)
    } else {
        (settings.kernel_tol, settings.max_natural_iter)
    };
    let s0 = model.s0();
    let mut x = DMatrix::<f64>::zeros(s0, s0);
    let mut next_sample = 1usize;
    for it in 1..=cap {
        let x_next = &a_minus + &a_zero * &x + &a_plus * (&x * &x);
        let diff = (&x_next - &x).amax();
        x = x_next;
        if x.amax() > 1e12 {
            return Err(KernelError::Diverged {
                value: x.amax(),
                iterations: it,
            });
        }
        if it == next_sample {
            on_sample(it, &x);
            next_sample *= 2;
        }
        if diff < tol {
            return Ok((x, it));
        }
    }
    Err(KernelError::IterationCap {
        cap,
        increment: f64::NAN,
    })
}

/// Axis kernels via the natural iteration, behind the same contract as
/// [`solve_axis`].
pub fn solve_axis_natural(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    at_extreme: bool,
    settings: &Settings,
) -> Result<AxisKernels, KernelError> {
    let (g, iterations) = natural_g_iteration(model, axis, z, at_extreme, settings, |_, _| {})?;
    assemble(model, axis, z, g, iterations)
}

/// Max-norm residual of the factorization
/// `I - C(z, w) = (w^{-1} I - R)(I - H)(w I - G)` at the kernels' parameter
/// and a free `w > 0` (`w` is the coordinate the kernels move in).
pub fn factorization_residual(
    model: &QbdModel,
    kernels: &AxisKernels,
    w: f64,
) -> Result<f64, KernelError> {
    if !(w > 0.0) {
        return Err(KernelError::Spectral(SpectralError::NonPositiveArgument {
            z1: kernels.z,
            z2: w,
        }));
    }
    let (z1, z2) = match kernels.axis {
        Axis::One => (kernels.z, w),
        Axis::Two => (w, kernels.z),
    };
    let c = spectral::c_matrix(model, z1, z2)?;
    let s0 = model.s0();
    let eye = DMatrix::<f64>::identity(s0, s0);
    let lhs = &eye - &c;
    let rhs = (&eye / w - &kernels.r) * (&eye - &kernels.h) * (&eye * w - &kernels.g);
    Ok((lhs - rhs).amax())
}

// ---------------------------------------------------------------------------
// One-dimensional QBD stationary distribution
// ---------------------------------------------------------------------------

/// Stationary distribution of a face chain in matrix-geometric form:
/// `pi_k = pi_1 R_star^{k-1}` for `k >= 1`.
#[derive(Debug, Clone)]
pub struct OneDQbdStationary {
    /// Boundary-level stationary vector.
    pub pi0: RowDVector<f64>,
    /// Level-1 stationary vector.
    pub pi1: RowDVector<f64>,
    /// Rate matrix of the repeating part.
    pub r_star: DMatrix<f64>,
    /// Total mass after normalization (1 up to solver accuracy).
    pub normalization: f64,
}

impl OneDQbdStationary {
    /// Stationary vector of level `k`.
    pub fn level(&self, k: usize) -> RowDVector<f64> {
        match k {
            0 => self.pi0.clone(),
            1 => self.pi1.clone(),
            _ => {
                let mut v = self.pi1.clone();
                for _ in 1..k {
                    v *= &self.r_star;
                }
                v
            }
        }
    }
}

/// Stationary distribution of the one-dimensional QBD induced by removing the
/// other boundary: face 1 levels run along x2 (repeating triple `A_{*,k}`,
/// boundary `A1_{*,k}`), face 2 along x1.
///
/// Errors with [`KernelError::NotPositiveRecurrent`] when the face chain is
/// not positive recurrent (`spr(R_star) >= 1`).
pub fn qbd_stationary(
    face: u8,
    model: &QbdModel,
    settings: &Settings,
) -> Result<OneDQbdStationary, KernelError> {
    let axis = match face {
        1 => Axis::One,
        2 => Axis::Two,
        other => panic!("face must be 1 or 2, got {other}"),
    };
    let kernels = solve_axis(model, axis, 1.0, settings)?;
    let r = kernels.r;
    let spr_r = matrix::spectral_radius(&r)?;
    if spr_r >= 1.0 - 1e-12 {
        return Err(KernelError::NotPositiveRecurrent { face, spr: spr_r });
    }
    let (a_minus, a_zero, _) = triple(model, axis, 1.0);
    let (b0, b1) = match axis {
        Axis::One => (model.a1_col(0), model.a1_col(1)),
        Axis::Two => (model.a2_row(0), model.a2_row(1)),
    };
    let s0 = model.s0();
    // Censored boundary chain on levels {0, 1}; stochastic because the
    // repeating G-matrix at z = 1 is stochastic here.
    let mut b = DMatrix::<f64>::zeros(2 * s0, 2 * s0);
    b.view_mut((0, 0), (s0, s0)).copy_from(&b0);
    b.view_mut((0, s0), (s0, s0)).copy_from(&b1);
    b.view_mut((s0, 0), (s0, s0)).copy_from(&a_minus);
    b.view_mut((s0, s0), (s0, s0))
        .copy_from(&(&a_zero + &r * &a_minus));
    let x = matrix::stationary_row(&b)?;
    let x0 = RowDVector::from_iterator(s0, (0..s0).map(|j| x[j]));
    let x1 = RowDVector::from_iterator(s0, (0..s0).map(|j| x[s0 + j]));
    let eye = DMatrix::<f64>::identity(s0, s0);
    let n_geo = (&eye - &r).lu().solve(&eye).ok_or(KernelError::Singular {
        context: "inverting I - R_star",
    })?;
    let ones = DVector::from_element(s0, 1.0);
    let total = x0.iter().sum::<f64>() + (&x1 * &n_geo * &ones)[0];
    let pi0 = x0 / total;
    let pi1 = x1 / total;
    let mass = pi0.iter().sum::<f64>() + (&pi1 * &n_geo * &ones)[0];
    Ok(OneDQbdStationary {
        pi0,
        pi1,
        r_star: r,
        normalization: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_limited_service, LimitedServiceParams};

    fn table1(k: usize) -> QbdModel {
        build_limited_service(&LimitedServiceParams {
            k,
            lambda1: 0.3,
            lambda2: 0.3,
            mu1: 1.0,
            mu2: 1.0,
        })
        .unwrap()
    }

    fn table2(k: usize) -> QbdModel {
        build_limited_service(&LimitedServiceParams {
            k,
            lambda1: 0.24,
            lambda2: 0.7,
            mu1: 1.2,
            mu2: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn g_at_one_is_stochastic_when_the_face_chain_is_recurrent() {
        // Table-1 models have a2^{1,2} < 0, so G on axis 1 at z = 1 is stochastic.
        let m = table1(2);
        let settings = Settings::default();
        let k = solve_axis1(&m, 1.0, &settings).unwrap();
        for r in 0..m.s0() {
            let row_sum: f64 = k.g.row(r).iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-10, "row {r} sums to {row_sum}");
        }
        assert!(k.residuals.max() < 1e-10);
        assert!(k.g.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn spectral_radii_match_branch_roots() {
        let m = table1(2);
        let settings = Settings::default();
        for z in [1.0, 1.2, 1.4] {
            let k = solve_axis1(&m, z, &settings).unwrap();
            let roots = spectral::branch_roots_2(&m, z, &settings).unwrap();
            let (lower, upper) = (roots.lower().unwrap(), roots.upper().unwrap());
            let spr_g = matrix::spectral_radius(&k.g).unwrap();
            let spr_r = matrix::spectral_radius(&k.r).unwrap();
            assert!((spr_g - lower).abs() < 1e-8, "z={z}: spr(G)={spr_g} vs {lower}");
            assert!(
                (spr_r - 1.0 / upper).abs() < 1e-8,
                "z={z}: spr(R)={spr_r} vs 1/{upper}"
            );
        }
    }

    #[test]
    fn axis2_g_has_only_its_last_column_nonzero() {
        let m = table1(3);
        let settings = Settings::default();
        for w in [1.0, 1.5, 2.2] {
            let k = solve_axis2(&m, w, &settings).unwrap();
            for col in 0..m.s0() - 1 {
                let max_entry = k.g.column(col).amax();
                assert!(
                    max_entry <= 1e-12,
                    "w={w}: column {col} has entry {max_entry}"
                );
            }
            assert!(k.g.column(m.s0() - 1).amax() > 0.0);
        }
    }

    #[test]
    fn natural_iteration_is_monotone_and_agrees_with_log_reduction() {
        let m = table1(1);
        let settings = Settings::default();
        let z = 1.1;
        let mut samples: Vec<DMatrix<f64>> = Vec::new();
        let (g_nat, _) =
            natural_g_iteration(&m, Axis::One, z, false, &settings, |_, x| {
                samples.push(x.clone())
            })
            .unwrap();
        for pair in samples.windows(2) {
            assert!(
                (&pair[1] - &pair[0]).min() >= -1e-14,
                "iterates must be entrywise nondecreasing"
            );
        }
        let g_lr = solve_axis1(&m, z, &settings).unwrap().g;
        for x in &samples {
            assert!((x - &g_lr).max() <= 1e-9, "iterates must stay below the limit");
        }
        assert!((&g_nat - &g_lr).amax() < 1e-9);
    }

    #[test]
    fn z_outside_the_interval_is_rejected() {
        let m = table1(1);
        let settings = Settings::default();
        let sum = spectral::extreme_points(&m, &settings).unwrap();
        match solve_axis1(&m, sum.z1_max * 1.1, &settings) {
            Err(KernelError::OutsideInterval { .. }) => {}
            other => panic!("expected OutsideInterval, got {other:?}"),
        }
    }

    #[test]
    fn factorization_residual_is_small_for_converged_kernels() {
        let m = table1(1);
        let settings = Settings::default();
        let k = solve_axis1(&m, 1.0, &settings).unwrap();
        for w in [0.5, 1.0, 2.0] {
            let res = factorization_residual(&m, &k, w).unwrap();
            assert!(res <= 1e-9, "w={w}: residual {res}");
        }
    }

    #[test]
    fn factorization_residual_grows_with_injected_perturbation() {
        let m = table1(1);
        let settings = Settings::default();
        let k = solve_axis1(&m, 1.0, &settings).unwrap();
        let mut last = factorization_residual(&m, &k, 1.3).unwrap();
        for eps in [1e-8, 1e-6, 1e-4, 1e-2] {
            let mut tampered = k.clone();
            tampered.g = &k.g + DMatrix::from_element(m.s0(), m.s0(), eps);
            let res = factorization_residual(&m, &tampered, 1.3).unwrap();
            assert!(res > last, "residual must grow with perturbation {eps}");
            last = res;
        }
    }

    #[test]
    fn qbd_stationary_normalizes_and_balances() {
        let m = table1(1);
        let settings = Settings::default();
        let st = qbd_stationary(1, &m, &settings).unwrap();
        assert!((st.normalization - 1.0).abs() < 1e-10);
        let spr_r = matrix::spectral_radius(&st.r_star).unwrap();
        assert!(spr_r < 1.0);

        // Global balance on levels 0..3, closing the tail with R_star.
        let (am, a0, ap) = triple(&m, Axis::One, 1.0);
        let (b0, b1) = (m.a1_col(0), m.a1_col(1));
        let levels: Vec<_> = (0..5).map(|k| st.level(k)).collect();
        let r0 = (&levels[0] * &b0 + &levels[1] * &am) - &levels[0];
        assert!(r0.amax() < 1e-9);
        let r1 = (&levels[0] * &b1 + &levels[1] * &a0 + &levels[2] * &am) - &levels[1];
        assert!(r1.amax() < 1e-9);
        for k in 2..4 {
            let rk = (&levels[k - 1] * &ap + &levels[k] * &a0 + &levels[k + 1] * &am) - &levels[k];
            assert!(rk.amax() < 1e-9, "level {k} balance residual {}", rk.amax());
        }
    }

    #[test]
    fn transient_face_is_refused() {
        // Table-2 K=1 has a2^{1,2} > 0: the face-1 chain is not positive
        // recurrent and spr(R_star) = 1.
        let m = table2(1);
        let settings = Settings::default();
        match qbd_stationary(1, &m, &settings) {
            Err(KernelError::NotPositiveRecurrent { face: 1, spr }) => {
                assert!((spr - 1.0).abs() < 1e-6);
            }
            other => panic!("expected NotPositiveRecurrent, got {other:?}"),
        }
    }

    #[test]
    fn lemma_identities_hold_on_an_interior_grid() {
        let m = table1(1);
        let settings = Settings::default();
        let sum = spectral::extreme_points(&m, &settings).unwrap();
        for i in 1..10 {
            let z = sum.z1_min + (sum.z1_max - sum.z1_min) * i as f64 / 10.0;
            let k = solve_axis1(&m, z, &settings).unwrap();
            assert!(
                k.residuals.max() <= 1e-10,
                "z={z}: residuals {:?}",
                k.residuals
            );
        }
    }
}
