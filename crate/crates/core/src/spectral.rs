//! The spectral curve of a 2d-QBD model.
//!
//! For positive reals `z1, z2` let `C(z1, z2) = sum_{i,j} A_{i,j} z1^i z2^j`
//! and let `chi(z1, z2)` be its Perron–Frobenius eigenvalue. The sublevel set
//! `{(s1, s2) : chi(e^s1, e^s2) <= 1}` is a bounded convex region whose
//! geometry drives every tail-asymptotics quantity downstream: this module
//! locates its extreme points and, for a fixed coordinate, the two real
//! branch roots of `chi = 1` in the other coordinate.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::matrix;
use crate::model::{QbdModel, H};
use crate::solve1d;

/// Errors from spectral-curve computations.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("arguments to the spectral curve must be positive, got ({z1}, {z2})")]
    NonPositiveArgument { z1: f64, z2: f64 },
    #[error("arguments to the kernel determinant must be nonzero")]
    ZeroArgument,
    #[error(
        "bracket expansion failed after {doublings} doublings while searching {what}; \
         the model may be invalid or degenerate"
    )]
    BracketFailure {
        what: &'static str,
        doublings: usize,
    },
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
}

/// Extreme points of the sublevel-1 region of the spectral curve, in z-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Leftmost z1 on the curve.
    pub z1_min: f64,
    /// Rightmost z1 on the curve.
    pub z1_max: f64,
    /// Leftmost z2 on the curve.
    pub z2_min: f64,
    /// Rightmost z2 on the curve.
    pub z2_max: f64,
    /// `|chi - 1|` tolerance the extremes were located under.
    pub tol: f64,
}

/// Real solutions of `chi = 1` in one coordinate, the other being fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchRoots {
    /// Strictly inside the extreme interval: two distinct roots.
    TwoRoots { lower: f64, upper: f64 },
    /// At an extreme point (or closer than the tangency gap).
    Tangent { root: f64 },
    /// Outside the extreme interval.
    NoRoot,
}

impl BranchRoots {
    /// Lower root, when any.
    pub fn lower(&self) -> Option<f64> {
        match *self {
            BranchRoots::TwoRoots { lower, .. } => Some(lower),
            BranchRoots::Tangent { root } => Some(root),
            BranchRoots::NoRoot => None,
        }
    }

    /// Upper root, when any.
    pub fn upper(&self) -> Option<f64> {
        match *self {
            BranchRoots::TwoRoots { upper, .. } => Some(upper),
            BranchRoots::Tangent { root } => Some(root),
            BranchRoots::NoRoot => None,
        }
    }
}

/// `C(z1, z2) = sum_{i,j in H} A_{i,j} z1^i z2^j`.
pub fn c_matrix(model: &QbdModel, z1: f64, z2: f64) -> Result<DMatrix<f64>, SpectralError> {
    if !(z1 > 0.0) || !(z2 > 0.0) {
        return Err(SpectralError::NonPositiveArgument { z1, z2 });
    }
    let mut c = DMatrix::zeros(model.s0(), model.s0());
    for &i in &H {
        for &j in &H {
            c += model.a(i, j) * (z1.powi(i) * z2.powi(j));
        }
    }
    Ok(c)
}

/// `chi(z1, z2) = spr(C(z1, z2))`, the Perron root of the irreducible
/// nonnegative matrix `C`.
pub fn chi(model: &QbdModel, z1: f64, z2: f64) -> Result<f64, SpectralError> {
    let c = c_matrix(model, z1, z2)?;
    Ok(matrix::spectral_radius(&c)?)
}

/// `chi` by shifted power iteration with Collatz–Wielandt stopping; slower
/// than the dense route but independent of it, kept as a cross-check.
pub fn chi_power(
    model: &QbdModel,
    z1: f64,
    z2: f64,
    settings: &Settings,
) -> Result<f64, SpectralError> {
    let c = c_matrix(model, z1, z2)?;
    let (rho, _) = matrix::spectral_radius_power(&c, settings.eig_tol, settings.max_power_iter)?;
    Ok(rho)
}

/// `det(z w (C(z, w) - I))` for nonzero real arguments.
pub fn kernel_det(model: &QbdModel, z: f64, w: f64) -> Result<f64, SpectralError> {
    if z == 0.0 || w == 0.0 {
        return Err(SpectralError::ZeroArgument);
    }
    let s0 = model.s0();
    let mut l = DMatrix::<f64>::identity(s0, s0) * -1.0;
    for &i in &H {
        for &j in &H {
            l += model.a(i, j) * (z.powi(i) * w.powi(j));
        }
    }
    l *= z * w;
    Ok(l.determinant())
}

/// `det(z w (C(z, w) - I))` for nonzero complex arguments.
pub fn kernel_det_complex(
    model: &QbdModel,
    z: Complex<f64>,
    w: Complex<f64>,
) -> Result<Complex<f64>, SpectralError> {
    if z == Complex::new(0.0, 0.0) || w == Complex::new(0.0, 0.0) {
        return Err(SpectralError::ZeroArgument);
    }
    let s0 = model.s0();
    let mut l = DMatrix::<Complex<f64>>::identity(s0, s0) * Complex::new(-1.0, 0.0);
    for &i in &H {
        for &j in &H {
            let weight = z.powi(i) * w.powi(j);
            for r in 0..s0 {
                for c in 0..s0 {
                    l[(r, c)] += Complex::new(model.a(i, j)[(r, c)], 0.0) * weight;
                }
            }
        }
    }
    l *= z * w;
    Ok(l.determinant())
}

// ---------------------------------------------------------------------------
// Curve geometry in log coordinates
// ---------------------------------------------------------------------------

/// Which coordinate is held fixed while the curve is examined in the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fixed {
    Z1,
    Z2,
}

fn zs(fixed: Fixed, s_fixed: f64, s_free: f64) -> (f64, f64) {
    match fixed {
        Fixed::Z1 => (s_fixed.exp(), s_free.exp()),
        Fixed::Z2 => (s_free.exp(), s_fixed.exp()),
    }
}

fn log_chi(model: &QbdModel, fixed: Fixed, s_fixed: f64, s_free: f64) -> Result<f64, SpectralError> {
    let (z1, z2) = zs(fixed, s_fixed, s_free);
    Ok(chi(model, z1, z2)?.ln())
}

/// `log chi` together with its partial derivatives with respect to the fixed
/// and the free log coordinate, from the Perron eigenvector pair.
fn log_chi_grad(
    model: &QbdModel,
    fixed: Fixed,
    s_fixed: f64,
    s_free: f64,
) -> Result<(f64, f64, f64), SpectralError> {
    let (z1, z2) = zs(fixed, s_fixed, s_free);
    let c = c_matrix(model, z1, z2)?;
    let rho = matrix::spectral_radius(&c)?;
    let (u, v) = matrix::perron_pair(&c, rho)?;
    let uv = u.dot(&v);
    // dC/ds1 = z1 A_{1,*}(z2) - z1^{-1} A_{-1,*}(z2), and symmetrically in s2.
    let d_s1 = model.a_row_z(1, z2) * z1 - model.a_row_z(-1, z2) / z1;
    let d_s2 = model.a_col_z(1, z1) * z2 - model.a_col_z(-1, z1) / z2;
    let g1 = u.dot(&(&d_s1 * &v)) / (rho * uv);
    let g2 = u.dot(&(&d_s2 * &v)) / (rho * uv);
    let (g_fixed, g_free) = match fixed {
        Fixed::Z1 => (g1, g2),
        Fixed::Z2 => (g2, g1),
    };
    Ok((rho.ln(), g_fixed, g_free))
}

/// Minimum of `log chi` over the free log coordinate at a fixed value of the
/// other, with the envelope derivative along the fixed coordinate.
pub(crate) struct SectionMin {
    pub s_free: f64,
    pub value: f64,
}

/// Locates the section minimum by bisecting the (strictly increasing)
/// derivative of the convex section, then evaluates the minimum value.
pub(crate) fn section_min(
    model: &QbdModel,
    fixed: Fixed,
    s_fixed: f64,
    hint: f64,
    settings: &Settings,
) -> Result<SectionMin, SpectralError> {
    let slope = |s: f64| -> Result<f64, SpectralError> {
        Ok(log_chi_grad(model, fixed, s_fixed, s)?.2)
    };
    // Bracket the zero of the slope around the hint.
    let mut lo = hint;
    let mut g_lo = slope(lo)?;
    let mut step = 0.25;
    let mut count = 0;
    while g_lo > 0.0 {
        lo -= step;
        step *= 2.0;
        g_lo = slope(lo)?;
        count += 1;
        if count > settings.max_bracket_doublings {
            return Err(SpectralError::BracketFailure {
                what: "section minimum (left)",
                doublings: count,
            });
        }
    }
    let mut hi = lo.max(hint);
    let mut g_hi = slope(hi)?;
    step = 0.25;
    count = 0;
    while g_hi < 0.0 {
        hi += step;
        step *= 2.0;
        g_hi = slope(hi)?;
        count += 1;
        if count > settings.max_bracket_doublings {
            return Err(SpectralError::BracketFailure {
                what: "section minimum (right)",
                doublings: count,
            });
        }
    }
    let mut err = None;
    let root = solve1d::illinois(
        |s| match slope(s) {
            Ok(g) => g,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        g_lo,
        hi,
        g_hi,
        1e-13,
        1e-13,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (value, _, _) = log_chi_grad(model, fixed, s_fixed, root.x)?;
    Ok(SectionMin {
        s_free: root.x,
        value,
    })
}

/// Roots of `chi = 1` in the free coordinate at a fixed value of the other.
fn branch_roots_inner(
    model: &QbdModel,
    fixed: Fixed,
    z_fixed: f64,
    settings: &Settings,
) -> Result<BranchRoots, SpectralError> {
    if !(z_fixed > 0.0) {
        let (z1, z2) = zs(fixed, z_fixed, 1.0);
        return Err(SpectralError::NonPositiveArgument { z1, z2 });
    }
    let s_fixed = z_fixed.ln();
    let min = section_min(model, fixed, s_fixed, 0.0, settings)?;
    // Tangency in value space: the section minimum touches 1 from below.
    if min.value > 1e-12 {
        return Ok(BranchRoots::NoRoot);
    }
    if min.value.abs() <= 1e-12 {
        return Ok(BranchRoots::Tangent {
            root: min.s_free.exp(),
        });
    }
    let mut err = None;
    let mut h = |s: f64| match log_chi(model, fixed, s_fixed, s) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    };
    let one_side = |dir: f64, h: &mut dyn FnMut(f64) -> f64| -> Result<f64, SpectralError> {
        let mut inside = min.s_free;
        let mut h_inside = min.value;
        let mut step = 0.25;
        for _ in 0..settings.max_bracket_doublings {
            let probe = inside + dir * step;
            let h_probe = h(probe);
            if h_probe > 0.0 {
                let (a, fa, b, fb) = if dir > 0.0 {
                    (inside, h_inside, probe, h_probe)
                } else {
                    (probe, h_probe, inside, h_inside)
                };
                let root = solve1d::illinois(&mut *h, a, fa, b, fb, settings.bisect_rel, 0.0, 200);
                return Ok(root.x);
            }
            inside = probe;
            h_inside = h_probe;
            step *= 2.0;
        }
        Err(SpectralError::BracketFailure {
            what: "branch root",
            doublings: settings.max_bracket_doublings,
        })
    };
    let s_lower = one_side(-1.0, &mut h)?;
    let s_upper = one_side(1.0, &mut h)?;
    if let Some(e) = err {
        return Err(e);
    }
    let lower = s_lower.exp();
    let upper = s_upper.exp();
    if upper - lower < settings.tangent_gap {
        Ok(BranchRoots::Tangent {
            root: 0.5 * (lower + upper),
        })
    } else {
        Ok(BranchRoots::TwoRoots { lower, upper })
    }
}

/// Real solutions in `z2` of `chi(z1, z2) = 1` for a fixed `z1`.
pub fn branch_roots_2(
    model: &QbdModel,
    z1: f64,
    settings: &Settings,
) -> Result<BranchRoots, SpectralError> {
    branch_roots_inner(model, Fixed::Z1, z1, settings)
}

/// Real solutions in `z1` of `chi(z1, z2) = 1` for a fixed `z2`.
pub fn branch_roots_1(
    model: &QbdModel,
    z2: f64,
    settings: &Settings,
) -> Result<BranchRoots, SpectralError> {
    branch_roots_inner(model, Fixed::Z2, z2, settings)
}

/// One extreme of the curve along the fixed coordinate (`dir = +1` for the
/// upper extreme, `-1` for the lower): bisection on the section minimum,
/// polished by a two-dimensional Newton iteration on the tangency system
/// `(log chi = 0, d log chi / d s_free = 0)`.
fn extreme_one(
    model: &QbdModel,
    fixed: Fixed,
    dir: f64,
    settings: &Settings,
) -> Result<f64, SpectralError> {
    let mut hint = 0.0;
    // Expand until the section minimum exceeds 1.
    let mut inside = 0.0;
    let mut f_inside = section_min(model, fixed, inside, hint, settings)?;
    hint = f_inside.s_free;
    let mut step = 0.5;
    let mut outside = None;
    for _ in 0..settings.max_bracket_doublings {
        let probe = inside + dir * step;
        let f_probe = section_min(model, fixed, probe, hint, settings)?;
        hint = f_probe.s_free;
        if f_probe.value > 0.0 {
            outside = Some((probe, f_probe));
            break;
        }
        inside = probe;
        f_inside = f_probe;
        step *= 2.0;
    }
    let (outside, _f_outside) = outside.ok_or(SpectralError::BracketFailure {
        what: "curve extreme",
        doublings: settings.max_bracket_doublings,
    })?;

    // Illinois on the section-minimum value over the fixed coordinate.
    let mut err = None;
    let mut free_hint = f_inside.s_free;
    let mut f = |t: f64| match section_min(model, fixed, t, free_hint, settings) {
        Ok(m) => {
            free_hint = m.s_free;
            m.value
        }
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    };
    let (a, fa, b, fb) = if dir > 0.0 {
        (inside, f_inside.value, outside, f64::NAN)
    } else {
        (outside, f64::NAN, inside, f_inside.value)
    };
    let (a, fa) = if fa.is_nan() { (a, f(a)) } else { (a, fa) };
    let (b, fb) = if fb.is_nan() { (b, f(b)) } else { (b, fb) };
    let coarse = solve1d::illinois(&mut f, a, fa, b, fb, 1e-9, 0.0, 200);
    if let Some(e) = err {
        return Err(e);
    }

    // Newton polish of (log chi, d log chi/d s_free) = (0, 0).
    let mut t = coarse.x;
    let mut s = free_hint;
    let mut best = (t, coarse.f.abs());
    for _ in 0..12 {
        let (f1, d_fixed, f2) = log_chi_grad(model, fixed, t, s)?;
        if f1.abs() < best.1 {
            best = (t, f1.abs());
        }
        if f1.abs() <= 1e-14 && f2.abs() <= 1e-10 {
            return Ok(t);
        }
        let fd = 1e-6;
        let g_t = (log_chi_grad(model, fixed, t + fd, s)?.2
            - log_chi_grad(model, fixed, t - fd, s)?.2)
            / (2.0 * fd);
        let g_s = (log_chi_grad(model, fixed, t, s + fd)?.2
            - log_chi_grad(model, fixed, t, s - fd)?.2)
            / (2.0 * fd);
        // solve J [dt, ds]^T = [f1, f2]^T with J = [[d_fixed, f2], [g_t, g_s]]
        let det = d_fixed * g_s - f2 * g_t;
        if det.abs() < 1e-18 {
            break;
        }
        let dt = (f1 * g_s - f2 * f2) / det;
        let ds = (d_fixed * f2 - g_t * f1) / det;
        let norm = dt.abs().max(ds.abs());
        let scale = if norm > 0.05 { 0.05 / norm } else { 1.0 };
        t -= scale * dt;
        s -= scale * ds;
        if dt.abs() <= 1e-15 * t.abs().max(1.0) && ds.abs() <= 1e-13 {
            return Ok(t);
        }
    }
    Ok(best.0)
}

/// Extreme points of the curve in both coordinates.
///
/// Each reported extreme `z` satisfies `|min_s chi(z, e^s) - 1| <= tol`, the
/// bracket being expanded geometrically (the sublevel region is bounded, so
/// the expansion terminates or the model is degenerate).
pub fn extreme_points(model: &QbdModel, settings: &Settings) -> Result<SpectralSummary, SpectralError> {
    let s1_max = extreme_one(model, Fixed::Z1, 1.0, settings)?;
    let s1_min = extreme_one(model, Fixed::Z1, -1.0, settings)?;
    let s2_max = extreme_one(model, Fixed::Z2, 1.0, settings)?;
    let s2_min = extreme_one(model, Fixed::Z2, -1.0, settings)?;
    Ok(SpectralSummary {
        z1_min: s1_min.exp(),
        z1_max: s1_max.exp(),
        z2_min: s2_min.exp(),
        z2_max: s2_max.exp(),
        tol: settings.root_tol,
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

    #[test]
    fn c_matrix_at_unit_arguments_is_the_family_sum() {
        let m = table1(2);
        let c = c_matrix(&m, 1.0, 1.0).unwrap();
        assert!((c - m.a_sum()).amax() < 1e-15);
    }

    #[test]
    fn c_matrix_entry_matches_direct_arithmetic() {
        // (0,0) entry of C(2,1) = A_{0,0}[0,0] + 2 A_{1,0}[0,0] + A_{0,1}[0,0]
        // = (1 - 1.6/2.6) + 2 * 0.3/2.6 + 0.3/2.6 = 19/26.
        let m = table1(1);
        let c = c_matrix(&m, 2.0, 1.0).unwrap();
        assert!((c[(0, 0)] - 19.0 / 26.0).abs() < 1e-15);
    }

    #[test]
    fn c_matrix_rejects_nonpositive_arguments() {
        let m = table1(1);
        assert!(c_matrix(&m, 0.0, 1.0).is_err());
        assert!(c_matrix(&m, 1.0, -2.0).is_err());
    }

    #[test]
    fn chi_at_unit_arguments_is_one() {
        for k in [1, 2, 5] {
            let m = table1(k);
            assert!((chi(&m, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_is_symmetric_for_the_symmetric_model() {
        let m = table1(1);
        for (a, b) in [(1.3, 0.8), (0.5, 2.0), (1.9, 1.1)] {
            let x = chi(&m, a, b).unwrap();
            let y = chi(&m, b, a).unwrap();
            assert!((x - y).abs() < 1e-12, "chi({a},{b})={x} vs chi({b},{a})={y}");
        }
    }

    #[test]
    fn chi_power_matches_dense_eigensolve() {
        let m = table1(3);
        let settings = Settings::default();
        for (z1, z2) in [(1.0, 1.0), (1.4, 0.7), (0.9, 1.8)] {
            let dense = chi(&m, z1, z2).unwrap();
            let power = chi_power(&m, z1, z2, &settings).unwrap();
            assert!((dense - power).abs() < 1e-11 * dense.max(1.0));
        }
    }

    // Derivative-free minimization oracle, independent of the section_min
    // implementation path: coarse scan followed by ternary refinement.
    fn min_chi_over_s2_oracle(m: &QbdModel, s1: f64) -> f64 {
        let h = |s2: f64| chi(m, s1.exp(), s2.exp()).unwrap();
        let (mut lo, mut hi) = (-6.0, 6.0);
        let mut best = f64::INFINITY;
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            let f1 = h(m1);
            let f2 = h(m2);
            best = best.min(f1).min(f2);
            if f1 < f2 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best
    }

    #[test]
    fn chi_dominates_its_section_minimum() {
        let m = table1(1);
        let on_diag = chi(&m, 0.1f64.exp(), 0.1f64.exp()).unwrap();
        let minimum = min_chi_over_s2_oracle(&m, 0.1);
        assert!(on_diag >= minimum - 1e-12);
        let settings = Settings::default();
        let sm = section_min(&m, Fixed::Z1, 0.1, 0.0, &settings).unwrap();
        assert!((sm.value.exp() - minimum).abs() < 1e-9);
    }

    #[test]
    fn section_is_convex_in_the_free_log_coordinate() {
        let m = table1(2);
        let h = |s2: f64| chi(&m, 1.1, s2.exp()).unwrap();
        let step = 1e-3;
        for i in 0..40 {
            let s = -1.0 + i as f64 * 0.05;
            let second = (h(s + step) - 2.0 * h(s) + h(s - step)) / (step * step);
            assert!(second >= -1e-8, "second difference {second} at s2={s}");
        }
    }

    #[test]
    fn branch_roots_bracket_one_at_unit_argument() {
        let m = table1(1);
        let settings = Settings::default();
        match branch_roots_2(&m, 1.0, &settings).unwrap() {
            BranchRoots::TwoRoots { lower, upper } => {
                assert!(lower <= 1.0 + 1e-9 && upper >= 1.0 - 1e-9);
                for root in [lower, upper] {
                    assert!((chi(&m, 1.0, root).unwrap() - 1.0).abs() < 1e-10);
                }
            }
            other => panic!("expected two roots at z1=1, got {other:?}"),
        }
    }

    #[test]
    fn extremes_bracket_one_and_match_for_the_symmetric_model() {
        let m = table1(1);
        let settings = Settings::default();
        let sum = extreme_points(&m, &settings).unwrap();
        assert!(sum.z1_min <= 1.0 && 1.0 <= sum.z1_max);
        assert!(sum.z2_min <= 1.0 && 1.0 <= sum.z2_max);
        assert!((sum.z1_max - sum.z2_max).abs() < 1e-9);
        assert!((sum.z1_min - sum.z2_min).abs() < 1e-9);
    }

    #[test]
    fn branch_roots_are_tangent_at_extremes_and_absent_outside() {
        let m = table1(2);
        let settings = Settings::default();
        let sum = extreme_points(&m, &settings).unwrap();
        match branch_roots_2(&m, sum.z1_max, &settings).unwrap() {
            BranchRoots::Tangent { root } => assert!(root > 0.0),
            other => panic!("expected tangency at z1_max, got {other:?}"),
        }
        match branch_roots_2(&m, sum.z1_max * 1.05, &settings).unwrap() {
            BranchRoots::NoRoot => {}
            other => panic!("expected no roots outside, got {other:?}"),
        }
        match branch_roots_2(&m, sum.z1_min * 0.95, &settings).unwrap() {
            BranchRoots::NoRoot => {}
            other => panic!("expected no roots outside, got {other:?}"),
        }
    }

    #[test]
    fn kernel_det_vanishes_on_the_curve() {
        let m = table1(2);
        let settings = Settings::default();
        assert!(kernel_det(&m, 1.0, 1.0).unwrap().abs() < 1e-12);
        let roots = branch_roots_2(&m, 1.2, &settings).unwrap();
        if let BranchRoots::TwoRoots { lower, upper } = roots {
            for w in [lower, upper] {
                let phi = kernel_det(&m, 1.2, w).unwrap();
                assert!(phi.abs() < 1e-8, "phi(1.2, {w}) = {phi}");
            }
        } else {
            panic!("z1 = 1.2 should be interior for K=2");
        }
    }

    #[test]
    fn kernel_det_changes_sign_across_the_upper_branch() {
        let m = table1(2);
        let settings = Settings::default();
        if let BranchRoots::TwoRoots { upper, .. } = branch_roots_2(&m, 1.2, &settings).unwrap() {
            let before = kernel_det(&m, 1.2, upper - 1e-3).unwrap();
            let after = kernel_det(&m, 1.2, upper + 1e-3).unwrap();
            assert!(
                before * after < 0.0,
                "no sign change across upper branch: {before} vs {after}"
            );
        } else {
            panic!("expected interior point");
        }
    }

    #[test]
    fn complex_kernel_det_agrees_with_real_on_the_real_axis() {
        let m = table1(1);
        let z = Complex::new(1.3, 0.0);
        let w = Complex::new(0.8, 0.0);
        let c = kernel_det_complex(&m, z, w).unwrap();
        let r = kernel_det(&m, 1.3, 0.8).unwrap();
        assert!((c.re - r).abs() < 1e-12 && c.im.abs() < 1e-12);
    }
}
