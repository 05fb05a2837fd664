//! Independent verification of the analytic pipeline: solve the stationary
//! distribution of the 2d-QBD exactly on a finite lattice window and estimate
//! the directional decay rates empirically from probability ratios.
//!
//! The chain is truncated at level `N` in both coordinates; mass of moves
//! that would leave the window is added to the diagonal, which keeps every
//! row stochastic and biases boundary entries by `O(r^-(N-k))`. The default
//! solver is Gauss–Seidel swept outward from the origin; power iteration is
//! available as a cross-check method.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::kernels::Axis;
use crate::model::QbdModel;

/// Errors from the truncated-chain oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("truncation level must be at least 5, got {0}")]
    TruncationTooSmall(usize),
    #[error("window too small: need k_lo < k_hi < N - 5, got ({k_lo}, {k_hi}) at N = {n}")]
    WindowTooSmall { k_lo: usize, k_hi: usize, n: usize },
    #[error("all ratios in the window were dropped by the underflow guard")]
    AllRatiosUnderflowed,
    #[error(
        "stationary solve did not converge within {sweeps} sweeps (balance residual {residual:.3e})"
    )]
    NonConvergence { sweeps: usize, residual: f64 },
}

/// Solution method of the truncated stationary solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    PowerIteration,
    GaussSeidel,
}

/// Stationary probabilities of the chain truncated to `[0, N]^2`.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    /// Truncation level (inclusive).
    pub n: usize,
    /// Number of phases.
    pub s0: usize,
    /// Probabilities indexed by `(k * (N+1) + l) * s0 + j`.
    pub nu: Vec<f64>,
    /// Method that produced the solution.
    pub method: SolveMethod,
    /// Absolute balance residual `max_t |(nu P)_t - nu_t|`.
    pub residual: f64,
    /// Sweeps or iterations used.
    pub iterations: usize,
}

impl TruncatedSolution {
    /// Probability of state `(k, l, j)`.
    pub fn prob(&self, k: usize, l: usize, j: usize) -> f64 {
        self.nu[(k * (self.n + 1) + l) * self.s0 + j]
    }

    /// Marginal probability of lattice point `(k, l)`.
    pub fn lattice_prob(&self, k: usize, l: usize) -> f64 {
        (0..self.s0).map(|j| self.prob(k, l, j)).sum()
    }

    /// Mean of the coordinate along `axis`.
    pub fn mean_level(&self, axis: Axis) -> f64 {
        let mut mean = 0.0;
        for k in 0..=self.n {
            for l in 0..=self.n {
                let p = self.lattice_prob(k, l);
                mean += match axis {
                    Axis::One => k as f64 * p,
                    Axis::Two => l as f64 * p,
                };
            }
        }
        mean
    }

    /// CSV dump with columns `k,l,j,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l,j,probability\n");
        for k in 0..=self.n {
            for l in 0..=self.n {
                for j in 0..self.s0 {
                    out.push_str(&format!("{k},{l},{j},{:.17e}\n", self.prob(k, l, j)));
                }
            }
        }
        out
    }
}

/// Sparse truncated chain in incoming-edge (transposed CSR) layout.
struct TruncatedChain {
    n_states: usize,
    in_ptr: Vec<usize>,
    in_src: Vec<u32>,
    in_p: Vec<f64>,
    diag: Vec<f64>,
    /// State indices sorted by ascending lattice level sum.
    sweep_order: Vec<u32>,
}

fn build_chain(model: &QbdModel, n: usize) -> TruncatedChain {
    let s0 = model.s0();
    let side = n + 1;
    let n_states = side * side * s0;
    let idx = |k: usize, l: usize, j: usize| (k * side + l) * s0 + j;

    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    let mut diag = vec![0.0f64; n_states];
    for k in 0..side {
        for l in 0..side {
            let blocks: Vec<((i32, i32), &nalgebra::DMatrix<f64>)> = match (k > 0, l > 0) {
                (true, true) => crate::model::H
                    .iter()
                    .flat_map(|&i| crate::model::H.iter().map(move |&j| ((i, j), model.a(i, j))))
                    .collect(),
                (true, false) => crate::model::H
                    .iter()
                    .flat_map(|&i| {
                        crate::model::H_PLUS
                            .iter()
                            .map(move |&j| ((i, j), model.a1(i, j as usize)))
                    })
                    .collect(),
                (false, true) => crate::model::H_PLUS
                    .iter()
                    .flat_map(|&i| {
                        crate::model::H
                            .iter()
                            .map(move |&j| ((i, j), model.a2(i as usize, j)))
                    })
                    .collect(),
                (false, false) => crate::model::H_PLUS
                    .iter()
                    .flat_map(|&i| {
                        crate::model::H_PLUS
                            .iter()
                            .map(move |&j| ((i, j), model.a0(i as usize, j as usize)))
                    })
                    .collect(),
            };
            for ((di, dj), block) in blocks {
                let kk = k as i32 + di;
                let ll = l as i32 + dj;
                let inside = kk >= 0 && ll >= 0 && kk < side as i32 && ll < side as i32;
                for j in 0..s0 {
                    let src = idx(k, l, j);
                    for j2 in 0..s0 {
                        let p = block[(j, j2)];
                        if p <= 0.0 {
                            continue;
                        }
                        if inside {
                            let dst = idx(kk as usize, ll as usize, j2);
                            if dst == src {
                                diag[src] += p;
                            } else {
                                triplets.push((src as u32, dst as u32, p));
                            }
                        } else {
                            // Lost mass reflects into a self-transition.
                            diag[src] += p;
                        }
                    }
                }
            }
        }
    }

    // Counting sort of the triplets by destination.
    let mut in_ptr = vec![0usize; n_states + 1];
    for &(_, dst, _) in &triplets {
        in_ptr[dst as usize + 1] += 1;
    }
    for t in 0..n_states {
        in_ptr[t + 1] += in_ptr[t];
    }
    let mut cursor = in_ptr.clone();
    let mut in_src = vec![0u32; triplets.len()];
    let mut in_p = vec![0.0f64; triplets.len()];
    for (src, dst, p) in triplets {
        let slot = cursor[dst as usize];
        in_src[slot] = src;
        in_p[slot] = p;
        cursor[dst as usize] += 1;
    }

    let mut sweep_order: Vec<u32> = (0..n_states as u32).collect();
    sweep_order.sort_by_key(|&t| {
        let cell = t as usize / s0;
        let (k, l) = (cell / side, cell % side);
        k + l
    });

    TruncatedChain {
        n_states,
        in_ptr,
        in_src,
        in_p,
        diag,
        sweep_order,
    }
}

impl TruncatedChain {
    /// One application of the transition matrix from the right:
    /// `out[t] = sum_s pi[s] P[s, t]`.
    fn apply(&self, pi: &[f64], out: &mut [f64]) {
        for t in 0..self.n_states {
            let mut acc = pi[t] * self.diag[t];
            for e in self.in_ptr[t]..self.in_ptr[t + 1] {
                acc += pi[self.in_src[e] as usize] * self.in_p[e];
            }
            out[t] = acc;
        }
    }

    fn residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; self.n_states];
        self.apply(pi, &mut out);
        pi.iter()
            .zip(out.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Stationary distribution of the truncated chain.
pub fn truncated_stationary(
    model: &QbdModel,
    n: usize,
    method: SolveMethod,
    settings: &Settings,
) -> Result<TruncatedSolution, OracleError> {
    if n < 5 {
        return Err(OracleError::TruncationTooSmall(n));
    }
    let chain = build_chain(model, n);
    let n_states = chain.n_states;
    let mut pi = vec![1.0 / n_states as f64; n_states];
    let tol = settings.oracle_tol;
    let cap = settings.max_oracle_sweeps;
    let mut iterations = 0;
    match method {
        SolveMethod::GaussSeidel => {
            for sweep in 1..=cap {
                iterations = sweep;
                let mut max_rel: f64 = 0.0;
                for &t in &chain.sweep_order {
                    let t = t as usize;
                    let mut acc = 0.0;
                    for e in chain.in_ptr[t]..chain.in_ptr[t + 1] {
                        acc += pi[chain.in_src[e] as usize] * chain.in_p[e];
                    }
                    let denom = (1.0 - chain.diag[t]).max(1e-15);
                    let new = acc / denom;
                    let rel = (new - pi[t]).abs() / pi[t].max(1e-300);
                    if rel > max_rel {
                        max_rel = rel;
                    }
                    pi[t] = new;
                }
                let total: f64 = pi.iter().sum();
                for v in pi.iter_mut() {
                    *v /= total;
                }
                if max_rel < tol {
                    break;
                }
            }
        }
        SolveMethod::PowerIteration => {
            let mut next = vec![0.0; n_states];
            for sweep in 1..=cap {
                iterations = sweep;
                chain.apply(&pi, &mut next);
                let total: f64 = next.iter().sum();
                let mut max_rel: f64 = 0.0;
                for t in 0..n_states {
                    let new = next[t] / total;
                    let rel = (new - pi[t]).abs() / pi[t].max(1e-300);
                    if rel > max_rel {
                        max_rel = rel;
                    }
                    pi[t] = new;
                }
                if max_rel < tol {
                    break;
                }
            }
        }
    }
    let residual = chain.residual(&pi);
    if residual > 1e-10 {
        return Err(OracleError::NonConvergence {
            sweeps: iterations,
            residual,
        });
    }
    Ok(TruncatedSolution {
        n,
        s0: model.s0(),
        nu: pi,
        method,
        residual,
        iterations,
    })
}

/// Decay-ratio sequence along one axis with a point estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// `(k, nu_{k+1} / nu_k)` pairs surviving the underflow guard.
    pub ratios: Vec<(usize, f64)>,
    /// Median ratio over the window; approximates `1/r` on the axis.
    pub estimate: f64,
    /// Standard deviation of the kept ratios.
    pub stddev: f64,
}

/// Boundary probability ratios `nu_{k+1,0}/nu_{k,0}` (axis 1; axis 2
/// symmetric) over the window `k in [k_lo, k_hi)`, with the median as point
/// estimate. Ratios whose denominator falls below 1e-250 are dropped.
pub fn empirical_decay(
    sol: &TruncatedSolution,
    axis: Axis,
    window: (usize, usize),
) -> Result<DecayEstimate, OracleError> {
    let (k_lo, k_hi) = window;
    if k_lo >= k_hi || k_hi + 5 >= sol.n {
        return Err(OracleError::WindowTooSmall {
            k_lo,
            k_hi,
            n: sol.n,
        });
    }
    let mass = |k: usize| match axis {
        Axis::One => sol.lattice_prob(k, 0),
        Axis::Two => sol.lattice_prob(0, k),
    };
    let mut ratios = Vec::new();
    for k in k_lo..k_hi {
        let den = mass(k);
        if den < 1e-250 {
            continue;
        }
        ratios.push((k, mass(k + 1) / den));
    }
    if ratios.is_empty() {
        return Err(OracleError::AllRatiosUnderflowed);
    }
    let mut values: Vec<f64> = ratios.iter().map(|&(_, r)| r).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    let estimate = if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    Ok(DecayEstimate {
        ratios,
        estimate,
        stddev: var.sqrt(),
    })
}

/// Default estimation window `(0.4 N, 0.8 N)`: away from both origin effects
/// and truncation bias.
pub fn default_window(n: usize) -> (usize, usize) {
    ((2 * n) / 5, (4 * n) / 5)
}
