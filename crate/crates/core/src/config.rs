//! Tolerances and iteration caps shared across the analysis pipeline.

use serde::{Deserialize, Serialize};

/// All numeric tolerances and iteration budgets, with the defaults every
/// report is computed under. Serialized into analysis bundles so results
/// always carry the tolerance set that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Relative tolerance of spectral-radius computations.
    pub eig_tol: f64,
    /// Admitted deviation `|chi - 1|` at reported branch roots.
    pub root_tol: f64,
    /// Bisection stops once the bracket is narrower than
    /// `bisect_rel * max(1, |z|)`.
    pub bisect_rel: f64,
    /// Branch-root pairs closer than this (in z-space) are reported tangent.
    pub tangent_gap: f64,
    /// Convergence tolerance of the matrix-quadratic kernel solvers.
    pub kernel_tol: f64,
    /// Kernel tolerance documented as achievable at the interval endpoints,
    /// where convergence degrades.
    pub kernel_tol_extreme: f64,
    /// Width within which Theorem-style branch comparisons are treated as
    /// equalities.
    pub eq_tol: f64,
    /// Equality band for psi-sign tests at the extreme points. The shifted
    /// kernel solver stays accurate at tangency, so this matches `eq_tol` by
    /// default; widen it when kernels are solved by the plain fixed-point
    /// iteration, whose endpoint accuracy is only ~1e-8.
    pub eq_band_extreme: f64,
    /// Relative-change tolerance of the truncated-chain solvers.
    pub oracle_tol: f64,
    /// Power-iteration cap for spectral radii.
    pub max_power_iter: usize,
    /// Cap of the natural (fixed-point) kernel iteration.
    pub max_natural_iter: usize,
    /// Raised natural-iteration cap at interval endpoints.
    pub max_natural_iter_extreme: usize,
    /// Cap of the logarithmic-reduction kernel iteration.
    pub max_lr_iter: usize,
    /// Cap on geometric bracket expansions in curve searches.
    pub max_bracket_doublings: usize,
    /// Sweep cap of the truncated-chain solvers.
    pub max_oracle_sweeps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eig_tol: 1e-13,
            root_tol: 1e-10,
            bisect_rel: 1e-12,
            tangent_gap: 1e-6,
            kernel_tol: 1e-12,
            kernel_tol_extreme: 1e-8,
            eq_tol: 1e-8,
            eq_band_extreme: 1e-8,
            oracle_tol: 1e-10,
            max_power_iter: 100_000,
            max_natural_iter: 1_000_000,
            max_natural_iter_extreme: 10_000_000,
            max_lr_iter: 512,
            max_bracket_doublings: 200,
            max_oracle_sweeps: 100_000,
        }
    }
}

impl Settings {
    /// Applies an iteration-cap override (e.g. from `QBD_MAX_ITER`) to every
    /// iterative solver budget.
    pub fn with_max_iter_override(mut self, cap: usize) -> Self {
        self.max_power_iter = cap;
        self.max_natural_iter = cap;
        self.max_natural_iter_extreme = cap;
        self.max_lr_iter = cap;
        self.max_oracle_sweeps = cap;
        self
    }
}
