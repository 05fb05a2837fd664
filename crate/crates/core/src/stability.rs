//! Induced-chain stationary vectors, mean drift vectors and the stability
//! classification.
//!
//! The interior drifts come from the stationary phase distribution of
//! `A_{*,*}`; the face drifts additionally need the stationary distribution
//! of the one-dimensional QBD obtained by removing the other boundary. Signs
//! decide the verdict: with both interior drifts negative, positive
//! recurrence requires both face drifts negative; with mixed signs, only the
//! indicated face drift. Boundary cases (a drift exactly zero) and the
//! both-nonnegative regime fall outside the classification and are reported
//! as such rather than guessed.

use nalgebra::{DVector, RowDVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::kernels::{self, KernelError};
use crate::matrix;
use crate::model::QbdModel;

/// Stability classification of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    PositiveRecurrent,
    Transient,
    /// The drift signs fall outside the sufficient conditions (a zero drift,
    /// or both interior drifts nonnegative); no verdict is implied.
    OutsideAssumption,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::PositiveRecurrent => write!(f, "positive-recurrent"),
            Verdict::Transient => write!(f, "transient"),
            Verdict::OutsideAssumption => write!(f, "outside-assumption"),
        }
    }
}

/// Errors from the stability computations.
#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("A_{{*,*}} is reducible; the stationary phase distribution is not unique")]
    Reducible,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
}

/// Mean drift vectors and the resulting verdict.
#[derive(Debug, Clone)]
pub struct DriftReport {
    /// Stationary distribution of `A_{*,*}`.
    pub pi_star: RowDVector<f64>,
    /// Interior mean drift `(a1, a2)`.
    pub a12: (f64, f64),
    /// Face-1 drift along x1; defined iff `a12.1 < 0`.
    pub a1_1: Option<f64>,
    /// Face-2 drift along x2; defined iff `a12.0 < 0`.
    pub a2_2: Option<f64>,
    /// Stability classification.
    pub verdict: Verdict,
}

/// Stationary distribution of the irreducible stochastic matrix `A_{*,*}`.
pub fn pi_star(model: &QbdModel) -> Result<RowDVector<f64>, StabilityError> {
    let a = model.a_sum();
    if !matrix::strongly_connected(&matrix::positive_adjacency(&a)) {
        return Err(StabilityError::Reducible);
    }
    matrix::stationary_row(&a).map_err(|_| StabilityError::Reducible)
}

/// Interior mean drifts `a1 = pi (-A_{-1,*} + A_{1,*}) 1`,
/// `a2 = pi (-A_{*,-1} + A_{*,1}) 1`.
pub fn interior_drifts(model: &QbdModel, pi: &RowDVector<f64>) -> (f64, f64) {
    let ones = DVector::from_element(model.s0(), 1.0);
    let a1 = (pi * (model.a_row(1) - model.a_row(-1)) * &ones)[0];
    let a2 = (pi * (model.a_col(1) - model.a_col(-1)) * &ones)[0];
    (a1, a2)
}

fn face1_drift(model: &QbdModel, settings: &Settings) -> Result<f64, KernelError> {
    let st = kernels::qbd_stationary(1, model, settings)?;
    let s0 = model.s0();
    let ones = DVector::from_element(s0, 1.0);
    let boundary = model.a1(1, 0) + model.a1(1, 1) - model.a1(-1, 0) - model.a1(-1, 1);
    let repeating = model.a_row(1) - model.a_row(-1);
    let eye = nalgebra::DMatrix::<f64>::identity(s0, s0);
    let inv = (&eye - &st.r_star)
        .lu()
        .solve(&eye)
        .ok_or(KernelError::Singular {
            context: "inverting I - R_star for the face drift",
        })?;
    Ok((&st.pi0 * boundary * &ones)[0] + (&st.pi1 * inv * repeating * &ones)[0])
}

fn face2_drift(model: &QbdModel, settings: &Settings) -> Result<f64, KernelError> {
    let st = kernels::qbd_stationary(2, model, settings)?;
    let s0 = model.s0();
    let ones = DVector::from_element(s0, 1.0);
    let boundary = model.a2(0, 1) + model.a2(1, 1) - model.a2(0, -1) - model.a2(1, -1);
    let repeating = model.a_col(1) - model.a_col(-1);
    let eye = nalgebra::DMatrix::<f64>::identity(s0, s0);
    let inv = (&eye - &st.r_star)
        .lu()
        .solve(&eye)
        .ok_or(KernelError::Singular {
            context: "inverting I - R_star for the face drift",
        })?;
    Ok((&st.pi0 * boundary * &ones)[0] + (&st.pi1 * inv * repeating * &ones)[0])
}

/// Computes the drift report: interior drifts, the face drifts that are
/// defined, and the verdict.
pub fn drifts(model: &QbdModel, settings: &Settings) -> Result<DriftReport, StabilityError> {
    let pi = pi_star(model)?;
    let (a1, a2) = interior_drifts(model, &pi);
    let a1_1 = if a2 < 0.0 {
        Some(face1_drift(model, settings)?)
    } else {
        None
    };
    let a2_2 = if a1 < 0.0 {
        Some(face2_drift(model, settings)?)
    } else {
        None
    };
    let verdict = match (a1 < 0.0, a1 > 0.0, a2 < 0.0, a2 > 0.0) {
        (true, _, true, _) => {
            let (f1, f2) = (a1_1.unwrap(), a2_2.unwrap());
            if f1 < 0.0 && f2 < 0.0 {
                Verdict::PositiveRecurrent
            } else if f1 > 0.0 || f2 > 0.0 {
                Verdict::Transient
            } else {
                Verdict::OutsideAssumption
            }
        }
        (_, true, true, _) => match a1_1.unwrap() {
            f1 if f1 < 0.0 => Verdict::PositiveRecurrent,
            f1 if f1 > 0.0 => Verdict::Transient,
            _ => Verdict::OutsideAssumption,
        },
        (true, _, _, true) => match a2_2.unwrap() {
            f2 if f2 < 0.0 => Verdict::PositiveRecurrent,
            f2 if f2 > 0.0 => Verdict::Transient,
            _ => Verdict::OutsideAssumption,
        },
        _ => Verdict::OutsideAssumption,
    };
    Ok(DriftReport {
        pi_star: pi,
        a12: (a1, a2),
        a1_1,
        a2_2,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_limited_service, LimitedServiceParams};

    fn limited(k: usize, l1: f64, l2: f64, m1: f64, m2: f64) -> QbdModel {
        build_limited_service(&LimitedServiceParams {
            k,
            lambda1: l1,
            lambda2: l2,
            mu1: m1,
            mu2: m2,
        })
        .unwrap()
    }

    #[test]
    fn pi_star_balances_to_machine_precision() {
        let m = limited(1, 0.3, 0.3, 1.0, 1.0);
        let pi = pi_star(&m).unwrap();
        assert!(((&pi * m.a_sum()) - &pi).amax() <= 1e-12);
        assert!((pi.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn doubly_stochastic_phase_chain_has_uniform_stationary_vector() {
        // The symmetric K=1 model makes A_{*,*} doubly stochastic.
        let m = limited(1, 0.3, 0.3, 1.0, 1.0);
        let pi = pi_star(&m).unwrap();
        for v in pi.iter() {
            assert!((v - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn pi_star_is_permutation_equivariant() {
        let m = limited(2, 0.3, 0.3, 1.0, 1.0);
        let perm = [2usize, 0, 1];
        let pm = m.permute_phases(&perm).unwrap();
        let pi = pi_star(&m).unwrap();
        let pi_p = pi_star(&pm).unwrap();
        for r in 0..3 {
            assert!((pi_p[r] - pi[perm[r]]).abs() < 1e-13);
        }
    }

    #[test]
    fn interior_drifts_match_the_closed_form() {
        // For the (1,K) model: pi_0 = mu2/(mu2 + K mu1),
        // a1 = (lambda1 - pi_0 mu1)/nu, a2 = (lambda2 - (1-pi_0) mu2)/nu.
        for (k, l1, l2, m1, m2) in [(1, 0.3, 0.3, 1.0, 1.0), (3, 0.24, 0.7, 1.2, 1.0)] {
            let model = limited(k, l1, l2, m1, m2);
            let pi = pi_star(&model).unwrap();
            let (a1, a2) = interior_drifts(&model, &pi);
            let nu = l1 + l2 + m1 + m2;
            let pi0 = m2 / (m2 + k as f64 * m1);
            assert!((a1 - (l1 - pi0 * m1) / nu).abs() < 1e-12);
            assert!((a2 - (l2 - (1.0 - pi0) * m2) / nu).abs() < 1e-12);
        }
    }

    #[test]
    fn table_drift_values_are_reproduced() {
        let settings = Settings::default();
        let cases = [
            (limited(1, 0.3, 0.3, 1.0, 1.0), -0.0769, -0.0769),
            (limited(3, 0.3, 0.3, 1.0, 1.0), 0.0192, -0.173),
            (limited(1, 0.24, 0.7, 1.2, 1.0), -0.0973, 0.0492),
        ];
        for (m, want1, want2) in cases {
            let report = drifts(&m, &settings).unwrap();
            assert!((report.a12.0 - want1).abs() < 5e-4, "{:?}", report.a12);
            assert!((report.a12.1 - want2).abs() < 5e-4, "{:?}", report.a12);
            assert_eq!(report.verdict, Verdict::PositiveRecurrent);
        }
    }

    #[test]
    fn face_drift_definitions_follow_the_interior_signs() {
        let settings = Settings::default();
        // a2 < 0 and a1 > 0: only the face-1 drift is defined.
        let r = drifts(&limited(3, 0.3, 0.3, 1.0, 1.0), &settings).unwrap();
        assert!(r.a1_1.is_some() && r.a2_2.is_none());
        // a1 < 0 and a2 > 0: only the face-2 drift is defined.
        let r = drifts(&limited(1, 0.24, 0.7, 1.2, 1.0), &settings).unwrap();
        assert!(r.a1_1.is_none() && r.a2_2.is_some());
    }

    #[test]
    fn overloaded_models_are_not_positive_recurrent() {
        let settings = Settings::default();
        let r = drifts(&limited(1, 2.0, 2.0, 1.0, 1.0), &settings).unwrap();
        assert_eq!(r.verdict, Verdict::OutsideAssumption);
        let r = drifts(&limited(1, 2.0, 0.1, 1.0, 1.0), &settings).unwrap();
        assert_eq!(r.verdict, Verdict::Transient, "{r:?}");
    }

    #[test]
    fn bounded_increment_invariant_holds() {
        for (k, l1, l2, m1, m2) in [(1, 0.3, 0.3, 1.0, 1.0), (5, 3.0, 0.2, 0.5, 2.0)] {
            let m = limited(k, l1, l2, m1, m2);
            let pi = pi_star(&m).unwrap();
            let (a1, a2) = interior_drifts(&m, &pi);
            assert!((-1.0..=1.0).contains(&a1));
            assert!((-1.0..=1.0).contains(&a2));
        }
    }
}
