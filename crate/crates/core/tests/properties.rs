//! Property-based invariants on randomly generated irreducible models and on
//! the (1,K)-limited-service generator across its parameter space.

use proptest::prelude::*;

use qbd_core::kernels;
use qbd_core::matrix;
use qbd_core::model::{self, QbdModel};
use qbd_core::spectral::{self, BranchRoots};
use qbd_core::stability;
use qbd_core::{build_limited_service, load_model, save_model, validate, LimitedServiceParams, Settings};

/// Strictly positive blocks normalized so that each family sum is exactly
/// row stochastic; positivity makes every irreducibility and aperiodicity
/// assumption hold by construction.
fn random_model(s0: usize, raw: &[f64]) -> QbdModel {
    let block = |offset: usize| {
        nalgebra::DMatrix::from_fn(s0, s0, |r, c| 0.01 + raw[offset + r * s0 + c])
    };
    let sq = s0 * s0;
    let mut families: Vec<Vec<nalgebra::DMatrix<f64>>> = Vec::new();
    let mut offset = 0;
    for count in [9usize, 6, 6, 4] {
        let mut blocks: Vec<nalgebra::DMatrix<f64>> =
            (0..count).map(|b| block(offset + b * sq)).collect();
        offset += count * sq;
        for r in 0..s0 {
            let total: f64 = blocks.iter().map(|b| b.row(r).iter().sum::<f64>()).sum();
            for b in blocks.iter_mut() {
                for c in 0..s0 {
                    b[(r, c)] /= total;
                }
            }
        }
        families.push(blocks);
    }
    let origin = families.pop().unwrap();
    let face2 = families.pop().unwrap();
    let face1 = families.pop().unwrap();
    let interior = families.pop().unwrap();
    QbdModel::from_blocks(s0, interior, face1, face2, origin).unwrap()
}

fn model_strategy() -> impl Strategy<Value = QbdModel> {
    (2usize..=3)
        .prop_flat_map(|s0| {
            let need = 25 * s0 * s0;
            (Just(s0), proptest::collection::vec(0.0f64..1.0, need))
        })
        .prop_map(|(s0, raw)| random_model(s0, &raw))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_models_validate_clean_and_chi_is_one_at_unity(m in model_strategy()) {
        prop_assert!(validate(&m).is_clean());
        let chi = spectral::chi(&m, 1.0, 1.0).unwrap();
        prop_assert!((chi - 1.0).abs() <= 1e-12, "chi(1,1) = {chi}");
    }

    #[test]
    fn serialization_round_trips_exactly(m in model_strategy()) {
        let text = save_model(&m);
        let back = load_model(&text).unwrap();
        prop_assert_eq!(m, back);
    }

    #[test]
    fn branch_roots_at_unity_bracket_one(m in model_strategy()) {
        let settings = Settings::default();
        match spectral::branch_roots_2(&m, 1.0, &settings).unwrap() {
            BranchRoots::TwoRoots { lower, upper } => {
                prop_assert!(lower <= 1.0 + 1e-9 && upper >= 1.0 - 1e-9);
                for z in [lower, upper] {
                    let on_curve = spectral::chi(&m, 1.0, z).unwrap();
                    prop_assert!((on_curve - 1.0).abs() <= 1e-9);
                }
            }
            BranchRoots::Tangent { root } => {
                // zero x2-drift boundary case: the curve touches at z2 = 1
                prop_assert!((root - 1.0).abs() <= 1e-5);
            }
            BranchRoots::NoRoot => prop_assert!(false, "chi(1,1) = 1 guarantees roots"),
        }
    }

    #[test]
    fn kernels_at_unity_satisfy_their_identities(m in model_strategy()) {
        let settings = Settings::default();
        let kern = kernels::solve_axis1(&m, 1.0, &settings).unwrap();
        prop_assert!(kern.residuals.max() <= 1e-9, "residuals {:?}", kern.residuals);
        prop_assert!(kern.g.iter().all(|&x| x >= -1e-12));
        prop_assert!(kern.r.iter().all(|&x| x >= -1e-12));
        let fact = kernels::factorization_residual(&m, &kern, 1.7).unwrap();
        prop_assert!(fact <= 1e-9, "factorization residual {fact}");
        let spr_g = matrix::spectral_radius(&kern.g).unwrap();
        prop_assert!(spr_g <= 1.0 + 1e-9);
        let roots = spectral::branch_roots_2(&m, 1.0, &settings).unwrap();
        let lower = roots.lower().unwrap();
        prop_assert!((spr_g - lower).abs() <= 1e-7, "spr(G) {spr_g} vs {lower}");

        // G is stochastic exactly when the face-1 chain is positive
        // recurrent, i.e. when the interior x2-drift is negative.
        let pi = stability::pi_star(&m).unwrap();
        let (_, a2) = stability::interior_drifts(&m, &pi);
        if a2 < -1e-2 {
            for r in 0..m.s0() {
                let row_sum: f64 = kern.g.row(r).iter().sum();
                prop_assert!((row_sum - 1.0).abs() <= 1e-8, "row {r} sums to {row_sum}");
            }
        }
    }

    #[test]
    fn limited_service_models_validate_clean(
        k in 1usize..=50,
        l1 in 1e-3f64..10.0,
        l2 in 1e-3f64..10.0,
        m1 in 1e-3f64..10.0,
        m2 in 1e-3f64..10.0,
    ) {
        let model = build_limited_service(&LimitedServiceParams {
            k,
            lambda1: l1,
            lambda2: l2,
            mu1: m1,
            mu2: m2,
        })
        .unwrap();
        let report = validate(&model);
        prop_assert!(report.is_clean(), "{:?}", report.messages());
    }

    #[test]
    fn chi_sections_are_convex_in_the_free_log_coordinate(
        m in model_strategy(),
        s1 in -0.5f64..0.5,
        s2 in -0.5f64..0.5,
    ) {
        let step = 1e-3;
        let h = |s: f64| spectral::chi(&m, s1.exp(), s.exp()).unwrap();
        let second = (h(s2 + step) - 2.0 * h(s2) + h(s2 - step)) / (step * step);
        prop_assert!(second >= -1e-8, "second difference {second}");
    }

    #[test]
    fn model_invariants_survive_phase_permutation(m in model_strategy()) {
        let s0 = m.s0();
        let perm: Vec<usize> = (0..s0).rev().collect();
        let p = m.permute_phases(&perm).unwrap();
        prop_assert!(validate(&p).is_clean());
        let a = spectral::chi(&m, 1.3, 0.8).unwrap();
        let b = spectral::chi(&p, 1.3, 0.8).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
