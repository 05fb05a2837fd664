//! Critical points of the spectral curve, Type I/II/III classification,
//! directional decay rates and the exact-asymptotic form classes of the two
//! boundary tails.
//!
//! The psi functions are the Perron roots of the censored face kernels
//! `C1(z1, G1(z1))` and `C2(G2(z2), z2)`. Their unit-level sets on the curve
//! give the critical points; the mutual configuration of those points picks
//! one of three types, which in turn fixes the decay rates and the shape of
//! the tail (pure geometric, or geometric with a polynomial factor). The
//! polynomial degree parameter of the half-odd classes is not determined
//! here; only the class is reported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;
use crate::kernels::{self, Axis, KernelError};
use crate::matrix;
use crate::model::QbdModel;
use crate::solve1d;
use crate::spectral::{self, BranchRoots, SpectralError, SpectralSummary};

/// Errors from the asymptotics pipeline.
#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("psi{axis} never drops below 1 on [0, s_max]; no critical point exists")]
    CriticalPointNotFound { axis: u8 },
    #[error("no real branch roots at the critical point (z = {z})")]
    BranchRootsMissing { z: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
}

/// Critical points on the curve, in log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    /// Largest `s1` in `[0, s1_max]` with `psi1(e^{s1}) <= 1`.
    pub theta1_c: f64,
    /// Lower branch coordinate at `theta1_c`.
    pub theta2_c: f64,
    /// Upper branch coordinate at `theta1_c`.
    pub theta2_bar_c: f64,
    /// Lower branch coordinate at `eta2_c`.
    pub eta1_c: f64,
    /// Largest `s2` in `[0, s2_max]` with `psi2(e^{s2}) <= 1`.
    pub eta2_c: f64,
    /// Upper branch coordinate at `eta2_c`.
    pub eta1_bar_c: f64,
    /// True when the psi1 scan saw more than one upward unit crossing; the
    /// reported point is then the last crossing, flagged for manual review.
    pub multiple_crossings_1: bool,
    /// Same for psi2.
    pub multiple_crossings_2: bool,
}

/// Mutual configuration of the two critical points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigType {
    I,
    II,
    III,
}

impl std::fmt::Display for ConfigType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigType::I => write!(f, "I"),
            ConfigType::II => write!(f, "II"),
            ConfigType::III => write!(f, "III"),
        }
    }
}

/// Shape of a directional tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormTag {
    /// `rate^{-k}`.
    PureGeometric,
    /// `k^{-(2l-1)/2} rate^{-k}` for some positive integer `l`.
    PolyHalfOddLower,
    /// `k^{-(2l+1)/2} rate^{-k}` for some positive integer `l`.
    PolyHalfOddUpper,
    /// `k rate^{-k}`.
    LinearTimesGeometric,
    /// `rate^{-k}` with the rate pinned at the branch point.
    PlainAtBranch,
    /// `k^{-1/2} rate^{-k}`.
    InverseSqrt,
}

impl FormTag {
    /// Shape as a display formula in `k`.
    pub fn shape(&self) -> &'static str {
        match self {
            FormTag::PureGeometric => "rate^-k",
            FormTag::PolyHalfOddLower => "k^-(2l-1)/2 * rate^-k",
            FormTag::PolyHalfOddUpper => "k^-(2l+1)/2 * rate^-k",
            FormTag::LinearTimesGeometric => "k * rate^-k",
            FormTag::PlainAtBranch => "rate^-k (at branch point)",
            FormTag::InverseSqrt => "k^-1/2 * rate^-k",
        }
    }
}

/// Tail form class: shape plus geometric rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormClass {
    pub tag: FormTag,
    pub rate: f64,
}

/// A branch decision that was close to (or inside) the equality band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityFlag {
    /// Which comparison.
    pub decision: String,
    /// Signed gap of the comparison.
    pub gap: f64,
    /// Whether the gap fell inside the equality band and steered an "equal"
    /// branch.
    pub treated_equal: bool,
}

/// Full asymptotics result for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub config: ConfigType,
    /// Directional decay exponents `(xi1, xi2)`.
    pub xi: (f64, f64),
    /// Geometric decay rates `(r1, r2) = (e^{xi1}, e^{xi2})`.
    pub rates: (f64, f64),
    pub psi1_at_z1max: f64,
    pub psi2_at_z2max: f64,
    pub h1_class: FormClass,
    pub h2_class: FormClass,
    /// Branch decisions that came within ten equality bands, so borderline
    /// classifications are never silent.
    pub equality_flags: Vec<EqualityFlag>,
    pub critical_points: CriticalPoints,
}

fn psi_axis(model: &QbdModel, axis: Axis, z: f64, settings: &Settings) -> Result<f64, AsymptoticsError> {
    let kern = kernels::solve_axis(model, axis, z, settings)?;
    let censored = match axis {
        Axis::One => model.a1_col_z(0, z) + model.a1_col_z(1, z) * &kern.g,
        Axis::Two => model.a2_row_z(0, z) + model.a2_row_z(1, z) * &kern.g,
    };
    Ok(matrix::spectral_radius(&censored)?)
}

/// `psi1(z1) = spr(C1(z1, G1(z1)))` with
/// `C1(z1, X) = A1_{*,0}(z1) + A1_{*,1}(z1) X`.
pub fn psi1(model: &QbdModel, z1: f64, settings: &Settings) -> Result<f64, AsymptoticsError> {
    psi_axis(model, Axis::One, z1, settings)
}

/// `psi2(z2) = spr(C2(G2(z2), z2))` with
/// `C2(X, z2) = A2_{0,*}(z2) + A2_{1,*}(z2) X`.
pub fn psi2(model: &QbdModel, z2: f64, settings: &Settings) -> Result<f64, AsymptoticsError> {
    psi_axis(model, Axis::Two, z2, settings)
}

const SCAN_POINTS: usize = 33;

/// Largest `s` in `[0, s_max]` with `psi(e^s) <= 1`.
///
/// The psi functions need not be monotone, so a 33-point scan locates the
/// last upward unit crossing before bisection refines it; the boolean
/// reports whether more than one upward crossing was seen. `psi_at_end` is
/// the (precomputed) endpoint value; if it does not exceed 1 beyond the
/// widened endpoint band the maximum is `s_max` itself.
fn critical_one(
    model: &QbdModel,
    axis: Axis,
    s_max: f64,
    psi_at_end: f64,
    settings: &Settings,
) -> Result<(f64, bool), AsymptoticsError> {
    let axis_no = match axis {
        Axis::One => 1,
        Axis::Two => 2,
    };
    if psi_at_end - 1.0 <= settings.eq_band_extreme {
        return Ok((s_max, false));
    }
    let snap = |v: f64| if v.abs() <= 1e-12 { 0.0 } else { v };
    let mut values = Vec::with_capacity(SCAN_POINTS);
    for i in 0..SCAN_POINTS {
        let s = s_max * i as f64 / (SCAN_POINTS - 1) as f64;
        let v = if i == SCAN_POINTS - 1 {
            psi_at_end - 1.0
        } else {
            snap(psi_axis(model, axis, s.exp(), settings)? - 1.0)
        };
        values.push((s, v));
    }
    let mut crossings = Vec::new();
    for i in 0..SCAN_POINTS - 1 {
        if values[i].1 <= 0.0 && values[i + 1].1 > 0.0 {
            crossings.push(i);
        }
    }
    let &last = crossings
        .last()
        .ok_or(AsymptoticsError::CriticalPointNotFound { axis: axis_no })?;
    let mut err = None;
    let root = solve1d::illinois(
        |s| match psi_axis(model, axis, s.exp(), settings) {
            Ok(v) => snap(v - 1.0),
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        values[last].0,
        values[last].1,
        values[last + 1].0,
        values[last + 1].1,
        settings.bisect_rel,
        0.0,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((root.x, crossings.len() > 1))
}

fn branch_pair(
    model: &QbdModel,
    axis: Axis,
    z: f64,
    settings: &Settings,
) -> Result<(f64, f64), AsymptoticsError> {
    let roots = match axis {
        Axis::One => spectral::branch_roots_2(model, z, settings)?,
        Axis::Two => spectral::branch_roots_1(model, z, settings)?,
    };
    match roots {
        BranchRoots::TwoRoots { lower, upper } => Ok((lower.ln(), upper.ln())),
        BranchRoots::Tangent { root } => Ok((root.ln(), root.ln())),
        BranchRoots::NoRoot => Err(AsymptoticsError::BranchRootsMissing { z }),
    }
}

/// Critical points from precomputed extreme points and psi endpoint values.
pub fn critical_points_with_endpoints(
    model: &QbdModel,
    summary: &SpectralSummary,
    psi1_at_z1max: f64,
    psi2_at_z2max: f64,
    settings: &Settings,
) -> Result<CriticalPoints, AsymptoticsError> {
    let (theta1, multi1) = critical_one(
        model,
        Axis::One,
        summary.z1_max.ln(),
        psi1_at_z1max,
        settings,
    )?;
    let (eta2, multi2) = critical_one(
        model,
        Axis::Two,
        summary.z2_max.ln(),
        psi2_at_z2max,
        settings,
    )?;
    let (theta2, theta2_bar) = branch_pair(model, Axis::One, theta1.exp(), settings)?;
    let (eta1, eta1_bar) = branch_pair(model, Axis::Two, eta2.exp(), settings)?;
    Ok(CriticalPoints {
        theta1_c: theta1,
        theta2_c: theta2,
        theta2_bar_c: theta2_bar,
        eta1_c: eta1,
        eta2_c: eta2,
        eta1_bar_c: eta1_bar,
        multiple_crossings_1: multi1,
        multiple_crossings_2: multi2,
    })
}

/// Critical points of a model, computing extremes and psi endpoint values on
/// the way.
pub fn critical_points(
    model: &QbdModel,
    settings: &Settings,
) -> Result<CriticalPoints, AsymptoticsError> {
    let summary = spectral::extreme_points(model, settings)?;
    let p1 = psi1(model, summary.z1_max, settings)?;
    let p2 = psi2(model, summary.z2_max, settings)?;
    critical_points_with_endpoints(model, &summary, p1, p2, settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Less,
    Equal,
    Greater,
}

fn cmp_with_band(gap: f64, band: f64) -> Cmp {
    if gap.abs() <= band {
        Cmp::Equal
    } else if gap > 0.0 {
        Cmp::Greater
    } else {
        Cmp::Less
    }
}

/// Type of the critical-point configuration, with differences within
/// `eq_tol` treated as equalities:
///
/// ```text
/// Type I:   eta1 < theta1  and  theta2 < eta2
/// Type II:  eta1 < theta1  and  eta2 <= theta2
/// Type III: theta1 <= eta1 and  theta2 < eta2
/// ```
pub fn classify_type(cp: &CriticalPoints, eq_tol: f64) -> ConfigType {
    let d1 = cp.theta1_c - cp.eta1_c; // > 0 means eta1 < theta1
    let d2 = cp.eta2_c - cp.theta2_c; // > 0 means theta2 < eta2
    match (cmp_with_band(d1, eq_tol), cmp_with_band(d2, eq_tol)) {
        (Cmp::Greater, Cmp::Greater) => ConfigType::I,
        (Cmp::Greater, _) => ConfigType::II,
        (_, Cmp::Greater) => ConfigType::III,
        // Coincident critical points: unreachable for valid configurations
        // unless the band is extreme; fall back to Type I (the limits of
        // the three cases agree there) and let the equality flags surface it.
        _ => ConfigType::I,
    }
}

/// Decay exponents and rates from the critical points and type.
pub fn decay_rates(cp: &CriticalPoints, config: ConfigType) -> ((f64, f64), (f64, f64)) {
    let xi = match config {
        ConfigType::I => (cp.theta1_c, cp.eta2_c),
        ConfigType::II => (cp.eta1_bar_c, cp.eta2_c),
        ConfigType::III => (cp.theta1_c, cp.theta2_bar_c),
    };
    (xi, (xi.0.exp(), xi.1.exp()))
}

/// Form classes of both tails, by the case table of the configuration type.
///
/// Comparisons against `psi = 1` at the extreme points use the widened band
/// `max(eq_tol, eq_band_extreme)`, since kernel accuracy degrades there.
/// Every decision that came within ten bands is recorded in the returned
/// flags.
pub fn form_classes(
    cp: &CriticalPoints,
    config: ConfigType,
    summary: &SpectralSummary,
    psi1_at_z1max: f64,
    psi2_at_z2max: f64,
    settings: &Settings,
) -> (FormClass, FormClass, Vec<EqualityFlag>) {
    let eq_tol = settings.eq_tol;
    let band_psi = settings.eq_tol.max(settings.eq_band_extreme);
    let (_, (r1, r2)) = decay_rates(cp, config);
    let mut flags = Vec::new();
    let mut note = |decision: &str, gap: f64, band: f64| -> Cmp {
        let cmp = cmp_with_band(gap, band);
        if gap.abs() <= 10.0 * band {
            flags.push(EqualityFlag {
                decision: decision.to_string(),
                gap,
                treated_equal: cmp == Cmp::Equal,
            });
        }
        cmp
    };
    let d1 = note("theta1_minus_eta1", cp.theta1_c - cp.eta1_c, eq_tol);
    let d2 = note("eta2_minus_theta2", cp.eta2_c - cp.theta2_c, eq_tol);
    let s1 = note("psi1_at_z1max_minus_1", psi1_at_z1max - 1.0, band_psi);
    let s2 = note("psi2_at_z2max_minus_1", psi2_at_z2max - 1.0, band_psi);
    let _ = d1;

    let type_i_class = |sign: Cmp, rate: f64, z_max: f64| match sign {
        Cmp::Greater => FormClass {
            tag: FormTag::PureGeometric,
            rate,
        },
        Cmp::Equal => FormClass {
            tag: FormTag::PolyHalfOddLower,
            rate: z_max,
        },
        Cmp::Less => FormClass {
            tag: FormTag::PolyHalfOddUpper,
            rate: z_max,
        },
    };
    let equal_branch_class = |sign: Cmp, rate: f64, z_max: f64| match sign {
        Cmp::Greater => FormClass {
            tag: FormTag::LinearTimesGeometric,
            rate,
        },
        Cmp::Equal => FormClass {
            tag: FormTag::PlainAtBranch,
            rate: z_max,
        },
        Cmp::Less => FormClass {
            tag: FormTag::InverseSqrt,
            rate: z_max,
        },
    };

    let (h1, h2) = match config {
        ConfigType::I => (
            type_i_class(s1, r1, summary.z1_max),
            type_i_class(s2, r2, summary.z2_max),
        ),
        ConfigType::II => {
            let h1 = if d2 == Cmp::Less {
                // eta2 strictly below theta2
                FormClass {
                    tag: FormTag::PureGeometric,
                    rate: r1,
                }
            } else {
                equal_branch_class(s1, r1, summary.z1_max)
            };
            (
                h1,
                FormClass {
                    tag: FormTag::PureGeometric,
                    rate: r2,
                },
            )
        }
        ConfigType::III => {
            let h2 = if d1 == Cmp::Less {
                // theta1 strictly below eta1
                FormClass {
                    tag: FormTag::PureGeometric,
                    rate: r2,
                }
            } else {
                equal_branch_class(s2, r2, summary.z2_max)
            };
            (
                FormClass {
                    tag: FormTag::PureGeometric,
                    rate: r1,
                },
                h2,
            )
        }
    };
    (h1, h2, flags)
}

/// Runs the whole asymptotics pipeline on a model whose extremes are already
/// known.
pub fn analyze_asymptotics(
    model: &QbdModel,
    summary: &SpectralSummary,
    settings: &Settings,
) -> Result<AsymptoticsReport, AsymptoticsError> {
    let psi1_at_z1max = psi1(model, summary.z1_max, settings)?;
    let psi2_at_z2max = psi2(model, summary.z2_max, settings)?;
    let cp = critical_points_with_endpoints(model, summary, psi1_at_z1max, psi2_at_z2max, settings)?;
    let config = classify_type(&cp, settings.eq_tol);
    let (xi, rates) = decay_rates(&cp, config);
    let (h1_class, h2_class, equality_flags) = form_classes(
        &cp,
        config,
        summary,
        psi1_at_z1max,
        psi2_at_z2max,
        settings,
    );
    Ok(AsymptoticsReport {
        config,
        xi,
        rates,
        psi1_at_z1max,
        psi2_at_z2max,
        h1_class,
        h2_class,
        equality_flags,
        critical_points: cp,
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
    fn psi1_is_one_at_unit_argument_for_a_recurrent_face() {
        let m = table1(2);
        let settings = Settings::default();
        let v = psi1(&m, 1.0, &settings).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "psi1(1) = {v}");
    }

    #[test]
    fn psi1_at_the_extreme_crosses_one_as_k_grows() {
        let settings = Settings::default();
        // K = 4: strictly below one. K = 6: strictly above. At K = 5 the
        // crossing coincides with the curve extreme to machine precision
        // (psi1(z1_max - d) - 1 ~ -0.198 sqrt(d)), the measure-zero equality
        // branch.
        let m4 = table1(4);
        let sum4 = spectral::extreme_points(&m4, &settings).unwrap();
        assert!(psi1(&m4, sum4.z1_max, &settings).unwrap() < 1.0 - 1e-6);
        let m5 = table1(5);
        let sum5 = spectral::extreme_points(&m5, &settings).unwrap();
        let gap5 = psi1(&m5, sum5.z1_max, &settings).unwrap() - 1.0;
        assert!(gap5.abs() <= 1e-10, "K=5 gap {gap5}");
        let m6 = table1(6);
        let sum6 = spectral::extreme_points(&m6, &settings).unwrap();
        assert!(psi1(&m6, sum6.z1_max, &settings).unwrap() > 1.0 + 1e-6);
    }

    #[test]
    fn symmetric_model_has_matching_critical_points_near_the_table_value() {
        let m = table1(1);
        let settings = Settings::default();
        let cp = critical_points(&m, &settings).unwrap();
        let r1 = cp.theta1_c.exp();
        let r2 = cp.eta2_c.exp();
        assert!((r1 - 1.968).abs() < 2e-3, "e^theta1 = {r1}");
        assert!((r2 - 1.968).abs() < 2e-3, "e^eta2 = {r2}");
        assert!(cp.theta1_c > 0.0 && cp.eta2_c > 0.0);
        assert!(!cp.multiple_crossings_1 && !cp.multiple_crossings_2);
    }

    #[test]
    fn theta2_is_consistent_with_the_lower_branch() {
        let m = table1(2);
        let settings = Settings::default();
        let cp = critical_points(&m, &settings).unwrap();
        let roots = spectral::branch_roots_2(&m, cp.theta1_c.exp(), &settings).unwrap();
        let lower = roots.lower().unwrap();
        assert!((cp.theta2_c - lower.ln()).abs() <= 1e-8);
        let upper = roots.upper().unwrap();
        assert!((cp.theta2_bar_c - upper.ln()).abs() <= 1e-8);
    }

    fn synthetic_cp(theta1: f64, theta2: f64, eta1: f64, eta2: f64) -> CriticalPoints {
        CriticalPoints {
            theta1_c: theta1,
            theta2_c: theta2,
            theta2_bar_c: theta2 + 0.5,
            eta1_c: eta1,
            eta2_c: eta2,
            eta1_bar_c: eta1 + 0.5,
            multiple_crossings_1: false,
            multiple_crossings_2: false,
        }
    }

    #[test]
    fn classification_follows_the_case_table() {
        let eq = 1e-8;
        // strict inequalities both ways
        assert_eq!(
            classify_type(&synthetic_cp(1.0, 0.2, 0.5, 0.9), eq),
            ConfigType::I
        );
        // eta1 = theta1 - 1, theta2 = eta2: the equal branch of Type II
        assert_eq!(
            classify_type(&synthetic_cp(1.0, 0.9, 0.0, 0.9), eq),
            ConfigType::II
        );
        // theta1 = eta1, theta2 < eta2
        assert_eq!(
            classify_type(&synthetic_cp(1.0, 0.2, 1.0, 0.9), eq),
            ConfigType::III
        );
    }

    #[test]
    fn decay_rate_selection_depends_on_the_type() {
        let cp = synthetic_cp(1.0, 0.2, 0.5, 0.9);
        let ((x1, x2), (r1, r2)) = decay_rates(&cp, ConfigType::I);
        assert_eq!((x1, x2), (1.0, 0.9));
        assert!((r1 - 1.0f64.exp()).abs() < 1e-15 && (r2 - 0.9f64.exp()).abs() < 1e-15);
        let ((x1, _), _) = decay_rates(&cp, ConfigType::II);
        assert_eq!(x1, cp.eta1_bar_c);
        let ((_, x2), _) = decay_rates(&cp, ConfigType::III);
        assert_eq!(x2, cp.theta2_bar_c);
    }

    #[test]
    fn form_class_branches_cover_the_type_ii_table() {
        let settings = Settings::default();
        let summary = SpectralSummary {
            z1_min: 0.5,
            z1_max: 3.0,
            z2_min: 0.5,
            z2_max: 2.5,
            tol: 1e-10,
        };
        // Type II with eta2 strictly below theta2: pure geometric h1.
        let cp = synthetic_cp(1.0, 0.9, 0.0, 0.5);
        let (h1, h2, _) = form_classes(&cp, ConfigType::II, &summary, 0.7, 1.3, &settings);
        assert_eq!(h1.tag, FormTag::PureGeometric);
        assert_eq!(h2.tag, FormTag::PureGeometric);
        // Equality sub-branches keyed by the psi1 sign.
        let cp_eq = synthetic_cp(1.0, 0.9, 0.0, 0.9);
        let (h1, _, _) = form_classes(&cp_eq, ConfigType::II, &summary, 1.5, 1.3, &settings);
        assert_eq!(h1.tag, FormTag::LinearTimesGeometric);
        let (h1, _, flags) = form_classes(&cp_eq, ConfigType::II, &summary, 1.0, 1.3, &settings);
        assert_eq!(h1.tag, FormTag::PlainAtBranch);
        assert!((h1.rate - summary.z1_max).abs() < 1e-15);
        assert!(flags
            .iter()
            .any(|f| f.decision == "psi1_at_z1max_minus_1" && f.treated_equal));
        let (h1, _, _) = form_classes(&cp_eq, ConfigType::II, &summary, 0.4, 1.3, &settings);
        assert_eq!(h1.tag, FormTag::InverseSqrt);
    }

    #[test]
    fn psi_scan_is_continuous_on_the_grid() {
        let m = table1(2);
        let settings = Settings::default();
        let sum = spectral::extreme_points(&m, &settings).unwrap();
        let s_max = sum.z1_max.ln();
        let mut prev: Option<f64> = None;
        for i in 0..SCAN_POINTS {
            let s = s_max * i as f64 / (SCAN_POINTS - 1) as f64;
            let v = psi1(&m, s.exp(), &settings).unwrap();
            if let Some(p) = prev {
                assert!((v - p).abs() < 0.2, "jump of {} at grid point {i}", (v - p).abs());
            }
            prev = Some(v);
        }
    }
}
