//! End-to-end analysis pipeline and report assembly: drift verdict, curve
//! extremes, critical points, type, decay rates and form classes, bundled
//! with every tolerance used, plus reproduction of the published decay-rate
//! tables for the (1,K)-limited-service queue.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{self, AsymptoticsReport};
use crate::config::Settings;
use crate::kernels::Axis;
use crate::model::{self, LimitedServiceParams, QbdModel};
use crate::oracle::{self, SolveMethod};
use crate::spectral::{self, SpectralSummary};
use crate::stability::{self, Verdict};

/// Version of the bundle JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Pipeline failure, tagged with the stage it happened in.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct AnalysisError {
    /// Pipeline stage name.
    pub stage: &'static str,
    /// Human-readable cause.
    pub message: String,
}

impl AnalysisError {
    fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> AnalysisError {
        move |e| AnalysisError {
            stage,
            message: e.to_string(),
        }
    }
}

/// What was analyzed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    /// Number of phases.
    pub s0: usize,
    /// Provenance of the model (file path or generator parameters).
    pub source: String,
}

/// Drift section of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub pi_star: Vec<f64>,
    pub a1_12: f64,
    pub a2_12: f64,
    pub a1_1: Option<f64>,
    pub a2_2: Option<f64>,
    pub verdict: Verdict,
}

/// Oracle comparison along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAxisComparison {
    /// 1 or 2.
    pub axis: u8,
    /// Analytic geometric decay rate `r`.
    pub analytic_rate: f64,
    /// Median empirical decay ratio (approximates `1/r`).
    pub empirical_ratio: f64,
    /// `1 / empirical_ratio`.
    pub implied_rate: f64,
    /// `|implied_rate - analytic_rate| / analytic_rate`.
    pub relative_gap: f64,
    /// Standard deviation of the ratio sequence.
    pub ratio_stddev: f64,
    /// Estimation window in levels.
    pub window: (usize, usize),
}

/// Oracle section of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// Truncation level.
    pub truncation: usize,
    /// Balance residual of the truncated solve.
    pub residual: f64,
    pub axes: Vec<OracleAxisComparison>,
}

/// Full analysis output: every numeric section carries the tolerance set it
/// was computed under, and the bundle serializes round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub schema_version: u32,
    pub tool_version: String,
    pub model: ModelDescriptor,
    pub tolerances: Settings,
    pub drift: DriftSummary,
    /// Absent when the verdict rules out a stationary distribution.
    pub spectral: Option<SpectralSummary>,
    pub asymptotics: Option<AsymptoticsReport>,
    pub oracle: Option<OracleComparison>,
}

/// Runs validation, drifts, extremes and asymptotics on a model. A model
/// that is not positive recurrent yields a drift-only bundle; an invalid
/// model is an error.
pub fn analyze_model(
    model: &QbdModel,
    source: &str,
    settings: &Settings,
) -> Result<AnalysisBundle, AnalysisError> {
    let report = model::validate(model);
    if !report.is_clean() {
        return Err(AnalysisError {
            stage: "validation",
            message: report.messages().join("; "),
        });
    }
    let drift = stability::drifts(model, settings).map_err(AnalysisError::stage("drift"))?;
    let drift_summary = DriftSummary {
        pi_star: drift.pi_star.iter().copied().collect(),
        a1_12: drift.a12.0,
        a2_12: drift.a12.1,
        a1_1: drift.a1_1,
        a2_2: drift.a2_2,
        verdict: drift.verdict,
    };
    let mut bundle = AnalysisBundle {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: ModelDescriptor {
            s0: model.s0(),
            source: source.to_string(),
        },
        tolerances: settings.clone(),
        drift: drift_summary,
        spectral: None,
        asymptotics: None,
        oracle: None,
    };
    if drift.verdict != Verdict::PositiveRecurrent {
        return Ok(bundle);
    }
    let summary =
        spectral::extreme_points(model, settings).map_err(AnalysisError::stage("spectral"))?;
    let asym = asymptotics::analyze_asymptotics(model, &summary, settings)
        .map_err(AnalysisError::stage("asymptotics"))?;
    bundle.spectral = Some(summary);
    bundle.asymptotics = Some(asym);
    Ok(bundle)
}

/// Truncated-chain cross check: analytic rates against empirical decay
/// ratios on the requested axes.
pub fn oracle_compare(
    model: &QbdModel,
    rates: (f64, f64),
    truncation: usize,
    axes: &[Axis],
    settings: &Settings,
) -> Result<OracleComparison, AnalysisError> {
    let sol = oracle::truncated_stationary(model, truncation, SolveMethod::GaussSeidel, settings)
        .map_err(AnalysisError::stage("oracle"))?;
    let window = oracle::default_window(truncation);
    let mut out = OracleComparison {
        truncation,
        residual: sol.residual,
        axes: Vec::new(),
    };
    for &axis in axes {
        let est = oracle::empirical_decay(&sol, axis, window)
            .map_err(AnalysisError::stage("oracle"))?;
        let analytic = match axis {
            Axis::One => rates.0,
            Axis::Two => rates.1,
        };
        let implied = 1.0 / est.estimate;
        out.axes.push(OracleAxisComparison {
            axis: match axis {
                Axis::One => 1,
                Axis::Two => 2,
            },
            analytic_rate: analytic,
            empirical_ratio: est.estimate,
            implied_rate: implied,
            relative_gap: (implied - analytic).abs() / analytic,
            ratio_stddev: est.stddev,
            window,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Table reproduction
// ---------------------------------------------------------------------------

/// The two published parameter sets of the (1,K)-limited-service queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaperTable {
    One,
    Two,
}

impl PaperTable {
    /// Arrival/service rates of the table.
    pub fn params(&self, k: usize) -> LimitedServiceParams {
        match self {
            PaperTable::One => LimitedServiceParams {
                k,
                lambda1: 0.3,
                lambda2: 0.3,
                mu1: 1.0,
                mu2: 1.0,
            },
            PaperTable::Two => LimitedServiceParams {
                k,
                lambda1: 0.24,
                lambda2: 0.7,
                mu1: 1.2,
                mu2: 1.0,
            },
        }
    }

    /// K values of the published rows.
    pub fn k_values() -> [usize; 11] {
        [1, 2, 3, 4, 5, 6, 7, 8, 10, 20, 50]
    }
}

/// One reproduced table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub k: usize,
    pub config: asymptotics::ConfigType,
    pub a1_12: f64,
    pub a2_12: f64,
    /// Sign of `psi1(z1_max) - 1`: '-', '=' or '+'.
    pub psi1_sign: char,
    /// Sign of `psi2(z2_max) - 1`.
    pub psi2_sign: char,
    pub r1: f64,
    pub r2: f64,
}

fn sign_char(gap: f64, band: f64) -> char {
    if gap.abs() <= band {
        '='
    } else if gap > 0.0 {
        '+'
    } else {
        '-'
    }
}

/// Reproduces one row of a table.
pub fn reproduce_row(
    table: PaperTable,
    k: usize,
    settings: &Settings,
) -> Result<TableRow, AnalysisError> {
    let params = table.params(k);
    let model = model::build_limited_service(&params).map_err(AnalysisError::stage("model"))?;
    let source = format!(
        "limited-service K={k} l1={} l2={} m1={} m2={}",
        params.lambda1, params.lambda2, params.mu1, params.mu2
    );
    let bundle = analyze_model(&model, &source, settings)?;
    let asym = bundle.asymptotics.as_ref().ok_or(AnalysisError {
        stage: "asymptotics",
        message: format!("model is {}; no decay rates", bundle.drift.verdict),
    })?;
    let band = settings.eq_tol.max(settings.eq_band_extreme);
    Ok(TableRow {
        k,
        config: asym.config,
        a1_12: bundle.drift.a1_12,
        a2_12: bundle.drift.a2_12,
        psi1_sign: sign_char(asym.psi1_at_z1max - 1.0, band),
        psi2_sign: sign_char(asym.psi2_at_z2max - 1.0, band),
        r1: asym.rates.0,
        r2: asym.rates.1,
    })
}

/// Reproduces a full table (K = 1..8, 10, 20, 50).
pub fn reproduce_table(
    table: PaperTable,
    settings: &Settings,
) -> Result<Vec<TableRow>, AnalysisError> {
    PaperTable::k_values()
        .iter()
        .map(|&k| reproduce_row(table, k, settings))
        .collect()
}

/// Formats `x` with `sig` significant digits in plain decimal notation,
/// matching the published precision (3 for drifts, 4 for rates).
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// CSV rendering of reproduced rows, in the tables' column layout.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("K, Type, a1_12, a2_12, psi1_sign, psi2_sign, r1, r2\n");
    for row in rows {
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}, {}, {}\n",
            row.k,
            row.config,
            format_sig(row.a1_12, 3),
            format_sig(row.a2_12, 3),
            row.psi1_sign,
            row.psi2_sign,
            format_sig(row.r1, 4),
            format_sig(row.r2, 4),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_limited_service;

    #[test]
    fn significant_digit_formatting_matches_published_precision() {
        assert_eq!(format_sig(-0.0769230769, 3), "-0.0769");
        assert_eq!(format_sig(0.0192307, 3), "0.0192");
        assert_eq!(format_sig(-0.00186916, 3), "-0.00187");
        assert_eq!(format_sig(0.108, 3), "0.108");
        assert_eq!(format_sig(1.96799, 4), "1.968");
        assert_eq!(format_sig(3.97750, 4), "3.978");
        assert_eq!(format_sig(0.0, 3), "0");
    }

    #[test]
    fn bundle_serialization_round_trips() {
        let settings = Settings::default();
        let model = build_limited_service(&PaperTable::One.params(1)).unwrap();
        let bundle = analyze_model(&model, "limited-service K=1", &settings).unwrap();
        let text = serde_json::to_string_pretty(&bundle).unwrap();
        let back: AnalysisBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(bundle, back);
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        assert!(back.asymptotics.is_some());
    }

    #[test]
    fn transient_models_get_a_drift_only_bundle() {
        let settings = Settings::default();
        let model = build_limited_service(&LimitedServiceParams {
            k: 1,
            lambda1: 2.0,
            lambda2: 0.1,
            mu1: 1.0,
            mu2: 1.0,
        })
        .unwrap();
        let bundle = analyze_model(&model, "transient", &settings).unwrap();
        assert_eq!(bundle.drift.verdict, Verdict::Transient);
        assert!(bundle.spectral.is_none() && bundle.asymptotics.is_none());
    }

    #[test]
    fn table_row_k1_matches_published_values() {
        let settings = Settings::default();
        let row = reproduce_row(PaperTable::One, 1, &settings).unwrap();
        assert_eq!(row.config, asymptotics::ConfigType::I);
        assert!((row.a1_12 - -0.0769).abs() < 5e-4);
        assert!((row.a2_12 - -0.0769).abs() < 5e-4);
        assert_eq!((row.psi1_sign, row.psi2_sign), ('-', '-'));
        assert!((row.r1 - 1.968).abs() < 2e-3);
        assert!((row.r2 - 1.968).abs() < 2e-3);
        let csv = table_csv(&[row]);
        assert!(csv.contains("1, I, -0.0769, -0.0769, -, -, 1.968, 1.968"));
    }
}
