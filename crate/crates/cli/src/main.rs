//! `qbd` — analyze discrete-time two-dimensional quasi-birth-and-death
//! processes from the command line: validate model files, run the full
//! stability/decay-rate pipeline, reproduce the built-in limited-service
//! tables, cross-check rates against a truncated-chain solve, and generate
//! (1,K)-limited-service models.
//!
//! Exit codes: 0 success, 1 analysis-stage failure (including validation
//! violations and non-convergent solves), 2 input error (unreadable or
//! malformed files, bad parameters). Errors are emitted as one-line JSON
//! objects on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qbd_core::kernels::Axis;
use qbd_core::oracle::SolveMethod;
use qbd_core::report::{
    analyze_model, oracle_compare, reproduce_table, table_csv, AnalysisBundle, PaperTable,
};
use qbd_core::stability::Verdict;
use qbd_core::{build_limited_service, load_model, save_model, validate, LimitedServiceParams, QbdModel, Settings};

#[derive(Parser)]
#[command(name = "qbd", version, about = "Stability and tail-asymptotics analyzer for 2d-QBD processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a model file (nonnegativity, stochasticity, irreducibility);
    /// exit 0 iff clean.
    Validate { path: PathBuf },
    /// Run the full pipeline: drifts, curve extremes, critical points,
    /// configuration type, decay rates and tail form classes.
    Analyze {
        path: PathBuf,
        /// Branch-root tolerance override (also tightens the kernel solver).
        #[arg(long)]
        tol: Option<f64>,
        /// Equality band for the measure-zero branch decisions.
        #[arg(long = "eq-tol")]
        eq_tol: Option<f64>,
        /// Emit the analysis bundle as JSON (default).
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        /// Emit a one-line CSV summary instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Reproduce a built-in limited-service table (1 or 2) as CSV.
    Reproduce {
        /// Table number: 1 (symmetric light load) or 2 (asymmetric).
        table: u8,
        #[arg(long = "eq-tol")]
        eq_tol: Option<f64>,
    },
    /// Compare analytic decay rates against a truncated-chain estimate.
    Oracle {
        path: PathBuf,
        /// Truncation level of the finite lattice window.
        #[arg(long, default_value_t = 150)]
        truncation: usize,
        /// Which axis to estimate.
        #[arg(long, value_enum, default_value_t = AxisArg::Both)]
        axis: AxisArg,
        /// Emit the full bundle (with oracle section) as JSON.
        #[arg(long)]
        json: bool,
        /// Dump the truncated stationary distribution as CSV to this path.
        #[arg(long = "dump-csv")]
        dump_csv: Option<PathBuf>,
    },
    /// Generate a (1,K)-limited-service model file.
    Generate {
        /// Service limit at queue 2.
        #[arg(long)]
        k: usize,
        /// Arrival rate at queue 1.
        #[arg(long)]
        l1: f64,
        /// Arrival rate at queue 2.
        #[arg(long)]
        l2: f64,
        /// Service rate at queue 1.
        #[arg(long)]
        m1: f64,
        /// Service rate at queue 2.
        #[arg(long)]
        m2: f64,
        /// Output path of the model file.
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

/// Failure carrying the exit code convention.
enum Failure {
    /// Unreadable or malformed input, bad parameters: exit 2.
    Input(String),
    /// A pipeline or solver stage failed: exit 1.
    Analysis(String),
}

impl Failure {
    fn emit(&self) -> ExitCode {
        let (kind, message, code) = match self {
            Failure::Input(m) => ("input", m, 2),
            Failure::Analysis(m) => ("analysis", m, 1),
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "kind": kind, "message": message } })
        );
        ExitCode::from(code)
    }
}

fn settings_from_env() -> Settings {
    let mut settings = Settings::default();
    if let Ok(value) = std::env::var("QBD_MAX_ITER") {
        match value.parse::<usize>() {
            Ok(cap) if cap > 0 => settings = settings.with_max_iter_override(cap),
            _ => eprintln!("warning: ignoring unparsable QBD_MAX_ITER={value}"),
        }
    }
    settings
}

fn apply_overrides(settings: &mut Settings, tol: Option<f64>, eq_tol: Option<f64>) {
    if let Some(t) = tol {
        settings.root_tol = t;
        settings.kernel_tol = t;
    }
    if let Some(t) = eq_tol {
        settings.eq_tol = t;
        settings.eq_band_extreme = t;
    }
}

fn read_model(path: &Path) -> Result<QbdModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    load_model(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(failure) => failure.emit(),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Validate { path } => {
            let model = read_model(&path)?;
            let report = validate(&model);
            println!(
                "{}",
                serde_json::json!({
                    "clean": report.is_clean(),
                    "violations": report.messages(),
                })
            );
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Analyze {
            path,
            tol,
            eq_tol,
            json: _,
            csv,
        } => {
            let mut settings = settings_from_env();
            apply_overrides(&mut settings, tol, eq_tol);
            let model = read_model(&path)?;
            let bundle = analyze_model(&model, &format!("file:{}", path.display()), &settings)
                .map_err(|e| Failure::Analysis(e.to_string()))?;
            if csv {
                println!("{}", bundle_csv(&bundle));
            } else {
                println!("{}", serde_json::to_string_pretty(&bundle).expect("bundle serializes"));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce { table, eq_tol } => {
            let table = match table {
                1 => PaperTable::One,
                2 => PaperTable::Two,
                other => {
                    return Err(Failure::Input(format!(
                        "table must be 1 or 2, got {other}"
                    )))
                }
            };
            let mut settings = settings_from_env();
            apply_overrides(&mut settings, None, eq_tol);
            let rows =
                reproduce_table(table, &settings).map_err(|e| Failure::Analysis(e.to_string()))?;
            print!("{}", table_csv(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            path,
            truncation,
            axis,
            json,
            dump_csv,
        } => {
            let settings = settings_from_env();
            let model = read_model(&path)?;
            let mut bundle = analyze_model(&model, &format!("file:{}", path.display()), &settings)
                .map_err(|e| Failure::Analysis(e.to_string()))?;
            let Some(asym) = bundle.asymptotics.clone() else {
                return Err(Failure::Analysis(format!(
                    "model is {}; refusing the oracle comparison",
                    bundle.drift.verdict
                )));
            };
            let window = qbd_core::oracle::default_window(truncation);
            if window.1 + 5 >= truncation {
                return Err(Failure::Analysis(format!(
                    "window too small: truncation {truncation} leaves no usable estimation window"
                )));
            }
            let axes: &[Axis] = match axis {
                AxisArg::One => &[Axis::One],
                AxisArg::Two => &[Axis::Two],
                AxisArg::Both => &[Axis::One, Axis::Two],
            };
            let comparison = oracle_compare(&model, asym.rates, truncation, axes, &settings)
                .map_err(|e| Failure::Analysis(e.to_string()))?;
            if let Some(csv_path) = dump_csv {
                let sol = qbd_core::oracle::truncated_stationary(
                    &model,
                    truncation,
                    SolveMethod::GaussSeidel,
                    &settings,
                )
                .map_err(|e| Failure::Analysis(e.to_string()))?;
                std::fs::write(&csv_path, sol.to_csv()).map_err(|e| {
                    Failure::Input(format!("cannot write {}: {e}", csv_path.display()))
                })?;
            }
            if json {
                bundle.oracle = Some(comparison);
                println!("{}", serde_json::to_string_pretty(&bundle).expect("bundle serializes"));
            } else {
                println!(
                    "truncation N={}, balance residual {:.3e}",
                    comparison.truncation, comparison.residual
                );
                for ax in &comparison.axes {
                    println!(
                        "axis {}: analytic r = {:.6}, empirical ratio = {:.6} -> implied r = {:.6}, relative gap {:.2}%",
                        ax.axis,
                        ax.analytic_rate,
                        ax.empirical_ratio,
                        ax.implied_rate,
                        100.0 * ax.relative_gap
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            k,
            l1,
            l2,
            m1,
            m2,
            out,
        } => {
            let model = build_limited_service(&LimitedServiceParams {
                k,
                lambda1: l1,
                lambda2: l2,
                mu1: m1,
                mu2: m2,
            })
            .map_err(|e| Failure::Input(e.to_string()))?;
            std::fs::write(&out, save_model(&model))
                .map_err(|e| Failure::Input(format!("cannot write {}: {e}", out.display())))?;
            println!("wrote {} ({} phases)", out.display(), model.s0());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// One-line CSV summary of a bundle.
fn bundle_csv(bundle: &AnalysisBundle) -> String {
    use qbd_core::report::format_sig;
    let mut out = String::from(
        "s0, verdict, a1_12, a2_12, type, r1, r2, h1, h2\n",
    );
    let drift = &bundle.drift;
    let verdict = drift.verdict.to_string();
    match (&bundle.asymptotics, drift.verdict) {
        (Some(asym), Verdict::PositiveRecurrent) => {
            out.push_str(&format!(
                "{}, {}, {}, {}, {}, {}, {}, {:?}, {:?}\n",
                bundle.model.s0,
                verdict,
                format_sig(drift.a1_12, 3),
                format_sig(drift.a2_12, 3),
                asym.config,
                format_sig(asym.rates.0, 4),
                format_sig(asym.rates.1, 4),
                asym.h1_class.tag,
                asym.h2_class.tag,
            ));
        }
        _ => {
            out.push_str(&format!(
                "{}, {}, {}, {}, , , , , \n",
                bundle.model.s0,
                verdict,
                format_sig(drift.a1_12, 3),
                format_sig(drift.a2_12, 3),
            ));
        }
    }
    out
}
