use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use conic_core::exact::{orthant_table, subspace_table, weyl_b_table, ExactTable, Fraction};
use conic_core::mc::{
    run_experiment, BundleReport, ExperimentReport, ExperimentSpec, MgfMode, DEFAULT_SAMPLES,
    DEFAULT_SEED, DEFAULT_Z_MAX, ESTIMATE_KINDS, EXPERIMENTS,
};
use conic_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_STATISTICAL: u8 = 3;
const EXIT_SOLVER: u8 = 4;

const REPORT_CSV_HEADER: [&str; 9] = [
    "experiment",
    "name",
    "value",
    "stderr",
    "samples",
    "exact",
    "z",
    "tolerance",
    "pass",
];
const EXACT_CSV_HEADER: [&str; 7] = [
    "family",
    "ambient",
    "index",
    "upsilon",
    "upsilon_decimal",
    "gamma",
    "gamma_decimal",
];

#[derive(Parser)]
#[command(
    name = "conic-angles",
    version,
    about = "Grassmann angles and conic intrinsic volumes of polyhedral cones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact intrinsic volumes and Grassmann angles of a cone family.
    Exact {
        /// orthant, weyl-b or subspace.
        family: String,
        /// Cone dimension (for subspace: the subspace dimension).
        n: usize,
        /// Ambient dimension, at least n (defaults to n).
        #[arg(long)]
        ambient: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a single Monte Carlo estimator.
    Estimate {
        /// absorption, grassmann, solid-angle, persistence, intrinsic-mgf,
        /// intrinsic-steiner or angle-sums.
        kind: String,
        #[command(flatten)]
        params: RunArgs,
    },
    /// Run a named verification experiment, or `all` of them in sequence.
    Verify {
        experiment: String,
        #[command(flatten)]
        params: RunArgs,
    },
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Cone literal: orthant:n, weyl-b:n, subspace:d,n, simplex-tangent:n,ell
    /// or a JSON object with ambient_dim and generators.
    #[arg(long)]
    cone: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_Z_MAX)]
    z_max: f64,
    /// Comma-separated grid for the intrinsic-volume estimators.
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mgf_mode: Option<MgfModeArg>,
    /// Record wall-clock time in reports (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MgfModeArg {
    Conditioned,
    Raw,
}

impl RunArgs {
    fn has_experiment_params(&self) -> bool {
        self.cone.is_some()
            || self.n.is_some()
            || self.k.is_some()
            || self.j.is_some()
            || self.ell.is_some()
            || self.r_grid.is_some()
            || self.mgf_mode.is_some()
    }

    fn spec(&self, experiment: &str) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(experiment);
        spec.cone = self.cone.as_ref().map(|c| Value::String(c.clone()));
        spec.n = self.n;
        spec.k = self.k;
        spec.j = self.j;
        spec.ell = self.ell;
        spec.samples = self.samples;
        spec.seed = self.seed;
        spec.z_max = self.z_max;
        spec.r_grid = self.r_grid.clone();
        spec.mgf_mode = self.mgf_mode.map(|m| match m {
            MgfModeArg::Conditioned => MgfMode::Conditioned,
            MgfModeArg::Raw => MgfMode::Raw,
        });
        spec
    }
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() {
            EXIT_SOLVER
        } else {
            EXIT_USAGE
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(e: io::Error) -> Failure {
    usage(format!("cannot write output: {e}"))
}

/// Rounds to 12 significant digits.
fn decimal(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float")
}

fn exact_table(family: &str, n: usize, ambient: usize) -> Result<ExactTable, Failure> {
    if ambient < n {
        return Err(usage(format!(
            "--ambient {ambient} is smaller than n = {n}"
        )));
    }
    let mut table = match family {
        "orthant" => orthant_table(n)?,
        "weyl-b" => weyl_b_table(n)?,
        "subspace" => return Ok(subspace_table(n, ambient)?),
        other => {
            return Err(usage(format!(
                "unknown family `{other}` (expected orthant, weyl-b, subspace)"
            )))
        }
    };
    // Angles and volumes do not see the ambient dimension beyond padding.
    let zero = Fraction::new(0, 1);
    table.volumes.resize(ambient + 1, zero);
    table.angles.resize(ambient + 1, zero);
    Ok(table)
}

fn render_exact(
    family: &str,
    n: usize,
    ambient: usize,
    table: &ExactTable,
    format: Format,
) -> Result<String, Failure> {
    match format {
        Format::Json => {
            let entries = |v: &[Fraction]| -> Vec<Value> {
                v.iter()
                    .map(|f| json!({"rational": f.to_string(), "decimal": decimal(f.to_f64())}))
                    .collect()
            };
            let doc = json!({
                "family": family,
                "n": n,
                "ambient": ambient,
                "upsilon": entries(&table.volumes),
                "gamma": entries(&table.angles),
            });
            Ok(serde_json::to_string_pretty(&doc).expect("plain data") + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(EXACT_CSV_HEADER).map_err(csv_failure)?;
            for (i, (v, g)) in table.volumes.iter().zip(&table.angles).enumerate() {
                w.write_record([
                    family.to_string(),
                    ambient.to_string(),
                    i.to_string(),
                    v.to_string(),
                    decimal(v.to_f64()).to_string(),
                    g.to_string(),
                    decimal(g.to_f64()).to_string(),
                ])
                .map_err(csv_failure)?;
            }
            finish_csv(w)
        }
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    usage(format!("csv output: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, Failure> {
    let bytes = w
        .into_inner()
        .map_err(|e| usage(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn render_reports(
    reports: &[ExperimentReport],
    bundle: bool,
    format: Format,
) -> Result<String, Failure> {
    match format {
        Format::Json => {
            let text = if bundle {
                serde_json::to_string_pretty(&BundleReport::new(reports.to_vec()))
            } else {
                serde_json::to_string_pretty(&reports[0])
            };
            Ok(text.expect("plain data") + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(REPORT_CSV_HEADER).map_err(csv_failure)?;
            for r in reports {
                for e in &r.estimates {
                    w.write_record([
                        r.experiment.clone(),
                        e.name.clone(),
                        e.value.to_string(),
                        opt(e.stderr),
                        e.samples.to_string(),
                        opt(e.exact),
                        opt(e.z),
                        opt(e.tolerance),
                        e.pass.to_string(),
                    ])
                    .map_err(csv_failure)?;
                }
            }
            finish_csv(w)
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_failure),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(io_failure),
    }
}

fn run_timed(spec: &ExperimentSpec, timing: bool) -> Result<ExperimentReport, Failure> {
    let start = Instant::now();
    let mut report = run_experiment(spec)?;
    if timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    Ok(report)
}

fn run_reports(names: &[&str], bundle: bool, params: &RunArgs) -> Result<ExitCode, Failure> {
    let work = || -> Result<Vec<ExperimentReport>, Failure> {
        names
            .iter()
            .map(|name| run_timed(&params.spec(name), params.timing))
            .collect()
    };
    let reports = match params.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| usage(format!("cannot start {t} worker threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    emit(
        &render_reports(&reports, bundle, params.output.format)?,
        &params.output.out,
    )?;
    Ok(if reports.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_STATISTICAL)
    })
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Exact {
            family,
            n,
            ambient,
            output,
        } => {
            let ambient = ambient.unwrap_or(n);
            let table = exact_table(&family, n, ambient)?;
            emit(
                &render_exact(&family, n, ambient, &table, output.format)?,
                &output.out,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { kind, params } => {
            if !ESTIMATE_KINDS.iter().any(|(k, _)| *k == kind) {
                let kinds: Vec<&str> = ESTIMATE_KINDS.iter().map(|(k, _)| *k).collect();
                return Err(usage(format!(
                    "unknown estimator `{kind}`; expected one of {}",
                    kinds.join(", ")
                )));
            }
            run_reports(&[kind.as_str()], false, &params)
        }
        Command::Verify { experiment, params } => {
            if experiment == "all" {
                if params.has_experiment_params() {
                    return Err(usage(
                        "verify all runs every experiment with its own defaults; \
                         only --samples, --seed, --z-max, --threads, --format, --out and --timing apply",
                    ));
                }
                run_reports(&EXPERIMENTS, true, &params)
            } else if EXPERIMENTS.contains(&experiment.as_str()) {
                run_reports(&[experiment.as_str()], false, &params)
            } else {
                Err(usage(format!(
                    "unknown experiment `{experiment}`; expected all or one of {}",
                    EXPERIMENTS.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_errors_map_to_exit_four() {
        let e = Error::IterationLimit {
            solver: "nnls",
            limit: 10,
        };
        assert_eq!(Failure::from(e).code, EXIT_SOLVER);
        let e = Error::DegenerateSamples {
            what: "image",
            degenerate: 5,
            samples: 10,
        };
        assert_eq!(Failure::from(e).code, EXIT_SOLVER);
        assert_eq!(
            Failure::from(Error::InvalidInput("x".into())).code,
            EXIT_USAGE
        );
    }

    #[test]
    fn decimals_keep_twelve_significant_digits() {
        assert_eq!(decimal(1.0 / 3.0), 0.333333333333);
        assert_eq!(decimal(0.0), 0.0);
        assert_eq!(decimal(123456.7890123456), 123456.789012);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
