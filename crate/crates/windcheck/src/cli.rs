//! Command-line surface.
//!
//! Exit codes: 0 ok, 2 config or model error, 3 formula error, 4 numeric
//! failure (solver did not converge).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use windcheck_core::battery::BatteryVariant;
use windcheck_core::gcl::{self, BuildOptions};
use windcheck_core::mission::{build_mission_model, emit_model, MissionConfig};
use windcheck_core::pctl::{check, parse_formula, CheckError};
use windcheck_core::sim::{simulate_trace, DEFAULT_STEP_CAP};
use windcheck_core::Dtmc;

use crate::config::resolve;
use crate::explicit;
use crate::simulate::{expected_reward, pick_traces, reach_probability, write_trace_csv};
use crate::sweep::{
    fmt_value, run_sweep, write_sweep_csv, Property, SweepParam, SweepSpec, CSV_VERSION_LINE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FORMULA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "windcheck",
    version,
    about = "Probabilistic model checking of a drone wind-farm inspection mission"
)]
pub struct Cli {
    /// Built-in scenario 1 to 4 (sets safe_t and p_wsp_c).
    #[arg(long, global = true)]
    pub scenario: Option<u32>,
    /// Mission config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Battery model variant.
    #[arg(long, global = true, value_parser = parse_variant)]
    pub variant: Option<BatteryVariant>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for simulation.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check properties (default: success probability, mission time, recharges).
    Verify {
        formulas: Vec<String>,
        /// Check a guarded-command model file instead of the mission.
        #[arg(long, conflicts_with = "explicit")]
        model: Option<PathBuf>,
        /// Check an explicit-state chain file instead of the mission.
        #[arg(long)]
        explicit: Option<PathBuf>,
        /// Include per-state values in JSON output.
        #[arg(long)]
        per_state: bool,
    },
    /// Estimate the mission properties by sampling.
    Simulate {
        #[arg(short = 'n', long = "samples", default_value_t = 10_000)]
        n: u64,
        /// Write example traces here, preferring failing ones.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Number of traces to write; extra traces get a numeric suffix.
        #[arg(long, default_value_t = 1)]
        traces: usize,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: u64,
    },
    /// Sweep one parameter over a grid and write CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        step: f64,
        /// Variants to evaluate (default: all four).
        #[arg(long = "variants", value_parser = parse_variant, value_delimiter = ',')]
        variants: Vec<BatteryVariant>,
        /// Property columns as `name=formula` (default: success, mt, rc).
        #[arg(long = "property")]
        properties: Vec<String>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the generated mission model.
    EmitModel {
        #[arg(long, value_enum, default_value_t = ModelFormat::Gcl)]
        format: ModelFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    Gcl,
    Explicit,
}

fn parse_variant(s: &str) -> Result<BatteryVariant, String> {
    BatteryVariant::from_name(s).ok_or_else(|| {
        format!("unknown variant `{s}` (advanced, basic_high, basic_medium, basic_low)")
    })
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

fn formula_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FORMULA,
        message: e.to_string(),
    }
}

fn check_err(e: CheckError) -> Failure {
    let code = match e {
        CheckError::NotConverged { .. } => EXIT_NUMERIC,
        _ => EXIT_FORMULA,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("output: {e}"),
    }
}

fn json_value(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_value(x))
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn mission_config(cli: &Cli) -> Result<MissionConfig, Failure> {
    resolve(cli.scenario, cli.config.as_deref(), cli.variant).map_err(config_err)
}

fn mission_chain(cli: &Cli) -> Result<Dtmc, Failure> {
    let c = mission_config(cli)?;
    build_mission_model(&c).map(|m| m.dtmc).map_err(config_err)
}

fn dispatch(cli: &Cli, out: &mut Vec<u8>) -> Result<(), Failure> {
    match &cli.command {
        Command::Verify {
            formulas,
            model,
            explicit,
            per_state,
        } => {
            let d = match (model, explicit) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                    let sym = gcl::parse_model(&text)
                        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                    gcl::compose_and_build(&sym, &BuildOptions::default()).map_err(config_err)?
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                    explicit::deserialize(&text)
                        .map_err(|e| config_err(format!("{}: {e}", path.display())))?
                }
                (None, None) => mission_chain(cli)?,
            };
            let formulas: Vec<String> = if formulas.is_empty() {
                Property::mission_defaults()
                    .into_iter()
                    .map(|p| p.formula)
                    .collect()
            } else {
                formulas.clone()
            };
            let parsed = formulas
                .iter()
                .map(|f| parse_formula(f).map_err(|e| formula_err(format!("`{f}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let results = parsed
                .iter()
                .map(|f| check(&d, f).map_err(check_err))
                .collect::<Result<Vec<_>, _>>()?;
            if cli.json {
                let records: Vec<Value> = formulas
                    .iter()
                    .zip(&results)
                    .map(|(f, r)| {
                        let mut rec = json!({
                            "formula": f,
                            "value": json_value(r.value),
                            "iterations": r.iterations,
                            "residual": r.residual,
                        });
                        if *per_state {
                            rec["per_state"] =
                                Value::Array(r.per_state.iter().map(|&x| json_value(x)).collect());
                        }
                        rec
                    })
                    .collect();
                let doc = json!({
                    "states": d.n_states(),
                    "transitions": d.n_transitions(),
                    "results": records,
                });
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&doc).map_err(io_err)?
                )
                .map_err(io_err)?;
            } else {
                writeln!(
                    out,
                    "states {}\ntransitions {}",
                    d.n_states(),
                    d.n_transitions()
                )
                .map_err(io_err)?;
                for (f, r) in formulas.iter().zip(&results) {
                    writeln!(
                        out,
                        "{f}\t{}\titerations={} residual={:e}",
                        fmt_value(r.value),
                        r.iterations,
                        r.residual
                    )
                    .map_err(io_err)?;
                }
            }
            Ok(())
        }
        Command::Simulate {
            n,
            trace_out,
            traces,
            step_cap,
        } => {
            let d = mission_chain(cli)?;
            let seed = cli.seed;
            let sim = |e: windcheck_core::sim::SimError| formula_err(e);
            let estimates = [
                (
                    "success",
                    reach_probability(&d, "success", *n, seed, *step_cap).map_err(sim)?,
                ),
                (
                    "mt",
                    expected_reward(&d, "mt", "done", *n, seed, *step_cap).map_err(sim)?,
                ),
                (
                    "rc",
                    expected_reward(&d, "rc", "done", *n, seed, *step_cap).map_err(sim)?,
                ),
            ];
            let exact: Vec<f64> = Property::mission_defaults()
                .iter()
                .map(|p| {
                    check(&d, &parse_formula(&p.formula).expect("built-in query")).map(|r| r.value)
                })
                .collect::<Result<_, _>>()
                .map_err(check_err)?;
            if cli.json {
                let recs: Vec<Value> = estimates
                    .iter()
                    .zip(&exact)
                    .map(|((name, e), x)| {
                        json!({
                            "property": name,
                            "mean": e.mean,
                            "half_width": e.half_width,
                            "n_samples": e.n_samples,
                            "seed": e.seed,
                            "truncated": e.truncated,
                            "degenerate": e.degenerate,
                            "exact": json_value(*x),
                        })
                    })
                    .collect();
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&Value::Array(recs)).map_err(io_err)?
                )
                .map_err(io_err)?;
            } else {
                writeln!(out, "states {}\nsamples {n} seed {seed}", d.n_states())
                    .map_err(io_err)?;
                for ((name, e), x) in estimates.iter().zip(&exact) {
                    let mut flags = String::new();
                    if e.truncated {
                        flags.push_str(" truncated");
                    }
                    if e.degenerate {
                        flags.push_str(" degenerate");
                    }
                    writeln!(
                        out,
                        "{name}\t{} ± {}\texact {}{flags}",
                        e.mean,
                        e.half_width,
                        fmt_value(*x)
                    )
                    .map_err(io_err)?;
                }
            }
            if let Some(path) = trace_out {
                for (j, i) in pick_traces(&d, "fail", *n, *traces, seed, *step_cap)
                    .into_iter()
                    .enumerate()
                {
                    let trace = simulate_trace(&d, seed, i, *step_cap);
                    let target = if j == 0 {
                        path.clone()
                    } else {
                        suffixed(path, j)
                    };
                    let file = std::fs::File::create(&target)
                        .map_err(|e| config_err(format!("{}: {e}", target.display())))?;
                    write_trace_csv(&d, &trace, std::io::BufWriter::new(file)).map_err(io_err)?;
                }
            }
            Ok(())
        }
        Command::Sweep {
            param,
            lo,
            hi,
            step,
            variants,
            properties,
            out: path,
        } => {
            let base = mission_config(cli)?;
            let spec = SweepSpec {
                parameter: *param,
                lo: *lo,
                hi: *hi,
                step: *step,
                variants: if variants.is_empty() {
                    BatteryVariant::ALL.to_vec()
                } else {
                    variants.clone()
                },
                properties: if properties.is_empty() {
                    Property::mission_defaults()
                } else {
                    properties.iter().map(|p| Property::parse(p)).collect()
                },
            };
            let rows = run_sweep(&base, &spec).map_err(|e| match e {
                crate::sweep::SweepError::Formula { .. } => formula_err(e),
                _ => config_err(e),
            })?;
            match path {
                Some(p) => {
                    let file = std::fs::File::create(p)
                        .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                    write_sweep_csv(std::io::BufWriter::new(file), &spec, &rows).map_err(io_err)?;
                }
                None => write_sweep_csv(&mut *out, &spec, &rows).map_err(io_err)?,
            }
            Ok(())
        }
        Command::EmitModel { format } => {
            let c = mission_config(cli)?;
            match format {
                ModelFormat::Gcl => {
                    write!(out, "{}", emit_model(&c).map_err(config_err)?).map_err(io_err)?
                }
                ModelFormat::Explicit => {
                    let d = build_mission_model(&c).map_err(config_err)?.dtmc;
                    write!(out, "{}", explicit::serialize(&d)).map_err(io_err)?
                }
            }
            Ok(())
        }
    }
}

fn suffixed(path: &std::path::Path, j: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match path.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_{j}.{ext}"),
        None => format!("{stem}_{j}"),
    };
    path.with_file_name(name)
}

/// Header comment for text reports.
pub fn version_line() -> &'static str {
    CSV_VERSION_LINE
}
