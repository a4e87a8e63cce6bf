//! Command-line driver.
//!
//! Exit codes: 0 success, 1 validation error, 2 computation error,
//! 3 verification-suite failure.

use clap::{Parser, Subcommand, ValueEnum};
use dyadic_sharp::haar::{apply_shift, dyadic_hilbert_spec, HaarShiftSpec, TruncationPolicy};
use dyadic_sharp::lerner::{decompose, shift_domination, verify_decomposition};
use dyadic_sharp::weighted::{
    ap_constant, power_weight, weighted_operator_norm, NormMethod,
};
use dyadic_sharp::{DyadicInterval, Error, GridConfig, StepFunction};
use dyadic_sharp_cli::compare::{hilbert_compare, CompareConfig};
use dyadic_sharp_cli::probe::lp_lower_probe;
use dyadic_sharp_cli::selftest::{run_selftest, SelftestOptions};
use dyadic_sharp_cli::sweep::{run_sweep, to_csv, SweepConfig, DEFAULT_ALPHAS, DEFAULT_DEPTH};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dyadic-sharp", version, about = "Dyadic shift operators and weighted norm estimation on exact grids")]
struct Cli {
    /// Base seed for all randomized computations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Grid depth (cells = 2^depth).
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Write the result to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Dense,
    Power,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a weight as a step-function JSON file.
    GenWeight {
        /// Power-weight exponent in (-1, 1).
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Constant weight value (> 0) instead of a power weight.
        #[arg(long)]
        constant: Option<f64>,
    },
    /// Dyadic A_p constant of a weight.
    A2 {
        /// Weight file (step-function JSON); mutually exclusive with --alpha.
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Apply a shift operator to a step function.
    ShiftApply {
        /// Operator: the built-in name "hd" or a spec JSON file.
        #[arg(long, default_value = "hd")]
        spec: String,
        /// Input step function (JSON file).
        #[arg(long)]
        input: PathBuf,
    },
    /// Weighted operator norm of the built-in operator.
    Norm {
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value_t = MethodArg::Power)]
        method: MethodArg,
    },
    /// Build and verify the stopping-time decomposition of an input.
    LernerVerify {
        #[arg(long)]
        input: PathBuf,
        /// Include the decomposition itself in the output.
        #[arg(long)]
        emit_decomposition: bool,
    },
    /// Two-part domination of the operator oscillation.
    Domination {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "hd")]
        spec: String,
        /// Root interval as "level,index".
        #[arg(long, default_value = "0,0")]
        q0: String,
    },
    /// Power-weight sweep.
    Sweep {
        /// Comma-separated exponents; default spans A2 from 1 upward.
        #[arg(long)]
        alphas: Option<String>,
        /// Probe exponent for the per-row L^p lower bound.
        #[arg(long)]
        lp_p: Option<f64>,
        /// Record wall-clock runtimes (breaks byte-for-byte determinism).
        #[arg(long)]
        timing: bool,
    },
    /// Lower bound for the weighted L^p operator norm.
    LpProbe {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        p: f64,
    },
    /// Compare the grid-averaged operator against the closed form.
    HilbertCompare {
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 256)]
        shifts: u32,
        #[arg(long, default_value_t = 8)]
        dilations: u32,
    },
    /// Run the built-in verification suite.
    Selftest {
        /// Deliberately corrupt a decomposition to prove the checks bite.
        #[arg(long, hide = true)]
        inject_tamper: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    if cli.format == Format::Csv && !matches!(cli.command, Command::Sweep { .. }) {
        return Err(Error::InvalidStepFunction(
            "csv output is only defined for the sweep command".into(),
        ));
    }
    match &cli.command {
        Command::GenWeight { alpha, constant } => {
            let depth = resolve_depth(cli, 8)?;
            let w = match (alpha, constant) {
                (Some(a), None) => power_weight(*a, depth)?,
                (None, Some(c)) if *c > 0.0 => StepFunction::constant(depth, *c),
                (None, Some(c)) => {
                    return Err(Error::NonpositiveWeight {
                        index: 0,
                        value: *c,
                    })
                }
                _ => {
                    return Err(Error::InvalidStepFunction(
                        "pass exactly one of --alpha or --constant".into(),
                    ))
                }
            };
            emit(cli, &w)
        }
        Command::A2 { weight, alpha, p } => {
            let depth = resolve_depth(cli, 8)?;
            let w = load_weight(weight.as_deref(), *alpha, depth)?;
            let report = ap_constant(&w, *p)?;
            emit(cli, &report)
        }
        Command::ShiftApply { spec, input } => {
            let f = read_function(input)?;
            let spec = load_spec(spec, f.depth())?;
            let g = apply_shift(&spec, &f, &TruncationPolicy { depth: f.depth() })?;
            emit(cli, &g)
        }
        Command::Norm {
            weight,
            alpha,
            method,
        } => {
            let depth = resolve_depth(cli, 8)?;
            let w = load_weight(weight.as_deref(), *alpha, depth)?;
            let spec = dyadic_hilbert_spec(w.depth())?;
            let method = match method {
                MethodArg::Dense => NormMethod::Dense,
                MethodArg::Power => NormMethod::PowerIteration,
            };
            let report = weighted_operator_norm(&spec, &w, w.depth(), method)?;
            emit(cli, &report)
        }
        Command::LernerVerify {
            input,
            emit_decomposition,
        } => {
            let f = read_function(input)?;
            let dec = decompose(&f, &DyadicInterval::root())?;
            let report = verify_decomposition(&f, &dec);
            #[derive(Serialize)]
            struct Out {
                passed: bool,
                report: dyadic_sharp::lerner::VerificationReport,
                #[serde(skip_serializing_if = "Option::is_none")]
                decomposition: Option<serde_json::Value>,
            }
            let passed = report.passed();
            let out = Out {
                passed,
                report,
                decomposition: emit_decomposition.then(|| dec.to_audit_json()),
            };
            emit_with_code(cli, &out, if passed { 0 } else { 2 })
        }
        Command::Domination { input, spec, q0 } => {
            let f = read_function(input)?;
            let spec = load_spec(spec, f.depth())?;
            let q0 = parse_interval(q0)?;
            let bound = shift_domination(&f, &spec, &q0)?;
            #[derive(Serialize)]
            struct Out {
                empirical_constant: f64,
                maximal_part: StepFunction,
                oscillation_part: StepFunction,
            }
            emit(
                cli,
                &Out {
                    empirical_constant: bound.empirical_constant,
                    maximal_part: bound.maximal_part,
                    oscillation_part: bound.oscillation_part,
                },
            )
        }
        Command::Sweep {
            alphas,
            lp_p,
            timing,
        } => {
            let depth = resolve_depth(cli, DEFAULT_DEPTH)?;
            let alphas = match alphas {
                Some(s) => parse_floats(s)?,
                None => DEFAULT_ALPHAS.to_vec(),
            };
            let cfg = SweepConfig {
                alphas,
                depth,
                seed: cli.seed,
                lp_probe_p: *lp_p,
                timing: *timing,
                ..SweepConfig::default()
            };
            let result = run_sweep(&cfg)?;
            match cli.format {
                Format::Csv => write_text(cli, &to_csv(&result)),
                Format::Json => emit(cli, &result),
            }
        }
        Command::LpProbe { alpha, p } => {
            let depth = resolve_depth(cli, 10)?;
            emit(cli, &lp_lower_probe(*alpha, *p, depth)?)
        }
        Command::HilbertCompare {
            a,
            b,
            shifts,
            dilations,
        } => {
            let depth = resolve_depth(cli, 9)?;
            let report = hilbert_compare(&CompareConfig {
                a: *a,
                b: *b,
                shifts: *shifts,
                dilations: *dilations,
                depth,
                seed: cli.seed,
            })?;
            emit(cli, &report)
        }
        Command::Selftest { inject_tamper } => {
            let outcome = run_selftest(&SelftestOptions {
                seed: cli.seed,
                inject_tamper: *inject_tamper,
            });
            for item in &outcome.items {
                let status = if item.passed { "pass" } else { "FAIL" };
                eprintln!("{status}  {}  {}", item.name, item.detail);
            }
            let passed = outcome.passed();
            emit_with_code(cli, &outcome, if passed { 0 } else { 3 })
        }
    }
}

fn resolve_depth(cli: &Cli, default: u32) -> Result<u32, Error> {
    let depth = cli.depth.unwrap_or(default);
    GridConfig::new(depth, 0)?;
    Ok(depth)
}

fn read_function(path: &PathBuf) -> Result<StepFunction, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidStepFunction(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidStepFunction(e.to_string()))
}

fn load_weight(path: Option<&std::path::Path>, alpha: Option<f64>, depth: u32) -> Result<StepFunction, Error> {
    let w = match (path, alpha) {
        (Some(p), None) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidStepFunction(format!("{}: {e}", p.display())))?;
            let w: StepFunction =
                serde_json::from_str(&text).map_err(|e| Error::InvalidStepFunction(e.to_string()))?;
            w
        }
        (None, Some(a)) => power_weight(a, depth)?,
        _ => {
            return Err(Error::InvalidStepFunction(
                "pass exactly one of --weight or --alpha".into(),
            ))
        }
    };
    w.validate_weight()?;
    Ok(w)
}

fn load_spec(name: &str, depth: u32) -> Result<HaarShiftSpec, Error> {
    if name == "hd" {
        return dyadic_hilbert_spec(depth);
    }
    let text = std::fs::read_to_string(name)
        .map_err(|e| Error::InvalidStepFunction(format!("{name}: {e}")))?;
    HaarShiftSpec::from_json(&text)
}

fn parse_interval(s: &str) -> Result<DyadicInterval, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidInterval { level: -1, index: 0 });
    }
    let level: u32 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInterval { level: -1, index: 0 })?;
    let index: u64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInterval { level: level as i64, index: 0 })?;
    DyadicInterval::new(level, index)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::BadExponent(f64::NAN))
        })
        .collect()
}

fn emit<T: Serialize>(cli: &Cli, value: &T) -> Result<ExitCode, Error> {
    emit_with_code(cli, value, 0)
}

fn emit_with_code<T: Serialize>(cli: &Cli, value: &T, code: u8) -> Result<ExitCode, Error> {
    let text = match cli.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value)
                .map_err(|e| Error::InvalidStepFunction(e.to_string()))?;
            s.push('\n');
            s
        }
        // non-sweep csv requests are rejected up front in dispatch
        Format::Csv => unreachable!("csv emission outside the sweep"),
    };
    write_text_str(cli, &text)?;
    Ok(ExitCode::from(code))
}

fn write_text(cli: &Cli, text: &str) -> Result<ExitCode, Error> {
    write_text_str(cli, text)?;
    Ok(ExitCode::SUCCESS)
}

fn write_text_str(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidStepFunction(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
