//! `bmconform` command-line front end.
//!
//! Exit codes: 0 when every verdict matches its expectation, 1 on an
//! unexpected statistical outcome, 2 on configuration errors, 3 on runtime
//! errors.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmconform::process::io::{read_binary, write_binary, write_csv};
use bmconform::process::sample_paths;
use bmconform::rng::derive_seed;
use bmconform::scenario::{
    builtin, builtin_names, emit_report, run_on_ensemble, run_scenario, RunOptions, RunReport, ScenarioConfig,
    TestSpec,
};
use bmconform::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bmconform", version, about = "Simulate transformed Brownian motions and test whether they still are one")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Number of simulated paths; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Family significance level; overrides the config.
    #[arg(long, global = true, value_name = "F")]
    alpha: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads.
    #[arg(long, global = true, env = "BMCONFORM_THREADS", value_name = "N")]
    threads: Option<usize>,
    /// Record wall-clock time and throughput in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Summary,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Summary => "summary",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PathFormat {
    Bin,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate (and transform) paths and write them to a file.
    Simulate {
        /// `bin` (little-endian header + f64 values) or `csv`.
        #[arg(long, value_enum, default_value_t = PathFormat::Bin)]
        paths_format: PathFormat,
        #[command(flatten)]
        process: ProcessArgs,
    },
    /// Run the conformance suite on a simulated process or a paths file.
    Conform {
        /// Binary paths file written by `simulate`; simulates when omitted.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[command(flatten)]
        process: ProcessArgs,
    },
    /// Run PDE diagnostics: the gallery, a config, or one field.
    Pde {
        /// Field identifier, e.g. `harmonic(re_z^2)`.
        #[arg(long)]
        field: Option<String>,
        /// Monte Carlo sample count for the integral checks.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// The radially lifted angle-doubling scenario.
    Counterexample,
    /// Run a scenario from `--config` or a builtin.
    Run {
        /// Builtin scenario name.
        #[arg(long)]
        builtin: Option<String>,
        /// List builtin scenarios and exit.
        #[arg(long)]
        list: bool,
    },
}

/// Process description used when no config is given.
#[derive(Args, Debug, Clone)]
struct ProcessArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    horizon: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value = "identity")]
    transform: String,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        2
    } else {
        3
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&text)
}

fn process_config(common: &Common, p: &ProcessArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => {
            let text = format!(
                "schema_version = 1\nname = \"cli\"\ntransform = {:?}\n[law]\ndim = {}\n[grid]\nhorizon = {}\nsteps = {}\n",
                p.transform, p.dim, p.horizon, p.steps
            );
            ScenarioConfig::from_toml(&text)?
        }
    };
    apply_overrides(&mut cfg, common);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ScenarioConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.paths {
        cfg.paths = n;
    }
    if let Some(a) = common.alpha {
        cfg.alpha = a;
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn finish(report: &RunReport, common: &Common) -> Result<u8> {
    let bytes = emit_report(report, common.format.name())?;
    let out = common.out.clone().or_else(|| report.config.output.clone().map(PathBuf::from));
    write_output(out.as_deref(), &bytes)?;
    Ok(if report.overall.expectations_met { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    let common = &cli.common;
    if let Some(alpha) = common.alpha {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
    }
    let opts = RunOptions { timing: common.timing };
    match cli.command {
        Command::Simulate { paths_format, process } => {
            let cfg = process_config(common, &process)?;
            let v = cfg.validate()?;
            let origin = ndarray_origin(&v.origin);
            let ens = sample_paths(&v.law, &v.grid, cfg.paths, &origin, derive_seed(cfg.seed, "paths", 0))
                .map_err(|e| e.in_stage("simulate"))?
                .into_transformed(&v.transform)
                .map_err(|e| e.in_stage("transform"))?;
            let mut buf = Vec::new();
            match paths_format {
                PathFormat::Bin => write_binary(&ens, &mut buf)?,
                PathFormat::Csv => write_csv(&ens, &mut buf)?,
            }
            match &common.out {
                Some(path) => {
                    let mut w = BufWriter::new(fs::File::create(path)?);
                    w.write_all(&buf)?;
                    w.flush()?;
                }
                None => write_output(None, &buf)?,
            }
            Ok(0)
        }
        Command::Conform { input, process } => {
            let mut cfg = process_config(common, &process)?;
            if common.config.is_none() || cfg.tests.is_empty() {
                cfg.tests = vec![TestSpec::Suite {
                    marginal_times: None,
                    stationarity: None,
                    independence_windows: None,
                    conditional_mean: None,
                    qv: None,
                    expect_reject: None,
                }];
            }
            let report = match input {
                None => run_scenario(&cfg, opts)?,
                Some(path) => {
                    let file = fs::File::open(&path)
                        .map_err(|e| Error::config("input", format!("{}: {e}", path.display())))?;
                    let ens = read_binary(io::BufReader::new(file)).map_err(|e| e.in_stage("read paths"))?;
                    cfg.paths = ens.n_paths();
                    cfg.law.dim = ens.dim();
                    cfg.law.drift = None;
                    cfg.law.covariance = None;
                    cfg.law.origin = Some(ens.origin().to_vec());
                    cfg.transform = "identity".into();
                    cfg.grid.horizon = None;
                    cfg.grid.steps = None;
                    cfg.grid.times = Some(ens.grid().times().to_vec());
                    run_on_ensemble(&cfg, ens, opts)?
                }
            };
            finish(&report, common)
        }
        Command::Pde { field, samples } => {
            let mut cfg = match &common.config {
                Some(path) => load_config(path)?,
                None => builtin("pde-gallery")?,
            };
            if let Some(f) = field {
                let dim = bmconform::Transform64::parse(&f).map_err(|e| Error::config("field", e.to_string()))?.input_dim();
                cfg.law = bmconform::scenario::config::LawConfig { dim, drift: None, covariance: None, origin: None };
                cfg.domain = None;
                cfg.name = "pde-field".into();
                let zero = vec![0.0; dim];
                let field = Some(f);
                cfg.tests = vec![
                    TestSpec::Laplacian { field: field.clone(), tolerance: 1e-6, expect_reject: None },
                    TestSpec::Eikonal { field: field.clone(), target: 1.0, tolerance: 1e-6, expect_reject: None },
                    TestSpec::GradientConstancy { field: field.clone(), tolerance: 1e-4, expect_reject: None },
                    TestSpec::MeanValue { field: field.clone(), x: zero.clone(), r: 0.5, samples, expect_reject: None },
                    TestSpec::JensenGap { field, tau: 1.0, x: zero, samples, expect_reject: None },
                ];
            }
            apply_overrides(&mut cfg, common);
            finish(&run_scenario(&cfg, opts)?, common)
        }
        Command::Counterexample => {
            let mut cfg = builtin("counterexample")?;
            apply_overrides(&mut cfg, common);
            finish(&run_scenario(&cfg, opts)?, common)
        }
        Command::Run { builtin: name, list } => {
            if list {
                let names: Vec<&str> = builtin_names().collect();
                write_output(None, format!("{}\n", names.join("\n")).as_bytes())?;
                return Ok(0);
            }
            let mut cfg = match (&common.config, name) {
                (Some(path), None) => load_config(path)?,
                (None, Some(n)) => builtin(&n)?,
                _ => return Err(Error::config("config", "give exactly one of --config or --builtin")),
            };
            apply_overrides(&mut cfg, common);
            finish(&run_scenario(&cfg, opts)?, common)
        }
    }
}

fn ndarray_origin(v: &[f64]) -> ndarray::Array1<f64> {
    ndarray::Array1::from(v.to_vec())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
