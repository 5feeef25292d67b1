use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sdi_core::cartography::{ensemble_study, extract_regions, sweep, Predicate, UncertaintyMode};
use sdi_core::config::{preset, RunConfig, PRESET_NAMES};
use sdi_core::indicators::Selection;
use sdi_core::io;
use sdi_core::verify::{self, VerifyOptions};
use sdi_core::{basis::UncertaintyBox, SdiError};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "sdi", version, about = "Stochastic dynamical indicator cartography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute indicator fields over a grid of initial conditions.
    Field(FieldArgs),
    /// Threshold a field column and report connected regions.
    Regions(RegionArgs),
    /// Propagate a bundle of trajectories with sampled parameters.
    Ensemble(EnsembleArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in study preset.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    /// TOML or JSON run configuration, or a field CSV written by `sdi field`.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Final time.
    #[arg(long)]
    tf: Option<f64>,
    /// Total polynomial degree of the expansion.
    #[arg(long)]
    degree: Option<usize>,
    /// Quadrature nodes per uncertain dimension.
    #[arg(long = "quad-n")]
    quad_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SDI_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Grid size as WxH.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Radius for the expectation-within-epsilon indicator.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated indicators: ftle, sftle1, sftle2, alpha, expectation, all.
    #[arg(long)]
    indicator: Option<String>,
    /// Expand over a cube of this edge around each initial state instead of the parameters.
    #[arg(long = "ic-uncertainty", value_name = "EDGE")]
    ic_uncertainty: Option<f64>,
    /// Also write a PGM heatmap of this column.
    #[arg(long, value_name = "COLUMN")]
    pgm: Option<String>,
}

#[derive(Args)]
struct RegionArgs {
    /// Field CSV written by `sdi field`.
    field: PathBuf,
    #[arg(long, default_value = "alpha")]
    column: String,
    /// Keep cells with value below this threshold.
    #[arg(long, conflicts_with = "band", allow_negative_numbers = true)]
    below: Option<f64>,
    /// Keep cells with LO <= value <= HI.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    band: Option<Vec<f64>>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Initial state, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    z0: Vec<f64>,
    /// Number of realizations.
    #[arg(long, default_value_t = 10)]
    n: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smaller grids and fewer Monte Carlo samples.
    #[arg(long)]
    quick: bool,
    /// Corrupt a basis norm; the variance check must then fail.
    #[arg(long = "inject-fault")]
    inject_fault: bool,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
    #[arg(long, env = "SDI_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w = w.trim().parse().map_err(|_| format!("bad width '{w}'"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height '{h}'"))?;
    Ok((w, h))
}

enum Failure {
    Config(String),
    Runtime(String),
    Verify,
}

impl From<SdiError> for Failure {
    fn from(e: SdiError) -> Self {
        match e {
            SdiError::Config(_) | SdiError::Parse { .. } | SdiError::InvalidInput(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Field(a) => cmd_field(a),
        Command::Regions(a) => cmd_regions(a),
        Command::Ensemble(a) => cmd_ensemble(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verify) => ExitCode::from(3),
    }
}

/// Reads a config file. A field CSV is accepted too, through its `config` header line.
fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    if path.extension().is_some_and(|e| e == "csv") {
        let (_, header) = io::read_field_csv(BufReader::new(File::open(path)?))?;
        let json = header.get("config").ok_or_else(|| Failure::Config(format!("{} has no config header", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(json).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.validate()?;
        return Ok(cfg);
    }
    Ok(RunConfig::from_path(path)?)
}

fn base_config(run: &RunArgs) -> Result<RunConfig, Failure> {
    match (&run.preset, &run.config) {
        (Some(name), None) => Ok(preset(name)?),
        (None, Some(path)) => load_config(path),
        _ => Err(Failure::Config("one of --preset or --config is required".into())),
    }
}

fn apply_run_overrides(cfg: &mut RunConfig, run: &RunArgs) {
    if let Some(tf) = run.tf {
        cfg.indicators.tf = tf;
    }
    if let Some(d) = run.degree {
        cfg.indicators.degree = d;
    }
    if let Some(n) = run.quad_n {
        cfg.indicators.n_per_dim = n;
    }
    if let Some(s) = run.seed {
        cfg.indicators.seed = s;
    }
    if let Some(w) = run.workers {
        cfg.workers = w;
    }
    if let Some(out) = &run.out {
        cfg.output = out.clone();
    }
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn mode_summary(mode: &UncertaintyMode) -> (String, String) {
    match mode {
        UncertaintyMode::Parameters { bounds } => {
            let b: Vec<String> = bounds.iter().map(|(lo, hi)| format!("[{lo}, {hi}]")).collect();
            ("parameter_box".into(), b.join(" x "))
        }
        UncertaintyMode::InitialState { params, edge } => ("initial_state_edge".into(), format!("{edge} (params {params:?})")),
    }
}

/// Config as echoed into data files. Worker count and output directory do
/// not affect the results, so they are left out and the files stay
/// byte-identical across both.
fn echo_config(cfg: &RunConfig) -> Result<String, Failure> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("workers");
        obj.remove("output");
    }
    Ok(v.to_string())
}

fn cmd_field(a: FieldArgs) -> Result<(), Failure> {
    let mut cfg = base_config(&a.run)?;
    if let Some(edge) = a.ic_uncertainty {
        cfg = cfg.with_ic_uncertainty(edge);
    }
    apply_run_overrides(&mut cfg, &a.run);
    if let Some((w, h)) = a.grid {
        cfg.set_grid_size(w, h);
    }
    if let Some(eps) = a.epsilon {
        cfg.indicators.epsilon = eps;
    }
    if let Some(list) = &a.indicator {
        cfg.selection = Selection::parse(list).ok_or_else(|| Failure::Config(format!("unknown indicator list '{list}'")))?;
    }
    cfg.validate()?;

    let system = cfg.build_system()?;
    let field = sweep(system.as_ref(), &cfg.grid, &cfg.sweep_config())?;
    let table = field.table();

    fs::create_dir_all(&cfg.output)?;
    let (mode_key, mode_value) = mode_summary(&cfg.mode);
    let header: Vec<(String, String)> = vec![
        ("tool".into(), format!("sdi {VERSION}")),
        ("system".into(), cfg.system.clone()),
        ("preset".into(), cfg.preset.clone().unwrap_or_else(|| "none".into())),
        (mode_key, mode_value),
        ("tf".into(), cfg.indicators.tf.to_string()),
        ("degree".into(), cfg.indicators.degree.to_string()),
        ("quad_n".into(), cfg.indicators.n_per_dim.to_string()),
        ("seed".into(), cfg.indicators.seed.to_string()),
        ("grid".into(), format!("{}x{}", table.nx, table.ny)),
        ("config".into(), echo_config(&cfg)?),
    ];
    let csv_path = cfg.output.join("field.csv");
    io::write_field_csv(BufWriter::new(File::create(&csv_path)?), &table, &header)?;

    let mut status_counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in &table.status {
        *status_counts.entry(s.to_string()).or_default() += 1;
    }
    let mut files = vec!["field.csv".to_string()];
    if let Some(col) = &a.pgm {
        let values = table.column(col)?;
        io::write_pgm(BufWriter::new(File::create(cfg.output.join("field.pgm"))?), &values, table.nx, table.ny)?;
        files.push("field.pgm".into());
    }
    let meta = serde_json::json!({
        "tool": "sdi",
        "version": VERSION,
        "timestamp_unix": unix_time(),
        "seed": cfg.indicators.seed,
        "elapsed_secs": field.elapsed_secs,
        "workers": cfg.workers,
        "columns": table.columns,
        "status_counts": status_counts,
        "files": files,
        "config": cfg,
    });
    fs::write(cfg.output.join("field.meta.json"), serde_json::to_string_pretty(&meta)?)?;
    println!(
        "wrote {} ({} cells, {:.2} s, {} workers)",
        csv_path.display(),
        table.rows.len(),
        field.elapsed_secs,
        cfg.workers
    );
    Ok(())
}

fn cmd_regions(a: RegionArgs) -> Result<(), Failure> {
    let predicate = match (a.below, &a.band) {
        (Some(t), None) => Predicate::Below { threshold: t },
        (None, Some(b)) if b[0] <= b[1] => Predicate::Band { lo: b[0], hi: b[1] },
        (None, Some(_)) => return Err(Failure::Config("band needs LO <= HI".into())),
        _ => return Err(Failure::Config("one of --below or --band is required".into())),
    };
    let file = File::open(&a.field).map_err(|e| Failure::Config(format!("{}: {e}", a.field.display())))?;
    let (table, _) = io::read_field_csv(BufReader::new(file))?;
    let mask = extract_regions(&table, &a.column, predicate)?;
    fs::create_dir_all(&a.out)?;
    io::write_mask_csv(BufWriter::new(File::create(a.out.join("mask.csv"))?), &table, &mask)?;
    fs::write(a.out.join("components.json"), io::regions_json(&mask)?)?;
    println!("{} of {} cells selected in {} components", mask.count(), mask.mask.len(), mask.components.len());
    Ok(())
}

fn cmd_ensemble(a: EnsembleArgs) -> Result<(), Failure> {
    let mut cfg = base_config(&a.run)?;
    apply_run_overrides(&mut cfg, &a.run);
    cfg.validate()?;
    let system = cfg.build_system()?;
    let bounds = match &cfg.mode {
        UncertaintyMode::Parameters { bounds } => bounds.clone(),
        UncertaintyMode::InitialState { .. } => {
            return Err(Failure::Config("ensembles need a parameter box, not initial-state mode".into()))
        }
    };
    if a.z0.len() != system.state_dim() {
        return Err(Failure::Config(format!("{} needs a {}-component z0", cfg.system, system.state_dim())));
    }
    let pbox = UncertaintyBox::from_bounds(&bounds)?;
    let ic = &cfg.indicators;
    let pool = rayon_pool(cfg.workers)?;
    let study = pool.install(|| ensemble_study(system.as_ref(), &a.z0, &pbox, a.n, ic.t0, ic.tf, &ic.integrator, ic.seed))?;

    fs::create_dir_all(&cfg.output)?;
    let header = vec![
        ("tool".into(), format!("sdi {VERSION}")),
        ("system".into(), cfg.system.clone()),
        ("z0".into(), format!("{:?}", a.z0)),
        ("realizations".into(), a.n.to_string()),
        ("seed".into(), ic.seed.to_string()),
        ("terminal_spread".into(), study.terminal_spread.to_string()),
        ("config".into(), echo_config(&cfg)?),
    ];
    let path = cfg.output.join("ensemble.csv");
    io::write_ensemble_csv(BufWriter::new(File::create(&path)?), &study, &system.component_names(), &header)?;
    println!("wrote {} ({} realizations, terminal spread {:.3e})", path.display(), a.n, study.terminal_spread);
    Ok(())
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Failure::Runtime(e.to_string()))
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let mut opts = if a.quick { VerifyOptions::quick() } else { VerifyOptions::default() };
    opts.inject_fault = a.inject_fault;
    opts.workers = a.workers.max(1);
    if let Some(g) = a.grid {
        opts.grid = g;
    }
    if let Some(n) = a.mc_samples {
        opts.mc_samples = n;
    }
    let report = verify::run(&opts)?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = &a.out {
        fs::write(path, &json)?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: measured {:e}, tolerance {:e}", c.name, c.measured, c.tolerance);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}
