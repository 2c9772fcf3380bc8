//! The `slgate` command line tool.
//!
//! Precedence: built-in defaults, then the config file, then flags. The
//! config hash is taken after flags are applied, so it identifies the run
//! that actually happened.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure. Errors
//! are also reported as one JSON object on stderr. `SLGATE_WORKERS` sets the
//! number of worker threads.

pub mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::addressing::{scan_map, ScanSummary};
use crate::atomphys::recoil_energy;
use crate::mergeopt::{
    continuation_sweep, gate_report, optimize, read_pulse, write_sweep_csv, GateReport, MergeModel, Objective,
    SweepPoint, SweepRow,
};
use crate::{Error, Result};
pub use config::{RunConfig, CONFIG_VERSION};

pub const ARTIFACT_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "SLGATE_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "slgate",
    version,
    about = "Gate design for atoms in a two-color optical superlattice"
)]
pub struct Cli {
    /// TOML run configuration
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory (default: `output` from the config, else ./out)
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-qubit addressing map over (lambda2, A)
    Scan(ScanArgs),
    /// Optimize merge pulses and assemble SWAP / sqrt(SWAP) gates
    Merge(MergeArgs),
    /// Check the configuration and print derived quantities
    Validate,
    /// Re-evaluate a pulse file without optimizing
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub p_t: Option<f64>,
    /// lambda2 range, nm
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub lambda2_nm: Option<Vec<f64>>,
    /// secondary depth range
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub a: Option<Vec<f64>>,
    /// grid size along lambda2 and A
    #[arg(long, num_args = 2, value_names = ["N_LAMBDA", "N_A"])]
    pub points: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// merge durations, us; replaces the config list
    #[arg(long, num_args = 1..)]
    pub tau_us: Option<Vec<f64>>,
    /// target, all or error
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub knots: Option<usize>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed_pulse: Option<PathBuf>,
    /// write density trajectories of the final pulses
    #[arg(long)]
    pub trajectories: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// pulse file written by `merge`
    pub pulse: PathBuf,
}

/// Machine-readable failure report.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub version: u32,
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
    pub problems: Vec<String>,
}

#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub problems: Vec<String>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            problems: Vec::new(),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_config() {
            2
        } else {
            3
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            version: ARTIFACT_VERSION,
            exit_code: self.exit_code(),
            kind: if self.error.is_config() { "config" } else { "numerical" },
            message: self.error.to_string(),
            problems: self.problems.clone(),
        }
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_workers() {
        return fail(e.into());
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> i32 {
    let json = serde_json::to_string(&f.report()).expect("error report serializes");
    eprintln!("{json}");
    f.exit_code()
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
    }
    // a pool built earlier in the same process (tests) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    match &cli.command {
        Command::Scan(a) => {
            apply_scan(&mut cfg, a);
            checked(&cfg)?;
            cmd_scan(&cfg)?;
        }
        Command::Merge(a) => {
            apply_merge(&mut cfg, a)?;
            checked(&cfg)?;
            cmd_merge(&cfg)?;
        }
        Command::Validate => cmd_validate(&cfg)?,
        Command::Replay(a) => {
            checked(&cfg)?;
            cmd_replay(&cfg, &a.pulse)?;
        }
    }
    Ok(())
}

fn apply_scan(cfg: &mut RunConfig, a: &ScanArgs) {
    let ad = &mut cfg.addressing;
    if let Some(p) = a.p_t {
        ad.p_t = p;
    }
    if let Some(v) = &a.lambda2_nm {
        ad.lambda2_nm = [v[0], v[1]];
    }
    if let Some(v) = &a.a {
        ad.a = [v[0], v[1]];
    }
    if let Some(v) = &a.points {
        ad.points = [v[0], v[1]];
    }
}

fn apply_merge(cfg: &mut RunConfig, a: &MergeArgs) -> Result<()> {
    let m = &mut cfg.merge;
    if let Some(t) = &a.tau_us {
        m.tau_us = t.clone();
        m.tau_range_us = None;
    }
    if let Some(o) = &a.objective {
        m.objective = o.parse::<Objective>()?;
    }
    if let Some(k) = a.knots {
        m.knots = k;
    }
    if let Some(e) = a.max_evals {
        m.max_evals = e;
    }
    if let Some(g) = a.grid_points {
        m.grid_points = g;
    }
    if let Some(dt) = a.dt {
        m.dt = dt;
    }
    if let Some(p) = &a.seed_pulse {
        m.seed_pulse = Some(p.clone());
    }
    m.trajectories |= a.trajectories;
    Ok(())
}

fn checked(cfg: &RunConfig) -> std::result::Result<(), Failure> {
    let problems = cfg.problems();
    if problems.is_empty() {
        return Ok(());
    }
    Err(Failure {
        error: Error::Config(format!("{} problem(s) in the configuration", problems.len())),
        problems,
    })
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV artifact prefixed with `#` lines naming the schema and config hash.
fn write_csv_artifact(
    path: &Path,
    schema: &str,
    hash: &str,
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# {schema} {ARTIFACT_VERSION}")?;
    writeln!(buf, "# config_hash {hash}")?;
    body(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScanReport {
    version: u32,
    config_hash: String,
    p_t: f64,
    lambda1_nm: f64,
    eta: f64,
    points: [usize; 2],
    summary: ScanSummary,
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<()> {
    let species = cfg.load_species()?;
    let template = cfg.superlattice(&species)?;
    let (l, a) = cfg.scan_axes()?;
    let map = scan_map(&template, l, a, cfg.threshold()?, cfg.target())?;
    let hash = cfg.hash();
    let dir = output_dir(cfg)?;
    write_csv_artifact(&dir.join("scan.csv"), "slgate-scan", &hash, |b| map.write_csv(b))?;
    let summary = map.summary();
    if summary.failed_cells + summary.reduced_cells == summary.cells {
        return Err(Error::Unaddressable("no scan cell could be addressed".into()));
    }
    let report = ScanReport {
        version: ARTIFACT_VERSION,
        config_hash: hash,
        p_t: cfg.addressing.p_t,
        lambda1_nm: cfg.superlattice.lambda1_nm,
        eta: cfg.superlattice.eta,
        points: cfg.addressing.points,
        summary: summary.clone(),
    };
    write_json(&dir.join("scan_summary.json"), &report)?;
    println!(
        "scan: {} cells ({} failed, {} reduced); max P = {:.6} at lambda2 = {:.2} nm, A = {:.4}",
        summary.cells,
        summary.failed_cells,
        summary.reduced_cells,
        summary.max_success_probability,
        summary.argmax_lambda2_nm,
        summary.argmax_a
    );
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct MergePointReport {
    tau_us: f64,
    /// optimized objective of the descending and ascending passes
    passes: [Option<f64>; 2],
    failures: Vec<String>,
    pulse_file: Option<String>,
    report: Option<GateReport>,
}

#[derive(Debug, Serialize)]
struct MergeReport {
    version: u32,
    config_hash: String,
    objective: Objective,
    cycles: u32,
    points: Vec<MergePointReport>,
}

fn tau_tag(tau: f64) -> String {
    format!("{:.1}us", tau * 1e6)
}

pub fn cmd_merge(cfg: &RunConfig) -> Result<()> {
    let species = cfg.load_species()?;
    let model = MergeModel::new(&species, &cfg.merge_config()?)?;
    let taus = cfg.taus()?;
    let longest = *taus.last().expect("validated non-empty");
    let seed = match &cfg.merge.seed_pulse {
        Some(p) => read_pulse(BufReader::new(File::open(p)?))?.pulse,
        None => model.seed_pulse(longest)?,
    };
    let objective = cfg.merge.objective;
    let settings = cfg.simplex();
    let points = if taus.len() == 1 {
        let mut p = SweepPoint {
            tau: longest,
            best: None,
            passes: [None, None],
            failures: Vec::new(),
        };
        match optimize(&model, longest, &seed, objective, &settings) {
            Ok(o) => {
                p.passes[0] = Some(o.fidelity);
                p.best = Some(o);
            }
            Err(e) => {
                log::warn!("tau = {:.1} us: {e}", longest * 1e6);
                p.failures.push(e.to_string());
            }
        }
        vec![p]
    } else {
        continuation_sweep(&model, &taus, &seed, objective, &settings)?
    };

    let hash = cfg.hash();
    let dir = output_dir(cfg)?;
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for p in points {
        let mut entry = MergePointReport {
            tau_us: p.tau * 1e6,
            passes: p.passes,
            failures: p.failures,
            pulse_file: None,
            report: None,
        };
        if let Some(best) = &p.best {
            let name = format!("pulse_{}.txt", tau_tag(p.tau));
            let text = best.pulse.to_text(&hash);
            fs::write(dir.join(&name), &text)?;
            entry.pulse_file = Some(name);
            // report on the pulse as stored, so a replay reproduces it exactly
            let pulse = read_pulse(text.as_bytes())?.pulse;
            match gate_report(&model, &pulse, &hash) {
                Ok(r) => {
                    rows.push(SweepRow::from(&r));
                    entry.report = Some(r);
                }
                Err(e) => {
                    log::warn!("tau = {:.1} us: report: {e}", p.tau * 1e6);
                    entry.failures.push(format!("report: {e}"));
                }
            }
            if cfg.merge.trajectories {
                let f = BufWriter::new(File::create(dir.join(format!("trajectory_{}.txt", tau_tag(p.tau))))?);
                if let Err(e) = model.write_trajectory(&pulse, f, 200) {
                    log::warn!("tau = {:.1} us: trajectory: {e}", p.tau * 1e6);
                    entry.failures.push(format!("trajectory: {e}"));
                }
            }
        }
        out.push(entry);
    }
    write_csv_artifact(&dir.join("sweep.csv"), "slgate-sweep", &hash, |b| {
        write_sweep_csv(b, &rows)
    })?;
    let report = MergeReport {
        version: ARTIFACT_VERSION,
        config_hash: hash,
        objective,
        cycles: model.config.cycles,
        points: out,
    };
    write_json(&dir.join("merge_report.json"), &report)?;
    for r in report.points.iter().filter_map(|p| p.report.as_ref()) {
        println!(
            "tau = {:7.1} us  F_target {:.6}  F_all {:.6}  F_error {:.6}  T_swap {:7.1} us  T_sqrtswap {:7.1} us",
            r.tau * 1e6,
            r.f_target,
            r.f_all,
            r.f_error,
            r.t_swap * 1e6,
            r.t_sqrt_swap * 1e6
        );
    }
    println!("wrote {}", dir.display());
    if rows.is_empty() {
        return Err(Error::Optimizer("no duration produced a pulse".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReplayReport {
    version: u32,
    config_hash: String,
    pulse_file: String,
    /// hash recorded in the pulse file
    pulse_config_hash: String,
    report: GateReport,
}

pub fn cmd_replay(cfg: &RunConfig, pulse: &Path) -> Result<()> {
    let file = File::open(pulse).map_err(|e| Error::Config(format!("cannot open pulse {}: {e}", pulse.display())))?;
    let pf = read_pulse(BufReader::new(file))?;
    let species = cfg.load_species()?;
    let model = MergeModel::new(&species, &cfg.merge_config()?)?;
    let hash = cfg.hash();
    if pf.config_hash != hash {
        log::warn!(
            "pulse was produced under config {}, replaying under {hash}",
            pf.config_hash
        );
    }
    let report = gate_report(&model, &pf.pulse, &hash)?;
    let dir = output_dir(cfg)?;
    println!(
        "tau = {:.1} us  F_target {:.10}  F_all {:.10}  F_error {:.10}",
        report.tau * 1e6,
        report.f_target,
        report.f_all,
        report.f_error
    );
    let name = format!("replay_{}.json", tau_tag(report.tau));
    write_json(
        &dir.join(&name),
        &ReplayReport {
            version: ARTIFACT_VERSION,
            config_hash: hash,
            pulse_file: pulse.display().to_string(),
            pulse_config_hash: pf.config_hash,
            report,
        },
    )?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

pub fn cmd_validate(cfg: &RunConfig) -> std::result::Result<(), Failure> {
    checked(cfg)?;
    let species = cfg.load_species()?;
    let sl = cfg.superlattice(&species)?;
    let lambda1 = sl.lambda1;
    let lambda2 = sl.lambda2;
    let model = MergeModel::new(&species, &cfg.merge_config()?)?;
    let it = &model.interaction;
    println!("config_hash      {}", cfg.hash());
    println!("lambda1          {:.4} nm", lambda1 * 1e9);
    println!("lambda2          {:.4} nm", lambda2 * 1e9);
    println!("a_SLP            {:.4} nm", sl.slp_length()? * 1e9);
    match sl.cycles() {
        Some(n) => println!("n                {n}"),
        None => println!("n                (non-integer)"),
    }
    println!(
        "E_r(lambda1)     {:.6e} J = {:.4} kHz h",
        recoil_energy(&species, lambda1)?,
        recoil_energy(&species, lambda1)? / crate::constants::H * 1e-3
    );
    println!(
        "E_r(lambda2)     {:.6e} J = {:.4} kHz h",
        recoil_energy(&species, lambda2)?,
        recoil_energy(&species, lambda2)? / crate::constants::H * 1e-3
    );
    println!("nu_y, nu_z       {:.4}, {:.4} kHz", it.nu_y * 1e-3, it.nu_z * 1e-3);
    println!("g_1D             {:.6e} J m", it.g1d);
    println!("time unit        {:.4} us", model.units.time * 1e6);
    println!(
        "durations        {:?} us",
        cfg.taus()?.iter().map(|t| t * 1e6).collect::<Vec<_>>()
    );
    println!("ok");
    Ok(())
}
