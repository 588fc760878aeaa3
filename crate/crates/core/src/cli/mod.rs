//! Command-line pipelines.
//!
//! Every command reads a [`RunConfig`], fills in the defaults it used, writes
//! its outputs under the `out` directory and finishes by saving the resolved
//! configuration as `<command>.manifest.txt`. Passing that manifest back with
//! `--config` replays the run.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::checkpoint::{csv_string, write_csv};
use crate::cnn::{self, CnnArchitecture, CnnModel, TrainOptions};
use crate::config::RunConfig;
use crate::data::{self, LabeledDataset, MeasurementBasis, MeasurementDataset};
use crate::error::{Error, Result};
use crate::exact::{
    expectation_pauli, fidelity, momentum_occupation, ordered_ground_state, sample_measurements,
    solve_spectrum, staggered_magnetization, StateVector,
};
use crate::lattice::{mean_spin, Configuration, LatticeGeometry, Pauli, RydbergModel};
use crate::optim::OptimizerKind;
use crate::rbm::{self, Field, RbmParams, TomographyOptions, TrackedObservable};
use crate::rng::{derive_seed, Stream};
use crate::rnn::{self, GradientEstimator, RnnWavefunction, VmcOptions};

/// Levels closer than this to `e0` count as part of the ground manifold
/// when locating the gap minimum.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-2;

#[derive(Debug, Parser)]
#[command(
    name = "rydberg-nqs",
    version,
    about = "Neural quantum states for Rydberg arrays"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (`key = value` lines grouped by `[section]`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `[run] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread bound; overrides `[run] threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; overrides `[run] out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Extra `section.key=value` overrides, applied after the file.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Exact diagonalization sweep over detuning.
    Ed,
    /// Born-rule measurement data and labeled CNN snapshots.
    GenData,
    /// Train the phase classifier.
    TrainCnn,
    /// RBM tomography from measurement data.
    TrainRbm,
    /// Variational Monte Carlo with the GRU wavefunction.
    TrainRnn,
    /// Collect figure data from earlier runs.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ed => "ed",
            Command::GenData => "gen-data",
            Command::TrainCnn => "train-cnn",
            Command::TrainRbm => "train-rbm",
            Command::TrainRnn => "train-rnn",
            Command::Report => "report",
        }
    }
}

/// Exit status for each error category.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::LengthMismatch { .. } => 2,
        Error::Parse { .. } => 3,
        Error::Io(_) => 4,
        Error::TooLarge { .. } => 5,
        Error::NotConverged { .. } => 6,
        Error::NoCrossing => 7,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Failures print `error: <category>: <message>` on one line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error: usage: {first}");
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = match &e {
                Error::InvalidArgument(m) => m.clone(),
                other => other.to_string(),
            };
            let msg = msg.replace('\n', " ");
            eprintln!("error: {}: {msg}", e.category());
            exit_code(&e)
        }
    }
}

/// Resolves the configuration from `cli` and runs its command.
pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = cli.seed {
        cfg.set("run", "seed", s);
    }
    if let Some(t) = cli.threads {
        cfg.set("run", "threads", t);
    }
    if let Some(o) = &cli.out {
        cfg.set("run", "out", o.display());
    }
    run_command(cli.command, &mut cfg)
}

pub fn run_command(command: Command, cfg: &mut RunConfig) -> Result<()> {
    let summary = match command {
        Command::Ed => {
            let r = cmd_ed(cfg)?;
            format!(
                "{} detunings, gap minimum at delta={}",
                r.rows.len(),
                r.gap_minimum_delta
            )
        }
        Command::GenData => {
            let r = cmd_gen_data(cfg)?;
            format!(
                "{} detunings, {} labeled snapshots, delta_c={}",
                r.deltas.len(),
                r.n_labeled,
                r.delta_c
            )
        }
        Command::TrainCnn => {
            let r = cmd_train_cnn(cfg)?;
            let c = r
                .critical_estimate
                .map_or("none".to_string(), |d| d.to_string());
            format!(
                "test accuracy {:.4}, signal crossing at delta={c}",
                r.test_accuracy
            )
        }
        Command::TrainRbm => {
            let rows = cmd_train_rbm(cfg)?;
            format!("{} reconstructions", rows.len())
        }
        Command::TrainRnn => {
            let rows = cmd_train_rnn(cfg)?;
            format!("{} variational runs", rows.len())
        }
        Command::Report => {
            let files = cmd_report(cfg)?;
            format!("{} figure tables", files.len())
        }
    };
    let ctx = Context::new(cfg)?;
    cfg.set("run", "command", command.name());
    let manifest = ctx.out.join(format!("{}.manifest.txt", command.name()));
    cfg.save(
        &manifest,
        &format!(
            "rydberg-nqs {}\nreplay: rydberg-nqs {} --config {}",
            env!("CARGO_PKG_VERSION"),
            command.name(),
            manifest.display()
        ),
    )?;
    println!(
        "{}: {summary}; outputs in {}",
        command.name(),
        ctx.out.display()
    );
    Ok(())
}

struct Context {
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn new(cfg: &mut RunConfig) -> Result<Self> {
        let out = PathBuf::from(cfg.or("run", "out", "out".to_string())?);
        let seed = cfg.or("run", "seed", 0u64)?;
        // Everything below is single-threaded, so the bound is only validated
        // and recorded.
        let threads = cfg.or("run", "threads", 1usize)?;
        if threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        fs::create_dir_all(&out)?;
        Ok(Self { out, seed })
    }
}

pub fn model_from_config(cfg: &mut RunConfig) -> Result<RydbergModel> {
    let lx = cfg.or("model", "lx", 3usize)?;
    let ly = cfg.or("model", "ly", 3usize)?;
    let omega = cfg.or("model", "omega", 1.0)?;
    let delta = cfg.or("model", "delta", 0.0)?;
    let v0 = cfg.or("model", "v0", 3.0)?;
    let cutoff = cfg.or("model", "cutoff", 3usize)?;
    RydbergModel::new(LatticeGeometry::new(lx, ly)?, omega, delta, v0, cutoff)
}

/// `min, min + step, …` up to `max` inclusive.
pub fn detuning_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(Error::invalid(
            "detuning grid needs step > 0 and max >= min",
        ));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Explicit `deltas` list if present, otherwise the grid keys of `section`.
fn deltas_from(cfg: &mut RunConfig, section: &str) -> Result<Vec<f64>> {
    if cfg.get(section, "deltas").is_some() {
        return cfg.list_or(section, "deltas", Vec::new());
    }
    let min = cfg.or(section, "delta_min", -5.0)?;
    let max = cfg.or(section, "delta_max", 5.0)?;
    let step = cfg.or(section, "delta_step", 0.5)?;
    detuning_grid(min, max, step)
}

/// File-name fragment for a detuning, e.g. `-0.500`.
pub fn delta_tag(delta: f64) -> String {
    let d = if delta == 0.0 { 0.0 } else { delta };
    format!("{d:.3}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdRow {
    pub delta: f64,
    pub e0_per_site: f64,
    pub staggered_magnetization: f64,
    /// `e1 − e0`.
    pub gap: f64,
    /// Gap above the quasi-degenerate ground manifold.
    pub resolved_gap: f64,
    /// `|n(π, π)|`.
    pub nk_pi_pi: f64,
}

#[derive(Debug, Clone)]
pub struct EdReport {
    pub rows: Vec<EdRow>,
    pub gap_minimum_delta: f64,
}

/// Ground-state summary at each detuning; `states` collects the ground states.
pub fn ed_sweep(
    model: &RydbergModel,
    deltas: &[f64],
    n_states: usize,
    degeneracy_tol: f64,
    mut states: Option<&mut Vec<StateVector>>,
) -> Result<Vec<EdRow>> {
    let n = model.n_sites() as f64;
    let pi = std::f64::consts::PI;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let m = model.with_delta(delta)?;
        let spec = solve_spectrum(&m, n_states)?;
        let ordered = ordered_ground_state(&spec, m.geometry(), degeneracy_tol)?;
        rows.push(EdRow {
            delta,
            e0_per_site: spec.e0 / n,
            staggered_magnetization: staggered_magnetization(&spec.ground, m.geometry())?,
            gap: spec.gap.unwrap_or(f64::NAN),
            resolved_gap: spec
                .gap_above_ground_manifold(degeneracy_tol)
                .unwrap_or(f64::NAN),
            nk_pi_pi: momentum_occupation(&ordered, m.geometry(), (pi, pi))?.norm(),
        });
        if let Some(s) = states.as_deref_mut() {
            s.push(spec.ground);
        }
    }
    Ok(rows)
}

/// Detuning with the smallest resolved gap (first on ties).
pub fn gap_minimum(rows: &[EdRow]) -> Result<f64> {
    rows.iter()
        .filter(|r| r.resolved_gap.is_finite())
        .min_by(|a, b| a.resolved_gap.total_cmp(&b.resolved_gap))
        .map(|r| r.delta)
        .ok_or_else(|| Error::invalid("no finite gaps; request at least two states"))
}

fn ed_csv(rows: &[EdRow]) -> String {
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.delta,
                r.e0_per_site,
                r.staggered_magnetization,
                r.gap,
                r.resolved_gap,
                r.nk_pi_pi,
            ]
        })
        .collect();
    csv_string(
        &[
            "delta",
            "e0_per_site",
            "staggered_magnetization",
            "gap",
            "resolved_gap",
            "nk_pi_pi",
        ],
        &table,
    )
}

/// `[ed]`: `delta_min`, `delta_max`, `delta_step` (or `deltas`), `n_states`,
/// `degeneracy_tol`, `save_states`. Writes `ed.csv`, `ed_summary.txt` and
/// optionally `states/state_delta_<δ>.bin`.
pub fn cmd_ed(cfg: &mut RunConfig) -> Result<EdReport> {
    let ctx = Context::new(cfg)?;
    let model = model_from_config(cfg)?;
    let deltas = deltas_from(cfg, "ed")?;
    let n_states = cfg.or("ed", "n_states", 3usize)?;
    let tol = cfg.or("ed", "degeneracy_tol", DEFAULT_DEGENERACY_TOL)?;
    let save_states = cfg.or("ed", "save_states", false)?;
    let mut states = Vec::new();
    let rows = ed_sweep(
        &model,
        &deltas,
        n_states,
        tol,
        save_states.then_some(&mut states),
    )?;
    let gap_min = gap_minimum(&rows)?;
    fs::write(ctx.out.join("ed.csv"), ed_csv(&rows))?;
    fs::write(
        ctx.out.join("ed_summary.txt"),
        format!("[ed]\ngap_minimum_delta = {gap_min}\n"),
    )?;
    if save_states {
        let dir = ctx.out.join("states");
        fs::create_dir_all(&dir)?;
        for (d, s) in deltas.iter().zip(&states) {
            s.save(dir.join(format!("state_delta_{}.bin", delta_tag(*d))))?;
        }
    }
    Ok(EdReport {
        rows,
        gap_minimum_delta: gap_min,
    })
}

#[derive(Debug, Clone)]
pub struct GenDataReport {
    pub deltas: Vec<f64>,
    pub delta_c: f64,
    pub n_labeled: usize,
    pub dir: PathBuf,
}

fn parse_bases(names: &[String], n: usize) -> Result<Vec<MeasurementBasis>> {
    names
        .iter()
        .map(|s| {
            if s.chars().count() == 1 {
                MeasurementBasis::new(vec![Pauli::from_char(s.chars().next().unwrap())?; n])
            } else {
                let b: MeasurementBasis = s.parse()?;
                if b.len() != n {
                    return Err(Error::invalid(format!(
                        "basis `{s}` does not have {n} sites"
                    )));
                }
                Ok(b)
            }
        })
        .collect()
}

/// `[data]`: detuning grid keys as in `[ed]`, `shots` per basis, `bases`
/// (single letters mean the same axis on every site), `delta_c` (defaults to
/// the ED gap minimum), `window`, `labeled`, `dir`.
///
/// Writes `measurements_delta_<δ>.txt` and `state_delta_<δ>.bin` for each
/// detuning, the `labeled.*` snapshot files from the Z-basis shots, and
/// `data_summary.txt`.
pub fn cmd_gen_data(cfg: &mut RunConfig) -> Result<GenDataReport> {
    let ctx = Context::new(cfg)?;
    let model = model_from_config(cfg)?;
    let n = model.n_sites();
    let deltas = deltas_from(cfg, "data")?;
    let shots = cfg.or("data", "shots", 1000usize)?;
    let basis_names = cfg.list_or("data", "bases", vec!["Z".to_string()])?;
    let bases = parse_bases(&basis_names, n)?;
    let window = cfg.or("data", "window", data::DEFAULT_EXCLUSION_WINDOW)?;
    let labeled = cfg.or("data", "labeled", true)?;
    let tol = cfg.or("data", "degeneracy_tol", DEFAULT_DEGENERACY_TOL)?;
    let dir = PathBuf::from(cfg.or("data", "dir", ctx.out.join("data").display().to_string())?);
    fs::create_dir_all(&dir)?;

    let mut states = Vec::new();
    let rows = ed_sweep(&model, &deltas, 3, tol, Some(&mut states))?;
    let delta_c = match cfg.value::<f64>("data", "delta_c")? {
        Some(d) => d,
        None => {
            let d = gap_minimum(&rows)?;
            cfg.set("data", "delta_c", d);
            d
        }
    };
    let geometry = model.geometry();
    let mut sets: Vec<(f64, Vec<Configuration>)> = Vec::new();
    for (i, (&delta, state)) in deltas.iter().zip(&states).enumerate() {
        let tag = delta_tag(delta);
        state.save(dir.join(format!("state_delta_{tag}.bin")))?;
        let mut ds = sample_measurements(
            state,
            &bases,
            shots,
            derive_seed(ctx.seed, Stream::Measurements, i as u64),
        )?;
        ds.header = ds.header.with_geometry(geometry.lx(), geometry.ly());
        ds.header.delta = Some(delta);
        ds.save(dir.join(format!("measurements_delta_{tag}.txt")))?;
        sets.push((delta, ds.z_outcomes()));
    }
    let mut n_labeled = 0;
    if labeled && sets.iter().any(|(_, c)| !c.is_empty()) {
        let mut ld = data::label_by_detuning(&sets, delta_c, window)?;
        ld.header = ld.header.with_geometry(geometry.lx(), geometry.ly());
        ld.header.seed = Some(ctx.seed);
        n_labeled = ld.len();
        ld.save(&dir, "labeled")?;
    }
    let list: Vec<String> = deltas.iter().map(|d| d.to_string()).collect();
    fs::write(
        dir.join("data_summary.txt"),
        format!(
            "[data]\ndeltas = {}\ndelta_c = {delta_c}\nwindow = {window}\nshots = {shots}\nlx = {}\nly = {}\n",
            list.join(", "),
            geometry.lx(),
            geometry.ly()
        ),
    )?;
    Ok(GenDataReport {
        deltas,
        delta_c,
        n_labeled,
        dir,
    })
}

#[derive(Debug, Clone)]
pub struct CnnReport {
    pub test_accuracy: f64,
    pub signal: Vec<cnn::SignalPoint>,
    pub accuracy_by_delta: Vec<(f64, f64)>,
    pub critical_estimate: Option<f64>,
}

fn data_dir(cfg: &mut RunConfig, section: &str, out: &Path) -> Result<PathBuf> {
    let default = cfg
        .get("data", "dir")
        .map(str::to_string)
        .unwrap_or_else(|| out.join("data").display().to_string());
    Ok(PathBuf::from(cfg.or(section, "data_dir", default)?))
}

/// `[cnn]`: `data_dir`, `epochs`, `batch_size`, `learning_rate`,
/// `test_fraction`, `conv_channels`, `kernel`, `hidden`.
///
/// Signal and accuracy are measured on the held-out split; detunings that the
/// exclusion window removed from the labeled set are scored on all their
/// Z-basis shots.
pub fn cmd_train_cnn(cfg: &mut RunConfig) -> Result<CnnReport> {
    let ctx = Context::new(cfg)?;
    let dir = data_dir(cfg, "cnn", &ctx.out)?;
    let labeled = LabeledDataset::load(&dir, "labeled")?;
    let lx = labeled.header.lx.unwrap_or(cfg.or("model", "lx", 3usize)?);
    let ly = labeled.header.ly.unwrap_or(cfg.or("model", "ly", 3usize)?);
    let default = CnnArchitecture::for_lattice(ly, lx);
    let arch = CnnArchitecture {
        height: ly,
        width: lx,
        conv_channels: cfg.list_or("cnn", "conv_channels", default.conv_channels)?,
        kernel: cfg.or("cnn", "kernel", default.kernel)?,
        hidden: cfg.or("cnn", "hidden", default.hidden)?,
    };
    let opts = TrainOptions {
        epochs: cfg.or("cnn", "epochs", 20usize)?,
        batch_size: cfg.or("cnn", "batch_size", 32usize)?,
        learning_rate: cfg.or("cnn", "learning_rate", 1e-3)?,
        seed: ctx.seed,
    };
    let test_fraction = cfg.or("cnn", "test_fraction", 0.2)?;
    let (train_set, test_set) = data::split(&labeled, test_fraction, ctx.seed)?;
    let mut model = CnnModel::new(arch, ctx.seed)?;
    let history = cnn::train(&mut model, &train_set, Some(&test_set), &opts)?;
    model
        .to_checkpoint(ctx.seed)
        .save(ctx.out.join("cnn.ckpt"))?;
    fs::write(ctx.out.join("cnn_history.csv"), history.to_csv())?;

    let mut sets: Vec<(f64, Vec<Configuration>)> = test_set
        .detunings()
        .into_iter()
        .map(|d| {
            (
                d,
                test_set
                    .at_detuning(d)
                    .records
                    .into_iter()
                    .map(|r| r.config)
                    .collect(),
            )
        })
        .collect();
    let summary_path = dir.join("data_summary.txt");
    if summary_path.exists() {
        let summary = RunConfig::load(&summary_path)?;
        for d in summary
            .value::<String>("data", "deltas")?
            .unwrap_or_default()
            .split(',')
        {
            let Ok(d) = d.trim().parse::<f64>() else {
                continue;
            };
            if sets.iter().any(|(x, _)| x.to_bits() == d.to_bits()) {
                continue;
            }
            let path = dir.join(format!("measurements_delta_{}.txt", delta_tag(d)));
            if path.exists() {
                let z = MeasurementDataset::load(&path)?.z_outcomes();
                if !z.is_empty() {
                    sets.push((d, z));
                }
            }
        }
    }
    let signal = cnn::output_signal_curve(&model, &sets)?;
    let accuracy_by_delta = cnn::accuracy_by_detuning(&model, &test_set)?;
    let critical_estimate = match cnn::critical_point_estimate(&signal) {
        Ok(d) => Some(d),
        Err(Error::NoCrossing) => None,
        Err(e) => return Err(e),
    };
    let rows: Vec<Vec<f64>> = signal
        .iter()
        .map(|p| {
            let acc = accuracy_by_delta
                .iter()
                .find(|(d, _)| d.to_bits() == p.delta.to_bits())
                .map_or(f64::NAN, |a| a.1);
            vec![p.delta, p.disordered, p.ordered, acc]
        })
        .collect();
    write_csv(
        ctx.out.join("cnn_signal.csv"),
        &["delta", "disordered", "ordered", "accuracy"],
        &rows,
    )?;
    let test_accuracy = history.epochs.last().map_or(f64::NAN, |e| e.test_accuracy);
    fs::write(
        ctx.out.join("cnn_summary.txt"),
        format!(
            "[cnn]\narchitecture = {}\ntest_accuracy = {test_accuracy}\ncritical_estimate = {}\ncrossings = {}\n",
            model.architecture().describe(),
            critical_estimate.map_or("none".to_string(), |d| d.to_string()),
            cnn::crossing_count(&signal)
        ),
    )?;
    Ok(CnnReport {
        test_accuracy,
        signal,
        accuracy_by_delta,
        critical_estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmRow {
    pub delta: f64,
    pub energy_per_site: f64,
    pub sz: f64,
    pub sx: f64,
    pub fidelity: f64,
    pub ed_energy_per_site: f64,
    pub ed_sz: f64,
    pub ed_sx: f64,
}

fn optimizer_from(cfg: &mut RunConfig, section: &str, default: &str) -> Result<OptimizerKind> {
    let name = cfg.or(section, "optimizer", default.to_string())?;
    match name.as_str() {
        "adadelta" => {
            let d = OptimizerKind::adadelta();
            let OptimizerKind::AdaDelta { rho, eps } = d else {
                unreachable!()
            };
            Ok(OptimizerKind::AdaDelta {
                rho: cfg.or(section, "rho", rho)?,
                eps: cfg.or(section, "eps", eps)?,
            })
        }
        other => OptimizerKind::from_name(other, cfg.or(section, "learning_rate", 0.01)?),
    }
}

fn train_rbm_at<T: Field>(
    n_hidden: usize,
    init_std: f64,
    dataset: &MeasurementDataset,
    model: &RydbergModel,
    reference: Option<&StateVector>,
    opts: &TomographyOptions,
    out: &Path,
    tag: &str,
) -> Result<(Vec<f64>, f64)> {
    let n = model.n_sites();
    let sz = mean_spin(n, Pauli::Z);
    let sx = mean_spin(n, Pauli::X);
    let tracked = [
        TrackedObservable::new("energy", model),
        TrackedObservable::new("Sz", &sz),
        TrackedObservable::new("Sx", &sx),
    ];
    let mut params = RbmParams::<T>::random(n, n_hidden, init_std, opts.seed);
    let history = rbm::train_tomography(&mut params, dataset, &tracked, reference, opts)?;
    params
        .to_checkpoint(opts.seed)
        .save(out.join(format!("rbm_delta_{tag}.ckpt")))?;
    fs::write(
        out.join(format!("rbm_history_delta_{tag}.csv")),
        history.to_csv(),
    )?;
    let fid = match reference {
        Some(r) if n <= rbm::ENUMERATION_LIMIT => fidelity(&rbm::rbm_statevector(&params)?, r)?,
        _ => f64::NAN,
    };
    Ok((history.final_observables(), fid))
}

/// `[rbm]`: `deltas`, `data_dir`, `field` (`real` or `complex`), `alpha`,
/// `init_std`, `iterations`, `n_samples_data`, `n_samples`, `n_chains`,
/// `burn_in_sweeps`, `optimizer` (with `rho`/`eps` or `learning_rate`),
/// `average_last`, `diagnostics_every`.
///
/// Reads `measurements_delta_<δ>.txt` and, when present, the matching ground
/// state as the fidelity reference.
pub fn cmd_train_rbm(cfg: &mut RunConfig) -> Result<Vec<RbmRow>> {
    let ctx = Context::new(cfg)?;
    let base = model_from_config(cfg)?;
    let n = base.n_sites();
    let dir = data_dir(cfg, "rbm", &ctx.out)?;
    let deltas = cfg.list_or("rbm", "deltas", vec![base.delta()])?;
    let field = cfg.or("rbm", "field", "real".to_string())?;
    let alpha = cfg.or("rbm", "alpha", 1.0)?;
    let n_hidden = ((alpha * n as f64).round() as usize).max(1);
    let init_std = cfg.or("rbm", "init_std", rbm::DEFAULT_INIT_STD)?;
    let defaults = TomographyOptions::default();
    let opts = TomographyOptions {
        iterations: cfg.or("rbm", "iterations", defaults.iterations)?,
        n_samples_data: cfg.or("rbm", "n_samples_data", defaults.n_samples_data)?,
        n_samples: cfg.or("rbm", "n_samples", defaults.n_samples)?,
        n_chains: cfg.or("rbm", "n_chains", defaults.n_chains)?,
        burn_in_sweeps: cfg.or("rbm", "burn_in_sweeps", defaults.burn_in_sweeps)?,
        thin: cfg.value("rbm", "thin")?,
        optimizer: optimizer_from(cfg, "rbm", "adadelta")?,
        average_last: cfg.or("rbm", "average_last", defaults.average_last)?,
        diagnostics_every: cfg.or("rbm", "diagnostics_every", 10usize)?,
        seed: ctx.seed,
    };
    let sz_op = mean_spin(n, Pauli::Z);
    let sx_op = mean_spin(n, Pauli::X);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let tag = delta_tag(delta);
        let model = base.with_delta(delta)?;
        let dataset = MeasurementDataset::load(dir.join(format!("measurements_delta_{tag}.txt")))?;
        let state_path = dir.join(format!("state_delta_{tag}.bin"));
        let reference = if state_path.exists() {
            Some(StateVector::load(&state_path)?)
        } else {
            None
        };
        let (obs, fid) = match field.as_str() {
            "real" => train_rbm_at::<f64>(
                n_hidden,
                init_std,
                &dataset,
                &model,
                reference.as_ref(),
                &opts,
                &ctx.out,
                &tag,
            )?,
            "complex" => train_rbm_at::<Complex64>(
                n_hidden,
                init_std,
                &dataset,
                &model,
                reference.as_ref(),
                &opts,
                &ctx.out,
                &tag,
            )?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown field `{other}`; expected real or complex"
                )))
            }
        };
        let (ed_e, ed_sz, ed_sx) = match &reference {
            Some(r) => (
                expectation_pauli(r, &model.to_pauli_sum())? / n as f64,
                expectation_pauli(r, &sz_op)?,
                expectation_pauli(r, &sx_op)?,
            ),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        rows.push(RbmRow {
            delta,
            energy_per_site: obs[0] / n as f64,
            sz: obs[1],
            sx: obs[2],
            fidelity: fid,
            ed_energy_per_site: ed_e,
            ed_sz,
            ed_sx,
        });
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.delta,
                r.energy_per_site,
                r.sz,
                r.sx,
                r.fidelity,
                r.ed_energy_per_site,
                r.ed_sz,
                r.ed_sx,
            ]
        })
        .collect();
    write_csv(
        ctx.out.join("rbm_observables.csv"),
        &[
            "delta",
            "energy_per_site",
            "sz",
            "sx",
            "fidelity",
            "ed_energy_per_site",
            "ed_sz",
            "ed_sx",
        ],
        &table,
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnRow {
    pub delta: f64,
    pub energy_per_site: f64,
    pub stderr_per_site: f64,
    /// Exact energy of the trained state (small lattices only).
    pub variational_per_site: f64,
    pub ed_e0_per_site: f64,
}

/// `[rnn]`: `deltas`, `n_hidden`, `n_samples`, `learning_rate`, `epochs`,
/// `estimator` (`baseline` or `plain`), `exact_limit`.
pub fn cmd_train_rnn(cfg: &mut RunConfig) -> Result<Vec<RnnRow>> {
    let ctx = Context::new(cfg)?;
    let base = model_from_config(cfg)?;
    let n = base.n_sites() as f64;
    let deltas = cfg.list_or("rnn", "deltas", vec![base.delta()])?;
    let n_hidden = cfg.or("rnn", "n_hidden", 32usize)?;
    let estimator = match cfg.or("rnn", "estimator", "baseline".to_string())?.as_str() {
        "baseline" => GradientEstimator::Baseline,
        "plain" => GradientEstimator::Plain,
        other => return Err(Error::invalid(format!("unknown estimator `{other}`"))),
    };
    let opts = VmcOptions {
        n_samples: cfg.or("rnn", "n_samples", 500usize)?,
        epochs: cfg.or("rnn", "epochs", 1000usize)?,
        learning_rate: cfg.or("rnn", "learning_rate", 1e-3)?,
        seed: ctx.seed,
        estimator,
    };
    let exact_limit = cfg.or("rnn", "exact_limit", rnn::ENUMERATION_LIMIT)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let tag = delta_tag(delta);
        let model = base.with_delta(delta)?;
        let mut wf = RnnWavefunction::for_lattice(model.geometry(), n_hidden, ctx.seed);
        let history = rnn::train(&mut wf, &model, &opts)?;
        wf.to_checkpoint(ctx.seed)
            .save(ctx.out.join(format!("rnn_delta_{tag}.ckpt")))?;
        fs::write(
            ctx.out.join(format!("rnn_history_delta_{tag}.csv")),
            history.to_csv(),
        )?;
        let last = history.last().copied();
        let small = model.n_sites() <= exact_limit.min(rnn::ENUMERATION_LIMIT);
        rows.push(RnnRow {
            delta,
            energy_per_site: last.map_or(f64::NAN, |e| e.energy / n),
            stderr_per_site: last.map_or(f64::NAN, |e| e.stderr / n),
            variational_per_site: if small {
                rnn::exact_energy(&wf, &model)? / n
            } else {
                f64::NAN
            },
            ed_e0_per_site: if small {
                solve_spectrum(&model, 1)?.e0 / n
            } else {
                f64::NAN
            },
        });
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.delta,
                r.energy_per_site,
                r.stderr_per_site,
                r.variational_per_site,
                r.ed_e0_per_site,
            ]
        })
        .collect();
    write_csv(
        ctx.out.join("rnn_energies.csv"),
        &[
            "delta",
            "energy_per_site",
            "stderr_per_site",
            "variational_per_site",
            "ed_e0_per_site",
        ],
        &table,
    )?;
    Ok(rows)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

/// `(δ, path)` for files named `<prefix><δ>.csv` in `dir`, sorted by `δ`.
fn per_delta_files(dir: &Path, prefix: &str) -> Result<Vec<(f64, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(d) = name
            .strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(".csv"))
        {
            if let Ok(d) = d.parse::<f64>() {
                out.push((d, path.clone()));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Long-format table `delta,<columns>` stacked over per-detuning histories.
fn stack_histories(files: &[(f64, PathBuf)], columns: &[&str]) -> Result<String> {
    let mut out = format!("delta,{}\n", columns.join(","));
    for (d, path) in files {
        let (header, rows) = read_table(path)?;
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::invalid(format!("{} lacks column `{c}`", path.display())))
            })
            .collect::<Result<_>>()?;
        for r in rows {
            let cells: Vec<&str> = idx
                .iter()
                .map(|&i| r.get(i).map_or("", String::as_str))
                .collect();
            if cells.contains(&"NaN") {
                continue;
            }
            out.push_str(&format!("{d},{}\n", cells.join(",")));
        }
    }
    Ok(out)
}

/// `[report]`: `input` (defaults to `out`). Writes plot-ready tables to
/// `<out>/report/` and an index `summary.json`; returns the tables written.
pub fn cmd_report(cfg: &mut RunConfig) -> Result<Vec<PathBuf>> {
    let ctx = Context::new(cfg)?;
    let input = PathBuf::from(cfg.or("report", "input", ctx.out.display().to_string())?);
    let dir = ctx.out.join("report");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let mut figures = serde_json::Map::new();

    let copies = [
        ("fig1_ed", "ed.csv"),
        ("fig3_cnn_signal", "cnn_signal.csv"),
        ("fig5_rbm_observables", "rbm_observables.csv"),
        ("fig6_energy_vs_delta", "rnn_energies.csv"),
    ];
    for (name, src) in copies {
        let path = input.join(src);
        if path.exists() {
            let target = dir.join(format!("{name}.csv"));
            fs::copy(&path, &target)?;
            figures.insert(
                name.to_string(),
                json!({ "table": format!("{name}.csv"), "source": src }),
            );
            written.push(target);
        }
    }
    let stacked = [
        (
            "fig4_fidelity",
            "rbm_history_delta_",
            vec!["iteration", "fidelity"],
        ),
        (
            "fig6_energy_vs_epoch",
            "rnn_history_delta_",
            vec!["epoch", "E_mean", "E_stderr"],
        ),
    ];
    for (name, prefix, cols) in stacked {
        let files = per_delta_files(&input, prefix)?;
        if files.is_empty() {
            continue;
        }
        let target = dir.join(format!("{name}.csv"));
        fs::write(&target, stack_histories(&files, &cols)?)?;
        let deltas: Vec<f64> = files.iter().map(|f| f.0).collect();
        figures.insert(
            name.to_string(),
            json!({ "table": format!("{name}.csv"), "deltas": deltas }),
        );
        written.push(target);
    }

    let mut scalars = serde_json::Map::new();
    for (file, section, key) in [
        ("ed_summary.txt", "ed", "gap_minimum_delta"),
        ("cnn_summary.txt", "cnn", "critical_estimate"),
        ("cnn_summary.txt", "cnn", "test_accuracy"),
    ] {
        let path = input.join(file);
        if path.exists() {
            if let Some(v) = RunConfig::load(&path)?
                .value::<f64>(section, key)
                .ok()
                .flatten()
            {
                scalars.insert(key.to_string(), json!(v));
            }
        }
    }
    let index = json!({ "figures": figures, "scalars": scalars });
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(written)
}
