//! Command-line front end: scenario presets, parameter sweeps and
//! phase-space pictures, all driven by one TOML configuration.

pub mod config;
pub mod output;
pub mod presets;

use crate::error::{Error, Result};
use crate::herald::{sweep_streaming, SweepRow};
use crate::phasespace::{husimi_sphere, wigner, PhaseSpaceGrid};
use crate::statespace::SystemModel;
use clap::{Parser, Subcommand};
pub use config::{Format, Preset, RunConfig, SweepPlan};
use output::{Meta, OutputDir};
use presets::Scenario;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "paintbrush", version, about = "Heralded spin and motional state preparation with shaped single-photon drives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration overlaid on the preset defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweep cells (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output formats; repeat for several (overrides `output.formats`).
    #[arg(long = "format", global = true, value_enum)]
    pub formats: Vec<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spin cat from a double-kick drive, F_min against detection rate.
    CatSpin,
    /// Motional cat, F_min averaged over a detection window.
    CatMech,
    /// Dicke state painted from the x-polarized coherent spin state.
    Dicke,
    /// Displaced Fock state of the oscillator.
    Fock,
    /// Mechanical qubit (|0̃⟩ + |1̃⟩)/√2 and its rate suppression.
    MechQubit,
    /// Drive painted from a user weight table f(φ).
    Paint,
    /// Grid sweep over the axes of a plan file.
    Sweep {
        /// Plan TOML with an optional `preset` and `[[axis]]` entries.
        plan: PathBuf,
    },
    /// Wigner function of the heralded oscillator state.
    Wigner {
        #[arg(long, value_enum, default_value = "cat-mech")]
        preset: Preset,
        /// Grid points per axis.
        #[arg(long, default_value_t = 161)]
        points: usize,
    },
    /// Husimi Q function of the heralded spin state.
    Husimi {
        #[arg(long, value_enum, default_value = "cat-spin")]
        preset: Preset,
        #[arg(long, default_value_t = 64)]
        n_theta: usize,
        #[arg(long, default_value_t = 128)]
        n_phi: usize,
    },
}

impl Command {
    fn preset(&self) -> Option<Preset> {
        Some(match self {
            Command::CatSpin => Preset::CatSpin,
            Command::CatMech => Preset::CatMech,
            Command::Dicke => Preset::Dicke,
            Command::Fock => Preset::Fock,
            Command::MechQubit => Preset::MechQubit,
            Command::Paint => Preset::Paint,
            Command::Wigner { preset, .. } | Command::Husimi { preset, .. } => *preset,
            Command::Sweep { .. } => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Sweep { .. } => "sweep",
            Command::Wigner { .. } => "wigner",
            Command::Husimi { .. } => "husimi",
            c => c.preset().map_or("", Preset::name),
        }
    }
}

/// Process exit status for an outcome: 0 success, 2 bad input, 3 physics
/// validity (cutoff leakage, unreachable target), 1 anything else.
pub fn exit_code(r: &Result<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) if e.is_physics() => 3,
        Err(Error::Io(_)) => 1,
        Err(_) => 2,
    }
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {what} {}: {e}", path.display())))
}

/// Resolves the configuration a command runs with, command-line flags last.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => read_text(p, "config")?,
        None => String::new(),
    };
    let plan = match &cli.command {
        Command::Sweep { plan } => Some(SweepPlan::from_toml(&read_text(plan, "sweep plan")?)?),
        _ => None,
    };
    let preset = cli.command.preset().or(plan.as_ref().and_then(|p| p.preset));
    let mut cfg = RunConfig::from_toml(preset, &text)?;
    if let Some(plan) = plan {
        cfg.axis = plan.axis;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if !cli.formats.is_empty() {
        cfg.output.formats.clear();
        for f in &cli.formats {
            if !cfg.output.formats.contains(f) {
                cfg.output.formats.push(*f);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Sweep { .. } => run_rows(cfg, "sweep", false),
        Command::Wigner { points, .. } => run_wigner(cfg, *points),
        Command::Husimi { n_theta, n_phi, .. } => run_husimi(cfg, *n_theta, *n_phi),
        c => run_rows(cfg, c.name(), true),
    })
}

#[derive(Serialize)]
struct Results<'a, E: Serialize> {
    preset: &'a str,
    columns: Vec<&'a str>,
    rows: &'a [SweepRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    extras: Option<E>,
}

/// Evaluates every cell of the configured grid. With `strict` the first
/// failing cell aborts the run; otherwise failures become NaN rows.
fn run_rows(cfg: RunConfig, command: &str, strict: bool) -> Result<()> {
    let mut out = OutputDir::create(&cfg.output.directory, &cfg.output.formats)?;
    out.write_config(&cfg)?;
    let preset = cfg.preset.name();
    let scenario = Scenario::new(cfg.clone());
    let eval = |cell: &crate::herald::Cell| scenario.row(cell);
    let mut rows = Vec::new();
    out.begin_rows()?;
    let chunk = 4 * rayon::current_num_threads();
    sweep_streaming(preset, &cfg.axis, chunk, eval, |part| {
        rows.extend_from_slice(part);
        out.append_rows(part)
    })?;
    if strict {
        // cached, so this returns the original error without recomputing
        let failed = crate::herald::cells(&cfg.axis).into_iter().zip(&rows).find(|(_, r)| r.error.is_some());
        if let Some((cell, _)) = failed {
            scenario.row(&cell)?;
        }
    }
    let extras = if strict { Some(scenario.extras()?) } else { None };
    if let Some(x) = &extras {
        if let (Some(s), Some(e)) = (x.suppression, x.suppression_expected) {
            log::info!("heralding-rate suppression {s:.6e} (8π²X₁²e^(−X₁²) = {e:.6e})");
        }
    }
    if out.wants(Format::Json) {
        let columns = SweepRow::HEADER.split(',').collect();
        out.write_json("results.json", &Results { preset, columns, rows: &rows, extras })?;
    }
    if out.wants(Format::Svg) && strict {
        let p = scenario.physics(&scenario.base_cell())?;
        let (stem, grid) = phase_space(&p.system, &p.psi1, 161, 64, 128)?;
        out.write_grid(stem, &grid)?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    out.write_json("meta.json", &Meta::new(command, preset, rows.len(), failed))
}

fn phase_space(system: &SystemModel, psi: &crate::linalg::CVector, points: usize, n_theta: usize, n_phi: usize) -> Result<(&'static str, PhaseSpaceGrid)> {
    Ok(match system {
        SystemModel::Mech(_) => ("wigner", wigner(psi, None, points)?),
        SystemModel::Spin(s) => ("husimi", husimi_sphere(s, psi, n_theta, n_phi)?),
    })
}

#[derive(Serialize)]
struct WignerSummary {
    t_d: f64,
    integral: f64,
    min: f64,
    negative_volume: f64,
    lobe_separation: Option<f64>,
    x_range: [f64; 2],
    p_range: [f64; 2],
}

fn run_wigner(mut cfg: RunConfig, points: usize) -> Result<()> {
    if !cfg.output.formats.contains(&Format::Csv) {
        cfg.output.formats.push(Format::Csv);
    }
    let out = OutputDir::create(&cfg.output.directory, &cfg.output.formats)?;
    out.write_config(&cfg)?;
    let (system, t_d, psi) = presets::heralded_at(&cfg, &Scenario::new(cfg.clone()).base_cell())?;
    if !matches!(system, SystemModel::Mech(_)) {
        return Err(Error::Config(format!("wigner needs a mechanical system; preset {} is a spin", cfg.preset.name())));
    }
    let grid = wigner(&psi, None, points)?;
    out.write_grid("wigner", &grid)?;
    let last = |a: &[f64]| [a[0], a[a.len() - 1]];
    let summary = WignerSummary {
        t_d,
        integral: grid.integral(),
        min: grid.min(),
        negative_volume: grid.negative_volume(),
        lobe_separation: grid.lobe_separation(),
        x_range: last(&grid.axis0),
        p_range: last(&grid.axis1),
    };
    out.write_json("results.json", &summary)?;
    out.write_json("meta.json", &Meta::new("wigner", cfg.preset.name(), 1, 0))
}

#[derive(Serialize)]
struct HusimiSummary {
    t_d: f64,
    integral: f64,
    min: f64,
    /// Local maxima above half the peak as `[theta, phi, Q]`.
    maxima: Vec<[f64; 3]>,
}

fn run_husimi(mut cfg: RunConfig, n_theta: usize, n_phi: usize) -> Result<()> {
    if !cfg.output.formats.contains(&Format::Csv) {
        cfg.output.formats.push(Format::Csv);
    }
    let out = OutputDir::create(&cfg.output.directory, &cfg.output.formats)?;
    out.write_config(&cfg)?;
    let (system, t_d, psi) = presets::heralded_at(&cfg, &Scenario::new(cfg.clone()).base_cell())?;
    let SystemModel::Spin(s) = &system else {
        return Err(Error::Config(format!("husimi needs a spin system; preset {} is mechanical", cfg.preset.name())));
    };
    let grid = husimi_sphere(s, &psi, n_theta, n_phi)?;
    out.write_grid("husimi", &grid)?;
    let summary = HusimiSummary {
        t_d,
        integral: grid.integral(),
        min: grid.min(),
        maxima: grid.local_maxima(0.5 * grid.max()).into_iter().map(|(a, b, v)| [a, b, v]).collect(),
    };
    out.write_json("results.json", &summary)?;
    out.write_json("meta.json", &Meta::new("husimi", cfg.preset.name(), 1, 0))
}
