//! Scenario evaluation: from a resolved configuration and one sweep cell to
//! heralded state, rates and fidelities.

use super::config::{Preset, RunConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::evolve::{heralded_series, transmission_series};
use crate::herald::{
    absorption_loss, cooperativity_limits, fidelity_eps, fidelity_min, qubit_suppression, target_cat, window_average, Cell,
    CooperativityInput, CooperativityLimits, DetectorModel, SweepRow,
};
use crate::linalg::{CVector, C64};
use crate::pulses::{
    cat_pulse, fourier_weights, mech_qubit_amplitude, mech_qubit_pulse, synthesize_from_coeffs, synthesize_from_weight,
    CoeffBasis, CoefficientTarget, DriveWaveform, WeightFunction,
};
use crate::statespace::{displaced_fock_state, vacuum_in_displaced_basis, CavityModel, MechModel, SpinModel, SystemModel};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Everything about one cell that does not depend on the dark-count rate.
#[derive(Clone, Debug)]
pub struct Physics {
    pub system: SystemModel,
    pub cavity: CavityModel,
    pub drive: DriveWaveform,
    pub eta: Option<f64>,
    /// Reported detection time (window midpoint for averaged presets).
    pub t_d: f64,
    pub times: Vec<f64>,
    pub r_s: Vec<f64>,
    pub r_t: Vec<f64>,
    pub f_eps: Vec<f64>,
    /// Heralded matter state at the detection time closest to `t_d`.
    pub psi1: CVector,
}

impl Physics {
    fn mean(&self, v: &[f64]) -> Result<f64> {
        if v.len() == 1 {
            Ok(v[0])
        } else {
            window_average(&self.times, v)
        }
    }

    fn f_min(&self, detector: &DetectorModel) -> Result<f64> {
        let samples: Vec<f64> =
            (0..self.times.len()).map(|k| fidelity_min(self.f_eps[k], self.r_s[k], self.r_t[k], detector)).collect();
        self.mean(&samples)
    }
}

type Slot = Arc<OnceLock<std::result::Result<Arc<Physics>, Arc<Error>>>>;

/// Evaluates cells of one configuration, sharing physics between cells that
/// differ only in the dark-count rate.
pub struct Scenario {
    pub config: RunConfig,
    cache: Mutex<HashMap<[u64; 4], Slot>>,
}

fn bits(v: Option<f64>) -> u64 {
    v.map_or(u64::MAX, f64::to_bits)
}

impl Scenario {
    pub fn new(config: RunConfig) -> Self {
        Self { config, cache: Mutex::new(HashMap::new()) }
    }

    /// The cell described by the configuration's own scalar settings.
    pub fn base_cell(&self) -> Cell {
        Cell {
            eps_over_omega: Some(self.config.drive.eps_over_omega),
            phi: None,
            t_d: None,
            eta: None,
            rd_over_qkappa: None,
        }
    }

    pub fn physics(&self, cell: &Cell) -> Result<Arc<Physics>> {
        let key = [bits(cell.eps_over_omega), bits(cell.phi), bits(cell.t_d), bits(cell.eta)];
        let slot = self.cache.lock().expect("cache lock").entry(key).or_default().clone();
        slot.get_or_init(|| compute(&self.config, cell).map(Arc::new).map_err(Arc::new))
            .clone()
            .map_err(Error::Shared)
    }

    pub fn row(&self, cell: &Cell) -> Result<SweepRow> {
        let p = self.physics(cell)?;
        let cfg = &self.config;
        let q = cfg.detector.q;
        let kappa = cfg.cavity.kappa.0;
        let rd_over_qkappa = cell.rd_over_qkappa.unwrap_or(cfg.detector.r_d.0 / (q * kappa));
        let detector = DetectorModel::new(q, rd_over_qkappa * q * kappa)?;
        let mut row = SweepRow::blank(cfg.preset.name());
        row.eps_over_omega = cell.eps_over_omega.unwrap_or(cfg.drive.eps_over_omega);
        if is_cat(cfg.preset) {
            row.phi = cell.phi.unwrap_or(cfg.drive.phi.0);
        }
        row.t_d = p.t_d;
        row.eta = p.eta.unwrap_or(f64::NAN);
        row.rd_over_qkappa = rd_over_qkappa;
        row.r_s = p.mean(&p.r_s)?;
        row.r_t = p.mean(&p.r_t)?;
        row.f_eps = p.mean(&p.f_eps)?;
        row.f_min = p.f_min(&detector)?;
        Ok(row)
    }

    /// Preset-specific figures for the base cell.
    pub fn extras(&self) -> Result<Extras> {
        let cfg = &self.config;
        let p = self.physics(&self.base_cell())?;
        let mut out = Extras::default();
        if let SystemModel::Mech(m) = &p.system {
            out.x1 = Some(m.x1());
            if cfg.preset == Preset::MechQubit {
                let kappa = p.cavity.kappa;
                let eps_a = p.drive.epsilon() * mech_qubit_amplitude(m.x1()) / m.omega_m();
                let t = p.times[p.times.len() / 2];
                let r_s = p.r_s[p.times.len() / 2];
                out.x1_squared = Some(m.x1() * m.x1());
                out.suppression = Some(r_s / (kappa * eps_a * eps_a * (-p.cavity.kappa_n() * t).exp()));
                out.suppression_expected = Some(qubit_suppression(m.x1()));
            }
        }
        if let (SystemModel::Spin(s), Some(eta)) = (&p.system, p.eta) {
            let phi_c = s.omega_s() / p.cavity.kappa_n();
            out.cooperativity = Some(cooperativity_limits(&CooperativityInput::new(eta, s.n_atoms())?, Some((s.omega_s(), phi_c)))?);
        }
        out.kappa_n = Some(p.cavity.kappa_n());
        out.t_end = Some(p.drive.t_end());
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Extras {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x1_squared: Option<f64>,
    /// Measured `R_s/(κ|εA/Ω_M|²e^{−κ_N t_d})` of the qubit drive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suppression: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suppression_expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooperativity: Option<CooperativityLimits>,
}

fn is_cat(p: Preset) -> bool {
    matches!(p, Preset::CatSpin | Preset::CatMech)
}

pub fn system_model(cfg: &RunConfig) -> Result<SystemModel> {
    Ok(match &cfg.system {
        SystemConfig::Spin { n_atoms, omega_s } => SpinModel::new(*n_atoms, omega_s.0)?.into(),
        SystemConfig::Mech { omega_m, g0, n_ph_max } => MechModel::new(omega_m.0, g0.0, *n_ph_max)?.into(),
    })
}

fn cavity_model(cfg: &RunConfig, system: &SystemModel, eta: Option<f64>) -> Result<(CavityModel, Option<f64>)> {
    let c = &cfg.cavity;
    let mut cavity = CavityModel { kappa: c.kappa.0, kappa_loss: c.kappa_loss.0, n_c_max: c.n_c_max }.validated()?;
    let eta = eta.or_else(|| {
        c.absorption.as_ref().map(|a| match (a.eta, a.g_rabi, a.gamma) {
            (Some(e), _, _) => e,
            (None, Some(g), Some(gm)) => g.0 * g.0 / (c.kappa.0 * gm.0),
            _ => f64::NAN,
        })
    });
    if let Some(eta) = eta {
        let SystemModel::Spin(s) = system else {
            return Err(Error::Config("the absorption model (eta) applies to spin systems only".into()));
        };
        let input = CooperativityInput::new(eta, s.n_atoms())?;
        cavity.kappa_loss = absorption_loss(s.omega_s(), cavity.kappa, &input);
        cavity = cavity.validated()?;
    }
    Ok((cavity, eta))
}

fn normalized(v: CVector) -> Result<CVector> {
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v / C64::new(n, 0.0))
}

enum Target {
    /// Cat branches recomputed at each detection time.
    Cat { phi: f64, rel_phase: f64 },
    /// Fixed target compared up to a free `U₁` rotation.
    UpToRotation(CVector),
}

fn drive_and_target(cfg: &RunConfig, system: &SystemModel, kappa_n: f64, eps: f64, phi: f64) -> Result<(DriveWaveform, Target)> {
    let omega = system.omega();
    let d = &cfg.drive;
    match (cfg.preset, system) {
        (Preset::CatSpin | Preset::CatMech, _) => {
            Ok((cat_pulse(phi, d.rel_phase.0, omega, kappa_n, eps)?, Target::Cat { phi, rel_phase: d.rel_phase.0 }))
        }
        (Preset::Dicke, SystemModel::Spin(s)) => {
            let k = s
                .index_of(d.m)
                .ok_or_else(|| Error::InvalidTarget(format!("m = {} is not a Dicke level of J = {}", d.m, s.j())))?;
            let initial = system.default_initial();
            let target = CoefficientTarget::single(s.dim(), k, CoeffBasis::Dicke)?;
            let drive = synthesize_from_coeffs(&target, initial.as_slice(), omega, kappa_n, 0.0, eps)?;
            let mut t = CVector::zeros(s.dim());
            t[k] = C64::new(1.0, 0.0);
            Ok((drive, Target::UpToRotation(t)))
        }
        (Preset::Fock, SystemModel::Mech(m)) => {
            if d.m < 0.0 || d.m.fract() != 0.0 {
                return Err(Error::InvalidTarget(format!("Fock level must be a non-negative integer, got {}", d.m)));
            }
            let k = d.m as usize;
            let c0: Vec<C64> = vacuum_in_displaced_basis(m.x1(), k + 1).into_iter().map(|v| C64::new(v, 0.0)).collect();
            let target = CoefficientTarget::single(k + 1, k, CoeffBasis::DisplacedFock)?;
            let drive = synthesize_from_coeffs(&target, &c0, omega, kappa_n, m.mu(), eps)?;
            Ok((drive, Target::UpToRotation(displaced_fock_state(m, k)?)))
        }
        (Preset::MechQubit, SystemModel::Mech(m)) => {
            let t = displaced_fock_state(m, 0)? + displaced_fock_state(m, 1)?;
            Ok((mech_qubit_pulse(m, kappa_n, eps)?, Target::UpToRotation(normalized(t)?)))
        }
        (Preset::Paint, _) => {
            let samples = d.weights.iter().map(|w| C64::new(w[0], w[1])).collect();
            let weight = WeightFunction::new(d.phi_max.0, samples, Vec::new())?;
            let drive = synthesize_from_weight(&weight, omega, kappa_n, eps)?;
            let spec = system.rotation_spectrum();
            let phases: Vec<f64> = spec.values.iter().map(|l| l / omega).collect();
            let f = fourier_weights(&weight, &phases, 0.0)?;
            let c0 = spec.to_eigen(&system.default_initial());
            let painted = CVector::from_iterator(c0.len(), c0.iter().zip(&f).map(|(a, b)| a * b));
            Ok((drive, Target::UpToRotation(normalized(spec.from_eigen(&painted))?)))
        }
        (p, _) => Err(Error::Config(format!("preset {} needs a {} system", p.name(), if p == Preset::Dicke { "spin" } else { "mech" }))),
    }
}

struct Setup {
    system: SystemModel,
    cavity: CavityModel,
    eta: Option<f64>,
    drive: DriveWaveform,
    target: Target,
    t_d: f64,
    times: Vec<f64>,
}

fn setup(cfg: &RunConfig, cell: &Cell) -> Result<Setup> {
    let system = system_model(cfg)?;
    let (cavity, eta) = cavity_model(cfg, &system, cell.eta)?;
    let kappa_n = cavity.kappa_n();
    let eps = cell.eps_over_omega.unwrap_or(cfg.drive.eps_over_omega) * system.omega();
    let phi = cell.phi.unwrap_or(cfg.drive.phi.0);
    let (drive, target) = drive_and_target(cfg, &system, kappa_n, eps, phi)?;
    let start = if is_cat(cfg.preset) { phi / system.omega() } else { drive.t_end() };
    let width = cfg.drive.window.0;
    let t_d = cell.t_d.or(cfg.drive.t_d.map(|t| t.0)).unwrap_or(if width > 0.0 { start + 0.5 * width } else { start + 1.0 / kappa_n });
    let times: Vec<f64> = if width > 0.0 {
        let n = cfg.drive.window_points;
        (1..=n).map(|k| t_d - 0.5 * width + width * k as f64 / n as f64).collect()
    } else {
        vec![t_d]
    };
    Ok(Setup { system, cavity, eta, drive, target, t_d, times })
}

/// Heralded matter state at the cell's detection time, without rates or
/// fidelities.
pub fn heralded_at(cfg: &RunConfig, cell: &Cell) -> Result<(SystemModel, f64, CVector)> {
    let s = setup(cfg, cell)?;
    let h = heralded_series(&s.system.default_initial(), &s.system, &s.cavity, &s.drive, &[s.t_d])?;
    let psi = h.into_iter().next().map(|h| h.psi1).ok_or_else(|| Error::InvalidParameter("no detection time".into()))?;
    Ok((s.system, s.t_d, psi))
}

fn compute(cfg: &RunConfig, cell: &Cell) -> Result<Physics> {
    let Setup { system, cavity, eta, drive, target, t_d, times } = setup(cfg, cell)?;
    let initial = system.default_initial();
    let heralded = heralded_series(&initial, &system, &cavity, &drive, &times)?;
    let r_t = transmission_series(&initial, &system, &cavity, &drive, &times)?;
    let f_eps = heralded
        .iter()
        .map(|h| match &target {
            Target::Cat { phi, rel_phase } => fidelity_eps(&h.psi1, &target_cat(&system, *phi, *rel_phase, h.t_d)?, None),
            Target::UpToRotation(t) => fidelity_eps(&h.psi1, t, Some(&system)),
        })
        .collect::<Result<Vec<f64>>>()?;
    let nearest = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t_d).abs().total_cmp(&(b.1 - t_d).abs()))
        .map_or(0, |(k, _)| k);
    Ok(Physics {
        psi1: heralded[nearest].psi1.clone(),
        r_s: heralded.iter().map(|h| h.r_s).collect(),
        system,
        cavity,
        drive,
        eta,
        t_d,
        times,
        r_t,
        f_eps,
    })
}
