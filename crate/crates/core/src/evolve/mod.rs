//! Conditional (no-jump) propagation of the driven cavity, the heralded
//! single-click state, unconditional transmission rates and click-record
//! probabilities.
//!
//! A heralded trial is a no-jump evolution up to `t_d`, one application of
//! `√κ c`, and a no-jump evolution until the cavity is empty again. Its
//! squared norm is the success rate density `R_s(t_d)`.

mod flows;
mod integrator;
mod rates;
mod records;
mod weak;

pub use integrator::EvolveOptions;
pub use rates::{success_ratio, transmission_rate, transmission_series, SuccessRatio};
pub use records::{click_records, ClickRecord, ClickRecords};
pub use weak::weak_drive_heralded_state;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CVector, C64, I, ZERO};
use crate::pulses::DriveWaveform;
use crate::statespace::{CavityModel, JointHamiltonian, JointState, SystemModel, LEAKAGE_LIMIT};
use flows::{apply_cavity, cavity_kick, click, NoJumpFlow};
use integrator::{AtomWindow, Stepper};
use std::fmt::Write as _;

/// Largest cavity cutoff tried when the default one leaks.
pub const MAX_CAVITY_CUTOFF: usize = 16;

/// Post-click settling time in units of `1/κ_N`, and the least accepted.
const SETTLE: f64 = 10.0;
const MIN_SETTLE: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct HeraldedResult {
    pub t_d: f64,
    /// Unnormalized conditional matter state.
    pub psi1: CVector,
    pub r_s: f64,
    pub r_t: Option<f64>,
    pub f_eps: Option<f64>,
    pub f_min: Option<f64>,
}

impl HeraldedResult {
    fn new(t_d: f64, psi1: CVector) -> Self {
        let r_s = psi1.norm_squared();
        Self { t_d, psi1, r_s, r_t: None, f_eps: None, f_min: None }
    }
}

/// One system/cavity pair with its joint Hamiltonian built once.
#[derive(Clone, Debug)]
pub struct Evolver {
    system: SystemModel,
    cavity: CavityModel,
    ham: JointHamiltonian,
    opts: EvolveOptions,
}

impl Evolver {
    pub fn new(system: &SystemModel, cavity: &CavityModel) -> Self {
        Self {
            system: system.clone(),
            cavity: *cavity,
            ham: JointHamiltonian::new(system, cavity),
            opts: EvolveOptions::default(),
        }
    }

    pub fn with_options(mut self, opts: EvolveOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Same evolver with the cavity closed (`κ_N = 0` in the Hamiltonian);
    /// clicks keep using the detected-port `κ`.
    pub fn without_damping(mut self) -> Self {
        let blocks = (0..self.cavity.dim()).map(|n| self.system.matter_block(n)).collect();
        self.ham = JointHamiltonian::from_blocks(blocks, 0.0);
        self
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn cavity(&self) -> &CavityModel {
        &self.cavity
    }

    pub fn hamiltonian(&self) -> &JointHamiltonian {
        &self.ham
    }

    pub fn options(&self) -> &EvolveOptions {
        &self.opts
    }

    fn flow(&self) -> NoJumpFlow<'_> {
        NoJumpFlow { ham: &self.ham, phonon_basis: !self.system.is_spin() }
    }

    fn stepper(&self) -> Stepper {
        Stepper::new(self.ham.dim(), self.opts)
    }

    fn joint(&self, initial: &CVector) -> Result<Vec<C64>> {
        if initial.len() != self.system.dim() {
            return Err(invalid(format!(
                "initial state has length {} but the matter basis has {}",
                initial.len(),
                self.system.dim()
            )));
        }
        Ok(JointState::from_matter(initial, self.cavity.dim()).amplitudes.as_slice().to_vec())
    }

    fn check_state(&self, state: &JointState) -> Result<()> {
        if state.matter_dim() != self.system.dim() || state.cavity_dim() != self.cavity.dim() {
            return Err(invalid("joint state does not match the system and cavity bases"));
        }
        Ok(())
    }

    /// No-jump evolution from `t0` to `t1`. Kicks at `t0` fire, kicks at `t1` do not.
    pub fn propagate_nojump(&self, state: &JointState, drive: &DriveWaveform, t0: f64, t1: f64) -> Result<JointState> {
        self.check_state(state)?;
        if !(t0 >= 0.0 && t1 >= t0 && t1.is_finite()) {
            return Err(invalid(format!("need 0 <= t0 <= t1, got [{t0}, {t1}]")));
        }
        let mut x = state.amplitudes.as_slice().to_vec();
        self.stepper().run(&self.flow(), drive, &mut x, t0, t1, AtomWindow::RIGHT_OPEN)?;
        Ok(JointState::from_amplitudes(CVector::from_vec(x), state.matter_dim(), state.cavity_dim()))
    }

    /// Conditional state after a click at `t_d`, projected on an empty cavity
    /// once no further photon can leave, with the free evolution after `t_d`
    /// undone so that `ψ₁` refers to time `t_d`.
    ///
    /// `t_final` matters only when the drive is still on after `t_d`; it
    /// defaults to `t_d + 10/κ_N`.
    pub fn heralded_state(
        &self,
        initial: &CVector,
        drive: &DriveWaveform,
        t_d: f64,
        t_final: Option<f64>,
    ) -> Result<HeraldedResult> {
        check_detection_time(t_d)?;
        let mut x = self.joint(initial)?;
        self.stepper().run(&self.flow(), drive, &mut x, 0.0, t_d, AtomWindow::CLOSED)?;
        self.after_click(&x, drive, t_d, t_final)
    }

    /// [`Self::heralded_state`] at many detection times from a single
    /// forward pass; results follow the input order.
    pub fn heralded_series(&self, initial: &CVector, drive: &DriveWaveform, t_ds: &[f64]) -> Result<Vec<HeraldedResult>> {
        for &t in t_ds {
            check_detection_time(t)?;
        }
        let mut order: Vec<usize> = (0..t_ds.len()).collect();
        order.sort_by(|&a, &b| t_ds[a].total_cmp(&t_ds[b]));
        let mut x = self.joint(initial)?;
        let flow = self.flow();
        let mut stepper = self.stepper();
        let mut out: Vec<Option<HeraldedResult>> = vec![None; t_ds.len()];
        let mut t_prev: Option<f64> = None;
        for &k in &order {
            let t = t_ds[k];
            match t_prev {
                None => stepper.run(&flow, drive, &mut x, 0.0, t, AtomWindow::CLOSED)?,
                Some(p) if t > p => stepper.run(&flow, drive, &mut x, p, t, AtomWindow::LEFT_OPEN)?,
                Some(_) => {}
            }
            t_prev = Some(t);
            out[k] = Some(self.after_click(&x, drive, t, None)?);
        }
        Ok(out.into_iter().map(|r| r.expect("every detection time visited")).collect())
    }

    fn after_click(&self, x: &[C64], drive: &DriveWaveform, t_d: f64, t_final: Option<f64>) -> Result<HeraldedResult> {
        let cd = self.cavity.dim();
        let mut y = click(x, cd, self.cavity.kappa);
        if drive.support_end() <= t_d {
            // undriven: photon-number sectors decouple and every n >= 1 part leaves with a click
            return self.heralded(t_d, vacuum_part(&y, cd));
        }
        let kn = self.cavity.kappa_n();
        let t_final = t_final.unwrap_or(t_d + SETTLE / kn);
        if t_final < t_d + MIN_SETTLE / kn {
            return Err(invalid(format!(
                "t_final = {t_final} leaves less than {MIN_SETTLE}/κ_N after the click at {t_d}"
            )));
        }
        let mut stepper = self.stepper();
        stepper.run(&self.flow(), drive, &mut y, t_d, t_final, AtomWindow::LEFT_OPEN)?;
        let mut psi = vacuum_part(&y, cd);
        let h0 = self.system.free_diagonal();
        for (z, e) in psi.iter_mut().zip(h0) {
            *z *= (I * e * (t_final - t_d)).exp();
        }
        self.heralded(t_d, psi)
    }

    /// The weak-drive vacuum dominates the no-jump norm, so the phonon
    /// cutoff is checked again on the heralded state alone.
    fn heralded(&self, t_d: f64, psi: CVector) -> Result<HeraldedResult> {
        let total = psi.norm_squared();
        if !self.system.is_spin() && total > 0.0 {
            let top = psi[psi.len() - 1].norm_sqr() / total;
            if top > self.opts.leakage {
                return Err(Error::CutoffInsufficient {
                    what: format!("heralded state reaches phonon cutoff {} at t_d = {t_d:.6e}", psi.len() - 1),
                    defect: top,
                    limit: self.opts.leakage,
                });
            }
        }
        Ok(HeraldedResult::new(t_d, psi))
    }

    /// No-jump joint states at the requested (ascending) times.
    pub fn trajectory(&self, initial: &CVector, drive: &DriveWaveform, times: &[f64]) -> Result<Vec<JointState>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(invalid("trajectory times must be ascending and >= 0"));
        }
        let mut x = self.joint(initial)?;
        let flow = self.flow();
        let mut stepper = self.stepper();
        let mut out = Vec::with_capacity(times.len());
        let mut t_prev: Option<f64> = None;
        for &t in times {
            match t_prev {
                None => stepper.run(&flow, drive, &mut x, 0.0, t, AtomWindow::CLOSED)?,
                Some(p) if t > p => stepper.run(&flow, drive, &mut x, p, t, AtomWindow::LEFT_OPEN)?,
                Some(_) => {}
            }
            t_prev = Some(t);
            out.push(JointState::from_amplitudes(CVector::from_vec(x.clone()), self.system.dim(), self.cavity.dim()));
        }
        Ok(out)
    }
}

fn check_detection_time(t_d: f64) -> Result<()> {
    if !(t_d >= 0.0) || !t_d.is_finite() {
        return Err(invalid(format!("detection time must be finite and >= 0, got {t_d}")));
    }
    Ok(())
}

fn vacuum_part(x: &[C64], cavity_dim: usize) -> CVector {
    CVector::from_iterator(x.len() / cavity_dim, x.iter().step_by(cavity_dim).copied())
}

/// Runs `f` with the given cavity, then with the photon cutoff raised by two
/// levels at a time while it reports cavity leakage.
pub fn with_cavity_retry<T>(cavity: &CavityModel, mut f: impl FnMut(&CavityModel) -> Result<T>) -> Result<T> {
    let mut cav = *cavity;
    loop {
        match f(&cav) {
            Err(Error::CavityLeakage { population, t, n_c_max }) if n_c_max < MAX_CAVITY_CUTOFF => {
                log::info!("cavity leakage {population:.2e} at t = {t:.3e}; raising n_c_max to {}", n_c_max + 2);
                cav = cav.with_cutoff((n_c_max + 2).min(MAX_CAVITY_CUTOFF))?;
            }
            r => return r,
        }
    }
}

/// No-jump propagation; see [`Evolver::propagate_nojump`].
pub fn propagate_nojump(
    state: &JointState,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    t0: f64,
    t1: f64,
) -> Result<JointState> {
    Evolver::new(system, cavity).propagate_nojump(state, drive, t0, t1)
}

/// `e^{−i(βc† + β*c)}` on the cavity factor.
pub fn apply_delta_kick(state: &JointState, area: C64) -> Result<JointState> {
    let cd = state.cavity_dim();
    let mut x = state.amplitudes.as_slice().to_vec();
    if area != ZERO {
        apply_cavity(&cavity_kick(cd, area), cd, &mut x);
    }
    let out = JointState::from_amplitudes(CVector::from_vec(x), state.matter_dim(), cd);
    let pops = out.photon_populations();
    let total: f64 = pops.iter().sum();
    if total > 0.0 && pops[cd - 1] / total > LEAKAGE_LIMIT {
        return Err(Error::CavityLeakage { population: pops[cd - 1] / total, t: f64::NAN, n_c_max: cd - 1 });
    }
    Ok(out)
}

/// Heralded state with automatic cavity-cutoff escalation.
pub fn heralded_state(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    t_d: f64,
    t_final: Option<f64>,
) -> Result<HeraldedResult> {
    with_cavity_retry(cavity, |c| Evolver::new(system, c).heralded_state(initial, drive, t_d, t_final))
}

pub fn heralded_series(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    t_ds: &[f64],
) -> Result<Vec<HeraldedResult>> {
    with_cavity_retry(cavity, |c| Evolver::new(system, c).heralded_series(initial, drive, t_ds))
}

/// No-jump trajectory as CSV with columns `t,sector,re,im`, where the
/// sector label is `matter_index:photon_number`.
pub fn trajectory_csv(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    times: &[f64],
) -> Result<String> {
    let states = Evolver::new(system, cavity).trajectory(initial, drive, times)?;
    let mut s = String::from("t,sector,re,im\n");
    for (t, st) in times.iter().zip(&states) {
        for i in 0..st.matter_dim() {
            for n in 0..st.cavity_dim() {
                let z = st.amplitudes[st.index(i, n)];
                writeln!(s, "{t:.16e},{i}:{n},{:.16e},{:.16e}", z.re, z.im).expect("write to string");
            }
        }
    }
    Ok(s)
}
