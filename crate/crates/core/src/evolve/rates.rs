use super::flows::{apply_cavity, cavity_kick, CoherenceChainFlow, DensityFlow};
use super::integrator::{AtomWindow, EvolveOptions, Flow, Stepper};
use super::{heralded_state, with_cavity_retry};
use crate::error::{invalid, Result};
use crate::linalg::{CVector, SparseMatrix, C64, I, ZERO};
use crate::pulses::DriveWaveform;
use crate::statespace::{CavityModel, JointHamiltonian, JointState, SystemModel};

/// Joint dimension above which the full master equation gets slow.
const DENSE_WARN_DIM: usize = 400;

/// `R_t(t) = κ Tr(c†c ρ(t))` for the unconditional state, at each time.
///
/// Spins are split into `J_z` sectors, where the cavity sees a fixed detuning
/// `Ω_S m` and the master equation is solved on the cavity alone. Mechanics
/// driven only by at most two kicks uses the photon-number balance across
/// kicks, which needs `⟨c⟩` just before the second one; anything else runs the
/// joint master equation.
pub fn transmission_series(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    times: &[f64],
) -> Result<Vec<f64>> {
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(invalid("transmission times must be finite and >= 0"));
    }
    if initial.len() != system.dim() {
        return Err(invalid("initial state does not match the matter basis"));
    }
    let norm = initial.norm_squared();
    if norm == 0.0 {
        return Ok(vec![0.0; times.len()]);
    }
    let initial = initial / C64::new(norm.sqrt(), 0.0);
    let opts = EvolveOptions::default();
    with_cavity_retry(cavity, |cav| {
        let photons = match system {
            SystemModel::Spin(_) => spin_sectors(&initial, system, cav, drive, times, opts)?,
            SystemModel::Mech(_) if kick_pair(drive).is_some() => kick_balance(&initial, system, cav, drive, times, opts)?,
            SystemModel::Mech(_) => master_equation(&initial, system, cav, drive, times, opts)?,
        };
        Ok(photons.into_iter().map(|n| cav.kappa * n).collect())
    })
}

pub fn transmission_rate(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    t: f64,
) -> Result<f64> {
    Ok(transmission_series(initial, system, cavity, drive, &[t])?[0])
}

/// Visits `times` in ascending order, reading `probe` after propagating to each.
fn sweep_times<F: Flow>(
    flow: &F,
    drive: &DriveWaveform,
    x: &mut Vec<C64>,
    times: &[f64],
    opts: EvolveOptions,
    mut probe: impl FnMut(usize, &[C64]),
) -> Result<()> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut stepper = Stepper::new(flow.len(), opts);
    let mut prev: Option<f64> = None;
    for k in order {
        let t = times[k];
        match prev {
            None => stepper.run(flow, drive, x, 0.0, t, AtomWindow::CLOSED)?,
            Some(p) if t > p => stepper.run(flow, drive, x, p, t, AtomWindow::LEFT_OPEN)?,
            Some(_) => {}
        }
        prev = Some(t);
        probe(k, x);
    }
    Ok(())
}

fn spin_sectors(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<f64>> {
    let cd = cavity.dim();
    let mut out = vec![0.0; times.len()];
    for (i, m) in system.m_values().into_iter().enumerate() {
        let p = initial[i].norm_sqr();
        if p == 0.0 {
            continue;
        }
        let shift = system.omega() * m;
        let blocks = (0..cd).map(|n| SparseMatrix::from_diagonal(&[C64::new(n as f64 * shift, 0.0)])).collect();
        let ham = JointHamiltonian::from_blocks(blocks, cavity.kappa_n());
        let flow = DensityFlow { ham: &ham, feeds: vec![vec![(0, cavity.kappa_n())]], phonon_basis: false };
        let mut x = vec![ZERO; cd * cd];
        x[0] = C64::new(1.0, 0.0);
        sweep_times(&flow, drive, &mut x, times, opts, |k, x| out[k] += p * flow.photon_number(x, 0).0)?;
    }
    Ok(out)
}

pub(super) fn master_equation(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<f64>> {
    let ham = JointHamiltonian::new(system, cavity);
    let d = ham.dim();
    if d > DENSE_WARN_DIM {
        log::warn!("master equation on a {d}-dimensional joint space; this is slow");
    }
    let psi = JointState::from_matter(initial, cavity.dim()).amplitudes;
    let mut x = vec![ZERO; d * d];
    for c in 0..d {
        for r in 0..d {
            x[c * d + r] = psi[r] * psi[c].conj();
        }
    }
    let flow = DensityFlow { ham: &ham, feeds: vec![vec![(0, cavity.kappa_n())]], phonon_basis: !system.is_spin() };
    let mut out = vec![0.0; times.len()];
    sweep_times(&flow, drive, &mut x, times, opts, |k, x| out[k] = flow.photon_number(x, 0).0)?;
    Ok(out)
}

/// The nonzero kicks of a drive made of at most two kicks and nothing else.
fn kick_pair(drive: &DriveWaveform) -> Option<Vec<(f64, C64)>> {
    if drive.samples().iter().any(|z| *z != ZERO) {
        return None;
    }
    let atoms: Vec<(f64, C64)> = drive.deltas().iter().filter(|a| a.area != ZERO).map(|a| (a.t, a.area)).collect();
    (atoms.len() <= 2).then_some(atoms)
}

/// Photon number across at most two kicks.
///
/// Without drive `d⟨N⟩/dt = −κ_N⟨N⟩` exactly, and the kick `D(−iβ)` adds
/// `|β|² + 2Re(iβ*⟨c⟩)`. Only `⟨c⟩` before the second kick needs dynamics:
/// it is the trace of the distance-one photon coherences, which form a
/// closed chain once the drive is off.
pub(super) fn kick_balance(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<f64>> {
    let atoms = kick_pair(drive).expect("caller checked the drive");
    let kn = cavity.kappa_n();
    let cd = cavity.dim();
    // (time, ⟨N⟩ just after) for each kick
    let mut marks: Vec<(f64, f64)> = Vec::new();
    if let Some(&(t1, b1)) = atoms.first() {
        let mut psi = JointState::from_matter(initial, cd).amplitudes.as_slice().to_vec();
        apply_cavity(&cavity_kick(cd, b1), cd, &mut psi);
        let st = JointState::from_amplitudes(CVector::from_vec(psi.clone()), initial.len(), cd);
        let pops = st.photon_populations();
        if pops[cd - 1] > opts.leakage {
            return Err(crate::Error::CavityLeakage { population: pops[cd - 1], t: t1, n_c_max: cd - 1 });
        }
        let n1: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        marks.push((t1, n1));
        if let Some(&(t2, b2)) = atoms.get(1) {
            let c = coherence_before(&psi, system, cavity, t2 - t1, opts)?;
            let n2 = n1 * (-kn * (t2 - t1)).exp() + b2.norm_sqr() + 2.0 * (I * b2.conj() * c).re;
            marks.push((t2, n2));
        }
    }
    Ok(times
        .iter()
        .map(|&t| match marks.iter().rev().find(|&&(tk, _)| tk <= t) {
            Some(&(tk, nk)) => nk * (-kn * (t - tk)).exp(),
            None => 0.0,
        })
        .collect())
}

/// `⟨c⟩` after the undriven master-equation evolution of `|ψ⟩⟨ψ|` for `span`.
fn coherence_before(psi: &[C64], system: &SystemModel, cavity: &CavityModel, span: f64, opts: EvolveOptions) -> Result<C64> {
    let ham = JointHamiltonian::new(system, cavity);
    let d = ham.matter_dim();
    let cd = cavity.dim();
    let flow = CoherenceChainFlow { ham: &ham, kappa_n: cavity.kappa_n() };
    let dd = d * d;
    let mut x = vec![ZERO; flow.len()];
    for k in 0..flow.levels() {
        for c in 0..d {
            for r in 0..d {
                x[k * dd + c * d + r] = psi[r * cd + k + 1] * psi[c * cd + k].conj();
            }
        }
    }
    let mut stepper = Stepper::new(flow.len(), opts);
    stepper.run(&flow, &DriveWaveform::zero(), &mut x, 0.0, span, AtomWindow::LEFT_OPEN)?;
    let mut c = ZERO;
    for k in 0..flow.levels() {
        let tr: C64 = (0..d).map(|i| x[k * dd + i * d + i]).sum();
        c += tr * ((k + 1) as f64).sqrt();
    }
    Ok(c)
}

/// `R_s/R_t` at the end of the shaped drive, next to `e^{−|ε/Ω|²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessRatio {
    pub ratio: f64,
    pub expected: f64,
    pub r_s: f64,
    pub r_t: f64,
    /// Relative departure from `expected` above 5% for `ε/Ω ≤ 0.5`.
    pub flagged: bool,
}

/// Uses the system's default initial state.
pub fn success_ratio(system: &SystemModel, cavity: &CavityModel, drive: &DriveWaveform) -> Result<SuccessRatio> {
    let initial = system.default_initial();
    let t = drive.t_end();
    let r_s = heralded_state(&initial, system, cavity, drive, t, None)?.r_s;
    let r_t = transmission_rate(&initial, system, cavity, drive, t)?;
    let x = drive.epsilon() / system.omega();
    let expected = (-x * x).exp();
    let ratio = if r_t > 0.0 { r_s / r_t } else { f64::NAN };
    let flagged = x.abs() <= 0.5 && !((ratio / expected - 1.0).abs() <= 0.05);
    if flagged {
        log::warn!("R_s/R_t = {ratio:.4} departs from e^(-|ε/Ω|²) = {expected:.4} by more than 5%");
    }
    Ok(SuccessRatio { ratio, expected, r_s, r_t, flagged })
}
