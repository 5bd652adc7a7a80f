use super::flows::DensityFlow;
use super::integrator::{AtomWindow, EvolveOptions, Stepper};
use super::with_cavity_retry;
use crate::error::{invalid, Result};
use crate::linalg::{CVector, ZERO};
use crate::pulses::DriveWaveform;
use crate::statespace::{CavityModel, JointHamiltonian, JointState, SystemModel};

/// Probability of a trial ending with `clicks` detected photons and `losses`
/// undetected ones, summed over all event times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickRecord {
    pub clicks: usize,
    pub losses: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClickRecords {
    pub records: Vec<ClickRecord>,
    /// Probability of more than `max_events` events in total.
    pub overflow: f64,
    pub t_final: f64,
}

impl ClickRecords {
    pub fn probability(&self, clicks: usize, losses: usize) -> Option<f64> {
        self.records.iter().find(|r| r.clicks == clicks && r.losses == losses).map(|r| r.probability)
    }

    /// Sum over all records plus the overflow; one minus this is the
    /// weight lost to the truncated photon basis.
    pub fn total(&self) -> f64 {
        self.records.iter().map(|r| r.probability).sum::<f64>() + self.overflow
    }
}

/// Splits the unconditional evolution by how many photons left through each
/// port, up to `max_events` in total, until `t_final` (default: drive support
/// end plus `10/κ_N`).
pub fn click_records(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    max_events: usize,
    t_final: Option<f64>,
) -> Result<ClickRecords> {
    if initial.len() != system.dim() {
        return Err(invalid("initial state does not match the matter basis"));
    }
    let t_final = t_final.unwrap_or(drive.support_end() + 10.0 / cavity.kappa_n());
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(invalid(format!("final time must be finite and >= 0, got {t_final}")));
    }
    with_cavity_retry(cavity, |cav| records_with(initial, system, cav, drive, max_events, t_final))
}

fn records_with(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    max_events: usize,
    t_final: f64,
) -> Result<ClickRecords> {
    let labels: Vec<(usize, usize)> =
        (0..=max_events).flat_map(|total| (0..=total).rev().map(move |a| (a, total - a))).collect();
    let index = |a: usize, b: usize| labels.iter().position(|&l| l == (a, b));
    let overflow = labels.len();
    let with_loss = cavity.kappa_loss > 0.0;
    let mut feeds: Vec<Vec<(usize, f64)>> = labels
        .iter()
        .map(|&(a, b)| {
            let mut f = Vec::new();
            if a > 0 {
                f.push((index(a - 1, b).expect("lower level present"), cavity.kappa));
            }
            if b > 0 && with_loss {
                f.push((index(a, b - 1).expect("lower level present"), cavity.kappa_loss));
            }
            f
        })
        .collect();
    let mut top: Vec<(usize, f64)> = labels
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| a + b == max_events)
        .map(|(i, _)| (i, cavity.kappa_n()))
        .collect();
    top.push((overflow, cavity.kappa_n()));
    feeds.push(top);

    let ham = JointHamiltonian::new(system, cavity);
    let d = ham.dim();
    let flow = DensityFlow { ham: &ham, feeds, phonon_basis: !system.is_spin() };
    let psi = JointState::from_matter(initial, cavity.dim()).amplitudes;
    let mut x = vec![ZERO; flow.levels() * d * d];
    for c in 0..d {
        for r in 0..d {
            x[c * d + r] = psi[r] * psi[c].conj();
        }
    }
    let mut stepper = Stepper::new(x.len(), EvolveOptions::default());
    stepper.run(&flow, drive, &mut x, 0.0, t_final, AtomWindow::CLOSED)?;
    let records = labels
        .iter()
        .enumerate()
        .map(|(l, &(clicks, losses))| ClickRecord { clicks, losses, probability: flow.photon_number(&x, l).1 })
        .collect();
    Ok(ClickRecords { records, overflow: flow.photon_number(&x, overflow).1, t_final })
}
