//! Classical RK4 on flat complex vectors with per-segment step halving.
//!
//! Time is cut at every envelope knot, kick and requested output time, so the
//! envelope is linear on each segment and RK4 sees a smooth right-hand side.
//! A segment is integrated with `n` and `2n` steps; while the two disagree by
//! more than the tolerance (relative to the state norm) the step is halved
//! again. The accepted value is the Richardson combination of the last pair.

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::pulses::DriveWaveform;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Relative state difference accepted between step sizes `h` and `h/2`.
    pub tol: f64,
    /// Largest relative population allowed in the top retained level.
    pub leakage: f64,
    pub max_halvings: u32,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, leakage: crate::statespace::LEAKAGE_LIMIT, max_halvings: 24 }
    }
}

/// A linear ODE `ẋ = L(ℰ₀) x` on a flat vector, plus the instantaneous kick.
pub(crate) trait Flow {
    fn len(&self) -> usize;
    fn rhs(&self, drive: C64, x: &[C64], y: &mut [C64]);
    /// Rough bound on the generator norm for a drive of magnitude `drive_abs`.
    fn rate_bound(&self, drive_abs: f64) -> f64;
    fn kick(&self, area: C64, x: &mut Vec<C64>);
    /// Leakage checks after a segment or kick.
    fn check(&self, x: &[C64], t: f64, opts: &EvolveOptions) -> Result<()>;
    fn norm_sqr(&self, x: &[C64]) -> f64;
}

/// Which kicks on the boundary of `[t0, t1]` fire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct AtomWindow {
    pub include_start: bool,
    pub include_end: bool,
}

impl AtomWindow {
    pub const CLOSED: AtomWindow = AtomWindow { include_start: true, include_end: true };
    pub const LEFT_OPEN: AtomWindow = AtomWindow { include_start: false, include_end: true };
    pub const RIGHT_OPEN: AtomWindow = AtomWindow { include_start: true, include_end: false };
}

pub(crate) struct Stepper {
    pub opts: EvolveOptions,
    h: Option<f64>,
    k: [Vec<C64>; 5],
    coarse: Vec<C64>,
    fine: Vec<C64>,
}

impl Stepper {
    pub fn new(len: usize, opts: EvolveOptions) -> Self {
        let z = || vec![ZERO; len];
        Self { opts, h: None, k: [z(), z(), z(), z(), z()], coarse: z(), fine: z() }
    }

    /// Evolves `x` from `t0` to `t1` under `flow` driven by `drive`, firing
    /// the waveform's kicks that fall in the window.
    pub fn run<F: Flow>(
        &mut self,
        flow: &F,
        drive: &DriveWaveform,
        x: &mut Vec<C64>,
        t0: f64,
        t1: f64,
        window: AtomWindow,
    ) -> Result<()> {
        assert!(t1 >= t0, "backwards propagation requested ({t0} -> {t1})");
        let mut cuts = vec![t0, t1];
        if !drive.samples().is_empty() {
            let k0 = (t0 / drive.dt()).ceil().max(0.0) as usize;
            let k1 = ((t1 / drive.dt()).floor() as usize).min(drive.samples().len() - 1);
            cuts.extend((k0..=k1).map(|k| drive.knot_time(k)).filter(|&t| t > t0 && t < t1));
        }
        cuts.extend(drive.deltas().iter().map(|a| a.t).filter(|&t| t > t0 && t < t1));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let allowed = |t: f64| {
            if t0 == t1 {
                return t == t0 && window.include_start && window.include_end;
            }
            (t > t0 && t < t1) || (t == t0 && window.include_start) || (t == t1 && window.include_end)
        };
        let max_drive = drive.samples().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let bound = flow.rate_bound(max_drive);

        for (i, &c) in cuts.iter().enumerate() {
            if allowed(c) {
                let mut any = false;
                for atom in drive.deltas().iter().filter(|a| a.t == c && a.area != ZERO) {
                    flow.kick(atom.area, x);
                    any = true;
                }
                if any {
                    flow.check(x, c, &self.opts)?;
                }
            }
            if let Some(&next) = cuts.get(i + 1) {
                self.segment(flow, drive, x, c, next, bound)?;
                flow.check(x, next, &self.opts)?;
            }
        }
        Ok(())
    }

    fn segment<F: Flow>(&mut self, flow: &F, drive: &DriveWaveform, x: &mut [C64], a: f64, b: f64, bound: f64) -> Result<()> {
        let span = b - a;
        let h_guess = self.h.unwrap_or(0.5 / bound.max(1e-300));
        let mut n = ((span / h_guess).ceil() as usize).max(1);
        let scale = flow.norm_sqr(x).sqrt().max(1e-300);

        self.coarse.copy_from_slice(x);
        self.steps(flow, drive, a, b, n, true);
        for halving in 0..=self.opts.max_halvings {
            self.fine.copy_from_slice(x);
            self.steps(flow, drive, a, b, 2 * n, false);
            let diff = self
                .coarse
                .iter()
                .zip(&self.fine)
                .map(|(c, f)| (c - f).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / scale;
            if diff <= self.opts.tol {
                for ((xi, f), c) in x.iter_mut().zip(&self.fine).zip(&self.coarse) {
                    *xi = (f * 16.0 - c) / 15.0;
                }
                let h = span / (2 * n) as f64;
                // let the step grow again once the pair agrees comfortably
                self.h = Some(if diff < self.opts.tol / 64.0 && halving == 0 { 2.0 * h } else { h });
                return Ok(());
            }
            std::mem::swap(&mut self.coarse, &mut self.fine);
            n *= 2;
        }
        Err(Error::StepUnderflow { t0: a, t1: b })
    }

    /// `n` RK4 steps over `[a, b]`, in place on `coarse` or `fine`.
    fn steps<F: Flow>(&mut self, flow: &F, drive: &DriveWaveform, a: f64, b: f64, n: usize, into_coarse: bool) {
        let h = (b - a) / n as f64;
        let [k1, k2, k3, k4, tmp] = &mut self.k;
        let y = if into_coarse { &mut self.coarse } else { &mut self.fine };
        let ea = drive.envelope_right(a);
        let eb = drive.envelope_left(b);
        let env = |t: f64| -> C64 {
            let f = (t - a) / (b - a);
            ea * (1.0 - f) + eb * f
        };
        for s in 0..n {
            let t = a + s as f64 * h;
            flow.rhs(env(t), y, k1);
            for i in 0..y.len() {
                tmp[i] = y[i] + k1[i] * (0.5 * h);
            }
            flow.rhs(env(t + 0.5 * h), tmp, k2);
            for i in 0..y.len() {
                tmp[i] = y[i] + k2[i] * (0.5 * h);
            }
            flow.rhs(env(t + 0.5 * h), tmp, k3);
            for i in 0..y.len() {
                tmp[i] = y[i] + k3[i] * h;
            }
            flow.rhs(env(if s + 1 == n { b } else { t + h }), tmp, k4);
            for i in 0..y.len() {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
    }
}
