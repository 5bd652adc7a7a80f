//! Drive waveforms and the recipes that turn a target state into one.
//!
//! Envelopes live in the cavity rotating frame. A waveform is a uniformly
//! sampled complex envelope (linearly interpolated between knots) plus a list
//! of instantaneous kicks, each carrying a complex pulse area.

use crate::error::{invalid, Error, Result};
use crate::linalg::{linear_exp_integral, C64, I, ZERO};
use crate::statespace::MechModel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest kick area considered weak.
pub const MAX_WEAK_AREA: f64 = 0.3;

/// Coefficients smaller than this count as absent.
const COEFF_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaAtom {
    pub t: f64,
    pub area: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveformJson", into = "WaveformJson")]
pub struct DriveWaveform {
    dt: f64,
    samples: Vec<C64>,
    deltas: Vec<DeltaAtom>,
    t_end: f64,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct WaveformJson {
    dt: f64,
    samples: Vec<[f64; 2]>,
    deltas: Vec<DeltaJson>,
    t_end: f64,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct DeltaJson {
    t: f64,
    re: f64,
    im: f64,
}

impl From<DriveWaveform> for WaveformJson {
    fn from(w: DriveWaveform) -> Self {
        WaveformJson {
            dt: w.dt,
            samples: w.samples.iter().map(|z| [z.re, z.im]).collect(),
            deltas: w.deltas.iter().map(|a| DeltaJson { t: a.t, re: a.area.re, im: a.area.im }).collect(),
            t_end: w.t_end,
            epsilon: w.epsilon,
        }
    }
}

impl TryFrom<WaveformJson> for DriveWaveform {
    type Error = Error;

    fn try_from(j: WaveformJson) -> Result<Self> {
        DriveWaveform::new(
            j.dt,
            j.samples.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
            j.deltas.into_iter().map(|d| DeltaAtom { t: d.t, area: C64::new(d.re, d.im) }).collect(),
            j.t_end,
            j.epsilon,
        )
    }
}

impl DriveWaveform {
    /// Samples sit at `t_k = k dt`; atoms are kept sorted by time.
    pub fn new(dt: f64, samples: Vec<C64>, mut deltas: Vec<DeltaAtom>, t_end: f64, epsilon: f64) -> Result<Self> {
        if !t_end.is_finite() || t_end < 0.0 {
            return Err(invalid(format!("waveform t_end must be finite and >= 0, got {t_end}")));
        }
        if !epsilon.is_finite() {
            return Err(invalid("waveform epsilon must be finite"));
        }
        if samples.len() == 1 {
            return Err(invalid("a sampled envelope needs at least two knots"));
        }
        if !samples.is_empty() {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(invalid(format!("sample step must be positive, got {dt}")));
            }
            let last = (samples.len() - 1) as f64 * dt;
            if last > t_end * (1.0 + 1e-9) + 1e-300 {
                return Err(invalid(format!("samples extend to {last}, past t_end = {t_end}")));
            }
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("non-finite envelope sample"));
        }
        for a in &deltas {
            if !a.t.is_finite() || a.t < 0.0 || a.t > t_end * (1.0 + 1e-12) {
                return Err(invalid(format!("delta atom at t = {} outside [0, {t_end}]", a.t)));
            }
            if !a.area.re.is_finite() || !a.area.im.is_finite() {
                return Err(invalid("non-finite delta atom area"));
            }
        }
        deltas.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self { dt, samples, deltas, t_end, epsilon })
    }

    /// No drive at all.
    pub fn zero() -> Self {
        Self { dt: 0.0, samples: Vec::new(), deltas: Vec::new(), t_end: 0.0, epsilon: 0.0 }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn deltas(&self) -> &[DeltaAtom] {
        &self.deltas
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn knot_time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Time of the last sample knot (0 when unsampled).
    pub fn sampled_end(&self) -> f64 {
        if self.samples.is_empty() { 0.0 } else { self.knot_time(self.samples.len() - 1) }
    }

    /// `ℰ₀(t)`, linear between knots and zero outside the sampled span.
    pub fn envelope(&self, t: f64) -> C64 {
        if self.samples.is_empty() || t < 0.0 || t > self.sampled_end() {
            return ZERO;
        }
        let x = t / self.dt;
        let k = (x.floor() as usize).min(self.samples.len() - 2);
        let frac = x - k as f64;
        self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac
    }

    /// `ℰ₀(t⁺)`; differs from [`Self::envelope`] only at the end of the sampled span.
    pub fn envelope_right(&self, t: f64) -> C64 {
        if t >= self.sampled_end() { ZERO } else { self.envelope(t) }
    }

    /// `ℰ₀(t⁻)`; differs from [`Self::envelope`] only at `t = 0`.
    pub fn envelope_left(&self, t: f64) -> C64 {
        if t <= 0.0 { ZERO } else { self.envelope(t) }
    }

    /// Latest time at which anything still drives the cavity.
    pub fn support_end(&self) -> f64 {
        let sampled = self
            .samples
            .iter()
            .rposition(|z| *z != ZERO)
            .map_or(0.0, |k| self.knot_time((k + 1).min(self.samples.len() - 1)));
        let atoms = self.deltas.iter().filter(|a| a.area != ZERO).map(|a| a.t).fold(0.0, f64::max);
        sampled.max(atoms)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| *z == ZERO) && self.deltas.iter().all(|a| a.area == ZERO)
    }

    pub fn max_atom_area(&self) -> f64 {
        self.deltas.iter().map(|a| a.area.norm()).fold(0.0, f64::max)
    }

    /// Same shape with every amplitude multiplied by `s` (ε scales with it).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dt: self.dt,
            samples: self.samples.iter().map(|z| z * s).collect(),
            deltas: self.deltas.iter().map(|a| DeltaAtom { t: a.t, area: a.area * s }).collect(),
            t_end: self.t_end,
            epsilon: self.epsilon * s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `f(φ)` on `[0, φ_max]`: uniform samples (linear in between, may be empty)
/// plus point weights `(φ_j, w_j)` standing for `w_j δ(φ − φ_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub phi_max: f64,
    #[serde(default)]
    pub samples: Vec<C64>,
    #[serde(default)]
    pub deltas: Vec<(f64, C64)>,
}

impl WeightFunction {
    pub fn new(phi_max: f64, samples: Vec<C64>, deltas: Vec<(f64, C64)>) -> Result<Self> {
        let w = Self { phi_max, samples, deltas };
        w.validate()?;
        Ok(w)
    }

    /// `f = 1/(2π)` on `[0, 2π]`, optionally carrying `e^{i m₀ φ}` to select
    /// the `m₀` component.
    pub fn uniform(m0: f64, knots: usize) -> Self {
        let knots = knots.max(2);
        let h = 2.0 * PI / (knots - 1) as f64;
        Self {
            phi_max: 2.0 * PI,
            samples: (0..knots).map(|k| (I * m0 * k as f64 * h).exp() / (2.0 * PI)).collect(),
            deltas: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_max > 0.0) || self.phi_max > 2.0 * PI * (1.0 + 1e-12) {
            return Err(Error::InvalidTarget(format!("phi_max must lie in (0, 2π], got {}", self.phi_max)));
        }
        if self.samples.len() == 1 {
            return Err(Error::InvalidTarget("weight samples need at least two knots".into()));
        }
        for &(phi, _) in &self.deltas {
            if !(0.0..=self.phi_max * (1.0 + 1e-12)).contains(&phi) {
                return Err(Error::InvalidTarget(format!("point weight at φ = {phi} outside [0, φ_max]")));
            }
        }
        let nonzero = self.samples.iter().chain(self.deltas.iter().map(|(_, w)| w)).any(|z| *z != ZERO);
        if !nonzero {
            return Err(Error::InvalidTarget("weight function is empty or identically zero".into()));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        self.phi_max / (self.samples.len() - 1) as f64
    }

    pub fn value(&self, phi: f64) -> C64 {
        if self.samples.is_empty() || phi < 0.0 || phi > self.phi_max {
            return ZERO;
        }
        let x = phi / self.step();
        let k = (x.floor() as usize).min(self.samples.len() - 2);
        let frac = x - k as f64;
        self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffBasis {
    /// Entry `k` is Dicke `m = −J + k`.
    Dicke,
    /// Entry `k` is `ã†ã = k`.
    DisplacedFock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTarget {
    pub coeffs: Vec<C64>,
    pub basis: CoeffBasis,
    #[serde(default = "two_pi")]
    pub phi_max: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

impl CoefficientTarget {
    pub fn new(coeffs: Vec<C64>, basis: CoeffBasis) -> Result<Self> {
        let t = Self { coeffs, basis, phi_max: 2.0 * PI };
        t.validate()?;
        Ok(t)
    }

    /// Unit weight on a single level.
    pub fn single(len: usize, index: usize, basis: CoeffBasis) -> Result<Self> {
        if index >= len {
            return Err(Error::InvalidTarget(format!("level index {index} outside basis of {len}")));
        }
        let mut c = vec![ZERO; len];
        c[index] = C64::new(1.0, 0.0);
        Self::new(c, basis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::InvalidTarget("empty coefficient list".into()));
        }
        let norm: f64 = self.coeffs.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTarget(format!("coefficients must be normalized, Σ|c|² = {norm}")));
        }
        if !(self.phi_max > 0.0) || self.phi_max > 2.0 * PI * (1.0 + 1e-12) {
            return Err(Error::InvalidTarget(format!("phi_max must lie in (0, 2π], got {}", self.phi_max)));
        }
        Ok(())
    }

    pub fn m_of(&self, k: usize) -> f64 {
        match self.basis {
            CoeffBasis::Dicke => k as f64 - (self.coeffs.len() - 1) as f64 / 2.0,
            CoeffBasis::DisplacedFock => k as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Weight(WeightFunction),
    Coefficients(CoefficientTarget),
}

fn warn_if_strong(epsilon: f64, omega: f64) {
    if (epsilon / omega).abs() > 0.3 {
        log::warn!("ε/Ω = {:.3} is outside the weak-drive regime", epsilon / omega);
    }
}

fn check_rates(omega: f64, kappa: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(invalid(format!("rotation rate must be positive, got {omega}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(invalid(format!("decay rate must be >= 0, got {kappa}")));
    }
    Ok(())
}

/// Uniform grid on `[0, t_end]` no coarser than `dt_max`.
fn grid(t_end: f64, dt_max: f64) -> (usize, f64) {
    let n = ((t_end / dt_max).ceil() as usize).max(1);
    (n, t_end / n as f64)
}

/// Painting recipe `ℰ₀(t) = ε f(φ_max − Ωt) e^{−κt/2}` on `[0, φ_max/Ω]`.
///
/// Knots of `f` land on knots of the drive grid, refined until the step is
/// at most `1/(20κ)`. Point weights become kicks of area `ε w_j e^{−κt_j/2}/Ω`.
pub fn synthesize_from_weight(target: &WeightFunction, omega: f64, kappa: f64, epsilon: f64) -> Result<DriveWaveform> {
    target.validate()?;
    check_rates(omega, kappa)?;
    warn_if_strong(epsilon, omega);
    let t_end = target.phi_max / omega;
    let samples = if target.samples.is_empty() {
        (0.0, Vec::new())
    } else {
        let coarse = target.step() / omega;
        let refine = if kappa > 0.0 { (coarse * 20.0 * kappa).ceil().max(1.0) as usize } else { 1 };
        let n = (target.samples.len() - 1) * refine;
        let dt = t_end / n as f64;
        let s = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let phi = (target.phi_max - omega * t).max(0.0);
                target.value(phi) * epsilon * (-0.5 * kappa * t).exp()
            })
            .collect();
        (dt, s)
    };
    let deltas = target
        .deltas
        .iter()
        .map(|&(phi, w)| {
            let t = ((target.phi_max - phi) / omega).clamp(0.0, t_end);
            DeltaAtom { t, area: w * epsilon * (-0.5 * kappa * t).exp() / omega }
        })
        .collect();
    DriveWaveform::new(samples.0, samples.1, deltas, t_end, epsilon)
}

/// Double-kick cat drive: area `ε/(√2Ω)` at `t = 0`, and the same times
/// `e^{iφ} e^{−κT/2}` at `T = Φ/Ω`.
pub fn cat_pulse(phi_sep: f64, rel_phase: f64, omega: f64, kappa: f64, epsilon: f64) -> Result<DriveWaveform> {
    if !(phi_sep > 0.0) || phi_sep > 2.0 * PI {
        return Err(invalid(format!("cat separation Φ must lie in (0, 2π], got {phi_sep}")));
    }
    check_rates(omega, kappa)?;
    warn_if_strong(epsilon, omega);
    let t = phi_sep / omega;
    let b1 = C64::new(epsilon / (2f64.sqrt() * omega), 0.0);
    let b2 = b1 * (I * rel_phase).exp() * (-0.5 * kappa * t).exp();
    DriveWaveform::new(0.0, Vec::new(), vec![DeltaAtom { t: 0.0, area: b1 }, DeltaAtom { t, area: b2 }], t, epsilon)
}

/// `f_m = ∫ f(φ) e^{−i(m−μ)φ} dφ`, exact for the piecewise-linear `f`.
///
/// The sign of the exponent matches `U₁(φ/Ω)|m⟩ = e^{−i(m−μ)φ}|m⟩`, so that
/// `c^f_m = c⁰_m f_m`.
pub fn fourier_weights(target: &WeightFunction, m_values: &[f64], mu: f64) -> Result<Vec<C64>> {
    target.validate()?;
    Ok(m_values
        .iter()
        .map(|&m| {
            let w = -I * (m - mu);
            let mut acc = ZERO;
            if !target.samples.is_empty() {
                let h = target.step();
                for (k, pair) in target.samples.windows(2).enumerate() {
                    let phi0 = k as f64 * h;
                    acc += (w * phi0).exp() * linear_exp_integral(pair[0], pair[1], h, w);
                }
            }
            for &(phi, wt) in &target.deltas {
                acc += wt * (w * phi).exp();
            }
            acc
        })
        .collect())
}

/// `ℰ₀(t) = (ε/2π) Σ_m (c^f_m/c⁰_m) e^{−iΩ(m−μ)t − κt/2}` on `[0, φ_max/Ω]`.
///
/// `initial` holds `c⁰_m` in the same basis and ordering as the target.
pub fn synthesize_from_coeffs(
    target: &CoefficientTarget,
    initial: &[C64],
    omega: f64,
    kappa: f64,
    mu: f64,
    epsilon: f64,
) -> Result<DriveWaveform> {
    target.validate()?;
    check_rates(omega, kappa)?;
    if initial.len() < target.coeffs.len() {
        return Err(Error::InvalidTarget(format!(
            "target has {} coefficients but the initial state only {}",
            target.coeffs.len(),
            initial.len()
        )));
    }
    warn_if_strong(epsilon, omega);
    let mut terms = Vec::new();
    for (k, (&cf, &c0)) in target.coeffs.iter().zip(initial).enumerate() {
        if cf.norm() <= COEFF_FLOOR {
            continue;
        }
        if c0.norm() <= COEFF_FLOOR {
            return Err(Error::UnreachableTarget { m: target.m_of(k) });
        }
        terms.push((cf / c0, target.m_of(k) - mu));
    }
    let t_end = target.phi_max / omega;
    let fastest = terms.iter().map(|&(_, d)| d.abs()).fold(0.0, f64::max);
    let mut dt_max = t_end / 64.0;
    if fastest > 0.0 {
        dt_max = dt_max.min(2.0 * PI / (40.0 * omega * fastest));
    }
    if kappa > 0.0 {
        dt_max = dt_max.min(1.0 / (20.0 * kappa));
    }
    let (n, dt) = grid(t_end, dt_max);
    let pref = epsilon / (2.0 * PI);
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let s: C64 = terms.iter().map(|&(r, d)| r * (-I * omega * d * t).exp()).sum();
            s * pref * (-0.5 * kappa * t).exp()
        })
        .collect();
    DriveWaveform::new(dt, samples, Vec::new(), t_end, epsilon)
}

/// `A = e^{X₁²/2}/(2π√2 X₁)`.
pub fn mech_qubit_amplitude(x1: f64) -> f64 {
    (0.5 * x1 * x1).exp() / (2.0 * PI * 2f64.sqrt() * x1)
}

/// Qubit drive `ℰ₀(t) = εA e^{iX₁²Ω_M t − κt/2}(X₁ + e^{−iΩ_M t})` over one
/// mechanical period.
pub fn mech_qubit_pulse(mech: &MechModel, kappa: f64, epsilon: f64) -> Result<DriveWaveform> {
    let omega = mech.omega_m();
    check_rates(omega, kappa)?;
    warn_if_strong(epsilon, omega);
    let x1 = mech.x1();
    let a = mech_qubit_amplitude(x1);
    let t_end = 2.0 * PI / omega;
    let mut dt_max = (2.0 * PI / (40.0 * omega)).min(t_end / 64.0);
    if kappa > 0.0 {
        dt_max = dt_max.min(1.0 / (20.0 * kappa));
    }
    let (n, dt) = grid(t_end, dt_max);
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let carrier = (C64::new(-0.5 * kappa * t, x1 * x1 * omega * t)).exp();
            carrier * (C64::new(x1, 0.0) + (-I * omega * t).exp()) * (epsilon * a)
        })
        .collect();
    DriveWaveform::new(dt, samples, Vec::new(), t_end, epsilon)
}
