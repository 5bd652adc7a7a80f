//! Targets, fidelities with imperfect detection, cooperativity limits, and the
//! grid-sweep driver behind the trade-off studies.

use crate::error::{invalid, Error, Result};
use crate::evolve::HeraldedResult;
use crate::linalg::{golden_section_max, CVector, C64};
use crate::statespace::{u1_propagator, SystemModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Quantum efficiency `Q`.
    pub q: f64,
    /// Dark-count rate `R_d`.
    pub r_d: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { q: 1.0, r_d: 0.0 }
    }
}

impl DetectorModel {
    pub fn new(q: f64, r_d: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(invalid(format!("quantum efficiency must lie in (0, 1], got {q}")));
        }
        if !(r_d >= 0.0) || !r_d.is_finite() {
            return Err(invalid(format!("dark-count rate must be >= 0, got {r_d}")));
        }
        Ok(Self { q, r_d })
    }
}

/// Normalized `(U₁(t_d)|ψ₀⟩ + e^{iφ} U₁(t_d − Φ/Ω)|ψ₀⟩)/𝒩` from the system's
/// default initial state: two copies rotated by `Φ` relative to each other.
pub fn target_cat(system: &SystemModel, phi_sep: f64, rel_phase: f64, t_d: f64) -> Result<CVector> {
    if !phi_sep.is_finite() || !rel_phase.is_finite() {
        return Err(invalid("cat angles must be finite"));
    }
    let lag = phi_sep / system.omega();
    if t_d < lag {
        return Err(invalid(format!("detection time {t_d} precedes the second branch at {lag}")));
    }
    let psi0 = system.default_initial();
    let a = u1_propagator(system, t_d)?.apply(&psi0);
    let b = u1_propagator(system, t_d - lag)?.apply(&psi0);
    let sum = a + b * C64::from_polar(1.0, rel_phase);
    let n = sum.norm();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(sum / C64::new(n, 0.0))
}

/// `|⟨ψ₁|ψ*⟩|²/⟨ψ₁|ψ₁⟩` with a normalized target.
///
/// With `rotation` the overlap is maximized over `U₁(θ/Ω)ψ₁`, `θ ∈ [0, 2π)`:
/// a 256-point scan followed by golden-section refinement to `10⁻⁶` rad.
pub fn fidelity_eps(psi1: &CVector, target: &CVector, rotation: Option<&SystemModel>) -> Result<f64> {
    if psi1.len() != target.len() {
        return Err(invalid("state and target live in different bases"));
    }
    let n1 = psi1.norm_squared();
    if n1 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let nt = target.norm_squared();
    if (nt - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("target must be normalized, ⟨ψ*|ψ*⟩ = {nt}")));
    }
    let Some(system) = rotation else {
        return Ok((psi1.dotc(target).norm_sqr() / n1).min(1.0));
    };
    if system.dim() != psi1.len() {
        return Err(invalid("rotation system does not match the state basis"));
    }
    let spec = system.rotation_spectrum();
    let a = spec.to_eigen(psi1);
    let b = spec.to_eigen(target);
    let phases: Vec<f64> = spec.values.iter().map(|l| l / system.omega()).collect();
    let weights: Vec<C64> = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).collect();
    let overlap = |theta: f64| -> f64 {
        weights.iter().zip(&phases).map(|(w, p)| w * C64::from_polar(1.0, -p * theta)).sum::<C64>().norm_sqr()
    };
    let scan = 256;
    let step = 2.0 * PI / scan as f64;
    let best = (0..scan)
        .map(|k| k as f64 * step)
        .max_by(|x, y| overlap(*x).total_cmp(&overlap(*y)))
        .expect("non-empty scan");
    let (_, f) = golden_section_max(overlap, best - step, best + step, 1e-6);
    Ok((f.max(overlap(best)) / n1).min(1.0))
}

/// `F_min = F_ε R_s/(R_t + R_d/Q)`; zero when nothing is ever detected.
pub fn fidelity_min(f_eps: f64, r_s: f64, r_t: f64, detector: &DetectorModel) -> f64 {
    let denom = r_t + detector.r_d / detector.q;
    if denom > 0.0 {
        f_eps * r_s / denom
    } else {
        0.0
    }
}

/// Fills in `r_t`, `f_eps` and `f_min` of a heralded result.
pub fn evaluate(
    mut result: HeraldedResult,
    target: &CVector,
    rotation: Option<&SystemModel>,
    r_t: f64,
    detector: &DetectorModel,
) -> Result<HeraldedResult> {
    let f = fidelity_eps(&result.psi1, target, rotation)?;
    result.f_min = Some(fidelity_min(f, result.r_s, r_t, detector));
    result.f_eps = Some(f);
    result.r_t = Some(r_t);
    Ok(result)
}

/// Mean of `F_min` over a detection window, composite trapezoid on the given
/// (ascending, uniform or not) samples.
pub fn window_average(t: &[f64], values: &[f64]) -> Result<f64> {
    if t.len() != values.len() || t.len() < 2 {
        return Err(invalid("window average needs at least two matching samples"));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(invalid("window must have positive length"));
    }
    let area: f64 = t.windows(2).zip(values.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
    Ok(area / span)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooperativityInput {
    pub eta: f64,
    pub n_atoms: usize,
}

impl CooperativityInput {
    pub fn new(eta: f64, n_atoms: usize) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(invalid(format!("cooperativity must be positive, got {eta}")));
        }
        if n_atoms == 0 {
            return Err(invalid("atom number must be positive"));
        }
        Ok(Self { eta, n_atoms })
    }

    /// `η = 𝒢²/(κΓ)` from the vacuum Rabi frequency, cavity and atomic linewidths.
    pub fn from_rates(g_rabi: f64, kappa: f64, gamma: f64, n_atoms: usize) -> Result<Self> {
        if !(kappa > 0.0 && gamma > 0.0) {
            return Err(invalid("linewidths must be positive"));
        }
        Self::new(g_rabi * g_rabi / (kappa * gamma), n_atoms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CooperativityLimits {
    /// Largest single-photon phase within a cavity lifetime, `√(η/2N)`.
    pub phi_c_max: f64,
    /// Largest cat size `Φ√N` in coherent-state widths, `√(η/2)`.
    pub cat_size_max: f64,
    /// `κ_N = Ω_S/Φ_c` for the requested `Φ_c`, when one was given.
    pub kappa_n: Option<f64>,
    /// The requested phase exceeds `phi_c_max`.
    pub flagged: bool,
}

/// Limits set by the cooperativity; `request = (Ω_S, Φ_c)` also yields `κ_N`.
pub fn cooperativity_limits(input: &CooperativityInput, request: Option<(f64, f64)>) -> Result<CooperativityLimits> {
    let CooperativityInput { eta, n_atoms } = CooperativityInput::new(input.eta, input.n_atoms)?;
    let phi_c_max = (eta / (2.0 * n_atoms as f64)).sqrt();
    let cat_size_max = (eta / 2.0).sqrt();
    let mut out = CooperativityLimits { phi_c_max, cat_size_max, kappa_n: None, flagged: false };
    if let Some((omega_s, phi_c)) = request {
        if !(omega_s > 0.0 && phi_c > 0.0) {
            return Err(invalid("requested Ω_S and Φ_c must be positive"));
        }
        out.kappa_n = Some(omega_s / phi_c);
        if phi_c > phi_c_max {
            out.flagged = true;
            log::warn!("Φ_c = {phi_c:.4} exceeds √(η/2N) = {phi_c_max:.4}; success is exponentially suppressed");
        }
    }
    Ok(out)
}

/// Absorption broadening `κ_N − κ = NΩ_S²/(2ηκ)` for atoms of cooperativity
/// `η`. With it `Φ_c = Ω_S/κ_N` peaks at exactly `√(η/2N)`, reached at
/// `Ω_S = κ√(2η/N)`.
pub fn absorption_loss(omega_s: f64, kappa: f64, input: &CooperativityInput) -> f64 {
    input.n_atoms as f64 * omega_s * omega_s / (2.0 * input.eta * kappa)
}

/// `A⁻² = 8π²X₁²e^{−X₁²}`, the rate suppression of the mechanical-qubit drive.
pub fn qubit_suppression(x1: f64) -> f64 {
    8.0 * PI * PI * x1 * x1 * (-x1 * x1).exp()
}

/// Sweep axis names in output-column order.
pub const AXES: [&str; 5] = ["eps_over_omega", "phi", "t_d", "eta", "rd_over_qkappa"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Grid coordinates of one sweep cell; unset axes are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Cell {
    pub eps_over_omega: Option<f64>,
    pub phi: Option<f64>,
    pub t_d: Option<f64>,
    pub eta: Option<f64>,
    pub rd_over_qkappa: Option<f64>,
}

impl Cell {
    fn set(&mut self, name: &str, v: f64) {
        match name {
            "eps_over_omega" => self.eps_over_omega = Some(v),
            "phi" => self.phi = Some(v),
            "t_d" => self.t_d = Some(v),
            "eta" => self.eta = Some(v),
            "rd_over_qkappa" => self.rd_over_qkappa = Some(v),
            _ => unreachable!("axis names are validated"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub preset: String,
    pub eps_over_omega: f64,
    pub phi: f64,
    pub t_d: f64,
    pub eta: f64,
    pub rd_over_qkappa: f64,
    pub r_s: f64,
    pub r_t: f64,
    pub f_eps: f64,
    pub f_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub const HEADER: &'static str = "preset,eps_over_omega,phi,t_d,eta,rd_over_qkappa,r_s,r_t,f_eps,f_min";

    /// A row with every numeric field NaN, to be filled by the evaluator.
    pub fn blank(preset: &str) -> Self {
        Self {
            preset: preset.to_string(),
            eps_over_omega: f64::NAN,
            phi: f64::NAN,
            t_d: f64::NAN,
            eta: f64::NAN,
            rd_over_qkappa: f64::NAN,
            r_s: f64::NAN,
            r_t: f64::NAN,
            f_eps: f64::NAN,
            f_min: f64::NAN,
            error: None,
        }
    }

    /// One CSV line, numbers as 17 significant digits in scientific notation.
    pub fn to_csv(&self) -> String {
        let mut s = self.preset.clone();
        for v in [
            self.eps_over_omega,
            self.phi,
            self.t_d,
            self.eta,
            self.rd_over_qkappa,
            self.r_s,
            self.r_t,
            self.f_eps,
            self.f_min,
        ] {
            write!(s, ",{v:.16e}").expect("write to string");
        }
        s
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn validate_axes(axes: &[Axis]) -> Result<()> {
    let mut seen = Vec::new();
    let mut total: usize = 1;
    for a in axes {
        if !AXES.contains(&a.name.as_str()) {
            return Err(Error::Config(format!("unknown sweep axis `{}` (expected one of {AXES:?})", a.name)));
        }
        if seen.contains(&a.name) {
            return Err(Error::Config(format!("sweep axis `{}` declared twice", a.name)));
        }
        if a.values.len() > 10_000 {
            return Err(Error::Config(format!("sweep axis `{}` has more than 10^4 points", a.name)));
        }
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sweep axis `{}` has non-finite values", a.name)));
        }
        seen.push(a.name.clone());
        total = total.saturating_mul(a.values.len());
    }
    if total > 1_000_000 {
        return Err(Error::Config(format!("sweep has {total} cells, more than 10^6")));
    }
    Ok(())
}

/// All cells in row-major order over the declared axes (first axis slowest).
/// No axes means no cells.
pub fn cells(axes: &[Axis]) -> Vec<Cell> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Vec::new();
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    (0..total)
        .map(|mut k| {
            let mut cell = Cell::default();
            for a in axes.iter().rev() {
                cell.set(&a.name, a.values[k % a.values.len()]);
                k /= a.values.len();
            }
            cell
        })
        .collect()
}

/// Evaluates every cell concurrently, keeping grid order. A failing cell is
/// logged and becomes a NaN row carrying the error text.
pub fn sweep<F>(preset: &str, axes: &[Axis], eval: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&Cell) -> Result<SweepRow> + Sync,
{
    let mut rows = Vec::new();
    sweep_streaming(preset, axes, usize::MAX, eval, |chunk| {
        rows.extend_from_slice(chunk);
        Ok(())
    })?;
    Ok(rows)
}

/// [`sweep`] in consecutive chunks of `chunk` cells, each handed to `sink`
/// in grid order as soon as it is done.
pub fn sweep_streaming<F, S>(preset: &str, axes: &[Axis], chunk: usize, eval: F, mut sink: S) -> Result<()>
where
    F: Fn(&Cell) -> Result<SweepRow> + Sync,
    S: FnMut(&[SweepRow]) -> Result<()>,
{
    validate_axes(axes)?;
    let grid = cells(axes);
    let total = grid.len();
    let mut done = 0;
    for part in grid.chunks(chunk.max(1)) {
        let rows: Vec<SweepRow> = part
            .par_iter()
            .map(|cell| {
                eval(cell).unwrap_or_else(|e| {
                    log::error!("sweep cell {cell:?} failed: {e}");
                    let mut r = SweepRow::blank(preset);
                    r.eps_over_omega = cell.eps_over_omega.unwrap_or(f64::NAN);
                    r.phi = cell.phi.unwrap_or(f64::NAN);
                    r.t_d = cell.t_d.unwrap_or(f64::NAN);
                    r.eta = cell.eta.unwrap_or(f64::NAN);
                    r.rd_over_qkappa = cell.rd_over_qkappa.unwrap_or(f64::NAN);
                    r.error = Some(e.to_string());
                    r
                })
            })
            .collect();
        done += rows.len();
        log::info!("sweep: {done}/{total} cells done");
        sink(&rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{rotate_spin, MechModel, SpinModel};
    use approx::assert_abs_diff_eq;

    fn spin(n: usize) -> SystemModel {
        SpinModel::new(n, 1.0).unwrap().into()
    }

    #[test]
    fn coincident_branches_give_rotated_initial_state() {
        let sys = spin(6);
        let t = target_cat(&sys, 0.0, 0.0, 0.8).unwrap();
        let want = rotate_spin(&SpinModel::new(6, 1.0).unwrap(), &sys.default_initial(), 0.8);
        assert!((t - want).norm() < 1e-12);
    }

    #[test]
    fn branch_overlap_of_large_spin_cat() {
        let s = SpinModel::new(30, 1.0).unwrap();
        let psi0 = SystemModel::from(s.clone()).default_initial();
        let other = rotate_spin(&s, &psi0, 2.0 * PI / 3.0);
        let overlap = psi0.dotc(&other).norm();
        assert_abs_diff_eq!(overlap, (PI / 3.0).cos().powi(30), epsilon = 1e-15);
        assert_abs_diff_eq!(overlap, 9.3e-10, epsilon = 1e-11);
    }

    #[test]
    fn cat_target_normalization_includes_branch_overlap() {
        let sys = spin(2);
        let t = target_cat(&sys, 0.9, 0.4, 1.0).unwrap();
        assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-14);
        assert!(target_cat(&sys, 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn mechanical_cat_lobes_sit_on_circle() {
        let mech = MechModel::new(1.0, 8.0, 160).unwrap();
        let sys: SystemModel = mech.into();
        let t = target_cat(&sys, 0.375, 0.0, 0.375).unwrap();
        // branches are U₁(Φ)|0⟩ and |0⟩; their distance is 2X₁ sin(Φ/2)
        assert_abs_diff_eq!(2.0 * 8.0 * (0.375f64 / 2.0).sin(), 2.98, epsilon = 0.01);
        assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_limits() {
        let sys = spin(4);
        let t = sys.default_initial();
        let scaled = &t * C64::new(0.0, 3.0);
        assert_abs_diff_eq!(fidelity_eps(&scaled, &t, None).unwrap(), 1.0, epsilon = 1e-14);
        let mut e = CVector::zeros(5);
        e[0] = C64::new(1.0, 0.0);
        let mut o = CVector::zeros(5);
        o[1] = C64::new(1.0, 0.0);
        assert_eq!(fidelity_eps(&e, &o, None).unwrap(), 0.0);
        assert!(matches!(fidelity_eps(&CVector::zeros(5), &o, None), Err(Error::ZeroNorm)));
    }

    #[test]
    fn rotation_is_optimized_away() {
        let s = SpinModel::new(8, 1.0).unwrap();
        let sys: SystemModel = s.clone().into();
        let t = sys.default_initial();
        let rotated = rotate_spin(&s, &t, 1.234);
        assert!(fidelity_eps(&rotated, &t, None).unwrap() < 0.5);
        assert_abs_diff_eq!(fidelity_eps(&rotated, &t, Some(&sys)).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fidelity_min_limits() {
        let ideal = DetectorModel::default();
        assert_eq!(fidelity_min(0.97, 0.2, 0.2, &ideal), 0.97);
        let d = DetectorModel::new(0.5, 0.1).unwrap();
        assert_eq!(fidelity_min(1.0, 0.2, 0.2, &d), 0.5);
        let mut last = f64::INFINITY;
        for rd in [0.0, 1e-3, 1e-2, 0.1, 1.0] {
            let f = fidelity_min(0.9, 0.1, 0.12, &DetectorModel::new(0.8, rd).unwrap());
            assert!(f <= last && f <= 0.9);
            last = f;
        }
    }

    #[test]
    fn cooperativity_numbers() {
        let lim = cooperativity_limits(&CooperativityInput::new(50.0, 30).unwrap(), Some((1.0, 0.5))).unwrap();
        assert_abs_diff_eq!(lim.phi_c_max, (50.0f64 / 60.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(lim.phi_c_max, 0.9129, epsilon = 1e-4);
        assert_abs_diff_eq!(lim.cat_size_max, 5.0, epsilon = 1e-15);
        assert_eq!(lim.kappa_n, Some(2.0));
        assert!(!lim.flagged);
        let over = cooperativity_limits(&CooperativityInput::new(50.0, 30).unwrap(), Some((1.0, 1.0))).unwrap();
        assert!(over.flagged);
        let big = cooperativity_limits(&CooperativityInput::new(50.0, 1_000_000).unwrap(), None).unwrap();
        assert_abs_diff_eq!(big.phi_c_max, 5e-3, epsilon = 1e-15);
        assert_eq!(big.cat_size_max, 5.0);
    }

    #[test]
    fn absorption_model_saturates_the_bound() {
        let input = CooperativityInput::new(50.0, 30).unwrap();
        let kappa = 1.0;
        let phi_c = |w: f64| w / (kappa + absorption_loss(w, kappa, &input));
        let best = kappa * (2.0 * 50.0 / 30.0f64).sqrt();
        assert_abs_diff_eq!(phi_c(best), (50.0f64 / 60.0).sqrt(), epsilon = 1e-14);
        assert!(phi_c(best * 1.1) < phi_c(best) && phi_c(best * 0.9) < phi_c(best));
    }

    #[test]
    fn cells_are_row_major() {
        let axes = vec![
            Axis { name: "eps_over_omega".into(), values: vec![0.1, 0.2] },
            Axis { name: "rd_over_qkappa".into(), values: vec![1e-5, 1e-4] },
        ];
        let c = cells(&axes);
        let pairs: Vec<(f64, f64)> = c.iter().map(|c| (c.eps_over_omega.unwrap(), c.rd_over_qkappa.unwrap())).collect();
        assert_eq!(pairs, vec![(0.1, 1e-5), (0.1, 1e-4), (0.2, 1e-5), (0.2, 1e-4)]);
        assert!(cells(&[]).is_empty());
        assert!(validate_axes(&[Axis { name: "bogus".into(), values: vec![1.0] }]).is_err());
    }

    #[test]
    fn failed_cells_do_not_stop_the_sweep() {
        let axes = vec![Axis { name: "phi".into(), values: vec![1.0, -1.0, 2.0] }];
        let rows = sweep("test", &axes, |c| {
            let phi = c.phi.unwrap();
            if phi < 0.0 {
                return Err(invalid("negative"));
            }
            let mut r = SweepRow::blank("test");
            r.phi = phi;
            r.r_s = phi * 2.0;
            Ok(r)
        })
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].r_s, 2.0);
        assert!(rows[1].r_s.is_nan() && rows[1].error.is_some());
        assert_eq!(rows[2].phi, 2.0);
    }

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        let mut r = SweepRow::blank("x");
        r.r_s = 0.1;
        let line = r.to_csv();
        assert!(line.contains(",1.0000000000000001e-1,"), "{line}");
        assert!(line.starts_with("x,NaN,"));
    }

    #[test]
    fn window_average_of_linear_function() {
        let t: Vec<f64> = (0..=64).map(|k| 3.0 + 2.0 * k as f64 / 64.0).collect();
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x).collect();
        assert_abs_diff_eq!(window_average(&t, &v).unwrap(), 8.0, epsilon = 1e-12);
    }
}
