use crate::error::{invalid, Result};
use crate::linalg::{linear_exp_integral, CVector, HermitianSpectrum, C64, I, ZERO};
use crate::pulses::DriveWaveform;
use crate::statespace::{CavityModel, SystemModel};

/// First-order (single-photon) heralded state
/// `ψ₁ = −i√κ ∫₀^{t_d} ds ℰ₀(s) e^{−(κ_N/2)(t_d−s)} U₁(t_d−s) e^{−iH₀s} |ψ₀⟩`.
///
/// Each linear envelope segment is integrated in closed form in the
/// eigenbasis of `H₁`, and kicks at `t ≤ t_d` add their term directly, so
/// the only approximation is the weak-drive truncation itself. The `−i`
/// global phase matches the full conditional propagation.
pub fn weak_drive_heralded_state(
    initial: &CVector,
    system: &SystemModel,
    cavity: &CavityModel,
    drive: &DriveWaveform,
    t_d: f64,
) -> Result<CVector> {
    if !(t_d >= 0.0) || !t_d.is_finite() {
        return Err(invalid(format!("detection time must be finite and >= 0, got {t_d}")));
    }
    if initial.len() != system.dim() {
        return Err(invalid("initial state does not match the matter basis"));
    }
    let h0 = system.free_diagonal();
    let spec = match system {
        SystemModel::Spin(_) => None,
        SystemModel::Mech(_) => Some(HermitianSpectrum::of_real(&system.matter_block(1).to_real_dense())),
    };
    let lambdas: Vec<f64> = match &spec {
        None => system.matter_block(1).diagonal().iter().map(|z| z.re).collect(),
        Some(s) => s.values.clone(),
    };
    let half = 0.5 * cavity.kappa_n();
    let support: Vec<usize> = (0..initial.len()).filter(|&n| initial[n] != ZERO).collect();

    // amplitude of eigenvector k: Σ_n ⟨v_k|n⟩ c⁰_n I_{k,n}
    let overlap = |k: usize, n: usize| -> C64 {
        match &spec {
            None => if k == n { C64::new(1.0, 0.0) } else { ZERO },
            Some(s) => s.vectors[(n, k)].conj(),
        }
    };
    let pairs: Vec<(usize, usize, C64)> = (0..lambdas.len())
        .flat_map(|k| support.iter().map(move |&n| (k, n)))
        .filter_map(|(k, n)| {
            let o = overlap(k, n) * initial[n];
            (o != ZERO).then_some((k, n, o))
        })
        .collect();

    let mut coeffs = vec![ZERO; lambdas.len()];
    let samples = drive.samples();
    if samples.len() >= 2 {
        let dt = drive.dt();
        let last = ((t_d / dt).ceil() as usize).min(samples.len() - 1);
        for j in 0..last {
            let sa = j as f64 * dt;
            if sa >= t_d {
                break;
            }
            let sb = ((j + 1) as f64 * dt).min(t_d);
            let u0 = samples[j];
            let u1 = if sb < (j + 1) as f64 * dt { drive.envelope(sb) } else { samples[j + 1] };
            if u0 == ZERO && u1 == ZERO {
                continue;
            }
            for &(k, n, o) in &pairs {
                // ∫_{sa}^{sb} ℰ₀(s) e^{−(κ_N/2 + iλ_k)(t_d − s)} e^{−i h0_n s} ds
                let w = C64::new(half, lambdas[k] - h0[n]);
                let pre = (C64::new(-half, -lambdas[k]) * (t_d - sa) - I * h0[n] * sa).exp();
                coeffs[k] += o * pre * linear_exp_integral(u0, u1, sb - sa, w);
            }
        }
    }
    for atom in drive.deltas().iter().filter(|a| a.t <= t_d) {
        for &(k, n, o) in &pairs {
            let tau = t_d - atom.t;
            let phase = (C64::new(-half, -lambdas[k]) * tau - I * h0[n] * atom.t).exp();
            coeffs[k] += o * atom.area * phase;
        }
    }

    let scale = -I * cavity.kappa.sqrt();
    let c = CVector::from_iterator(coeffs.len(), coeffs.into_iter().map(|z| z * scale));
    Ok(match &spec {
        None => c,
        Some(s) => &s.vectors * c,
    })
}
