use super::spin::log_factorials;
use crate::error::{invalid, Error, Result};
use crate::linalg::{poisson_cdf, CMatrix, CVector, SparseMatrix, C64};

/// Mechanical oscillator with radiation-pressure coupling `g₀` in zero-point
/// units. With `n` photons the equilibrium shifts to `n X₁`, `X₁ = g₀/Ω_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct MechModel {
    omega_m: f64,
    g0: f64,
    n_ph_max: usize,
}

impl MechModel {
    pub fn new(omega_m: f64, g0: f64, n_ph_max: usize) -> Result<Self> {
        if !(omega_m > 0.0) || !omega_m.is_finite() {
            return Err(invalid(format!("omega_m must be positive, got {omega_m}")));
        }
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(invalid(format!("g0 must be positive, got {g0}")));
        }
        if n_ph_max < 1 {
            return Err(invalid("phonon cutoff must be at least 1"));
        }
        Ok(Self { omega_m, g0, n_ph_max })
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn n_ph_max(&self) -> usize {
        self.n_ph_max
    }

    pub fn dim(&self) -> usize {
        self.n_ph_max + 1
    }

    pub fn x1(&self) -> f64 {
        self.g0 / self.omega_m
    }

    pub fn mu(&self) -> f64 {
        self.x1() * self.x1()
    }

    /// `H_n = Ω_M a†a − n g₀ (a + a†)` on the retained Fock block.
    pub(crate) fn block(&self, n: usize) -> SparseMatrix {
        let d = self.dim();
        let mut t = Vec::with_capacity(3 * d);
        let g = n as f64 * self.g0;
        for k in 0..d {
            t.push((k, k, C64::new(self.omega_m * k as f64, 0.0)));
            if n > 0 && k + 1 < d {
                let v = C64::new(-g * ((k + 1) as f64).sqrt(), 0.0);
                t.push((k, k + 1, v));
                t.push((k + 1, k, v));
            }
        }
        SparseMatrix::from_triplets(d, t)
    }

    /// One photon carries the vacuum around a circle of radius `X₁` about
    /// `X₁`; over `[0, τ]` the farthest point is `2X₁ sin(min(Ωτ, π)/2)`
    /// from the origin. Checks that this coherent state fits in the basis.
    pub(crate) fn check_rotation_cutoff(&self, tau: f64) -> Result<()> {
        let half = (self.omega_m * tau).min(std::f64::consts::PI) / 2.0;
        let r = 2.0 * self.x1() * half.sin();
        let tail = 1.0 - poisson_cdf(r * r, self.n_ph_max);
        if tail > super::LEAKAGE_LIMIT {
            return Err(Error::CutoffInsufficient {
                what: format!("phonon cutoff {} for rotation radius {r:.4}", self.n_ph_max),
                defect: tail,
                limit: super::LEAKAGE_LIMIT,
            });
        }
        Ok(())
    }
}

/// Truncated coherent state `|α⟩` on `dim` Fock levels (not renormalized).
pub fn coherent_state(dim: usize, alpha: C64) -> CVector {
    let lf = log_factorials(dim.saturating_sub(1));
    let r = alpha.norm();
    let phase = if r > 0.0 { alpha / r } else { C64::new(1.0, 0.0) };
    let mut out = CVector::zeros(dim);
    let mut ph = C64::new(1.0, 0.0);
    for k in 0..dim {
        let mag = if r == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (-0.5 * r * r + k as f64 * r.ln() - 0.5 * lf[k]).exp()
        };
        out[k] = ph * mag;
        ph *= phase;
    }
    out
}

/// Columns `0..count` are the displaced Fock states `|ã†ã = m⟩`,
/// `ã = a − X₁`, on the retained phonon block.
///
/// Built on a padded space by `|m+1̃⟩ = (a† − X₁)|m̃⟩/√(m+1)` starting from
/// the coherent state `|X₁⟩`, then truncated; a column whose truncated norm
/// deficit exceeds the leakage limit is reported as a cutoff failure.
pub fn displaced_fock_basis(mech: &MechModel, count: usize) -> Result<CMatrix> {
    let d = mech.dim();
    if count > d {
        return Err(invalid(format!("requested {count} displaced Fock states on a {d}-level basis")));
    }
    let x1 = mech.x1();
    let pad = 40 + (6.0 * (x1 * x1 + count as f64 + 1.0).sqrt()).ceil() as usize;
    let ext = d + pad;
    let mut v = coherent_state(ext, C64::new(x1, 0.0));
    let mut out = CMatrix::zeros(d, count);
    for m in 0..count {
        let kept: f64 = v.iter().take(d).map(|z| z.norm_sqr()).sum();
        let deficit = 1.0 - kept;
        if deficit > super::LEAKAGE_LIMIT {
            return Err(Error::CutoffInsufficient {
                what: format!("displaced Fock state m = {m} with phonon cutoff {}", mech.n_ph_max),
                defect: deficit,
                limit: super::LEAKAGE_LIMIT,
            });
        }
        out.column_mut(m).copy_from(&v.rows(0, d));
        let mut next = CVector::zeros(ext);
        for k in 0..ext {
            let mut z = -v[k] * x1;
            if k > 0 {
                z += v[k - 1] * (k as f64).sqrt();
            }
            next[k] = z / ((m + 1) as f64).sqrt();
        }
        v = next;
    }
    Ok(out)
}

pub fn displaced_fock_state(mech: &MechModel, m: usize) -> Result<CVector> {
    let basis = displaced_fock_basis(mech, m + 1)?;
    Ok(basis.column(m).into_owned())
}

/// `⟨ã†ã = m|0⟩ = e^{−X₁²/2}(−X₁)^m/√m!` for `m < count`.
pub fn vacuum_in_displaced_basis(x1: f64, count: usize) -> Vec<f64> {
    let lf = log_factorials(count.saturating_sub(1));
    (0..count)
        .map(|m| {
            if x1 == 0.0 {
                return if m == 0 { 1.0 } else { 0.0 };
            }
            let mag = (-0.5 * x1 * x1 + m as f64 * x1.abs().ln() - 0.5 * lf[m]).exp();
            if (x1 < 0.0) ^ (m % 2 == 1) { -mag } else { mag }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, HermitianSpectrum};
    use crate::statespace::{u1_propagator, SystemModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_displacement_limit_is_plain_fock() {
        // X₁ → 0 is excluded by construction, so use a vanishing coupling
        let m = MechModel::new(1.0, 1e-12, 10).unwrap();
        let v = displaced_fock_state(&m, 2).unwrap();
        assert_abs_diff_eq!(v[2].re, 1.0, epsilon = 1e-10);
        assert!(v.norm_squared() - v[2].norm_sqr() < 1e-20);
    }

    #[test]
    fn vacuum_overlap_closed_form() {
        let m = MechModel::new(1.0, 0.1, 30).unwrap();
        let v = displaced_fock_state(&m, 1).unwrap();
        let got = v[0].norm_sqr();
        let want = (-0.01f64).exp() * 0.01;
        assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 9.90e-3, epsilon = 1e-5);
        let coeffs = vacuum_in_displaced_basis(0.1, 5);
        assert_abs_diff_eq!(v[0].re, coeffs[1], epsilon = 1e-15);
    }

    #[test]
    fn matches_dense_displacement_operator() {
        let m = MechModel::new(1.0, 0.7, 60).unwrap();
        let d = m.dim();
        // D(X₁) = exp(X₁(a† − a)) = exp(−i G) with G = i X₁ (a† − a)
        let mut g = CMatrix::zeros(d, d);
        for k in 0..d - 1 {
            let s = (k as f64 + 1.0).sqrt() * m.x1();
            g[(k + 1, k)] = C64::new(0.0, s);
            g[(k, k + 1)] = C64::new(0.0, -s);
        }
        let disp = expm_hermitian(&g);
        let basis = displaced_fock_basis(&m, 4).unwrap();
        for k in 0..4 {
            let diff = (disp.column(k) - basis.column(k)).norm();
            assert!(diff < 1e-10, "column {k}: {diff}");
        }
    }

    #[test]
    fn orthonormal_within_cutoff() {
        let m = MechModel::new(1.0, 2.0, 80).unwrap();
        let b = displaced_fock_basis(&m, 12).unwrap();
        let gram = b.adjoint() * &b;
        for r in 0..12 {
            for c in 0..12 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((gram[(r, c)] - C64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn small_cutoff_is_reported() {
        let m = MechModel::new(1.0, 4.0, 10).unwrap();
        assert!(matches!(displaced_fock_state(&m, 0), Err(Error::CutoffInsufficient { .. })));
    }

    #[test]
    fn one_photon_block_spectrum() {
        let m = MechModel::new(1.0, 0.5, 60).unwrap();
        let spec = HermitianSpectrum::of_real(&m.block(1).to_real_dense());
        for k in 0..20 {
            assert_abs_diff_eq!(spec.values[k], k as f64 - 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn rotation_moves_vacuum_onto_circle() {
        let x1 = 8.0;
        let m = MechModel::new(1.0, x1, 120).unwrap();
        let tau = 3.0 / 8.0;
        let u = u1_propagator(&SystemModel::Mech(m.clone()), tau).unwrap();
        let mut vac = CVector::zeros(m.dim());
        vac[0] = C64::new(1.0, 0.0);
        let out = u.apply(&vac);
        let mean_a: C64 = (1..m.dim()).map(|k| out[k - 1].conj() * out[k] * (k as f64).sqrt()).sum();
        let want = C64::new(x1, 0.0) * (C64::new(1.0, 0.0) - C64::new(0.0, -tau).exp());
        assert!((mean_a - want).norm() < 1e-8);
        assert_abs_diff_eq!(mean_a.norm(), 2.0 * x1 * (tau / 2.0).sin(), epsilon = 1e-8);
        assert_abs_diff_eq!(mean_a.norm(), 2.98, epsilon = 0.01);
    }
}
