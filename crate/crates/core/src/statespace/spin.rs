use crate::error::{invalid, Result};
use crate::linalg::{CVector, SparseMatrix, C64, I};

/// Ensemble of `N` two-level atoms restricted to the symmetric (Dicke)
/// subspace, dispersively coupled with shift `Ω_S` per photon.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinModel {
    n_atoms: usize,
    omega_s: f64,
}

impl SpinModel {
    pub fn new(n_atoms: usize, omega_s: f64) -> Result<Self> {
        if n_atoms < 1 {
            return Err(invalid("spin ensemble needs at least one atom"));
        }
        if !omega_s.is_finite() || omega_s == 0.0 {
            return Err(invalid(format!("omega_s must be finite and nonzero, got {omega_s}")));
        }
        Ok(Self { n_atoms, omega_s })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn j(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    /// Index `k` holds `m = −J + k`.
    pub fn m_of(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }

    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = m + self.j();
        let r = k.round();
        ((k - r).abs() < 1e-9 && r >= 0.0 && r <= self.n_atoms as f64).then_some(r as usize)
    }

    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m_of(k)).collect()
    }

    /// `H_n = n Ω_S J_z`.
    pub(crate) fn block(&self, n: usize) -> SparseMatrix {
        let diag: Vec<C64> = self
            .m_values()
            .iter()
            .map(|m| C64::new(n as f64 * self.omega_s * m, 0.0))
            .collect();
        SparseMatrix::from_diagonal(&diag)
    }
}

/// Coherent spin state pointing along `(polar, azimuth)` on the Bloch sphere.
///
/// Amplitudes `sqrt(C(2J, J+m)) cos(θ/2)^{J+m} sin(θ/2)^{J−m} e^{−imφ}`,
/// evaluated in log space so large `N` does not overflow.
pub fn coherent_spin_state(spin: &SpinModel, polar: f64, azimuth: f64) -> CVector {
    let n = spin.n_atoms;
    let (c, s) = ((polar / 2.0).cos(), (polar / 2.0).sin());
    let lf = log_factorials(n);
    CVector::from_iterator(
        spin.dim(),
        (0..=n).map(|k| {
            // k = J + m excitations
            let up = k;
            let down = n - k;
            let mag = if (up > 0 && c == 0.0) || (down > 0 && s == 0.0) {
                0.0
            } else {
                let mut l = 0.5 * (lf[n] - lf[up] - lf[down]);
                if up > 0 {
                    l += up as f64 * c.abs().ln();
                }
                if down > 0 {
                    l += down as f64 * s.abs().ln();
                }
                let sign = if (c < 0.0 && up % 2 == 1) ^ (s < 0.0 && down % 2 == 1) { -1.0 } else { 1.0 };
                sign * l.exp()
            };
            let m = spin.m_of(k);
            mag * (-I * m * azimuth).exp()
        }),
    )
}

/// `e^{−iφJ_z}|ψ⟩`.
pub fn rotate_spin(spin: &SpinModel, state: &CVector, phi: f64) -> CVector {
    assert_eq!(state.len(), spin.dim(), "state is not in this Dicke basis");
    CVector::from_iterator(
        state.len(),
        state.iter().enumerate().map(|(k, a)| a * (-I * spin.m_of(k) * phi).exp()),
    )
}

pub(crate) fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, CMatrix};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn jz_jx(spin: &SpinModel) -> (CMatrix, CMatrix) {
        let d = spin.dim();
        let j = spin.j();
        let mut jz = CMatrix::zeros(d, d);
        let mut jx = CMatrix::zeros(d, d);
        for k in 0..d {
            let m = spin.m_of(k);
            jz[(k, k)] = C64::new(m, 0.0);
            if k + 1 < d {
                let v = 0.5 * (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                jx[(k + 1, k)] = C64::new(v, 0.0);
                jx[(k, k + 1)] = C64::new(v, 0.0);
            }
        }
        (jz, jx)
    }

    #[test]
    fn single_spin_up() {
        let s = SpinModel::new(1, 1.0).unwrap();
        let v = coherent_spin_state(&s, 0.0, 0.0);
        // ascending m: index 0 is m = -1/2
        assert_abs_diff_eq!(v[1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_spins_along_x() {
        let s = SpinModel::new(2, 1.0).unwrap();
        let v = coherent_spin_state(&s, PI / 2.0, 0.0);
        let want = [0.5, 1.0 / 2f64.sqrt(), 0.5];
        for (a, w) in v.iter().zip(want) {
            assert_abs_diff_eq!(a.re, w, epsilon = 1e-14);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn x_state_binomial_and_normalized() {
        let s = SpinModel::new(30, 1.0).unwrap();
        let v = coherent_spin_state(&s, PI / 2.0, 0.0);
        assert_abs_diff_eq!(v.norm_squared(), 1.0, epsilon = 1e-12);
        let lf = log_factorials(30);
        for k in 0..=30 {
            let want = (0.5 * (lf[30] - lf[k] - lf[30 - k]) - 15.0 * 2f64.ln()).exp();
            assert_abs_diff_eq!(v[k].re, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn css_matches_rotation_of_down_state() {
        // e^{-iφJz} e^{-iθJy} |m=J⟩ built from dense generators
        let s = SpinModel::new(5, 1.0).unwrap();
        let (jz, jx) = jz_jx(&s);
        let jy = (&jz * &jx - &jx * &jz) * (-I);
        let (theta, phi) = (1.1, 0.7);
        let mut up = CVector::zeros(s.dim());
        up[s.dim() - 1] = C64::new(1.0, 0.0);
        let r = expm_hermitian(&(jz * C64::new(phi, 0.0))) * expm_hermitian(&(jy * C64::new(theta, 0.0)));
        let want = r * up;
        let got = coherent_spin_state(&s, theta, phi);
        let overlap = got.dotc(&want).norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_identities() {
        let s = SpinModel::new(4, 1.0).unwrap();
        let v = coherent_spin_state(&s, 0.9, 0.3);
        assert_eq!(rotate_spin(&s, &v, 0.0), v);
        let full = rotate_spin(&s, &v, 2.0 * PI);
        assert!((full - &v).norm() < 1e-12);

        let h = SpinModel::new(3, 1.0).unwrap();
        let w = coherent_spin_state(&h, 0.9, 0.3);
        let full = rotate_spin(&h, &w, 2.0 * PI);
        assert!((full + &w).norm() < 1e-12);
    }

    #[test]
    fn pi_rotation_flips_jx() {
        let s = SpinModel::new(2, 1.0).unwrap();
        let (jz, jx) = jz_jx(&s);
        let v = coherent_spin_state(&s, PI / 2.0, 0.0);
        let brute = expm_hermitian(&(jz * C64::new(PI, 0.0))) * &v;
        let r = rotate_spin(&s, &v, PI);
        assert!((&r - &brute).norm() < 1e-12);
        let ex = r.dotc(&(jx * &r)).re;
        assert_abs_diff_eq!(ex, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn index_round_trip() {
        let s = SpinModel::new(7, 1.0).unwrap();
        for k in 0..s.dim() {
            assert_eq!(s.index_of(s.m_of(k)), Some(k));
        }
        assert_eq!(s.index_of(0.0), None);
        assert_eq!(s.index_of(4.5), None);
    }
}
