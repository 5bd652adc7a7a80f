//! Matter and cavity bases, the single-photon conditional rotation `U₁`, and
//! the joint non-Hermitian Hamiltonian.
//!
//! The joint basis is `matter ⊗ cavity` with the cavity index running fastest:
//! amplitude `(i, n)` lives at `i * (n_c_max + 1) + n`. Everything is written
//! in the frame rotating at the bare cavity frequency, so `ω_c` never appears.

mod hamiltonian;
mod mech;
mod spin;

pub use hamiltonian::{build_h_eff, JointHamiltonian, JointOperator, JointState};
pub(crate) use hamiltonian::annihilate_into;
pub use mech::{coherent_state, displaced_fock_basis, displaced_fock_state, vacuum_in_displaced_basis, MechModel};
pub use spin::{coherent_spin_state, rotate_spin, SpinModel};

use crate::error::{invalid, Result};
use crate::linalg::{CMatrix, CVector, HermitianSpectrum, SparseMatrix, C64, I};
use serde::{Deserialize, Serialize};

/// Phonon-basis and cavity-basis leakage limit shared by all runtime checks.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum SystemModel {
    Spin(SpinModel),
    Mech(MechModel),
}

impl From<SpinModel> for SystemModel {
    fn from(s: SpinModel) -> Self {
        SystemModel::Spin(s)
    }
}

impl From<MechModel> for SystemModel {
    fn from(m: MechModel) -> Self {
        SystemModel::Mech(m)
    }
}

impl SystemModel {
    pub fn dim(&self) -> usize {
        match self {
            SystemModel::Spin(s) => s.dim(),
            SystemModel::Mech(m) => m.dim(),
        }
    }

    /// Single-photon rotation rate Ω (Ω_S or Ω_M).
    pub fn omega(&self) -> f64 {
        match self {
            SystemModel::Spin(s) => s.omega_s(),
            SystemModel::Mech(m) => m.omega_m(),
        }
    }

    /// Frequency offset μ of the painting frequencies: 0 for spins, X₁² for mechanics.
    pub fn mu(&self) -> f64 {
        match self {
            SystemModel::Spin(_) => 0.0,
            SystemModel::Mech(m) => m.mu(),
        }
    }

    pub fn is_spin(&self) -> bool {
        matches!(self, SystemModel::Spin(_))
    }

    /// Labels `m` of the `U₁` eigenbasis: Dicke `m` (ascending) or displaced phonon number.
    pub fn m_values(&self) -> Vec<f64> {
        match self {
            SystemModel::Spin(s) => s.m_values(),
            SystemModel::Mech(m) => (0..m.dim()).map(|k| k as f64).collect(),
        }
    }

    /// Matter Hamiltonian projected on `n` cavity photons, `H_n`.
    pub fn matter_block(&self, n: usize) -> SparseMatrix {
        match self {
            SystemModel::Spin(s) => s.block(n),
            SystemModel::Mech(m) => m.block(n),
        }
    }

    /// The state the scheme starts from: x-polarized coherent spin state or
    /// the mechanical ground state.
    pub fn default_initial(&self) -> CVector {
        match self {
            SystemModel::Spin(s) => coherent_spin_state(s, std::f64::consts::FRAC_PI_2, 0.0),
            SystemModel::Mech(m) => {
                let mut v = CVector::zeros(m.dim());
                v[0] = C64::new(1.0, 0.0);
                v
            }
        }
    }

    /// Eigen-decomposition of `H₁`, the generator of `U₁`.
    pub fn rotation_spectrum(&self) -> RotationSpectrum {
        match self {
            SystemModel::Spin(s) => RotationSpectrum {
                values: s.m_values().iter().map(|m| s.omega_s() * m).collect(),
                basis: None,
            },
            SystemModel::Mech(m) => {
                let spec = HermitianSpectrum::of_real(&m.block(1).to_real_dense());
                RotationSpectrum { values: spec.values, basis: Some(spec.vectors) }
            }
        }
    }

    /// Free matter Hamiltonian `H₀` diagonal (both systems are diagonal with no photons).
    pub fn free_diagonal(&self) -> Vec<f64> {
        let b = self.matter_block(0);
        debug_assert!(b.is_diagonal());
        b.diagonal().iter().map(|z| z.re).collect()
    }
}

/// Eigenpairs of `H₁`. `basis == None` means the computational basis is
/// already the eigenbasis (spins).
#[derive(Clone, Debug)]
pub struct RotationSpectrum {
    pub values: Vec<f64>,
    pub basis: Option<CMatrix>,
}

impl RotationSpectrum {
    pub fn to_eigen(&self, v: &CVector) -> CVector {
        match &self.basis {
            None => v.clone(),
            Some(b) => b.ad_mul(v),
        }
    }

    pub fn from_eigen(&self, c: &CVector) -> CVector {
        match &self.basis {
            None => c.clone(),
            Some(b) => b * c,
        }
    }

    /// `U₁(τ) v`.
    pub fn evolve(&self, v: &CVector, tau: f64) -> CVector {
        let mut c = self.to_eigen(v);
        for (z, &l) in c.iter_mut().zip(&self.values) {
            *z *= (-I * l * tau).exp();
        }
        self.from_eigen(&c)
    }
}

/// Matter-space operator; spin rotations stay diagonal.
#[derive(Clone, Debug, PartialEq)]
pub enum MatterOperator {
    Diagonal(CVector),
    Dense(CMatrix),
}

impl MatterOperator {
    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            MatterOperator::Diagonal(d) => d.component_mul(v),
            MatterOperator::Dense(m) => m * v,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            MatterOperator::Diagonal(d) => CMatrix::from_diagonal(d),
            MatterOperator::Dense(m) => m.clone(),
        }
    }

    pub fn compose(&self, rhs: &MatterOperator) -> MatterOperator {
        match (self, rhs) {
            (MatterOperator::Diagonal(a), MatterOperator::Diagonal(b)) => {
                MatterOperator::Diagonal(a.component_mul(b))
            }
            _ => MatterOperator::Dense(self.to_dense() * rhs.to_dense()),
        }
    }
}

/// Conditional rotation `U₁(τ)` for one intracavity photon.
///
/// For mechanics this is `exp(-iΩ(a†−X₁)(a−X₁)τ) exp(iΩX₁²τ)` on the
/// truncated Fock space. The truncated generator is exactly unitary on the
/// retained block, so the cutoff check instead asks how much of the image of
/// the vacuum (a coherent state of radius `2X₁|sin(Ωτ/2)|`) falls outside it.
pub fn u1_propagator(system: &SystemModel, tau: f64) -> Result<MatterOperator> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(invalid(format!("u1_propagator needs finite tau >= 0, got {tau}")));
    }
    match system {
        SystemModel::Spin(s) => Ok(MatterOperator::Diagonal(CVector::from_iterator(
            s.dim(),
            s.m_values().into_iter().map(|m| (-I * s.omega_s() * m * tau).exp()),
        ))),
        SystemModel::Mech(m) => {
            m.check_rotation_cutoff(tau)?;
            let spec = HermitianSpectrum::of_real(&m.block(1).to_real_dense());
            Ok(MatterOperator::Dense(spec.propagator(tau)))
        }
    }
}

/// Cavity mode. `kappa` is the detected-port linewidth; `kappa_loss` an
/// undetected channel (absorption broadening), so `κ_N = κ + κ_loss`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityModel {
    pub kappa: f64,
    #[serde(default)]
    pub kappa_loss: f64,
    #[serde(default = "default_n_c_max")]
    pub n_c_max: usize,
}

fn default_n_c_max() -> usize {
    3
}

impl CavityModel {
    pub fn new(kappa: f64) -> Result<Self> {
        Self { kappa, kappa_loss: 0.0, n_c_max: 3 }.validated()
    }

    pub fn with_loss(mut self, kappa_loss: f64) -> Result<Self> {
        self.kappa_loss = kappa_loss;
        self.validated()
    }

    pub fn with_cutoff(mut self, n_c_max: usize) -> Result<Self> {
        self.n_c_max = n_c_max;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(invalid(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.kappa_loss >= 0.0) || !self.kappa_loss.is_finite() {
            return Err(invalid(format!("kappa_loss must be >= 0, got {}", self.kappa_loss)));
        }
        if self.n_c_max < 1 {
            return Err(invalid("cavity cutoff must retain at least one photon"));
        }
        Ok(self)
    }

    pub fn kappa_n(&self) -> f64 {
        self.kappa + self.kappa_loss
    }

    pub fn dim(&self) -> usize {
        self.n_c_max + 1
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn systems() -> Vec<SystemModel> {
        vec![SpinModel::new(7, 1.3).unwrap().into(), MechModel::new(0.5, 0.4, 40).unwrap().into()]
    }

    #[test]
    fn u1_composes_as_a_semigroup() {
        for sys in systems() {
            let (a, b) = (0.37, 1.21);
            let lhs = u1_propagator(&sys, a).unwrap().compose(&u1_propagator(&sys, b).unwrap()).to_dense();
            let rhs = u1_propagator(&sys, a + b).unwrap().to_dense();
            assert!((lhs - rhs).norm() < 1e-8);
        }
    }

    #[test]
    fn spin_rotation_closes_after_full_period() {
        for n in [6, 7] {
            let s = SpinModel::new(n, 2.0).unwrap();
            let u = u1_propagator(&s.clone().into(), 2.0 * PI / 2.0).unwrap().to_dense();
            let phase = u[(0, 0)];
            let id = CMatrix::identity(s.dim(), s.dim()) * phase;
            assert!((u - id).norm() < 1e-12);
            assert!((phase.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cavity_rejects_bad_parameters() {
        assert!(CavityModel::new(0.0).is_err());
        assert!(CavityModel::new(1.0).unwrap().with_loss(-1.0).is_err());
        assert!(CavityModel::new(1.0).unwrap().with_cutoff(0).is_err());
        assert_eq!(CavityModel::new(1.0).unwrap().with_loss(0.5).unwrap().kappa_n(), 1.5);
    }
}
