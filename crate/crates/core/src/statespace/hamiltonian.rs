use super::{CavityModel, SystemModel};
use crate::linalg::{CMatrix, CVector, SparseMatrix, C64, ONE, ZERO};

/// Joint amplitude vector on `matter ⊗ cavity`, cavity index fastest.
/// Conditional states are left unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub amplitudes: CVector,
    matter_dim: usize,
    cavity_dim: usize,
}

impl JointState {
    /// Matter state with an empty cavity.
    pub fn from_matter(matter: &CVector, cavity_dim: usize) -> Self {
        Self::from_matter_with_photons(matter, cavity_dim, 0)
    }

    pub fn from_matter_with_photons(matter: &CVector, cavity_dim: usize, n: usize) -> Self {
        assert!(n < cavity_dim, "photon number {n} outside cavity cutoff");
        let mut amplitudes = CVector::zeros(matter.len() * cavity_dim);
        for (i, a) in matter.iter().enumerate() {
            amplitudes[i * cavity_dim + n] = *a;
        }
        Self { amplitudes, matter_dim: matter.len(), cavity_dim }
    }

    pub fn from_amplitudes(amplitudes: CVector, matter_dim: usize, cavity_dim: usize) -> Self {
        assert_eq!(amplitudes.len(), matter_dim * cavity_dim, "joint vector length mismatch");
        Self { amplitudes, matter_dim, cavity_dim }
    }

    pub fn matter_dim(&self) -> usize {
        self.matter_dim
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim
    }

    pub fn index(&self, matter: usize, photons: usize) -> usize {
        matter * self.cavity_dim + photons
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn inner(&self, other: &JointState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn normalized(&self) -> Option<JointState> {
        let n = self.amplitudes.norm();
        (n > 0.0).then(|| JointState {
            amplitudes: &self.amplitudes / C64::new(n, 0.0),
            matter_dim: self.matter_dim,
            cavity_dim: self.cavity_dim,
        })
    }

    /// Matter amplitudes of the `n`-photon component.
    pub fn photon_component(&self, n: usize) -> CVector {
        CVector::from_iterator(self.matter_dim, (0..self.matter_dim).map(|i| self.amplitudes[i * self.cavity_dim + n]))
    }

    pub fn photon_populations(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.cavity_dim];
        for (k, a) in self.amplitudes.iter().enumerate() {
            p[k % self.cavity_dim] += a.norm_sqr();
        }
        p
    }

    pub fn matter_populations(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.matter_dim];
        for (k, a) in self.amplitudes.iter().enumerate() {
            p[k / self.cavity_dim] += a.norm_sqr();
        }
        p
    }

    /// `c|ψ⟩`.
    pub fn annihilate(&self) -> JointState {
        let mut out = CVector::zeros(self.amplitudes.len());
        annihilate_into(self.amplitudes.as_slice(), self.cavity_dim, out.as_mut_slice(), ONE);
        JointState { amplitudes: out, matter_dim: self.matter_dim, cavity_dim: self.cavity_dim }
    }
}

/// `y += alpha c x`.
pub(crate) fn annihilate_into(x: &[C64], cavity_dim: usize, y: &mut [C64], alpha: C64) {
    for (xs, ys) in x.chunks_exact(cavity_dim).zip(y.chunks_exact_mut(cavity_dim)) {
        for n in 0..cavity_dim - 1 {
            ys[n] += alpha * xs[n + 1] * ((n + 1) as f64).sqrt();
        }
    }
}

/// `y += alpha c† x`.
pub(crate) fn create_into(x: &[C64], cavity_dim: usize, y: &mut [C64], alpha: C64) {
    for (xs, ys) in x.chunks_exact(cavity_dim).zip(y.chunks_exact_mut(cavity_dim)) {
        for n in 1..cavity_dim {
            ys[n] += alpha * xs[n - 1] * (n as f64).sqrt();
        }
    }
}

/// Drive-independent part of `H_eff`: one matter block per photon number,
/// each carrying its `−i n κ_N/2` damping on the diagonal.
#[derive(Clone, Debug)]
pub struct JointHamiltonian {
    blocks: Vec<SparseMatrix>,
    matter_dim: usize,
    cavity_dim: usize,
    kappa_n: f64,
}

impl JointHamiltonian {
    pub fn new(system: &SystemModel, cavity: &CavityModel) -> Self {
        Self::from_blocks((0..cavity.dim()).map(|n| system.matter_block(n)).collect(), cavity.kappa_n())
    }

    /// Builds from the bare `H_n`, one per retained photon number.
    pub fn from_blocks(raw: Vec<SparseMatrix>, kappa_n: f64) -> Self {
        let matter_dim = raw[0].dim();
        let cavity_dim = raw.len();
        let blocks = raw
            .into_iter()
            .enumerate()
            .map(|(n, b)| {
                let damp = C64::new(0.0, -0.5 * kappa_n * n as f64);
                let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(b.nnz() + b.dim());
                for r in 0..b.dim() {
                    t.extend(b.row(r).map(|(c, v)| (r, c, v)));
                    t.push((r, r, damp));
                }
                SparseMatrix::from_triplets(b.dim(), t)
            })
            .collect();
        Self { blocks, matter_dim, cavity_dim, kappa_n }
    }

    pub fn matter_dim(&self) -> usize {
        self.matter_dim
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim
    }

    pub fn dim(&self) -> usize {
        self.matter_dim * self.cavity_dim
    }

    pub fn kappa_n(&self) -> f64 {
        self.kappa_n
    }

    pub fn block(&self, n: usize) -> &SparseMatrix {
        &self.blocks[n]
    }

    /// `y = alpha H_eff(ℰ₀) x`.
    pub fn apply_into(&self, drive: C64, alpha: C64, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|z| *z = ZERO);
        for (n, b) in self.blocks.iter().enumerate() {
            b.mul_add_strided(alpha, x, n, self.cavity_dim, y, n);
        }
        if drive != ZERO {
            create_into(x, self.cavity_dim, y, alpha * drive);
            annihilate_into(x, self.cavity_dim, y, alpha * drive.conj());
        }
    }

    pub fn to_dense(&self, drive: C64) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut e = vec![ZERO; d];
        let mut col = vec![ZERO; d];
        for c in 0..d {
            e[c] = ONE;
            self.apply_into(drive, ONE, &e, &mut col);
            for r in 0..d {
                m[(r, c)] = col[r];
            }
            e[c] = ZERO;
        }
        m
    }
}

/// `H_eff` evaluated at one drive value.
#[derive(Clone, Debug)]
pub struct JointOperator {
    pub hamiltonian: JointHamiltonian,
    pub drive: C64,
}

impl JointOperator {
    pub fn apply(&self, state: &JointState) -> JointState {
        let mut out = CVector::zeros(state.amplitudes.len());
        self.hamiltonian.apply_into(self.drive, ONE, state.amplitudes.as_slice(), out.as_mut_slice());
        JointState::from_amplitudes(out, state.matter_dim(), state.cavity_dim())
    }

    pub fn to_dense(&self) -> CMatrix {
        self.hamiltonian.to_dense(self.drive)
    }
}

/// `H = H_{S/M} + ℰ₀c† + ℰ₀*c − i(κ_N/2)c†c` in the cavity rotating frame.
pub fn build_h_eff(system: &SystemModel, cavity: &CavityModel, envelope_value: C64) -> JointOperator {
    JointOperator { hamiltonian: JointHamiltonian::new(system, cavity), drive: envelope_value }
}
