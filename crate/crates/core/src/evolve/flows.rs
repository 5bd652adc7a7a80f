use super::integrator::{EvolveOptions, Flow};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, CMatrix, C64, I, ONE, ZERO};
use crate::statespace::{annihilate_into, JointHamiltonian};

/// `exp(−i(βc† + β*c))` on the retained photon levels.
pub(crate) fn cavity_kick(cavity_dim: usize, area: C64) -> CMatrix {
    let mut g = CMatrix::zeros(cavity_dim, cavity_dim);
    for n in 1..cavity_dim {
        let s = (n as f64).sqrt();
        g[(n, n - 1)] = area * s;
        g[(n - 1, n)] = area.conj() * s;
    }
    expm_hermitian(&g)
}

/// Applies a cavity-only operator to every matter slot of a joint vector.
pub(crate) fn apply_cavity(op: &CMatrix, cavity_dim: usize, x: &mut [C64]) {
    let mut buf = vec![ZERO; cavity_dim];
    for chunk in x.chunks_exact_mut(cavity_dim) {
        for (r, b) in buf.iter_mut().enumerate() {
            *b = (0..cavity_dim).map(|c| op[(r, c)] * chunk[c]).sum();
        }
        chunk.copy_from_slice(&buf);
    }
}

fn bound_of(ham: &JointHamiltonian, drive_abs: f64) -> f64 {
    let mut b: f64 = 0.0;
    for n in 0..ham.cavity_dim() {
        let blk = ham.block(n);
        for r in 0..blk.dim() {
            b = b.max(blk.row(r).map(|(_, v)| v.norm()).sum());
        }
    }
    b + 2.0 * drive_abs * (ham.cavity_dim() as f64).sqrt()
}

/// Relative population in the top cavity level and the top matter level
/// (the latter only for the phonon basis).
fn check_tops(
    pops: impl Fn(usize, usize) -> f64,
    matter_dim: usize,
    cavity_dim: usize,
    phonon_basis: bool,
    t: f64,
    opts: &EvolveOptions,
) -> Result<()> {
    let mut total = 0.0;
    let mut top_cav = 0.0;
    let mut top_mat = 0.0;
    for i in 0..matter_dim {
        for n in 0..cavity_dim {
            let p = pops(i, n);
            total += p;
            if n + 1 == cavity_dim {
                top_cav += p;
            }
            if i + 1 == matter_dim {
                top_mat += p;
            }
        }
    }
    if total <= 0.0 {
        return Ok(());
    }
    if top_cav / total > opts.leakage {
        return Err(Error::CavityLeakage { population: top_cav / total, t, n_c_max: cavity_dim - 1 });
    }
    if phonon_basis && top_mat / total > opts.leakage {
        return Err(Error::CutoffInsufficient {
            what: format!("phonon cutoff {} reached at t = {t:.6e}", matter_dim - 1),
            defect: top_mat / total,
            limit: opts.leakage,
        });
    }
    Ok(())
}

/// Conditional (no-jump) Schrödinger flow `ψ̇ = −i H_eff ψ`.
pub(crate) struct NoJumpFlow<'a> {
    pub ham: &'a JointHamiltonian,
    pub phonon_basis: bool,
}

impl Flow for NoJumpFlow<'_> {
    fn len(&self) -> usize {
        self.ham.dim()
    }

    fn rhs(&self, drive: C64, x: &[C64], y: &mut [C64]) {
        self.ham.apply_into(drive, -I, x, y);
    }

    fn rate_bound(&self, drive_abs: f64) -> f64 {
        bound_of(self.ham, drive_abs)
    }

    fn kick(&self, area: C64, x: &mut Vec<C64>) {
        apply_cavity(&cavity_kick(self.ham.cavity_dim(), area), self.ham.cavity_dim(), x);
    }

    fn check(&self, x: &[C64], t: f64, opts: &EvolveOptions) -> Result<()> {
        let cd = self.ham.cavity_dim();
        check_tops(|i, n| x[i * cd + n].norm_sqr(), self.ham.matter_dim(), cd, self.phonon_basis, t, opts)
    }

    fn norm_sqr(&self, x: &[C64]) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Stack of density matrices `ρ_ℓ` (column-major, `D × D` each) obeying
/// `ρ̇_ℓ = −i(H ρ_ℓ − ρ_ℓ H†) + Σ_j r_{ℓj} c ρ_j c†`.
///
/// One level fed by itself at rate `κ_N` is the Lindblad master equation;
/// levels indexed by jump counts give the click-record hierarchy.
pub(crate) struct DensityFlow<'a> {
    pub ham: &'a JointHamiltonian,
    pub feeds: Vec<Vec<(usize, f64)>>,
    pub phonon_basis: bool,
}

impl DensityFlow<'_> {
    pub fn dim(&self) -> usize {
        self.ham.dim()
    }

    pub fn levels(&self) -> usize {
        self.feeds.len()
    }

    /// `Tr(c†c ρ_ℓ)` and `Tr ρ_ℓ`.
    pub fn photon_number(&self, x: &[C64], level: usize) -> (f64, f64) {
        let d = self.dim();
        let cd = self.ham.cavity_dim();
        let rho = &x[level * d * d..(level + 1) * d * d];
        let mut n = 0.0;
        let mut tr = 0.0;
        for k in 0..d {
            let p = rho[k * d + k].re;
            tr += p;
            n += p * (k % cd) as f64;
        }
        (n, tr)
    }

    fn jump_into(&self, src: &[C64], dst: &mut [C64], rate: f64) {
        // (c ρ c†)[(p,n),(q,m)] = √((n+1)(m+1)) ρ[(p,n+1),(q,m+1)]
        let d = self.dim();
        let cd = self.ham.cavity_dim();
        for col in 0..d {
            let m = col % cd;
            if m + 1 == cd {
                continue;
            }
            let sm = ((m + 1) as f64).sqrt();
            for row in 0..d {
                let n = row % cd;
                if n + 1 == cd {
                    continue;
                }
                let w = rate * sm * ((n + 1) as f64).sqrt();
                dst[col * d + row] += src[(col + 1) * d + row + 1] * w;
            }
        }
    }
}

impl Flow for DensityFlow<'_> {
    fn len(&self) -> usize {
        self.levels() * self.dim() * self.dim()
    }

    fn rhs(&self, drive: C64, x: &[C64], y: &mut [C64]) {
        let d = self.dim();
        let mut col = vec![ZERO; d];
        for (l, feeds) in self.feeds.iter().enumerate() {
            let rho = &x[l * d * d..(l + 1) * d * d];
            let out = &mut y[l * d * d..(l + 1) * d * d];
            // out = −i H ρ column by column, then out − out† gives the commutator form
            for c in 0..d {
                self.ham.apply_into(drive, -I, &rho[c * d..(c + 1) * d], &mut col);
                out[c * d..(c + 1) * d].copy_from_slice(&col);
            }
            for c in 0..d {
                for r in 0..=c {
                    let a = out[c * d + r];
                    let b = out[r * d + c];
                    let v = a + b.conj();
                    out[c * d + r] = v;
                    out[r * d + c] = v.conj();
                }
            }
            for &(src, rate) in feeds {
                let s = &x[src * d * d..(src + 1) * d * d];
                self.jump_into(s, out, rate);
            }
        }
    }

    fn rate_bound(&self, drive_abs: f64) -> f64 {
        2.0 * bound_of(self.ham, drive_abs)
    }

    fn kick(&self, area: C64, x: &mut Vec<C64>) {
        let cd = self.ham.cavity_dim();
        let k = cavity_kick(cd, area);
        let d = self.dim();
        for l in 0..self.levels() {
            let rho = &mut x[l * d * d..(l + 1) * d * d];
            // K ρ K† = K (K ρ)† for Hermitian ρ
            for c in 0..d {
                apply_cavity(&k, cd, &mut rho[c * d..(c + 1) * d]);
            }
            let mut t = vec![ZERO; d * d];
            for c in 0..d {
                for r in 0..d {
                    t[c * d + r] = rho[r * d + c].conj();
                }
            }
            for c in 0..d {
                apply_cavity(&k, cd, &mut t[c * d..(c + 1) * d]);
            }
            rho.copy_from_slice(&t);
        }
    }

    fn check(&self, x: &[C64], t: f64, opts: &EvolveOptions) -> Result<()> {
        let d = self.dim();
        let cd = self.ham.cavity_dim();
        let pops = |i: usize, n: usize| -> f64 {
            let k = i * cd + n;
            (0..self.levels()).map(|l| x[l * d * d + k * d + k].re.max(0.0)).sum()
        };
        check_tops(pops, self.ham.matter_dim(), cd, self.phonon_basis, t, opts)
    }

    fn norm_sqr(&self, x: &[C64]) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Distance-one photon coherences `X_k = ⟨k+1|ρ|k⟩` (matter `d × d`,
/// column-major) of the undriven master equation:
/// `Ẋ_k = −i(H_{k+1}X_k − X_k H_k) − κ_N(2k+1)/2 X_k + κ_N√((k+1)(k+2)) X_{k+1}`.
pub(crate) struct CoherenceChainFlow<'a> {
    pub ham: &'a JointHamiltonian,
    pub kappa_n: f64,
}

impl CoherenceChainFlow<'_> {
    pub fn matter_dim(&self) -> usize {
        self.ham.matter_dim()
    }

    pub fn levels(&self) -> usize {
        self.ham.cavity_dim() - 1
    }
}

impl Flow for CoherenceChainFlow<'_> {
    fn len(&self) -> usize {
        self.levels() * self.matter_dim() * self.matter_dim()
    }

    fn rhs(&self, _drive: C64, x: &[C64], y: &mut [C64]) {
        let d = self.matter_dim();
        let dd = d * d;
        y.iter_mut().for_each(|z| *z = ZERO);
        for k in 0..self.levels() {
            // the blocks carry −i n κ_N/2 already; strip it to get the Hermitian parts
            let up = self.ham.block(k + 1);
            let low = self.ham.block(k);
            let shift_up = C64::new(0.0, 0.5 * self.kappa_n * (k + 1) as f64);
            let shift_low = C64::new(0.0, 0.5 * self.kappa_n * k as f64);
            let xk = &x[k * dd..(k + 1) * dd];
            let out = &mut y[k * dd..(k + 1) * dd];
            for c in 0..d {
                for r in 0..d {
                    let mut hx = xk[c * d + r] * shift_up;
                    for (j, v) in up.row(r) {
                        hx += v * xk[c * d + j];
                    }
                    let mut xh = xk[c * d + r] * shift_low;
                    // H_k is symmetric, so (X H_k)[r, c] = Σ_j H_k[c, j] X[r, j]
                    for (j, v) in low.row(c) {
                        xh += v * xk[j * d + r];
                    }
                    out[c * d + r] = -I * (hx - xh) - xk[c * d + r] * (0.5 * self.kappa_n * (2 * k + 1) as f64);
                }
            }
            if k + 1 < self.levels() {
                let w = self.kappa_n * (((k + 1) * (k + 2)) as f64).sqrt();
                let next = &x[(k + 1) * dd..(k + 2) * dd];
                for (o, v) in out.iter_mut().zip(next) {
                    *o += v * w;
                }
            }
        }
    }

    fn rate_bound(&self, _drive_abs: f64) -> f64 {
        2.0 * bound_of(self.ham, 0.0)
    }

    fn kick(&self, _area: C64, _x: &mut Vec<C64>) {
        unreachable!("coherence chain is only propagated between kicks")
    }

    fn check(&self, _x: &[C64], _t: f64, _opts: &EvolveOptions) -> Result<()> {
        Ok(())
    }

    fn norm_sqr(&self, x: &[C64]) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `√κ c ψ` on a flat joint vector.
pub(crate) fn click(x: &[C64], cavity_dim: usize, kappa: f64) -> Vec<C64> {
    let mut y = vec![ZERO; x.len()];
    annihilate_into(x, cavity_dim, &mut y, ONE * kappa.sqrt());
    y
}
