//! Small numeric kernels shared by the propagators: a row-compressed sparse
//! operator, Hermitian exponentials, and exact integrals of piecewise-linear
//! envelopes against complex exponentials.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Row-compressed square operator. Matter blocks of the joint Hamiltonian are
/// diagonal (spin) or tridiagonal (mechanics), so a plain CSR layout is enough.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        m.row_ptr.clear();
        m.row_ptr.push(0);
        for (i, &v) in diag.iter().enumerate() {
            if v != ZERO {
                m.cols.push(i);
                m.vals.push(v);
            }
            m.row_ptr.push(m.cols.len());
        }
        m
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row = 0;
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            while row < r {
                row_ptr.push(cols.len());
                row += 1;
            }
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        while row < dim {
            row_ptr.push(cols.len());
            row += 1;
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, _)| c == r))
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(ZERO, |(_, v)| v))
            .collect()
    }

    /// `y += alpha * A x` over strided slices (used for per-cavity-level blocks).
    pub fn mul_add_strided(
        &self,
        alpha: C64,
        x: &[C64],
        x_off: usize,
        stride: usize,
        y: &mut [C64],
        y_off: usize,
    ) {
        for r in 0..self.dim {
            let mut acc = ZERO;
            for (c, v) in self.row(r) {
                acc += v * x[x_off + c * stride];
            }
            y[y_off + r * stride] += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let mut y = vec![ZERO; self.dim];
        self.mul_add_strided(ONE, x.as_slice(), 0, 1, &mut y, 0);
        CVector::from_vec(y)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn to_real_dense(&self) -> DMatrix<f64> {
        self.to_dense().map(|z| z.re)
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }
}

/// Eigen-decomposition of a Hermitian generator, cached for repeated
/// exponentials `exp(-i H t)`.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianSpectrum {
    pub fn of(h: &CMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// Real symmetric generators (the mechanical blocks) go through the real
    /// solver, which is both faster and gives real eigenvectors.
    pub fn of_real(h: &DMatrix<f64>) -> Self {
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors =
            CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| C64::new(eig.eigenvectors[(r, order[c])], 0.0));
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(-i H t)` as a dense matrix.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases = CVector::from_iterator(self.dim(), self.values.iter().map(|&l| (-I * l * t).exp()));
        let scaled = CMatrix::from_fn(self.dim(), self.dim(), |r, c| self.vectors[(r, c)] * phases[c]);
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i H t) v` without forming the dense propagator.
    pub fn evolve(&self, v: &CVector, t: f64) -> CVector {
        let mut coeffs = self.vectors.ad_mul(v);
        for (c, &l) in coeffs.iter_mut().zip(&self.values) {
            *c *= (-I * l * t).exp();
        }
        &self.vectors * coeffs
    }
}

/// `exp(-i G)` for a Hermitian matrix `G`.
pub fn expm_hermitian(g: &CMatrix) -> CMatrix {
    HermitianSpectrum::of(g).propagator(1.0)
}

/// Exact value of `∫_0^h (u0 + (u1 - u0) x / h) e^{w x} dx`.
///
/// Falls back to a Taylor series when `|w h|` is small, where the closed form
/// cancels catastrophically.
pub fn linear_exp_integral(u0: C64, u1: C64, h: f64, w: C64) -> C64 {
    if h == 0.0 {
        return ZERO;
    }
    let z = w * h;
    let (e1, e2) = if z.norm() < 0.05 {
        // e1 = h Σ z^k/(k+1)!, e2 = h² Σ z^k/(k!(k+2))
        let mut e1 = ZERO;
        let mut e2 = ZERO;
        let mut term = ONE;
        for k in 0..14 {
            let kf = k as f64;
            e1 += term / (kf + 1.0);
            e2 += term / (kf + 2.0);
            term = term * z / (kf + 1.0);
        }
        (e1 * h, e2 * h * h)
    } else {
        let ez = z.exp();
        let e1 = (ez - ONE) / w;
        let e2 = h * ez / w - (ez - ONE) / (w * w);
        (e1, e2)
    };
    u0 * e1 + (u1 - u0) / h * e2
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on P_n).
/// `n` must be at least 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `Σ_{k ≤ n} e^{-λ} λ^k / k!`, evaluated in log space so large means do not
/// overflow.
pub fn poisson_cdf(lambda: f64, n: usize) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    let ln_l = lambda.ln();
    let mut ln_term = -lambda;
    let mut sum = ln_term.exp();
    for k in 1..=n {
        ln_term += ln_l - (k as f64).ln();
        sum += ln_term.exp();
    }
    sum.min(1.0)
}

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
