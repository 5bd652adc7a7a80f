//! Quasiprobability pictures: the oscillator Wigner function and the Husimi
//! Q function of a collective spin on the Bloch sphere.
//!
//! Oscillator coordinates are `x = Re α`, `p = Im α` for the coherent
//! amplitude `α`, so coherent states are unit-width blobs whose centres sit
//! at their amplitudes, and `∫∫W dx dp = 1`.

use crate::error::{invalid, Error, Result};
use crate::linalg::{CVector, C64};
use crate::statespace::{coherent_spin_state, SpinModel, LEAKAGE_LIMIT};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Axes `x`, `p`; values `W`.
    Oscillator,
    /// Axes `theta`, `phi`; values `Q`.
    Sphere,
}

/// Values on a rectangular mesh, row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpaceGrid {
    pub kind: GridKind,
    pub axis0: Vec<f64>,
    pub axis1: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis1.len() + j]
    }

    fn steps(&self) -> (f64, f64) {
        let h = |a: &[f64], period: f64| if a.len() > 1 { a[1] - a[0] } else { period };
        match self.kind {
            GridKind::Oscillator => (h(&self.axis0, 1.0), h(&self.axis1, 1.0)),
            GridKind::Sphere => (PI / self.axis0.len() as f64, 2.0 * PI / self.axis1.len() as f64),
        }
    }

    fn measure(&self, i: usize) -> f64 {
        let (h0, h1) = self.steps();
        match self.kind {
            GridKind::Oscillator => h0 * h1,
            GridKind::Sphere => h0 * h1 * self.axis0[i].sin(),
        }
    }

    /// `∫∫W dx dp` or `∫Q sinθ dθ dφ` by the midpoint/rectangle rule.
    pub fn integral(&self) -> f64 {
        let n1 = self.axis1.len();
        (0..self.axis0.len()).map(|i| self.measure(i) * self.values[i * n1..(i + 1) * n1].iter().sum::<f64>()).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Integrated magnitude of the negative part.
    pub fn negative_volume(&self) -> f64 {
        let n1 = self.axis1.len();
        (0..self.axis0.len())
            .map(|i| self.measure(i) * self.values[i * n1..(i + 1) * n1].iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>())
            .sum()
    }

    /// Largest magnitude on the outer edge of an oscillator window.
    pub fn boundary_max(&self) -> f64 {
        let (n0, n1) = (self.axis0.len(), self.axis1.len());
        let mut m: f64 = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                if i == 0 || j == 0 || i + 1 == n0 || j + 1 == n1 {
                    m = m.max(self.value(i, j).abs());
                }
            }
        }
        m
    }

    /// Strict local maxima above `threshold`, as `(axis0, axis1, value)`,
    /// strongest first, positions refined by a parabola through the
    /// neighbours along each axis. The sphere's azimuth wraps around.
    pub fn local_maxima(&self, threshold: f64) -> Vec<(f64, f64, f64)> {
        let (n0, n1) = (self.axis0.len() as isize, self.axis1.len() as isize);
        let wrap = self.kind == GridKind::Sphere;
        let mut out = Vec::new();
        for i in 0..n0 {
            for j in 0..n1 {
                let v = self.value(i as usize, j as usize);
                if v <= threshold {
                    continue;
                }
                let mut peak = true;
                'nb: for di in -1..=1isize {
                    for dj in -1..=1isize {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ii = i + di;
                        let mut jj = j + dj;
                        if wrap {
                            jj = jj.rem_euclid(n1);
                        }
                        if ii < 0 || ii >= n0 || jj < 0 || jj >= n1 {
                            continue;
                        }
                        let w = self.value(ii as usize, jj as usize);
                        if w > v || (w == v && (ii, jj) < (i, j)) {
                            peak = false;
                            break 'nb;
                        }
                    }
                }
                if peak {
                    let (h0, h1) = self.steps();
                    let at = |ii: isize, jj: isize| -> Option<f64> {
                        let jj = if wrap { jj.rem_euclid(n1) } else { jj };
                        (ii >= 0 && ii < n0 && jj >= 0 && jj < n1).then(|| self.value(ii as usize, jj as usize))
                    };
                    let shift = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
                        (Some(a), Some(b)) if a - 2.0 * v + b < 0.0 => 0.5 * (a - b) / (a - 2.0 * v + b),
                        _ => 0.0,
                    };
                    let s0 = shift(at(i - 1, j), at(i + 1, j));
                    let s1 = shift(at(i, j - 1), at(i, j + 1));
                    out.push((self.axis0[i as usize] + s0 * h0, self.axis1[j as usize] + s1 * h1, v));
                }
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2));
        out
    }

    /// Distance between the two farthest local maxima above `0.3 max`.
    pub fn lobe_separation(&self) -> Option<f64> {
        let peaks = self.local_maxima(0.3 * self.max());
        let mut best: Option<f64> = None;
        for (k, a) in peaks.iter().enumerate() {
            for b in &peaks[k + 1..] {
                let d = (a.0 - b.0).hypot(a.1 - b.1);
                best = Some(best.map_or(d, |x| x.max(d)));
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let (a, b, v) = match self.kind {
            GridKind::Oscillator => ("x", "p", "W"),
            GridKind::Sphere => ("theta", "phi", "Q"),
        };
        let mut s = format!("{a},{b},{v}\n");
        for (i, x) in self.axis0.iter().enumerate() {
            for (j, y) in self.axis1.iter().enumerate() {
                writeln!(s, "{x:.16e},{y:.16e},{:.16e}", self.value(i, j)).expect("write to string");
            }
        }
        s
    }

    /// Heatmap with a diverging scale symmetric about zero: blue below,
    /// white at zero, red above. First axis runs left to right, second axis
    /// bottom to top.
    pub fn to_svg(&self) -> String {
        let (n0, n1) = (self.axis0.len(), self.axis1.len());
        let cell = 4usize;
        let (w, h) = (n0 * cell, n1 * cell);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let (a, b, v) = match self.kind {
            GridKind::Oscillator => ("x", "p", "W"),
            GridKind::Sphere => ("theta", "phi", "Q"),
        };
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            w + 120,
            h + 40,
            w + 120,
            h + 40
        )
        .expect("write to string");
        writeln!(
            s,
            r#"<desc>{v} over {a} in [{:.6e}, {:.6e}] (left to right) and {b} in [{:.6e}, {:.6e}] (bottom to top); colour scale symmetric about 0, saturating at ±{scale:.6e}</desc>"#,
            self.axis0[0],
            self.axis0[n0 - 1],
            self.axis1[0],
            self.axis1[n1 - 1]
        )
        .expect("write to string");
        for i in 0..n0 {
            for j in 0..n1 {
                let (r, g, bl) = diverging(self.value(i, j) / scale);
                writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({r},{g},{bl})"/>"#,
                    i * cell,
                    (n1 - 1 - j) * cell
                )
                .expect("write to string");
            }
        }
        let bar = 20;
        for k in 0..h {
            let (r, g, bl) = diverging(1.0 - 2.0 * k as f64 / (h - 1).max(1) as f64);
            writeln!(s, r#"<rect x="{}" y="{k}" width="{bar}" height="1" fill="rgb({r},{g},{bl})"/>"#, w + 10)
                .expect("write to string");
        }
        writeln!(s, r#"<text x="{}" y="12" font-size="10">+{scale:.3e}</text>"#, w + 35).expect("write to string");
        writeln!(s, r#"<text x="{}" y="{}" font-size="10">0</text>"#, w + 35, h / 2).expect("write to string");
        writeln!(s, r#"<text x="{}" y="{}" font-size="10">-{scale:.3e}</text>"#, w + 35, h).expect("write to string");
        writeln!(s, r#"<text x="4" y="{}" font-size="12">{v}({a}, {b})</text>"#, h + 28).expect("write to string");
        s.push_str("</svg>\n");
        s
    }
}

/// `u ∈ [−1, 1]` to blue–white–red.
fn diverging(u: f64) -> (u8, u8, u8) {
    let u = u.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if u >= 0.0 {
        (255, fade(u), fade(u))
    } else {
        (fade(-u), fade(-u), 255)
    }
}

/// Number of leading Fock levels carrying the state (trailing zeros cut).
fn support(state: &CVector) -> usize {
    state.iter().rposition(|z| z.norm_sqr() > 0.0).map_or(0, |k| k + 1)
}

fn check_fock_cutoff(state: &CVector) -> Result<()> {
    let total = state.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let top = state[state.len() - 1].norm_sqr() / total;
    if top > LEAKAGE_LIMIT {
        return Err(Error::CutoffInsufficient {
            what: format!("state reaches the top Fock level {}", state.len() - 1),
            defect: top,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(())
}

/// `W(α) = (2/π)⟨ψ|D(2α)Π|ψ⟩/⟨ψ|ψ⟩` at one point, Fock-basis `state`.
///
/// With `β = 2α = |β|e^{iθ}` the displacement elements are
/// `⟨n+k|D(β)|n⟩ = e^{ikθ} T⁽ᵏ⁾ₙ`, `T⁽ᵏ⁾ₙ = √(n!/(n+k)!) |β|ᵏ e^{−|β|²/2} L⁽ᵏ⁾ₙ(|β|²)`,
/// generated by the forward Laguerre recurrence along each diagonal with a
/// running exponent so that nothing under- or overflows.
pub fn wigner_at(state: &CVector, alpha: C64) -> f64 {
    let d = support(state);
    if d == 0 {
        return 0.0;
    }
    wigner_point(&Diagonals::of(state, d), alpha) / state.norm_squared()
}

/// `ψ*ₙ₊ₖ ψₙ` stored diagonal by diagonal.
struct Diagonals {
    d: usize,
    rho: Vec<Vec<C64>>,
}

impl Diagonals {
    fn of(state: &CVector, d: usize) -> Self {
        let rho = (0..d).map(|k| (0..d - k).map(|n| state[n + k].conj() * state[n]).collect()).collect();
        Self { d, rho }
    }
}

fn wigner_point(diag: &Diagonals, alpha: C64) -> f64 {
    let beta = alpha * 2.0;
    let x = beta.norm_sqr();
    let turn = if x > 0.0 { beta / beta.norm() } else { C64::new(1.0, 0.0) };
    let ln_x = x.ln();
    let mut phase = C64::new(1.0, 0.0);
    let mut total = 0.0;
    let mut lgk = 0.0; // ln k!
    for k in 0..diag.d {
        if k > 0 {
            lgk += (k as f64).ln();
            phase *= turn;
        }
        let rho = &diag.rho[k];
        // ln T⁽ᵏ⁾₀
        let mut scale = if k == 0 { -0.5 * x } else if x > 0.0 { 0.5 * k as f64 * ln_x - 0.5 * x - 0.5 * lgk } else { f64::NEG_INFINITY };
        if scale == f64::NEG_INFINITY {
            continue;
        }
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut acc = 0.0;
        for (n, r) in rho.iter().enumerate() {
            if n > 0 {
                let nf = (n - 1) as f64;
                let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
                    * ((nf + 1.0) / (nf + kf + 1.0)).sqrt()
                    / (nf + 1.0);
                prev = cur;
                cur = next;
                if cur.abs() > 1e150 {
                    acc *= 1e-150;
                    prev *= 1e-150;
                    cur *= 1e-150;
                    scale += 150.0 * std::f64::consts::LN_10;
                }
            }
            let term = cur * (r * phase).re;
            acc += if n % 2 == 0 { term } else { -term };
        }
        total += if k == 0 { 1.0 } else { 2.0 } * acc * scale.exp();
    }
    2.0 / PI * total
}

/// Square oscillator window `centre ± half_width` with `points` per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerWindow {
    pub centre: C64,
    pub half_width: f64,
    pub points: usize,
}

impl WignerWindow {
    fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.points;
        let ax = |c: f64| -> Vec<f64> {
            (0..n).map(|k| c - self.half_width + 2.0 * self.half_width * k as f64 / (n - 1) as f64).collect()
        };
        (ax(self.centre.re), ax(self.centre.im))
    }
}

/// Boundary magnitude below which a window counts as covering the state.
pub const WINDOW_EDGE: f64 = 1e-6;

/// Wigner function of a Fock-basis state on `window`; with `None` the
/// window starts around `⟨a⟩` and grows until the edge value drops below
/// [`WINDOW_EDGE`].
pub fn wigner(state: &CVector, window: Option<WignerWindow>, points: usize) -> Result<PhaseSpaceGrid> {
    check_fock_cutoff(state)?;
    if points < 3 {
        return Err(invalid("Wigner grid needs at least 3 points per axis"));
    }
    if let Some(w) = window {
        if !(w.half_width > 0.0) {
            return Err(invalid("window half-width must be positive"));
        }
        return Ok(wigner_on(state, WignerWindow { points, ..w }));
    }
    let norm = state.norm_squared();
    let d = state.len();
    let mean_a: C64 = (1..d).map(|k| state[k - 1].conj() * state[k] * (k as f64).sqrt()).sum::<C64>() / norm;
    let mean_n: f64 = (0..d).map(|k| k as f64 * state[k].norm_sqr()).sum::<f64>() / norm;
    let spread = (mean_n - mean_a.norm_sqr()).max(0.0).sqrt();
    let mut w = WignerWindow { centre: mean_a, half_width: 3.0 + 2.0 * spread, points };
    for _ in 0..12 {
        let grid = wigner_on(state, w);
        if grid.boundary_max() < WINDOW_EDGE {
            return Ok(grid);
        }
        w.half_width *= 1.25;
    }
    Err(invalid("Wigner window did not converge; the state is not localized"))
}

fn wigner_on(state: &CVector, w: WignerWindow) -> PhaseSpaceGrid {
    let (xs, ps) = w.axes();
    let diag = Diagonals::of(state, support(state));
    let norm = state.norm_squared();
    let values: Vec<f64> = (0..xs.len() * ps.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ps.len(), k % ps.len());
            wigner_point(&diag, C64::new(xs[i], ps[j])) / norm
        })
        .collect();
    PhaseSpaceGrid { kind: GridKind::Oscillator, axis0: xs, axis1: ps, values }
}

/// `Q(θ, φ) = (2J+1)/(4π)|⟨θ,φ|ψ⟩|²/⟨ψ|ψ⟩` on `n_theta` midpoint polar rows
/// and `n_phi` azimuths `2πj/n_phi`.
pub fn husimi_sphere(spin: &SpinModel, state: &CVector, n_theta: usize, n_phi: usize) -> Result<PhaseSpaceGrid> {
    if state.len() != spin.dim() {
        return Err(invalid("state is not in this Dicke basis"));
    }
    let norm = state.norm_squared();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if n_theta < 2 || n_phi < 2 {
        return Err(invalid("Husimi mesh needs at least 2 points per axis"));
    }
    if spin.n_atoms() <= 100 && (n_theta < 64 || n_phi < 128) {
        log::warn!("Husimi mesh {n_theta}x{n_phi} is coarser than 64x128");
    }
    let thetas: Vec<f64> = (0..n_theta).map(|i| (i as f64 + 0.5) * PI / n_theta as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let pref = spin.dim() as f64 / (4.0 * PI);
    let values: Vec<f64> = (0..n_theta * n_phi)
        .into_par_iter()
        .map(|k| {
            let css = coherent_spin_state(spin, thetas[k / n_phi], phis[k % n_phi]);
            pref * css.dotc(state).norm_sqr() / norm
        })
        .collect();
    Ok(PhaseSpaceGrid { kind: GridKind::Sphere, axis0: thetas, axis1: phis, values })
}
