//! Trial families, bordered (Grushin) fiber matrices and their inverses.
//!
//! The bordered matrix at `(ξ, λ)` is
//! ```text
//! P = | H(ξ) − λ   R₋ |      R₋ = [φ_1 … φ_N],  R₊ = R₋†
//!     | R₊         0  |
//! ```
//! and its inverse has blocks `E, E₊, E₋, E₋₊`. The corner `E₋₊(ξ, λ)` is the
//! effective symbol; for the section family of a simple band it equals
//! `λ − λ_k(ξ)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bloch_section::BlochSection;
use crate::bloch_solver::{fiber_eigen, shift_coefficients, BandStructure, FiberMatrix, DEFAULT_GAP_TOL};
use crate::error::{Error, Result};
use crate::lattice::{dot, BZGrid, DualShell, Lattice, Vec2};
use crate::linalg::{self, CMat, C64, ZERO};

/// Condition-number limit for the bordered matrix.
pub const GRUSHIN_COND_LIMIT: f64 = 1e12;
/// Rank cut on the normalized raw Gram matrix.
pub const RANK_CUT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialConstruction {
    SimpleBand,
    SpectralBump,
}

/// Squared raised cosine `cos²(π s / 2a)` in each cell coordinate `|s| < a`,
/// with `2a` the supported fraction of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpWindow {
    half_width: f64,
}

impl Default for BumpWindow {
    fn default() -> Self {
        Self { half_width: 0.4 }
    }
}

impl BumpWindow {
    pub fn raised_cosine_squared(support_fraction: f64) -> Result<Self> {
        if !(support_fraction > 0.0 && support_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "bump support fraction must lie in (0, 1), got {support_fraction}"
            )));
        }
        Ok(Self {
            half_width: 0.5 * support_fraction,
        })
    }

    /// `∫ w(s) e^{−iωs} ds` of the one-dimensional profile.
    pub fn transform_1d(&self, omega: f64) -> f64 {
        let a = self.half_width;
        let k = PI / a;
        let sinc = |z: f64| if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
        a * (sinc(omega * a) + 0.5 * sinc((omega - k) * a) + 0.5 * sinc((omega + k) * a))
    }

    /// Product transform in cell coordinates: `ω_j = ⟨η, e_j⟩`.
    pub fn transform(&self, lattice: &Lattice, eta: Vec2) -> f64 {
        (0..lattice.dim())
            .map(|j| self.transform_1d(dot(eta, lattice.basis()[j])))
            .product()
    }
}

#[derive(Debug, Clone)]
struct RawTrial {
    xi0: Vec2,
    coeffs: Vec<C64>,
}

#[derive(Debug, Clone)]
enum Source {
    Section(Box<BlochSection>),
    Bump { raw: Vec<RawTrial>, window: BumpWindow },
}

/// Orthonormal coefficient vectors `φ_j(ξ)`, `j = 1..N`, on a grid and on demand.
#[derive(Debug, Clone)]
pub struct TrialFamily {
    pub n: usize,
    pub grid: BZGrid,
    pub shell: DualShell,
    /// `vectors[i][j]`: family member `j` at grid point `i`.
    pub vectors: Vec<Vec<Vec<C64>>>,
    pub construction: TrialConstruction,
    source: Source,
}

/// `N = 1` family wrapping a band section.
pub fn trial_from_section(section: &BlochSection) -> TrialFamily {
    TrialFamily {
        n: 1,
        grid: section.grid.clone(),
        shell: section.shell.clone(),
        vectors: section.vectors.iter().map(|v| vec![v.clone()]).collect(),
        construction: TrialConstruction::SimpleBand,
        source: Source::Section(Box::new(section.clone())),
    }
}

/// Uniform reference points, `per_dir` per direction, dual coordinates `−1/2 + i/per_dir`.
pub fn default_reference_points(lattice: &Lattice, per_dir: usize) -> Vec<Vec2> {
    let g = BZGrid::new(lattice, per_dir.max(1)).expect("positive resolution");
    g.points()
}

fn raw_at(lattice: &Lattice, shell: &DualShell, window: &BumpWindow, r: &RawTrial, xi: Vec2) -> Vec<C64> {
    (0..shell.len())
        .map(|b| {
            let pb = shell.momentum(b);
            let mut acc = ZERO;
            for (a, c) in r.coeffs.iter().enumerate() {
                if *c == ZERO {
                    continue;
                }
                let pa = shell.momentum(a);
                let eta = [xi[0] - r.xi0[0] + pb[0] - pa[0], xi[1] - r.xi0[1] + pb[1] - pa[1]];
                acc += c * window.transform(lattice, eta);
            }
            acc
        })
        .collect()
}

/// Modified Gram-Schmidt in the given order.
fn gram_schmidt(mut vs: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    for i in 0..vs.len() {
        for j in 0..i {
            let (head, tail) = vs.split_at_mut(i);
            let p = linalg::inner(&head[j], &tail[0]);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= p * y;
            }
        }
        let n = linalg::vnorm(&vs[i]);
        for x in vs[i].iter_mut() {
            *x /= n;
        }
    }
    vs
}

fn gram(vs: &[Vec<C64>]) -> CMat {
    CMat::from_fn(vs.len(), vs.len(), |i, j| linalg::inner(&vs[i], &vs[j]))
}

fn min_eig(g: &CMat) -> Result<f64> {
    Ok(linalg::eigvalsh(g)?.first().copied().unwrap_or(0.0))
}

fn unit(v: Vec<C64>) -> Vec<C64> {
    let n = linalg::vnorm(&v);
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Spectral-window family: eigenvectors with eigenvalue `≤ λ_max` at the
/// reference points, localized by the bump window, periodized with Bloch
/// phases, rank-filtered and orthonormalized pointwise.
pub fn build_trial_family(
    bands: &BandStructure,
    lambda_max: f64,
    reference_points: &[Vec2],
    window: BumpWindow,
) -> Result<TrialFamily> {
    let shell = &bands.shell;
    let grid = &bands.grid;
    let lattice = grid.lattice();
    let mut raw = Vec::new();
    for &xi0 in reference_points {
        let e = fiber_eigen(&bands.symbol, xi0, shell)?;
        for (k, &v) in e.values.iter().enumerate() {
            if v <= lambda_max {
                raw.push(RawTrial {
                    xi0,
                    coeffs: linalg::column(&e.vectors, k),
                });
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyFamily { lambda_max });
    }
    // averaged normalized Gram matrix selects a common independent subset
    let per_point: Vec<Vec<Vec<C64>>> = (0..grid.len())
        .map(|i| raw.iter().map(|r| unit(raw_at(lattice, shell, &window, r, grid.point(i)))).collect())
        .collect();
    let k = raw.len();
    let mut avg = CMat::zeros(k, k);
    for vs in &per_point {
        avg += gram(vs) * faer::Scale(C64::new(1.0 / grid.len() as f64, 0.0));
    }
    let selected = pivoted_cholesky_select(&avg, RANK_CUT);
    let raw: Vec<RawTrial> = selected.iter().map(|&i| raw[i].clone()).collect();
    let mut vectors = Vec::with_capacity(grid.len());
    for (i, vs) in per_point.into_iter().enumerate() {
        let vs: Vec<Vec<C64>> = selected.iter().map(|&j| vs[j].clone()).collect();
        let m = min_eig(&gram(&vs))?;
        if m < RANK_CUT {
            return Err(Error::Coverage {
                xi: grid.point(i),
                min_eig: m,
            });
        }
        vectors.push(gram_schmidt(vs));
    }
    Ok(TrialFamily {
        n: raw.len(),
        grid: grid.clone(),
        shell: shell.clone(),
        vectors,
        construction: TrialConstruction::SpectralBump,
        source: Source::Bump { raw, window },
    })
}

/// Indices kept by Cholesky with diagonal pivoting, stopping below `cut`;
/// returned in ascending order.
fn pivoted_cholesky_select(g: &CMat, cut: f64) -> Vec<usize> {
    let n = g.nrows();
    let mut a = g.clone();
    let mut chosen = Vec::new();
    let mut free: Vec<usize> = (0..n).collect();
    while !free.is_empty() {
        let mut pos = 0;
        for (i, &c) in free.iter().enumerate() {
            if a[(c, c)].re > a[(free[pos], free[pos])].re {
                pos = i;
            }
        }
        let p = free[pos];
        let d = a[(p, p)].re;
        if d < cut {
            break;
        }
        free.remove(pos);
        chosen.push(p);
        let col: Vec<C64> = (0..n).map(|i| a[(i, p)]).collect();
        for &i in &free {
            for &j in &free {
                a[(i, j)] -= col[i] * col[j].conj() / d;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

impl TrialFamily {
    /// Family members at an arbitrary momentum.
    pub fn vectors_at(&self, xi: Vec2) -> Result<Vec<Vec<C64>>> {
        let lattice = self.grid.lattice();
        match &self.source {
            Source::Bump { raw, window } => {
                let vs: Vec<Vec<C64>> = raw
                    .iter()
                    .map(|r| unit(raw_at(lattice, &self.shell, window, r, xi)))
                    .collect();
                let m = min_eig(&gram(&vs))?;
                if m < RANK_CUT {
                    return Err(Error::Coverage { xi, min_eig: m });
                }
                Ok(gram_schmidt(vs))
            }
            Source::Section(sec) => {
                let (xi0, g) = lattice.reduce_to_cell(xi);
                let n = self.grid.resolution();
                let t = lattice.dual_coords(xi0);
                let mut m = [0i64; 2];
                let mut on_grid = true;
                for j in 0..lattice.dim() {
                    let x = (t[j] + 0.5) * n as f64;
                    m[j] = x.round() as i64;
                    on_grid &= (x - m[j] as f64).abs() < 1e-9;
                }
                let near = sec.vector_at(m);
                let v = if on_grid && m.iter().all(|&c| c < n as i64) {
                    near
                } else {
                    let e = fiber_eigen(&sec.symbol, xi0, &self.shell)?;
                    let k = sec.band_index;
                    let gap = (e.values[k + 1] - e.values[k]).min(if k > 0 {
                        e.values[k] - e.values[k - 1]
                    } else {
                        f64::INFINITY
                    });
                    if gap <= DEFAULT_GAP_TOL {
                        return Err(Error::NearDegeneracy {
                            band: k,
                            xi: xi0,
                            gap,
                            gap_tol: DEFAULT_GAP_TOL,
                        });
                    }
                    let u = linalg::column(&e.vectors, k);
                    let a = linalg::inner(&u, &near);
                    if a.norm() < 0.5 {
                        return Err(Error::TransportStepTooLarge { xi: xi0, norm: a.norm() });
                    }
                    let ph = a / a.norm();
                    u.into_iter().map(|x| x * ph).collect()
                };
                Ok(vec![shift_coefficients(&self.shell, &v, [-g[0], -g[1]])])
            }
        }
    }

    /// `max |G − I|` over the grid.
    pub fn gram_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for vs in &self.vectors {
            let g = gram(vs);
            let i = linalg::identity(vs.len());
            d = d.max(linalg::max_abs(&(&g - &i)));
        }
        d
    }

    /// `max ‖φ_j(ξ + e*_a) − σ φ_j(ξ)‖` on the upper zone faces, evaluated
    /// through [`TrialFamily::vectors_at`].
    pub fn equivariance_defect(&self) -> Result<f64> {
        let grid = &self.grid;
        let lattice = grid.lattice();
        let mut d = 0.0f64;
        for i in 0..grid.len() {
            let m = grid.multi_index(i);
            for a in 0..lattice.dim() {
                if m[a] != 0 {
                    continue;
                }
                let xi = grid.point(i);
                let mut g = [0i64; 2];
                g[a] = 1;
                let e = lattice.dual_point(g);
                let up = self.vectors_at([xi[0] + e[0], xi[1] + e[1]])?;
                for (u, v) in up.iter().zip(&self.vectors[i]) {
                    let s = shift_coefficients(&self.shell, v, [-g[0], -g[1]]);
                    d = d.max(linalg::vdist(u, &s));
                }
            }
        }
        Ok(d)
    }
}

/// The bordered matrix at `(ξ, λ)`.
#[derive(Debug, Clone)]
pub struct GrushinMatrix {
    pub xi: Vec2,
    pub lambda: f64,
    /// Plane-wave dimension.
    pub m: usize,
    /// Number of trial vectors.
    pub n: usize,
    pub matrix: CMat,
}

impl GrushinMatrix {
    pub fn top_left(&self) -> CMat {
        CMat::from_fn(self.m, self.m, |i, j| self.matrix[(i, j)])
    }

    pub fn r_minus(&self) -> CMat {
        CMat::from_fn(self.m, self.n, |i, j| self.matrix[(i, self.m + j)])
    }

    pub fn r_plus(&self) -> CMat {
        CMat::from_fn(self.n, self.m, |i, j| self.matrix[(self.m + i, j)])
    }
}

pub fn assemble_grushin(matrix: &FiberMatrix, lambda: f64, family: &TrialFamily) -> Result<GrushinMatrix> {
    let vs = family.vectors_at(matrix.xi)?;
    assemble_grushin_with(matrix, lambda, &vs)
}

/// Bordered matrix with explicitly supplied trial vectors.
pub fn assemble_grushin_with(matrix: &FiberMatrix, lambda: f64, trial: &[Vec<C64>]) -> Result<GrushinMatrix> {
    let m = matrix.dim();
    let n = trial.len();
    if let Some(v) = trial.iter().find(|v| v.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "trial vector of length {} against fiber dimension {m}",
            v.len()
        )));
    }
    let p = CMat::from_fn(m + n, m + n, |i, j| match (i < m, j < m) {
        (true, true) => {
            let h = matrix.entries[(i, j)];
            if i == j {
                h - lambda
            } else {
                h
            }
        }
        (true, false) => trial[j - m][i],
        (false, true) => trial[i - m][j].conj(),
        (false, false) => ZERO,
    });
    Ok(GrushinMatrix {
        xi: matrix.xi,
        lambda,
        m,
        n,
        matrix: p,
    })
}

#[derive(Debug, Clone)]
pub struct GrushinInverse {
    pub e: CMat,
    pub e_plus: CMat,
    pub e_minus: CMat,
    pub e_mp: CMat,
    pub condition_number: f64,
    /// `‖P E − I‖₂`.
    pub residual: f64,
}

impl GrushinInverse {
    pub fn e_mp_hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.e_mp)
    }
}

pub fn invert_grushin(g: &GrushinMatrix) -> Result<GrushinInverse> {
    let cond = linalg::condition_number(&g.matrix)?;
    if !(cond <= GRUSHIN_COND_LIMIT) {
        return Err(Error::NearSingular {
            cond,
            limit: GRUSHIN_COND_LIMIT,
        });
    }
    let inv = linalg::inverse(&g.matrix);
    let prod = &g.matrix * &inv;
    let residual = linalg::norm2(&(&prod - linalg::identity(g.m + g.n)))?;
    let (m, n) = (g.m, g.n);
    Ok(GrushinInverse {
        e: CMat::from_fn(m, m, |i, j| inv[(i, j)]),
        e_plus: CMat::from_fn(m, n, |i, j| inv[(i, m + j)]),
        e_minus: CMat::from_fn(n, m, |i, j| inv[(m + i, j)]),
        e_mp: CMat::from_fn(n, n, |i, j| inv[(m + i, m + j)]),
        condition_number: cond,
        residual,
    })
}

/// `λ − λ_k(ξ)` per grid point, the corner block of the section family
/// without a matrix inversion. `band_index` is zero-based and should be simple.
pub fn effective_symbol_zero_field(bands: &BandStructure, band_index: usize, lambda: f64) -> Vec<f64> {
    bands.bands.iter().map(|b| lambda - b[band_index]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_transform_at_zero_is_area() {
        let w = BumpWindow::default();
        assert!((w.transform_1d(0.0) - 0.4).abs() < 1e-15);
        // numerical check of the closed form
        let om = 3.7;
        let n = 20000;
        let a = 0.4;
        let h = 2.0 * a / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = -a + (i as f64 + 0.5) * h;
            s += (PI * x / (2.0 * a)).cos().powi(2) * (om * x).cos() * h;
        }
        assert!((s - w.transform_1d(om)).abs() < 1e-8);
    }

    #[test]
    fn cholesky_drops_duplicates() {
        let g = CMat::from_fn(3, 3, |i, j| if (i < 2) == (j < 2) { C64::new(1.0, 0.0) } else { ZERO });
        assert_eq!(pivoted_cholesky_select(&g, 1e-6), vec![0, 2]);
    }
}
