//! Floquet fiber matrices in a truncated plane-wave basis and band functions.

use crate::error::{Error, Result};
use crate::lattice::{BZGrid, DualShell, Vec2};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::symbols::{monomial, PeriodicSymbol, SymbolKind};

/// Default separation threshold for simple bands.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// `H(ξ)[γ*, β*]` over the shell members.
#[derive(Debug, Clone)]
pub struct FiberMatrix {
    pub xi: Vec2,
    pub entries: CMat,
}

impl FiberMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Assembles `H(ξ)[γ*, β*] = kinetic(ξ + γ*) δ + V̂(γ* − β*)`; polynomial
/// terms enter as `a_α(γ* − β*) (ξ + (γ* + β*)/2)^α`.
pub fn assemble_fiber_matrix(symbol: &PeriodicSymbol, xi: Vec2, shell: &DualShell) -> Result<FiberMatrix> {
    if shell.is_empty() {
        return Err(Error::InvalidInput("empty dual shell".into()));
    }
    if shell.lattice() != symbol.lattice() {
        return Err(Error::DimensionMismatch("shell and symbol use different lattices".into()));
    }
    let m = shell.len();
    let mut h = CMat::zeros(m, m);
    let idx = shell.indices();
    let mom: Vec<Vec2> = (0..m).map(|i| shell.momentum(i)).collect();

    let mut convolve = |coeffs: &std::collections::BTreeMap<[i64; 2], C64>, weight: &dyn Fn(Vec2, Vec2) -> f64| {
        for (k, c) in coeffs {
            for (i, g) in idx.iter().enumerate() {
                if let Some(j) = shell.position([g[0] - k[0], g[1] - k[1]]) {
                    h[(i, j)] += c * weight(mom[i], mom[j]);
                }
            }
        }
    };

    convolve(symbol.potential().coeffs(), &|_, _| 1.0);
    match symbol.kind() {
        SymbolKind::Nonrelativistic | SymbolKind::Relativistic => {
            for i in 0..m {
                let q = [xi[0] + mom[i][0], xi[1] + mom[i][1]];
                h[(i, i)] += symbol.kinetic(q);
            }
        }
        SymbolKind::Polynomial { terms } => {
            for t in terms {
                let alpha = t.alpha;
                convolve(t.coeff.coeffs(), &|g: Vec2, b: Vec2| {
                    let mid = [xi[0] + 0.5 * (g[0] + b[0]), xi[1] + 0.5 * (g[1] + b[1])];
                    monomial(mid, alpha)
                });
            }
        }
    }
    Ok(FiberMatrix { xi, entries: h })
}

/// Band functions on a grid.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub grid: BZGrid,
    pub shell: DualShell,
    pub symbol: PeriodicSymbol,
    pub n_bands: usize,
    /// `bands[i][j]` is `λ_{j+1}(ξ_i)`.
    pub bands: Vec<Vec<f64>>,
    /// `vectors[i][j]` holds the plane-wave coefficients of band `j+1` at `ξ_i`.
    pub vectors: Option<Vec<Vec<Vec<C64>>>>,
}

impl BandStructure {
    pub fn has_vectors(&self) -> bool {
        self.vectors.is_some()
    }

    pub fn band(&self, j: usize) -> Vec<f64> {
        self.bands.iter().map(|b| b[j]).collect()
    }
}

/// Lowest `n_bands` eigenvalues (optionally eigenvectors) at every grid point.
pub fn compute_bands(
    symbol: &PeriodicSymbol,
    grid: &BZGrid,
    shell: &DualShell,
    n_bands: usize,
    keep_vectors: bool,
) -> Result<BandStructure> {
    if n_bands == 0 || n_bands > shell.len() {
        return Err(Error::InvalidInput(format!(
            "n_bands = {n_bands} must lie in 1..={}",
            shell.len()
        )));
    }
    let mut bands = Vec::with_capacity(grid.len());
    let mut vectors = Vec::new();
    for i in 0..grid.len() {
        let xi = grid.point(i);
        let f = assemble_fiber_matrix(symbol, xi, shell)?;
        if keep_vectors {
            let e = linalg::eigh(&f.entries).map_err(|_| Error::NonConvergence { xi })?;
            bands.push(e.values[..n_bands].to_vec());
            vectors.push((0..n_bands).map(|j| linalg::column(&e.vectors, j)).collect());
        } else {
            let v = linalg::eigvalsh(&f.entries).map_err(|_| Error::NonConvergence { xi })?;
            bands.push(v[..n_bands].to_vec());
        }
    }
    Ok(BandStructure {
        grid: grid.clone(),
        shell: shell.clone(),
        symbol: symbol.clone(),
        n_bands,
        bands,
        vectors: keep_vectors.then_some(vectors),
    })
}

/// Lowest eigenpairs of a single fiber.
pub fn fiber_eigen(symbol: &PeriodicSymbol, xi: Vec2, shell: &DualShell) -> Result<linalg::Eigh> {
    let f = assemble_fiber_matrix(symbol, xi, shell)?;
    linalg::eigh(&f.entries).map_err(|_| Error::NonConvergence { xi })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BandIntervals {
    /// `J_k = [min λ_k, max λ_k]` over the grid.
    pub intervals: Vec<(f64, f64)>,
    pub simple_flags: Vec<bool>,
    pub gap_tol: f64,
}

/// Band intervals and simple-band flags. A band is flagged simple when it is
/// separated by more than `gap_tol` from its neighbours at every grid point
/// and its interval is disjoint from all others; the topmost computed band
/// cannot be certified and is never flagged.
pub fn band_intervals(bands: &BandStructure, gap_tol: f64) -> BandIntervals {
    let n = bands.n_bands;
    let intervals: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            bands.bands.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
                (lo.min(b[j]), hi.max(b[j]))
            })
        })
        .collect();
    let min_gap = |j: usize| {
        bands
            .bands
            .iter()
            .map(|b| b[j + 1] - b[j])
            .fold(f64::INFINITY, f64::min)
    };
    let simple_flags = (0..n)
        .map(|k| {
            if k + 1 >= n || min_gap(k) <= gap_tol {
                return false;
            }
            if k > 0 && min_gap(k - 1) <= gap_tol {
                return false;
            }
            (0..n).filter(|&l| l != k).all(|l| {
                let (a, b) = intervals[k];
                let (c, d) = intervals[l];
                b < c || d < a
            })
        })
        .collect();
    BandIntervals {
        intervals,
        simple_flags,
        gap_tol,
    }
}

/// Smallest eigenvalue of `H(ξ) − λ`.
pub fn garding_check(matrix: &FiberMatrix, lambda: f64) -> Result<f64> {
    let v = linalg::eigvalsh(&matrix.entries).map_err(|_| Error::NonConvergence { xi: matrix.xi })?;
    Ok(v[0] - lambda)
}

/// Residual `‖H v − λ v‖` for a coefficient vector.
pub fn eigen_residual(matrix: &FiberMatrix, lambda: f64, v: &[C64]) -> f64 {
    let hv = linalg::matvec(&matrix.entries, v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Maps coefficients indexed by shell members at `ξ` to those of the same
/// function seen at `ξ − γ*`: `(σ c)(β*) = c(β* − γ*)`, zero outside the shell.
pub fn shift_coefficients(shell: &DualShell, c: &[C64], gamma: [i64; 2]) -> Vec<C64> {
    shell
        .indices()
        .iter()
        .map(|b| {
            shell
                .position([b[0] - gamma[0], b[1] - gamma[1]])
                .map(|j| c[j])
                .unwrap_or(ZERO)
        })
        .collect()
}

/// `(J c)(γ*) = conj c(−γ*)`.
pub fn conjugate_reflect(shell: &DualShell, c: &[C64]) -> Vec<C64> {
    shell
        .indices()
        .iter()
        .map(|g| {
            shell
                .position([-g[0], -g[1]])
                .map(|j| c[j].conj())
                .unwrap_or(ZERO)
        })
        .collect()
}
