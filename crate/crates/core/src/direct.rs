//! Reference solver for the full magnetic operator `P_ε = Op^{A_ε}(p̊_ε)`.
//!
//! Three discretizations:
//! - `ZeroFieldBloch`: the plane-wave fibers of [`crate::bloch_solver`].
//! - `MagneticBloch { p, q }`: constant field of flux `2πp/q` per cell. In the
//!   Landau gauge `(D₁ + b x₂)² + D₂² + V` the `x₁` dependence is expanded in
//!   plane waves `e^{i(k + n g₁)x₁}` and each component `c_n(x₂)` lives on a
//!   sinc-DVR grid. Magnetic-Bloch periodicity reads
//!   `c_{n+p}(x) = e^{iθ} c_n(x + q a₂)`, so `|p|` components remain.
//!   `p = 0` falls back to plane waves.
//! - `Box`: Dirichlet finite differences with link phases `ω_A(x, x + h e_j)`.

use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::bloch_solver::assemble_fiber_matrix;
use crate::error::{Error, Result};
use crate::lattice::{DualShell, Vec2};
use crate::linalg::{self, CMat, C64};
use crate::magnetic::{line_phase, VectorPotential};
use crate::spectra::SpectrumSet;
use crate::symbols::{PeriodicSymbol, SymbolKind};

/// Dense diagonalization limit; larger box problems use Lanczos.
pub const DENSE_LIMIT: usize = 2500;
/// Minimal finite-difference resolution.
pub const MIN_POINTS_PER_CELL: usize = 16;

/// Parameters of the Landau-gauge magnetic-Bloch basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandauBasis {
    /// DVR points per lattice period `a₂`.
    pub points_per_cell: usize,
    /// Half-width of each component window in units of `g₁/|b|`.
    pub half_width: f64,
    /// Samples of `k ∈ [0, g₁/q)`.
    pub n_k: usize,
    /// Samples of `θ ∈ [0, 2π)`.
    pub n_theta: usize,
    /// Plane-wave cutoff used when `p = 0`.
    pub cutoff: f64,
}

impl Default for LandauBasis {
    fn default() -> Self {
        Self {
            points_per_cell: 12,
            half_width: 6.0,
            n_k: 4,
            n_theta: 4,
            cutoff: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DirectMode {
    ZeroFieldBloch { resolution: usize, cutoff: f64 },
    MagneticBloch { p: i64, q: i64, basis: LandauBasis },
    /// Square box of `cells` lattice periods per direction, centred at 0.
    Box { cells: usize, points_per_cell: usize },
}

/// Sparse finite-difference operator on the interior box points.
#[derive(Debug, Clone)]
pub struct BoxOperator {
    pub n: [usize; 2],
    pub spacing: [f64; 2],
    pub origin: [f64; 2],
    /// `V(x)` at the grid points.
    pub potential: Vec<f64>,
    /// Kinetic diagonal `Σ_j 2/h_j²`.
    pub kinetic_diag: f64,
    /// Forward links `(x, x + h e_j, −ω_A(x, x + h e_j)/h_j²)`.
    pub links: Vec<(usize, usize, C64)>,
    relativistic: bool,
}

impl BoxOperator {
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec2 {
        let (a, b) = (i / self.n[1], i % self.n[1]);
        [
            self.origin[0] + a as f64 * self.spacing[0],
            self.origin[1] + b as f64 * self.spacing[1],
        ]
    }

    fn kinetic_dense(&self) -> CMat {
        let n = self.len();
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(self.kinetic_diag, 0.0);
        }
        for &(i, j, w) in &self.links {
            m[(i, j)] += w;
            m[(j, i)] += w.conj();
        }
        m
    }

    /// Dense matrix; the relativistic kind takes `√(K + 1) + V`.
    pub fn dense(&self) -> Result<CMat> {
        let n = self.len();
        let mut k = self.kinetic_dense();
        if self.relativistic {
            for i in 0..n {
                k[(i, i)] += C64::new(1.0, 0.0);
            }
            k = crate::magnetic::hermitian_sqrt(&k)?;
        }
        for i in 0..n {
            k[(i, i)] += C64::new(self.potential[i], 0.0);
        }
        Ok(k)
    }

    /// `y = H x` for the nonrelativistic operator.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..x.len() {
            y[i] = x[i] * (self.kinetic_diag + self.potential[i]);
        }
        for &(i, j, w) in &self.links {
            y[i] += w * x[j];
            y[j] += w.conj() * x[i];
        }
    }

    /// Lowest `k` eigenvalues: dense below [`DENSE_LIMIT`], Lanczos above.
    pub fn lowest(&self, k: usize) -> Result<Vec<f64>> {
        if self.len() <= DENSE_LIMIT || self.relativistic {
            let v = linalg::eigvalsh(&self.dense()?).map_err(|_| Error::NonConvergence { xi: [0.0; 2] })?;
            return Ok(v[..k.min(v.len())].to_vec());
        }
        linalg::lanczos_lowest(self.len(), &|x, y| self.apply(x, y), k, 1e-11)
    }
}

/// One magnetic-Bloch sample `(k, θ)` or a zero-field momentum `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectSample {
    pub point: Vec2,
}

#[derive(Debug, Clone)]
pub struct DirectDiscretization {
    pub mode: DirectMode,
    pub symbol: PeriodicSymbol,
    pub potential: VectorPotential,
    pub samples: Vec<DirectSample>,
    shell: Option<DualShell>,
    box_op: Option<BoxOperator>,
}

fn cis(t: f64) -> C64 {
    C64::new(t.cos(), t.sin())
}

fn bz_samples(symbol: &PeriodicSymbol, n1: usize, n2: usize) -> Vec<DirectSample> {
    let l = symbol.lattice();
    let t = |i: usize, n: usize| -0.5 + i as f64 / n as f64;
    if l.dim() == 1 {
        (0..n1).map(|i| DirectSample { point: l.momentum([t(i, n1), 0.0]) }).collect()
    } else {
        (0..n1)
            .flat_map(|i| (0..n2).map(move |j| (i, j)))
            .map(|(i, j)| DirectSample { point: l.momentum([t(i, n1), t(j, n2)]) })
            .collect()
    }
}

/// Builds the discretization; field strength and gauge come from `a`.
pub fn assemble_direct(symbol: &PeriodicSymbol, a: &VectorPotential, mode: DirectMode) -> Result<DirectDiscretization> {
    let lattice = symbol.lattice();
    let mut disc = DirectDiscretization {
        mode,
        symbol: symbol.clone(),
        potential: *a,
        samples: Vec::new(),
        shell: None,
        box_op: None,
    };
    match mode {
        DirectMode::ZeroFieldBloch { resolution, cutoff } => {
            if !a.field.is_zero() {
                return Err(Error::InvalidInput("zero-field mode needs a vanishing field".into()));
            }
            if resolution == 0 {
                return Err(Error::Resolution {
                    got: 0,
                    reason: "at least one point per direction".into(),
                });
            }
            disc.shell = Some(DualShell::new(lattice, cutoff)?);
            disc.samples = bz_samples(symbol, resolution, resolution);
        }
        DirectMode::MagneticBloch { p, q, basis } => {
            if q <= 0 {
                return Err(Error::IrrationalFlux(format!("denominator q = {q} must be positive")));
            }
            if p == 0 {
                if !a.field.is_zero() {
                    return Err(Error::IrrationalFlux("p = 0 requires a vanishing field".into()));
                }
                disc.shell = Some(DualShell::new(lattice, basis.cutoff)?);
                disc.samples = bz_samples(symbol, basis.n_k, basis.n_theta);
                return Ok(disc);
            }
            if lattice.dim() != 2 {
                return Err(Error::Unsupported("magnetic fields need d = 2".into()));
            }
            if !lattice.is_axis_aligned() {
                return Err(Error::Unsupported("the Landau basis needs a rectangular lattice".into()));
            }
            if matches!(symbol.kind(), SymbolKind::Polynomial { .. }) {
                return Err(Error::Unsupported("polynomial symbols have no direct magnetic mode".into()));
            }
            let b = a.field.uniform_strength().ok_or_else(|| {
                Error::IrrationalFlux("magnetic-Bloch mode needs a constant field".into())
            })?;
            let want = 2.0 * PI * p as f64 / q as f64;
            let flux = b * lattice.cell_volume();
            if (flux - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Err(Error::IrrationalFlux(format!(
                    "flux per cell {flux} differs from 2π·{p}/{q}"
                )));
            }
            if basis.points_per_cell < 4 || basis.n_k == 0 || basis.n_theta == 0 || basis.half_width <= 0.0 {
                return Err(Error::InvalidInput(format!("invalid Landau basis {basis:?}")));
            }
            let g1 = lattice.dual_basis()[0][0];
            disc.samples = (0..basis.n_k)
                .flat_map(|i| (0..basis.n_theta).map(move |j| (i, j)))
                .map(|(i, j)| DirectSample {
                    point: [
                        g1 * i as f64 / (q as f64 * basis.n_k as f64),
                        2.0 * PI * j as f64 / basis.n_theta as f64,
                    ],
                })
                .collect();
        }
        DirectMode::Box { cells, points_per_cell } => {
            if points_per_cell < MIN_POINTS_PER_CELL {
                return Err(Error::GridTooSmall(format!(
                    "{points_per_cell} points per cell, need at least {MIN_POINTS_PER_CELL}"
                )));
            }
            if cells == 0 {
                return Err(Error::InvalidInput("box needs at least one cell".into()));
            }
            if !lattice.is_axis_aligned() {
                return Err(Error::Unsupported("box mode needs a rectangular lattice".into()));
            }
            let relativistic = match symbol.kind() {
                SymbolKind::Nonrelativistic => false,
                SymbolKind::Relativistic => true,
                SymbolKind::Polynomial { .. } => {
                    return Err(Error::Unsupported("polynomial symbols have no box mode".into()));
                }
            };
            disc.box_op = Some(build_box(symbol, a, cells, points_per_cell, relativistic));
            disc.samples = vec![DirectSample { point: [0.0, 0.0] }];
        }
    }
    Ok(disc)
}

fn build_box(symbol: &PeriodicSymbol, a: &VectorPotential, cells: usize, ppc: usize, relativistic: bool) -> BoxOperator {
    let lattice = symbol.lattice();
    let d = lattice.dim();
    let m = cells * ppc - 1;
    let mut n = [1usize; 2];
    let mut spacing = [1.0; 2];
    let mut origin = [0.0; 2];
    for j in 0..d {
        let len = cells as f64 * lattice.basis()[j][j].abs();
        n[j] = m;
        spacing[j] = len / (cells * ppc) as f64;
        origin[j] = -0.5 * len + spacing[j];
    }
    let mut op = BoxOperator {
        n,
        spacing,
        origin,
        potential: Vec::new(),
        kinetic_diag: (0..d).map(|j| 2.0 / (spacing[j] * spacing[j])).sum(),
        links: Vec::new(),
        relativistic,
    };
    let v = symbol.potential();
    op.potential = (0..op.len()).map(|i| v.evaluate(op.point(i))).collect();
    for i in 0..op.len() {
        let (r, c) = (i / n[1], i % n[1]);
        let x = op.point(i);
        if r + 1 < n[0] {
            let y = [x[0] + spacing[0], x[1]];
            op.links.push((i, i + n[1], -line_phase(a, x, y) / (spacing[0] * spacing[0])));
        }
        if d == 2 && c + 1 < n[1] {
            let y = [x[0], x[1] + spacing[1]];
            op.links.push((i, i + 1, -line_phase(a, x, y) / (spacing[1] * spacing[1])));
        }
    }
    op
}

/// Sinc-DVR matrix of `D² = −d²/dx²` on a uniform grid.
fn sinc_kinetic(i: i64, j: i64, h: f64) -> f64 {
    if i == j {
        PI * PI / (3.0 * h * h)
    } else {
        let d = (i - j) as f64;
        let s = if (i - j).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        2.0 * s / (h * h * d * d)
    }
}

impl DirectDiscretization {
    pub fn box_operator(&self) -> Option<&BoxOperator> {
        self.box_op.as_ref()
    }

    /// Hermitian matrix at sample `s`.
    pub fn matrix_at(&self, s: usize) -> Result<CMat> {
        match self.mode {
            DirectMode::Box { .. } => self.box_op.as_ref().expect("box operator").dense(),
            DirectMode::ZeroFieldBloch { .. } | DirectMode::MagneticBloch { p: 0, .. } => {
                let shell = self.shell.as_ref().expect("plane-wave shell");
                Ok(assemble_fiber_matrix(&self.symbol, self.samples[s].point, shell)?.entries)
            }
            DirectMode::MagneticBloch { p, q, basis } => self.landau_matrix(p, q, &basis, self.samples[s].point),
        }
    }

    fn landau_matrix(&self, p: i64, q: i64, basis: &LandauBasis, sample: Vec2) -> Result<CMat> {
        let lattice = self.symbol.lattice();
        let (k, theta) = (sample[0], sample[1]);
        let a2 = lattice.basis()[1][1];
        let g1 = lattice.dual_basis()[0][0];
        let g2 = lattice.dual_basis()[1][1];
        let b = self.potential.field.uniform_strength().expect("constant field");
        let mm = basis.points_per_cell as i64;
        let h = a2 / mm as f64;
        let np = p.unsigned_abs() as usize;
        let half = basis.half_width * g1 / b.abs();
        // component j holds global grid indices lo[j]..=hi[j]
        let mut lo = Vec::with_capacity(np);
        let mut hi = Vec::with_capacity(np);
        let mut offset = Vec::with_capacity(np + 1);
        offset.push(0usize);
        for j in 0..np {
            let c = -(k + j as f64 * g1) / b;
            let l = ((c - half) / h).round() as i64;
            let u = ((c + half) / h).round() as i64;
            lo.push(l);
            hi.push(u);
            offset.push(offset[j] + (u - l + 1) as usize);
        }
        let dim = offset[np];
        let relativistic = matches!(self.symbol.kind(), SymbolKind::Relativistic);
        let mut m = CMat::zeros(dim, dim);
        for j in 0..np {
            let len = (hi[j] - lo[j] + 1) as usize;
            let mut kin = Mat::<f64>::from_fn(len, len, |r, c| sinc_kinetic(r as i64, c as i64, h));
            for r in 0..len {
                let x = (lo[j] + r as i64) as f64 * h;
                let mom = k + j as f64 * g1 + b * x;
                kin[(r, r)] += mom * mom;
            }
            if relativistic {
                for r in 0..len {
                    kin[(r, r)] += 1.0;
                }
                let e = kin
                    .self_adjoint_eigen(faer::Side::Lower)
                    .map_err(|_| Error::NonConvergence { xi: sample })?;
                let u = e.U();
                let s: Vec<f64> = (0..len).map(|i| e.S()[i].max(0.0).sqrt()).collect();
                let us = Mat::<f64>::from_fn(len, len, |r, c| u[(r, c)] * s[c]);
                kin = &us * u.transpose();
            }
            for r in 0..len {
                for c in 0..len {
                    m[(offset[j] + r, offset[j] + c)] = C64::new(kin[(r, c)], 0.0);
                }
            }
        }
        for (&[m1, m2], &v) in self.symbol.potential().coeffs() {
            for j in 0..np {
                let n2 = j as i64 - m1;
                let j2 = n2.rem_euclid(np as i64);
                let shift = (n2 - j2) / p;
                let phase = cis(shift as f64 * theta);
                for r in 0..=(hi[j] - lo[j]) {
                    let i = lo[j] + r;
                    let i2 = i + shift * q * mm;
                    let j2u = j2 as usize;
                    if i2 < lo[j2u] || i2 > hi[j2u] {
                        continue;
                    }
                    let x = i as f64 * h;
                    let row = offset[j] + r as usize;
                    let col = offset[j2u] + (i2 - lo[j2u]) as usize;
                    m[(row, col)] += v * cis(m2 as f64 * g2 * x) * phase;
                }
            }
        }
        Ok(m)
    }

    /// Sorted eigenvalues at sample `s`.
    pub fn eigenvalues_at(&self, s: usize) -> Result<Vec<f64>> {
        let m = self.matrix_at(s)?;
        linalg::eigvalsh(&m).map_err(|_| Error::NonConvergence { xi: self.samples[s].point })
    }

    /// Largest Hermitian defect over the samples (first sample for the box).
    pub fn hermitian_defect(&self) -> Result<f64> {
        let mut d: f64 = 0.0;
        for s in 0..self.samples.len() {
            d = d.max(linalg::hermitian_defect(&self.matrix_at(s)?));
        }
        Ok(d)
    }

    /// Per-eigenvalue-index ranges over the samples.
    pub fn band_ranges(&self) -> Result<Vec<(f64, f64)>> {
        let mut ranges: Vec<(f64, f64)> = Vec::new();
        for s in 0..self.samples.len() {
            let ev = self.eigenvalues_at(s)?;
            if ranges.is_empty() {
                ranges = ev.iter().map(|&e| (e, e)).collect();
            } else {
                ranges.truncate(ev.len());
                for (r, e) in ranges.iter_mut().zip(&ev) {
                    r.0 = r.0.min(*e);
                    r.1 = r.1.max(*e);
                }
            }
        }
        Ok(ranges)
    }
}

/// `σ(P_ε) ∩ window`. Bloch modes take the union of per-index ranges over
/// the samples; the box returns its eigenvalue cloud.
pub fn direct_spectrum(disc: &DirectDiscretization, window: (f64, f64), merge_tol: f64) -> Result<SpectrumSet> {
    match disc.mode {
        DirectMode::Box { .. } => {
            let op = disc.box_operator().expect("box operator");
            let mut k = 16.min(op.len());
            loop {
                let ev = op.lowest(k)?;
                let top = *ev.last().unwrap_or(&f64::INFINITY);
                if top > window.1 || k >= op.len() {
                    return Ok(SpectrumSet::from_points(&ev, window, merge_tol));
                }
                k = (2 * k).min(op.len());
            }
        }
        _ => Ok(SpectrumSet::from_intervals(&disc.band_ranges()?, window, merge_tol)),
    }
}
