//! Peierls lattice operators built from the Fourier hoppings of a periodic
//! effective symbol.
//!
//! Hoppings are `q̂_α = |E*|⁻¹ ∫ e^{−i⟨ξ,α⟩} q(ξ) dξ` over lattice vectors `α`,
//! and the operator on `ℓ²(Γ)^N` has blocks
//! `entry(γ, α) = ω_A(−γ, −α) q̂_{γ−α}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::bloch_solver::BandStructure;
use crate::error::{Error, Result};
use crate::lattice::{wedge, BZGrid, Coord, Lattice, Vec2};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::magnetic::{line_phase, Gauge, VectorPotential};
use crate::spectra::SpectrumSet;

/// Largest tolerated `‖q̂_{−α} − q̂_α†‖` before symmetrization.
pub const ASYMMETRY_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HoppingSet {
    /// Block size `N`.
    pub n: usize,
    pub lattice: Lattice,
    /// Truncation radius in lattice coordinates (max norm).
    pub radius: usize,
    pub hoppings: BTreeMap<Coord, CMat>,
    /// Which symbol the hoppings describe.
    pub source: String,
    /// `max ‖q̂_{−α} − q̂_α†‖` before symmetrization.
    pub asymmetry: f64,
}

fn cis(t: f64) -> C64 {
    C64::new(t.cos(), t.sin())
}

fn offsets(dim: usize, radius: usize) -> Vec<Coord> {
    let r = radius as i64;
    if dim == 1 {
        (-r..=r).map(|a| [a, 0]).collect()
    } else {
        (-r..=r).flat_map(|a| (-r..=r).map(move |b| [a, b])).collect()
    }
}

/// Discrete Fourier coefficients of matrix-valued grid data.
pub fn fourier_hoppings(grid: &BZGrid, values: &[CMat], radius: usize, source: &str) -> Result<HoppingSet> {
    let n = grid.resolution();
    if n < 2 * radius + 1 {
        return Err(Error::Aliasing(format!(
            "resolution {n} cannot resolve hopping radius {radius}; need at least {}",
            2 * radius + 1
        )));
    }
    if values.len() != grid.len() || values.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbol values for {} grid points",
            values.len(),
            grid.len()
        )));
    }
    let nb = values[0].nrows();
    let dim = grid.dim();
    let coords: Vec<Vec2> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    let inv = 1.0 / grid.len() as f64;
    let mut raw = BTreeMap::new();
    for a in offsets(dim, radius) {
        let mut acc = CMat::zeros(nb, nb);
        for (t, v) in coords.iter().zip(values) {
            let ph = cis(-2.0 * PI * (t[0] * a[0] as f64 + t[1] * a[1] as f64)) * inv;
            acc += v * faer::Scale(ph);
        }
        raw.insert(a, acc);
    }
    let mut asym = 0.0f64;
    let mut hoppings = BTreeMap::new();
    for (a, q) in &raw {
        let qm = &raw[&[-a[0], -a[1]]];
        let qd = linalg::adjoint(q);
        asym = asym.max(linalg::max_abs(&(qm - &qd)));
        // symmetrized: ½(q̂_α + q̂_{−α}†)
        let s = (q + &linalg::adjoint(qm)) * faer::Scale(C64::new(0.5, 0.0));
        hoppings.insert(*a, s);
    }
    if asym > ASYMMETRY_LIMIT {
        return Err(Error::InconsistentSymbol {
            defect: asym,
            limit: ASYMMETRY_LIMIT,
        });
    }
    Ok(HoppingSet {
        n: nb,
        lattice: *grid.lattice(),
        radius,
        hoppings,
        source: source.to_string(),
        asymmetry: asym,
    })
}

/// Scalar variant of [`fourier_hoppings`].
pub fn fourier_hoppings_scalar(grid: &BZGrid, values: &[f64], radius: usize, source: &str) -> Result<HoppingSet> {
    let mats: Vec<CMat> = values.iter().map(|&v| CMat::from_fn(1, 1, |_, _| C64::new(v, 0.0))).collect();
    fourier_hoppings(grid, &mats, radius, source)
}

/// Hoppings of `λ − λ_k(ξ)`, the simple-band effective symbol (`band_index` zero-based).
pub fn band_symbol_hoppings(bands: &BandStructure, band_index: usize, lambda: f64, radius: usize) -> Result<HoppingSet> {
    let v: Vec<f64> = bands.bands.iter().map(|b| lambda - b[band_index]).collect();
    fourier_hoppings_scalar(&bands.grid, &v, radius, &format!("lambda - lambda_{}(xi) at lambda = {lambda}", band_index + 1))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub k: u32,
    /// `max_{α≠0} ‖q̂_α‖ ⟨α⟩^k`.
    pub constant: f64,
    /// Least-squares slope of `log ‖q̂_α‖` against `log ⟨α⟩` over nonzero hoppings.
    pub log_slope: f64,
}

impl HoppingSet {
    /// `Σ_α e^{i⟨ξ,α⟩} q̂_α`.
    pub fn resum(&self, xi: Vec2) -> CMat {
        let t = self.lattice.dual_coords(xi);
        let mut acc = CMat::zeros(self.n, self.n);
        for (a, q) in &self.hoppings {
            let ph = cis(2.0 * PI * (t[0] * a[0] as f64 + t[1] * a[1] as f64));
            acc += q * faer::Scale(ph);
        }
        acc
    }

    pub fn get(&self, a: Coord) -> Option<&CMat> {
        self.hoppings.get(&a)
    }

    /// Adds `c · I` to `q̂_0`.
    pub fn shifted(&self, c: f64) -> HoppingSet {
        let mut out = self.clone();
        let e = out.hoppings.entry([0, 0]).or_insert_with(|| CMat::zeros(self.n, self.n));
        for i in 0..self.n {
            e[(i, i)] += c;
        }
        out
    }

    /// `q ↦ −q`.
    pub fn negated(&self) -> HoppingSet {
        let mut out = self.clone();
        for q in out.hoppings.values_mut() {
            *q = q.clone() * faer::Scale(C64::new(-1.0, 0.0));
        }
        out
    }

    pub fn hermitian_transport_defect(&self) -> f64 {
        self.hoppings
            .iter()
            .map(|(a, q)| linalg::max_abs(&(&self.hoppings[&[-a[0], -a[1]]] - &linalg::adjoint(q))))
            .fold(0.0, f64::max)
    }

    pub fn decay_fit(&self, k: u32) -> Result<DecayFit> {
        let mut c = 0.0f64;
        let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, q) in &self.hoppings {
            if *a == [0, 0] {
                continue;
            }
            let norm = linalg::norm2(q)?;
            let br = (1.0 + (a[0] * a[0] + a[1] * a[1]) as f64).sqrt();
            c = c.max(norm * br.powi(k as i32));
            if norm > 0.0 {
                let (x, y) = (br.ln(), norm.ln());
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                m += 1.0;
            }
        }
        let log_slope = if m >= 2.0 {
            (m * sxy - sx * sy) / (m * sxx - sx * sx)
        } else {
            f64::NAN
        };
        Ok(DecayFit {
            k,
            constant: c,
            log_slope,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EffectiveMode {
    /// Sites with all lattice coordinates in `[−l, l]`.
    Box { l: usize },
    /// Rational flux `2π p/q` per cell; quasi-momenta `θ` of the magnetic
    /// translations by `q e₁` and `e₂`.
    MagneticBloch { p: i64, q: i64, theta: [f64; 2] },
}

#[derive(Debug, Clone)]
pub struct EffectiveLatticeOperator {
    pub mode: EffectiveMode,
    pub n_block: usize,
    /// Sites (box) or magnetic-cell representatives.
    pub sites: Vec<Coord>,
    pub matrix: CMat,
}

impl EffectiveLatticeOperator {
    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(&self.matrix)
    }
}

/// `ω_A(−γ, −α)` between lattice sites.
pub fn peierls_phase(a: &VectorPotential, lattice: &Lattice, gamma: Coord, alpha: Coord) -> C64 {
    line_phase(a, lattice.point([-gamma[0], -gamma[1]]), lattice.point([-alpha[0], -alpha[1]]))
}

/// Uniform field strength compatible with flux `2π p/q` per cell, or an error.
fn check_flux(a: &VectorPotential, lattice: &Lattice, p: i64, q: i64) -> Result<f64> {
    if q <= 0 {
        return Err(Error::IrrationalFlux(format!("denominator q = {q} must be positive")));
    }
    if a.gauge != Gauge::Transversal {
        return Err(Error::UnsupportedGauge(
            "magnetic-Bloch reduction uses the transversal gauge".into(),
        ));
    }
    let b = a
        .field
        .uniform_strength()
        .ok_or_else(|| Error::UnsupportedGauge("magnetic-Bloch reduction needs a constant field".into()))?;
    if lattice.dim() == 1 {
        if p != 0 {
            return Err(Error::IrrationalFlux("one-dimensional lattices carry no flux".into()));
        }
        return Ok(0.0);
    }
    let want = 2.0 * PI * p as f64 / q as f64;
    let flux = b * lattice.cell_volume();
    if (flux - want).abs() > 1e-12 * want.abs().max(1.0) {
        return Err(Error::IrrationalFlux(format!(
            "field gives flux {flux} per cell, expected 2π·{p}/{q} = {want}"
        )));
    }
    Ok(b)
}

/// Field strength giving flux `2π p/q` per cell.
pub fn field_for_flux(lattice: &Lattice, p: i64, q: i64) -> f64 {
    2.0 * PI * p as f64 / (q as f64 * lattice.cell_volume())
}

/// Reduces a site to its magnetic-cell representative: returns the
/// representative index `j` (site `j e₁`) and `c` with `f(site) = c f(j e₁)`
/// for Bloch functions of the translations by `q e₁` and `e₂`.
fn reduce_site(lattice: &Lattice, b: f64, q: i64, theta: [f64; 2], site: Coord) -> (usize, C64) {
    let a1 = [q, 0];
    let a2 = [0, 1];
    let mut cur = site;
    let mut c = C64::new(1.0, 0.0);
    let w = |a: Coord, g: Coord| wedge(lattice.point(a), lattice.point(g));
    // f(γ) = e^{−iθ_a} e^{i(b/2) a∧γ} f(γ − a);  f(γ) = e^{iθ_a} e^{−i(b/2) a∧γ} f(γ + a)
    while cur[1] > 0 {
        c *= cis(-theta[1] + 0.5 * b * w(a2, cur));
        cur[1] -= 1;
    }
    while cur[1] < 0 {
        c *= cis(theta[1] - 0.5 * b * w(a2, cur));
        cur[1] += 1;
    }
    while cur[0] >= q {
        c *= cis(-theta[0] + 0.5 * b * w(a1, cur));
        cur[0] -= q;
    }
    while cur[0] < 0 {
        c *= cis(theta[0] - 0.5 * b * w(a1, cur));
        cur[0] += q;
    }
    (cur[0] as usize, c)
}

pub fn assemble_effective(h: &HoppingSet, a: &VectorPotential, mode: EffectiveMode) -> Result<EffectiveLatticeOperator> {
    let lattice = &h.lattice;
    let nb = h.n;
    match mode {
        EffectiveMode::Box { l } => {
            if l < h.radius {
                return Err(Error::InvalidInput(format!(
                    "box half-size {l} is smaller than the hopping radius {}",
                    h.radius
                )));
            }
            let sites = offsets(lattice.dim(), l);
            let index: BTreeMap<Coord, usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
            let ns = sites.len();
            let mut m = CMat::zeros(ns * nb, ns * nb);
            for (i, g) in sites.iter().enumerate() {
                for (d, q) in &h.hoppings {
                    let al = [g[0] - d[0], g[1] - d[1]];
                    if let Some(&j) = index.get(&al) {
                        let ph = peierls_phase(a, lattice, *g, al);
                        for r in 0..nb {
                            for s in 0..nb {
                                m[(i * nb + r, j * nb + s)] += ph * q[(r, s)];
                            }
                        }
                    }
                }
            }
            Ok(EffectiveLatticeOperator {
                mode,
                n_block: nb,
                sites,
                matrix: m,
            })
        }
        EffectiveMode::MagneticBloch { p, q, theta } => {
            let b = check_flux(a, lattice, p, q)?;
            let qq = q as usize;
            let sites: Vec<Coord> = (0..q).map(|j| [j, 0]).collect();
            let mut m = CMat::zeros(qq * nb, qq * nb);
            for (i, g) in sites.iter().enumerate() {
                for (d, hq) in &h.hoppings {
                    let al = [g[0] - d[0], g[1] - d[1]];
                    let (j, c) = reduce_site(lattice, b, q, theta, al);
                    let ph = peierls_phase(a, lattice, *g, al) * c;
                    for r in 0..nb {
                        for s in 0..nb {
                            m[(i * nb + r, j * nb + s)] += ph * hq[(r, s)];
                        }
                    }
                }
            }
            Ok(EffectiveLatticeOperator {
                mode,
                n_block: nb,
                sites,
                matrix: m,
            })
        }
    }
}

/// Quasi-momentum grid `θ = 2π m/n_theta` per direction (one direction in one dimension).
pub fn theta_grid(dim: usize, n_theta: usize) -> Vec<[f64; 2]> {
    let t: Vec<f64> = (0..n_theta).map(|m| 2.0 * PI * m as f64 / n_theta as f64).collect();
    if dim == 1 {
        t.iter().map(|&a| [a, 0.0]).collect()
    } else {
        t.iter().flat_map(|&a| t.iter().map(move |&b| [a, b])).collect()
    }
}

/// Per-eigenvalue-index ranges over a `θ` grid.
pub fn bloch_band_ranges(h: &HoppingSet, a: &VectorPotential, p: i64, q: i64, n_theta: usize) -> Result<Vec<(f64, f64)>> {
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    for theta in theta_grid(h.lattice.dim(), n_theta) {
        let op = assemble_effective(h, a, EffectiveMode::MagneticBloch { p, q, theta })?;
        let ev = op.eigenvalues()?;
        if ranges.is_empty() {
            ranges = ev.iter().map(|&e| (e, e)).collect();
        } else {
            for (r, e) in ranges.iter_mut().zip(&ev) {
                r.0 = r.0.min(*e);
                r.1 = r.1.max(*e);
            }
        }
    }
    Ok(ranges)
}

/// Spectrum of the lattice operator in a window: eigenvalues in box mode,
/// the union of band ranges over a `θ` grid in magnetic-Bloch mode.
pub fn effective_spectrum(
    h: &HoppingSet,
    a: &VectorPotential,
    mode: EffectiveMode,
    n_theta: usize,
    window: (f64, f64),
    merge_tol: f64,
) -> Result<SpectrumSet> {
    match mode {
        EffectiveMode::Box { .. } => {
            let op = assemble_effective(h, a, mode)?;
            Ok(SpectrumSet::from_points(&op.eigenvalues()?, window, merge_tol))
        }
        EffectiveMode::MagneticBloch { p, q, .. } => {
            let r = bloch_band_ranges(h, a, p, q, n_theta)?;
            Ok(SpectrumSet::from_intervals(&r, window, merge_tol))
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanPoint {
    pub lambda: f64,
    /// `min |eig|` of the lattice operator at `λ` over the `θ` grid,
    /// with eigenvalue branches treated as continuous ranges.
    pub margin: f64,
}

/// `margin(λ)` for hoppings supplied per `λ` in magnetic-Bloch mode.
pub fn lambda_scan(
    factory: &dyn Fn(f64) -> Result<HoppingSet>,
    a: &VectorPotential,
    p: i64,
    q: i64,
    n_theta: usize,
    lambdas: &[f64],
) -> Result<Vec<ScanPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            Ok(ScanPoint {
                lambda,
                margin: margin_at(factory, a, p, q, n_theta, lambda)?,
            })
        })
        .collect()
}

fn margin_at(
    factory: &dyn Fn(f64) -> Result<HoppingSet>,
    a: &VectorPotential,
    p: i64,
    q: i64,
    n_theta: usize,
    lambda: f64,
) -> Result<f64> {
    let h = factory(lambda)?;
    let r = bloch_band_ranges(&h, a, p, q, n_theta)?;
    Ok(r.iter()
        .map(|&(lo, hi)| if lo > 0.0 { lo } else if hi < 0.0 { -hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min))
}

/// Adaptive reconstruction of `{λ : margin(λ) ≤ tol}` for a margin that is
/// `lipschitz`-Lipschitz in `λ`. Starting from the scan partition, a cell is
/// discarded when `m_a + m_b > L (b − a) + 2 tol`, accepted whole when both
/// ends lie in the set and it is shorter than `merge_tol`, and bisected
/// otherwise down to `edge_res`. Narrow subbands between scan points are found.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_spectrum_adaptive(
    factory: &dyn Fn(f64) -> Result<HoppingSet>,
    a: &VectorPotential,
    p: i64,
    q: i64,
    n_theta: usize,
    scan: &[ScanPoint],
    lipschitz: f64,
    tol: f64,
    edge_res: f64,
    window: (f64, f64),
    merge_tol: f64,
) -> Result<SpectrumSet> {
    let margin = |l: f64| margin_at(factory, a, p, q, n_theta, l);
    let mut iv = Vec::new();
    let mut stack: Vec<(f64, f64, f64, f64)> = scan
        .windows(2)
        .rev()
        .map(|w| (w[0].lambda, w[1].lambda, w[0].margin, w[1].margin))
        .collect();
    if let [only] = scan {
        if only.margin <= tol {
            iv.push((only.lambda, only.lambda));
        }
    }
    while let Some((x, y, mx, my)) = stack.pop() {
        if mx + my > lipschitz * (y - x) + 2.0 * tol {
            continue;
        }
        let (ix, iy) = (mx <= tol, my <= tol);
        if (ix && iy && y - x <= merge_tol) || y - x <= edge_res {
            match (ix, iy) {
                (true, true) => iv.push((x, y)),
                (true, false) => iv.push((x, x)),
                (false, true) => iv.push((y, y)),
                (false, false) => {}
            }
            continue;
        }
        let mid = 0.5 * (x + y);
        let mm = margin(mid)?;
        stack.push((mid, y, mm, my));
        stack.push((x, mid, mx, mm));
    }
    Ok(SpectrumSet::from_intervals(&iv, window, merge_tol))
}

/// `{λ : margin(λ) ≤ tol}` as runs of consecutive scan points.
pub fn reconstruct_spectrum(scan: &[ScanPoint], tol: f64, window: (f64, f64), merge_tol: f64) -> SpectrumSet {
    let mut iv = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for s in scan {
        if s.margin <= tol {
            if start.is_none() {
                start = Some(s.lambda);
            }
            last = s.lambda;
        } else if let Some(a) = start.take() {
            iv.push((a, last));
        }
    }
    if let Some(a) = start {
        iv.push((a, last));
    }
    SpectrumSet::from_intervals(&iv, window, merge_tol)
}

/// `λ` grid of `n` points spanning the window.
pub fn lambda_grid(window: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}

/// Action of the Peierls operator on a finitely supported lattice function.
pub fn apply_effective(h: &HoppingSet, a: &VectorPotential, f: &BTreeMap<Coord, C64>) -> BTreeMap<Coord, C64> {
    let mut out = BTreeMap::new();
    for (al, v) in f {
        for (d, q) in &h.hoppings {
            let g = [al[0] + d[0], al[1] + d[1]];
            let e = out.entry(g).or_insert(ZERO);
            *e += peierls_phase(a, &h.lattice, g, *al) * q[(0, 0)] * v;
        }
    }
    out
}

/// `(T_a f)(γ) = e^{i(b/2) a∧γ} f(γ − a)` for a uniform field `b`.
pub fn lattice_translation(lattice: &Lattice, b: f64, shift: Coord, f: &BTreeMap<Coord, C64>) -> BTreeMap<Coord, C64> {
    f.iter()
        .map(|(al, v)| {
            let g = [al[0] + shift[0], al[1] + shift[1]];
            let ph = cis(0.5 * b * wedge(lattice.point(shift), lattice.point(g)));
            (g, ph * v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::MagneticField;

    #[test]
    fn single_harmonic_hoppings() {
        let l = Lattice::one_dim_standard();
        let g = BZGrid::new(&l, 16).unwrap();
        let lam = 0.7;
        let v: Vec<f64> = (0..16).map(|i| lam - 2.0 * (2.0 * PI * g.coords(i)[0]).cos()).collect();
        let h = fourier_hoppings_scalar(&g, &v, 4, "test").unwrap();
        assert!((h.hoppings[&[0, 0]][(0, 0)].re - lam).abs() < 1e-14);
        assert!((h.hoppings[&[1, 0]][(0, 0)].re + 1.0).abs() < 1e-14);
        assert!((h.hoppings[&[-1, 0]][(0, 0)].re + 1.0).abs() < 1e-14);
        assert!(h.hoppings[&[2, 0]][(0, 0)].norm() < 1e-12);
        assert!(matches!(fourier_hoppings_scalar(&g, &v, 8, "x"), Err(Error::Aliasing(_))));
    }

    #[test]
    fn flux_half_nearest_neighbour() {
        let l = Lattice::square_standard();
        let g = BZGrid::new(&l, 8).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let t = g.coords(i);
                -2.0 * (2.0 * PI * t[0]).cos() - 2.0 * (2.0 * PI * t[1]).cos()
            })
            .collect();
        let h = fourier_hoppings_scalar(&g, &v, 1, "nn").unwrap();
        let a = VectorPotential::transversal(MagneticField::uniform(field_for_flux(&l, 1, 2), 1.0));
        for theta in [[0.3, 1.1], [2.0, 0.2], [0.0, 0.0]] {
            let op = assemble_effective(&h, &a, EffectiveMode::MagneticBloch { p: 1, q: 2, theta }).unwrap();
            assert!(op.hermitian_defect() < 1e-12);
            let ev = op.eigenvalues().unwrap();
            assert_eq!(ev.len(), 2);
            assert!((ev[0] + ev[1]).abs() < 1e-12);
        }
    }
}
