//! Riesz projectors and smooth, equivariant, conjugation-symmetric eigenvector
//! sections of a simple band, built by parallel transport.
//!
//! Coefficient vectors are indexed by the shell members: `c(γ*)` is the
//! amplitude of `e^{i⟨γ*, y⟩}` in the periodic eigenfunction of `H(ξ)`.
//! Two maps act on them:
//! - the zone shift `φ(ξ + γ*)(β*) = φ(ξ)(β* + γ*)`, see [`shift_coefficients`];
//! - the conjugation `(J c)(γ*) = conj c(−γ*)`, which maps `H(ξ)` to `H(−ξ)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bloch_solver::{
    assemble_fiber_matrix, conjugate_reflect, eigen_residual, fiber_eigen, shift_coefficients,
    BandStructure, FiberMatrix,
};
use crate::error::{Error, Result};
use crate::lattice::{BZGrid, DualShell, Vec2};
use crate::linalg::{self, CMat, Eigh, C64, ZERO};
use crate::symbols::PeriodicSymbol;

/// Rank-one spectral projector onto an isolated eigenvalue.
#[derive(Debug, Clone)]
pub struct RieszProjector {
    pub xi: Vec2,
    pub band_index: usize,
    pub matrix: CMat,
}

impl RieszProjector {
    pub fn trace(&self) -> C64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// `max |Π² − Π|` entrywise.
    pub fn idempotency_defect(&self) -> f64 {
        let p2 = &self.matrix * &self.matrix;
        linalg::max_abs(&(&p2 - &self.matrix))
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.matrix)
    }
}

/// Distance of `λ_k` to its neighbours in a sorted spectrum.
fn isolation(values: &[f64], k: usize) -> f64 {
    let mut g = f64::INFINITY;
    if k > 0 {
        g = g.min(values[k] - values[k - 1]);
    }
    if k + 1 < values.len() {
        g = g.min(values[k + 1] - values[k]);
    }
    g
}

fn check_isolated(values: &[f64], k: usize, xi: Vec2, gap_tol: f64) -> Result<()> {
    if k >= values.len() {
        return Err(Error::InvalidInput(format!("band index {k} out of range")));
    }
    let gap = isolation(values, k);
    if gap <= gap_tol {
        return Err(Error::NearDegeneracy {
            band: k,
            xi,
            gap,
            gap_tol,
        });
    }
    Ok(())
}

/// Projector `u u†` built from the eigenvector of band `k` (zero-based).
pub fn riesz_projection(matrix: &FiberMatrix, k: usize, eig: &Eigh, gap_tol: f64) -> Result<RieszProjector> {
    check_isolated(&eig.values, k, matrix.xi, gap_tol)?;
    let u = linalg::column(&eig.vectors, k);
    let n = u.len();
    Ok(RieszProjector {
        xi: matrix.xi,
        band_index: k,
        matrix: CMat::from_fn(n, n, |i, j| u[i] * u[j].conj()),
    })
}

/// Projector by `nodes`-point trapezoidal quadrature of
/// `(2πi)⁻¹ ∮ (z − H)⁻¹ dz` on the circle centred at `λ_k` with radius half
/// the distance to the nearest other eigenvalue.
pub fn riesz_projection_contour(
    matrix: &FiberMatrix,
    k: usize,
    eig: &Eigh,
    gap_tol: f64,
    nodes: usize,
) -> Result<RieszProjector> {
    check_isolated(&eig.values, k, matrix.xi, gap_tol)?;
    let n = matrix.dim();
    let center = eig.values[k];
    let radius = 0.5 * isolation(&eig.values, k).min(1e6);
    let mut acc = CMat::zeros(n, n);
    for j in 0..nodes {
        let th = 2.0 * PI * (j as f64 + 0.5) / nodes as f64;
        let w = C64::new(th.cos(), th.sin()) * radius;
        let z = w + center;
        let a = CMat::from_fn(n, n, |r, c| {
            let h = matrix.entries[(r, c)];
            if r == c {
                z - h
            } else {
                -h
            }
        });
        let inv = linalg::inverse(&a);
        acc += inv * faer::Scale(w / nodes as f64);
    }
    Ok(RieszProjector {
        xi: matrix.xi,
        band_index: k,
        matrix: acc,
    })
}

/// Normalized, equivariant section of band `band_index` over a grid.
#[derive(Debug, Clone)]
pub struct BlochSection {
    pub grid: BZGrid,
    pub shell: DualShell,
    pub symbol: PeriodicSymbol,
    pub band_index: usize,
    /// Section coefficients per grid point.
    pub vectors: Vec<Vec<C64>>,
    /// Band eigenvalue per grid point.
    pub energies: Vec<f64>,
    /// Unit band eigenvectors per grid point (projector data).
    pub frames: Vec<Vec<C64>>,
    /// Section on the upper faces: `edges[j][m]` sits at the point with axis
    /// coordinate `t_j = +1/2` and other-axis grid index `m`.
    pub edges: Vec<Vec<Vec<C64>>>,
    pub edge_energies: Vec<Vec<f64>>,
    pub edge_frames: Vec<Vec<Vec<C64>>>,
    /// Holonomy phases: `[κ]` in one dimension; `[κ, κ′(t₁) for t₁ in grid ∪ {1/2}]` in two.
    pub phase_log: Vec<f64>,
}

/// Unit eigenvector and energy of band `k` at a point, with isolation check.
fn frame_at(symbol: &PeriodicSymbol, shell: &DualShell, xi: Vec2, k: usize, gap_tol: f64) -> Result<(Vec<C64>, f64)> {
    let e = fiber_eigen(symbol, xi, shell)?;
    check_isolated(&e.values, k, xi, gap_tol)?;
    Ok((linalg::column(&e.vectors, k), e.values[k]))
}

/// `ψ ↦ Π ψ / ‖Π ψ‖` with `Π = u u†`.
fn project_step(u: &[C64], psi: &[C64], xi: Vec2) -> Result<Vec<C64>> {
    let a = linalg::inner(u, psi);
    let norm = a.norm();
    if norm < 0.5 {
        return Err(Error::TransportStepTooLarge { xi, norm });
    }
    let ph = a / norm;
    Ok(u.iter().map(|x| x * ph).collect())
}

fn scale(v: &[C64], s: C64) -> Vec<C64> {
    v.iter().map(|x| x * s).collect()
}

fn cis(a: f64) -> C64 {
    C64::new(a.cos(), a.sin())
}

/// Makes a unit vector with `J u = e^{if} u` invariant under `J`.
fn j_symmetric_seed(shell: &DualShell, u: &[C64]) -> Vec<C64> {
    let ju = conjugate_reflect(shell, u);
    let f = linalg::inner(u, &ju).arg();
    scale(u, cis(0.5 * f))
}

/// Holonomy `κ` with `σ_{−e*} ψ(−1/2) = e^{iκ} ψ(1/2)`, `axis` the shift direction.
fn holonomy(shell: &DualShell, psi_minus: &[C64], psi_plus: &[C64], axis: usize) -> f64 {
    let mut g = [0i64; 2];
    g[axis] = -1;
    let shifted = shift_coefficients(shell, psi_minus, g);
    linalg::inner(psi_plus, &shifted).arg()
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Transport along one axis through the points `pts[0..]` (first entry the
/// seed position), returning the transported vectors.
fn transport_line(seed: Vec<C64>, frames: &[(&[C64], Vec2)]) -> Result<Vec<Vec<C64>>> {
    let mut out = Vec::with_capacity(frames.len() + 1);
    out.push(seed);
    for (u, xi) in frames {
        let next = project_step(u, out.last().expect("nonempty"), *xi)?;
        out.push(next);
    }
    Ok(out)
}

/// Parallel transport of a simple band with holonomy correction.
/// `band_index` is zero-based; the grid resolution must be even.
pub fn transport_section(bands: &BandStructure, band_index: usize, gap_tol: f64) -> Result<BlochSection> {
    let vecs = bands
        .vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("band structure carries no eigenvectors".into()))?;
    let k = band_index;
    if k + 1 >= bands.n_bands {
        return Err(Error::InvalidInput(format!(
            "band {k} needs band {} computed to certify its isolation",
            k + 1
        )));
    }
    if !bands.symbol.has_conjugation_symmetry() {
        return Err(Error::Unsupported(
            "section construction requires an even real symbol (conjugation symmetry)".into(),
        ));
    }
    let grid = &bands.grid;
    let n = grid.resolution();
    if !n.is_multiple_of(2) {
        return Err(Error::Resolution {
            got: n,
            reason: "section transport needs an even resolution so that 0 is a grid point".into(),
        });
    }
    for i in 0..grid.len() {
        check_isolated(&bands.bands[i], k, grid.point(i), gap_tol).or_else(|e| {
            // the top computed band has no upper neighbour in the stored data
            if bands.bands[i].len() == k + 1 {
                Ok(())
            } else {
                Err(e)
            }
        })?;
    }
    let shell = &bands.shell;
    let symbol = &bands.symbol;
    let lattice = grid.lattice();
    let half = n / 2;
    let t_of = |a: usize| -0.5 + a as f64 / n as f64;

    match grid.dim() {
        1 => {
            let frame = |a: usize| -> &[C64] { &vecs[a][k] };
            let edge_xi = lattice.momentum([0.5, 0.0]);
            let (edge_u, edge_e) = frame_at(symbol, shell, edge_xi, k, gap_tol)?;
            let seed = j_symmetric_seed(shell, frame(half));
            let mut steps: Vec<(&[C64], Vec2)> = (half + 1..n).map(|a| (frame(a), grid.point(a))).collect();
            steps.push((&edge_u, edge_xi));
            let pos = transport_line(seed, &steps)?;
            // pos[m] sits at axis index half + m; pos[half] is the edge
            let mut psi = vec![Vec::new(); n];
            for m in 0..half {
                psi[half + m] = pos[m].clone();
            }
            let psi_edge = pos[half].clone();
            for a in 1..half {
                psi[a] = conjugate_reflect(shell, &psi[n - a]);
            }
            psi[0] = conjugate_reflect(shell, &psi_edge);
            let kappa = holonomy(shell, &psi[0], &psi_edge, 0);
            let vectors: Vec<Vec<C64>> = (0..n).map(|a| scale(&psi[a], cis(t_of(a) * kappa))).collect();
            let edge = scale(&psi_edge, cis(0.5 * kappa));
            Ok(BlochSection {
                grid: grid.clone(),
                shell: shell.clone(),
                symbol: symbol.clone(),
                band_index: k,
                vectors,
                energies: (0..n).map(|a| bands.bands[a][k]).collect(),
                frames: (0..n).map(|a| vecs[a][k].clone()).collect(),
                edges: vec![vec![edge]],
                edge_energies: vec![vec![edge_e]],
                edge_frames: vec![vec![edge_u]],
                phase_log: vec![kappa],
            })
        }
        2 => transport_2d(bands, k, gap_tol),
        d => Err(Error::Unsupported(format!("dimension {d}"))),
    }
}

fn transport_2d(bands: &BandStructure, k: usize, gap_tol: f64) -> Result<BlochSection> {
    let vecs = bands.vectors.as_ref().expect("checked");
    let grid = &bands.grid;
    let shell = &bands.shell;
    let symbol = &bands.symbol;
    let lattice = grid.lattice();
    let n = grid.resolution();
    let half = n / 2;
    let t_of = |a: usize| -0.5 + a as f64 / n as f64;

    // frames on the extended index set (a1, a2) ∈ [0, n] × [half, n]
    let mut ext: Vec<Vec<Option<(Vec<C64>, f64)>>> = vec![vec![None; n + 1]; n + 1];
    for a1 in 0..=n {
        for a2 in half..=n {
            let entry = if a1 < n && a2 < n {
                let i = grid.flat_index([a1, a2]);
                (vecs[i][k].clone(), bands.bands[i][k])
            } else {
                let xi = lattice.momentum([t_of(a1), t_of(a2)]);
                frame_at(symbol, shell, xi, k, gap_tol)?
            };
            ext[a1][a2] = Some(entry);
        }
    }
    // the base line t₂ = 0 also needs frames for t₁ < 0 only through reflection
    let fr = |a1: usize, a2: usize| -> &[C64] { &ext[a1][a2].as_ref().expect("filled").0 };
    let xi_of = |a1: usize, a2: usize| lattice.momentum([t_of(a1), t_of(a2)]);

    // base axis: t₂ = 0, transport in t₁ from 0 to 1/2
    let seed = j_symmetric_seed(shell, fr(half, half));
    let steps: Vec<(&[C64], Vec2)> = (half + 1..=n).map(|a| (fr(a, half), xi_of(a, half))).collect();
    let pos = transport_line(seed, &steps)?;
    let mut base = vec![Vec::new(); n + 1];
    for m in 0..=half {
        base[half + m] = pos[m].clone();
    }
    for a in 0..half {
        base[a] = conjugate_reflect(shell, &base[n - a]);
    }
    let kappa = holonomy(shell, &base[0], &base[n], 0);
    for (a, b) in base.iter_mut().enumerate() {
        *b = scale(b, cis(t_of(a) * kappa));
    }

    // rows: transport in t₂ from the base for every t₁ ∈ grid ∪ {1/2}
    let mut upper: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n + 1);
    for a1 in 0..=n {
        let steps: Vec<(&[C64], Vec2)> = (half + 1..=n).map(|a2| (fr(a1, a2), xi_of(a1, a2))).collect();
        upper.push(transport_line(base[a1].clone(), &steps)?);
    }
    // ψ̃(a1, a2) for a2 ≥ half is upper[a1][a2 - half]; lower half by reflection
    let psi = |a1: usize, a2: usize| -> Vec<C64> {
        if a2 >= half {
            upper[a1][a2 - half].clone()
        } else {
            conjugate_reflect(shell, &upper[n - a1][n - a2 - half])
        }
    };
    let mut kprime: Vec<f64> = (0..=n).map(|a1| holonomy(shell, &psi(a1, 0), &psi(a1, n), 1)).collect();
    unwrap_from_center(&mut kprime, half);

    let mut vectors = vec![Vec::new(); grid.len()];
    let mut energies = vec![0.0; grid.len()];
    let mut frames = vec![Vec::new(); grid.len()];
    for i in 0..grid.len() {
        let [a1, a2] = grid.multi_index(i);
        vectors[i] = scale(&psi(a1, a2), cis(kprime[a1] * t_of(a2)));
        energies[i] = bands.bands[i][k];
        frames[i] = vecs[i][k].clone();
    }
    // upper faces: t₁ = 1/2 (indexed by a2) and t₂ = 1/2 (indexed by a1)
    let mut e0 = Vec::with_capacity(n);
    let mut e0_en = Vec::with_capacity(n);
    let mut e0_fr = Vec::with_capacity(n);
    for a2 in 0..n {
        e0.push(scale(&psi(n, a2), cis(kprime[n] * t_of(a2))));
        if a2 >= half {
            let (u, e) = ext[n][a2].as_ref().expect("filled");
            e0_en.push(*e);
            e0_fr.push(u.clone());
        } else {
            let xi = xi_of(n, a2);
            let (u, e) = frame_at(symbol, shell, xi, k, gap_tol)?;
            e0_en.push(e);
            e0_fr.push(u);
        }
    }
    let mut e1 = Vec::with_capacity(n);
    let mut e1_en = Vec::with_capacity(n);
    let mut e1_fr = Vec::with_capacity(n);
    for a1 in 0..n {
        e1.push(scale(&psi(a1, n), cis(0.5 * kprime[a1])));
        let (u, e) = ext[a1][n].as_ref().expect("filled");
        e1_en.push(*e);
        e1_fr.push(u.clone());
    }
    let mut phase_log = vec![kappa];
    phase_log.extend_from_slice(&kprime);
    Ok(BlochSection {
        grid: grid.clone(),
        shell: shell.clone(),
        symbol: symbol.clone(),
        band_index: k,
        vectors,
        energies,
        frames,
        edges: vec![e0, e1],
        edge_energies: vec![e0_en, e1_en],
        edge_frames: vec![e0_fr, e1_fr],
        phase_log,
    })
}

/// Removes 2π jumps walking outward from `center` in both directions.
fn unwrap_from_center(v: &mut [f64], center: usize) {
    for i in center + 1..v.len() {
        let prev = v[i - 1];
        v[i] = prev + wrap_pi(v[i] - prev);
    }
    for i in (0..center).rev() {
        let prev = v[i + 1];
        v[i] = prev + wrap_pi(v[i] - prev);
    }
}

fn wrap_pi(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Invariant measurements of a section.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SectionReport {
    /// `max |‖φ‖ − 1|`.
    pub norm_defect: f64,
    /// `max ‖(H(ξ) − λ_k(ξ)) φ‖`.
    pub residual: f64,
    /// `max ‖φ(ξ + e*_j) − σ φ(ξ)‖` across the zone faces.
    pub equivariance: f64,
    /// `max ‖φ(−ξ) − J φ(ξ)‖`.
    pub conjugation: f64,
    /// Smallest real part of normalized overlaps between neighbours.
    pub min_overlap_re: f64,
    /// Circular distance between the Wilson-loop phase of the base line and `κ`.
    pub berry_defect: f64,
    /// `|κ′(−1/2) − κ′(1/2)|` in two dimensions, zero otherwise.
    pub kappa_periodicity: f64,
}

impl BlochSection {
    pub fn kappa(&self) -> f64 {
        self.phase_log[0]
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Section vector at per-axis index `m`, where index `n` on an axis denotes
    /// the upper face `t = 1/2`; values beyond use equivariance.
    pub fn vector_at(&self, m: [i64; 2]) -> Vec<C64> {
        let n = self.grid.resolution() as i64;
        let d = self.dim();
        let mut red = [0i64; 2];
        let mut wrap = [0i64; 2];
        for j in 0..d {
            wrap[j] = m[j].div_euclid(n);
            red[j] = m[j].rem_euclid(n);
        }
        let base = self.vectors[self.grid.flat_index([red[0] as usize, red[1] as usize])].clone();
        // φ(ξ + γ*) = shift(φ(ξ), −γ*)
        shift_coefficients(&self.shell, &base, [-wrap[0], -wrap[1]])
    }

    pub fn report(&self) -> Result<SectionReport> {
        let grid = &self.grid;
        let shell = &self.shell;
        let n = grid.resolution();
        let d = self.dim();
        let mut rep = SectionReport {
            norm_defect: 0.0,
            residual: 0.0,
            equivariance: 0.0,
            conjugation: 0.0,
            min_overlap_re: f64::INFINITY,
            berry_defect: 0.0,
            kappa_periodicity: 0.0,
        };
        for i in 0..grid.len() {
            let v = &self.vectors[i];
            rep.norm_defect = rep.norm_defect.max((linalg::vnorm(v) - 1.0).abs());
            let f = assemble_fiber_matrix(&self.symbol, grid.point(i), shell)?;
            rep.residual = rep.residual.max(eigen_residual(&f, self.energies[i], v));
        }
        for j in 0..d {
            for (m, v) in self.edges[j].iter().enumerate() {
                let mut idx = [0usize; 2];
                idx[1 - j] = m;
                idx[j] = 0;
                if d == 1 {
                    idx = [0, 0];
                }
                let mut t = [0.0; 2];
                for a in 0..d {
                    t[a] = if a == j { 0.5 } else { grid.axis_coord(idx[a]) };
                }
                let xi = grid.lattice().momentum(t);
                let f = assemble_fiber_matrix(&self.symbol, xi, shell)?;
                rep.residual = rep.residual.max(eigen_residual(&f, self.edge_energies[j][m], v));
                rep.norm_defect = rep.norm_defect.max((linalg::vnorm(v) - 1.0).abs());
                let mut g = [0i64; 2];
                g[j] = -1;
                let shifted = shift_coefficients(shell, &self.vectors[grid.flat_index(idx)], g);
                rep.equivariance = rep.equivariance.max(linalg::vdist(v, &shifted));
            }
        }
        for i in 0..grid.len() {
            let m = grid.multi_index(i);
            let mut neg = [0i64; 2];
            for a in 0..d {
                neg[a] = n as i64 - m[a] as i64;
            }
            let target = self.vector_at(neg);
            let jv = conjugate_reflect(shell, &self.vectors[i]);
            rep.conjugation = rep.conjugation.max(linalg::vdist(&target, &jv));
            for a in 0..d {
                let mut nb = [m[0] as i64, m[1] as i64];
                nb[a] += 1;
                let w = self.vector_at(nb);
                let ov = linalg::inner(&self.vectors[i], &w);
                rep.min_overlap_re = rep.min_overlap_re.min(ov.re / ov.norm().max(f64::MIN_POSITIVE));
            }
        }
        // Wilson loop along the first axis through the base line
        let a2 = if d == 2 { n / 2 } else { 0 };
        let mut w = C64::new(1.0, 0.0);
        for a1 in 0..n {
            let cur = &self.vectors[grid.flat_index([a1, a2])];
            let next = if a1 + 1 < n {
                self.vectors[grid.flat_index([a1 + 1, a2])].clone()
            } else {
                self.edges[0][if d == 2 { a2 } else { 0 }].clone()
            };
            let ov = linalg::inner(cur, &next);
            w *= ov / ov.norm();
        }
        let edge = &self.edges[0][if d == 2 { a2 } else { 0 }];
        let closing = linalg::inner(
            edge,
            &shift_coefficients(shell, &self.vectors[grid.flat_index([0, a2])], [-1, 0]),
        );
        w *= closing / closing.norm();
        rep.berry_defect = circ_dist(w.arg(), self.kappa());
        if d == 2 {
            rep.kappa_periodicity = (self.phase_log[1] - self.phase_log[1 + n]).abs();
        }
        Ok(rep)
    }
}

/// Raised-cosine weights `1 + cos(π m h/δ)` on offsets `|m h| < δ`, normalized.
fn bump_weights(n: usize, delta: f64) -> Vec<(i64, f64)> {
    let h = 1.0 / n as f64;
    let mmax = (delta / h).ceil() as i64;
    let mut w: Vec<(i64, f64)> = (-mmax..=mmax)
        .filter_map(|m| {
            let x = m as f64 * h / delta;
            (x.abs() < 1.0).then(|| (m, 1.0 + (PI * x).cos()))
        })
        .collect();
    let s: f64 = w.iter().map(|(_, v)| v).sum();
    for e in &mut w {
        e.1 /= s;
    }
    w
}

/// Mollifies a section with an even raised-cosine bump of width `delta`
/// (dual coordinates), then re-projects onto the band and renormalizes.
pub fn smooth_section(section: &BlochSection, delta: f64) -> Result<BlochSection> {
    let n = section.grid.resolution();
    if !(delta > 0.0) || delta >= 0.5 {
        return Err(Error::InvalidInput(format!(
            "mollifier width must lie in (0, 1/2), got {delta}"
        )));
    }
    let w = bump_weights(n, delta);
    let d = section.dim();
    let conv = |m: [i64; 2]| -> Vec<C64> {
        let mut acc = vec![ZERO; section.shell.len()];
        if d == 1 {
            for &(o, wt) in &w {
                let v = section.vector_at([m[0] - o, 0]);
                for (a, x) in acc.iter_mut().zip(&v) {
                    *a += x * wt;
                }
            }
        } else {
            for &(o1, w1) in &w {
                for &(o2, w2) in &w {
                    let v = section.vector_at([m[0] - o1, m[1] - o2]);
                    for (a, x) in acc.iter_mut().zip(&v) {
                        *a += x * (w1 * w2);
                    }
                }
            }
        }
        acc
    };
    let reproject = |u: &[C64], v: &[C64], xi: Vec2| -> Result<Vec<C64>> {
        let a = linalg::inner(u, v);
        let norm = a.norm();
        if norm < 0.5 {
            return Err(Error::MollifierTooWide { xi, norm });
        }
        Ok(scale(u, a / norm))
    };
    let grid = &section.grid;
    let mut out = section.clone();
    for i in 0..grid.len() {
        let m = grid.multi_index(i);
        let v = conv([m[0] as i64, m[1] as i64]);
        out.vectors[i] = reproject(&section.frames[i], &v, grid.point(i))?;
    }
    for j in 0..d {
        for mm in 0..section.edges[j].len() {
            let mut idx = [0i64; 2];
            idx[j] = n as i64;
            if d == 2 {
                idx[1 - j] = mm as i64;
            }
            let v = conv(idx);
            let mut t = [0.0; 2];
            for a in 0..d {
                t[a] = if a == j { 0.5 } else { grid.axis_coord(mm) };
            }
            let xi = grid.lattice().momentum(t);
            out.edges[j][mm] = reproject(&section.edge_frames[j][mm], &v, xi)?;
        }
    }
    Ok(out)
}

/// Mollified section before re-projection (diagnostic): residuals of the raw
/// convolution.
pub fn mollified_residual(section: &BlochSection, delta: f64) -> Result<f64> {
    let n = section.grid.resolution();
    let w = bump_weights(n, delta);
    let grid = &section.grid;
    let mut r = 0.0f64;
    for i in 0..grid.len() {
        let m = grid.multi_index(i);
        let mut acc = vec![ZERO; section.shell.len()];
        let offs: Vec<([i64; 2], f64)> = if section.dim() == 1 {
            w.iter().map(|&(o, wt)| ([o, 0], wt)).collect()
        } else {
            w.iter()
                .flat_map(|&(o1, w1)| w.iter().map(move |&(o2, w2)| ([o1, o2], w1 * w2)))
                .collect()
        };
        for (o, wt) in offs {
            let v = section.vector_at([m[0] as i64 - o[0], m[1] as i64 - o[1]]);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x * wt;
            }
        }
        let nrm = linalg::vnorm(&acc);
        let acc: Vec<C64> = acc.iter().map(|x| x / nrm).collect();
        let f = assemble_fiber_matrix(&section.symbol, grid.point(i), &section.shell)?;
        r = r.max(eigen_residual(&f, section.energies[i], &acc));
    }
    Ok(r)
}
