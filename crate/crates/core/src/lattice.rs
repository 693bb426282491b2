//! Period lattice Γ, dual lattice Γ*, cells and Brillouin-zone sampling.
//!
//! Vectors are stored as `[f64; 2]`. In one dimension only the first
//! component is used and the second is kept at zero.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];
/// Integer coefficients of a lattice point with respect to a basis.
pub type Coord = [i64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// Signed area `a₁b₂ − a₂b₁`.
#[inline]
pub fn wedge(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    basis: [Vec2; 2],
    dual: [Vec2; 2],
    cell_volume: f64,
    dual_cell_volume: f64,
}

/// Dual basis `e*_j` with `⟨e*_j, e_k⟩ = 2π δ_jk`, i.e. `2π (Bᵀ)⁻¹`.
pub fn dual_basis(basis: &[Vec2]) -> Result<Vec<Vec2>> {
    match basis.len() {
        1 => {
            let a = basis[0][0];
            if a == 0.0 || !a.is_finite() {
                return Err(Error::DegenerateLattice { det: a });
            }
            Ok(vec![[2.0 * PI / a, 0.0]])
        }
        2 => {
            let [e1, e2] = [basis[0], basis[1]];
            let det = wedge(e1, e2);
            let scale = norm(e1) * norm(e2);
            if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale {
                return Err(Error::DegenerateLattice { det });
            }
            let f = 2.0 * PI / det;
            Ok(vec![[e2[1] * f, -e2[0] * f], [-e1[1] * f, e1[0] * f]])
        }
        n => Err(Error::InvalidInput(format!(
            "lattice dimension {n} not supported (1 or 2)"
        ))),
    }
}

impl Lattice {
    /// Builds a lattice from `d` basis vectors. For `d = 1` each vector
    /// may carry a trailing zero.
    pub fn new(basis: &[Vec2]) -> Result<Self> {
        let dim = basis.len();
        let dual = dual_basis(basis)?;
        let mut b = [[1.0, 0.0], [0.0, 1.0]];
        let mut d = [[1.0, 0.0], [0.0, 1.0]];
        for j in 0..dim {
            b[j] = basis[j];
            d[j] = dual[j];
        }
        if dim == 1 {
            b[0][1] = 0.0;
            b[1] = [0.0, 1.0];
            d[1] = [0.0, 1.0];
        }
        let cell_volume = if dim == 1 { b[0][0].abs() } else { wedge(b[0], b[1]).abs() };
        let dual_cell_volume = if dim == 1 { d[0][0].abs() } else { wedge(d[0], d[1]).abs() };
        Ok(Self {
            dim,
            basis: b,
            dual: d,
            cell_volume,
            dual_cell_volume,
        })
    }

    /// Γ = 2πℤ, so that Γ* = ℤ.
    pub fn one_dim_standard() -> Self {
        Self::new(&[[2.0 * PI, 0.0]]).expect("valid lattice")
    }

    /// Γ = 2πℤ², so that Γ* = ℤ².
    pub fn square_standard() -> Self {
        Self::new(&[[2.0 * PI, 0.0], [0.0, 2.0 * PI]]).expect("valid lattice")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Vec2] {
        &self.basis[..self.dim]
    }

    pub fn dual_basis(&self) -> &[Vec2] {
        &self.dual[..self.dim]
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn dual_cell_volume(&self) -> f64 {
        self.dual_cell_volume
    }

    /// Whether the basis is orthogonal and aligned with the coordinate axes.
    pub fn is_axis_aligned(&self) -> bool {
        if self.dim == 1 {
            return true;
        }
        let tol = 1e-14 * (norm(self.basis[0]) + norm(self.basis[1]));
        self.basis[0][1].abs() <= tol && self.basis[1][0].abs() <= tol
    }

    /// Position-space point `Σ n_j e_j`.
    pub fn point(&self, n: Coord) -> Vec2 {
        let mut x = [0.0; 2];
        for j in 0..self.dim {
            x[0] += n[j] as f64 * self.basis[j][0];
            x[1] += n[j] as f64 * self.basis[j][1];
        }
        x
    }

    /// Momentum-space point `Σ n_j e*_j`.
    pub fn dual_point(&self, n: Coord) -> Vec2 {
        let mut x = [0.0; 2];
        for j in 0..self.dim {
            x[0] += n[j] as f64 * self.dual[j][0];
            x[1] += n[j] as f64 * self.dual[j][1];
        }
        x
    }

    /// Coordinates of a momentum with respect to the dual basis.
    pub fn dual_coords(&self, xi: Vec2) -> Vec2 {
        let mut t = [0.0; 2];
        for j in 0..self.dim {
            t[j] = dot(xi, self.basis[j]) / (2.0 * PI);
        }
        t
    }

    /// Coordinates of a position with respect to the direct basis.
    pub fn coords(&self, x: Vec2) -> Vec2 {
        let mut t = [0.0; 2];
        for j in 0..self.dim {
            t[j] = dot(x, self.dual[j]) / (2.0 * PI);
        }
        t
    }

    /// Momentum with dual coordinates `t`.
    pub fn momentum(&self, t: Vec2) -> Vec2 {
        let mut x = [0.0; 2];
        for j in 0..self.dim {
            x[0] += t[j] * self.dual[j][0];
            x[1] += t[j] * self.dual[j][1];
        }
        x
    }

    /// Position with direct coordinates `t`.
    pub fn position(&self, t: Vec2) -> Vec2 {
        let mut x = [0.0; 2];
        for j in 0..self.dim {
            x[0] += t[j] * self.basis[j][0];
            x[1] += t[j] * self.basis[j][1];
        }
        x
    }

    /// Splits `ξ = ξ₀ + γ*` with `ξ₀` in the centered dual cell (dual
    /// coordinates in `[−1/2, 1/2)`). Returns `ξ₀` and the coefficients of `γ*`.
    pub fn reduce_to_cell(&self, xi: Vec2) -> (Vec2, Coord) {
        let t = self.dual_coords(xi);
        let mut n: Coord = [0, 0];
        for j in 0..self.dim {
            n[j] = (t[j] + 0.5).floor() as i64;
        }
        let mut xi0 = sub(xi, self.dual_point(n));
        // guard against rounding pushing the reduced point onto the upper face
        let t0 = self.dual_coords(xi0);
        let mut m: Coord = [0, 0];
        for j in 0..self.dim {
            if t0[j] >= 0.5 {
                m[j] = 1;
            } else if t0[j] < -0.5 {
                m[j] = -1;
            }
        }
        if m != [0, 0] {
            xi0 = sub(xi0, self.dual_point(m));
            n = [n[0] + m[0], n[1] + m[1]];
        }
        (xi0, n)
    }
}

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Uniform tensor grid on the centered dual cell: dual coordinates
/// `−1/2 + i/n`, `i = 0..n`, per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BZGrid {
    lattice: Lattice,
    resolution: usize,
}

pub fn bz_grid(lattice: &Lattice, resolution: usize) -> Result<BZGrid> {
    BZGrid::new(lattice, resolution)
}

impl BZGrid {
    pub fn new(lattice: &Lattice, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Resolution {
                got: resolution,
                reason: "at least 2 points per direction are required".into(),
            });
        }
        Ok(Self {
            lattice: *lattice,
            resolution,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis grid indices of flat index `i` (row-major, last axis fastest).
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [i, 0]
        } else {
            [i / self.resolution, i % self.resolution]
        }
    }

    pub fn flat_index(&self, m: [usize; 2]) -> usize {
        if self.dim() == 1 {
            m[0]
        } else {
            m[0] * self.resolution + m[1]
        }
    }

    /// Flat index of the grid point with per-axis indices taken modulo the resolution.
    pub fn wrapped_index(&self, m: [i64; 2]) -> usize {
        let n = self.resolution as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        if self.dim() == 1 {
            w(m[0])
        } else {
            w(m[0]) * self.resolution + w(m[1])
        }
    }

    /// Dual coordinate of axis index `k`.
    pub fn axis_coord(&self, k: usize) -> f64 {
        -0.5 + k as f64 / self.resolution as f64
    }

    /// Dual coordinates of flat index `i`.
    pub fn coords(&self, i: usize) -> Vec2 {
        let m = self.multi_index(i);
        let mut t = [0.0; 2];
        for j in 0..self.dim() {
            t[j] = self.axis_coord(m[j]);
        }
        t
    }

    pub fn point(&self, i: usize) -> Vec2 {
        self.lattice.momentum(self.coords(i))
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Index of the point `−ξ_i` (requires no wrap beyond the cell: the
    /// map `k ↦ n − k` sends `−1/2` to itself modulo `Γ*`).
    pub fn negated_index(&self, i: usize) -> usize {
        let m = self.multi_index(i);
        let n = self.resolution as i64;
        self.wrapped_index([n - m[0] as i64, n - m[1] as i64])
    }
}

/// Members of Γ* inside a Euclidean ball, in lexicographic coefficient order.
#[derive(Debug, Clone, PartialEq)]
pub struct DualShell {
    lattice: Lattice,
    cutoff: f64,
    indices: Vec<Coord>,
    lookup: HashMap<Coord, usize>,
}

impl DualShell {
    pub fn new(lattice: &Lattice, cutoff: f64) -> Result<Self> {
        if !(cutoff >= 0.0) || !cutoff.is_finite() {
            return Err(Error::InvalidInput(format!("shell cutoff must be >= 0, got {cutoff}")));
        }
        let d = lattice.dim();
        let mut bound = [0i64; 2];
        for j in 0..d {
            bound[j] = (cutoff * norm(lattice.basis[j]) / (2.0 * PI)).floor() as i64 + 1;
        }
        let tol = 1e-12 * cutoff.max(1.0);
        let mut indices = Vec::new();
        for n0 in -bound[0]..=bound[0] {
            for n1 in -bound[1]..=bound[1] {
                let c = [n0, n1];
                if norm(lattice.dual_point(c)) <= cutoff + tol {
                    indices.push(c);
                }
            }
        }
        let lookup = indices.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Self {
            lattice: *lattice,
            cutoff,
            indices,
            lookup,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn indices(&self) -> &[Coord] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, c: Coord) -> Option<usize> {
        self.lookup.get(&c).copied()
    }

    pub fn momentum(&self, i: usize) -> Vec2 {
        self.lattice.dual_point(self.indices[i])
    }

    /// Largest absolute coefficient over the shell, per axis.
    pub fn max_coeff(&self) -> [i64; 2] {
        let mut m = [0i64; 2];
        for c in &self.indices {
            m[0] = m[0].max(c[0].abs());
            m[1] = m[1].max(c[1].abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_of_unit_interval() {
        let d = dual_basis(&[[2.0 * PI, 0.0]]).unwrap();
        assert!((d[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_of_unit_square() {
        let d = dual_basis(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((d[0][0] - 2.0 * PI).abs() < 1e-14 && d[0][1].abs() < 1e-14);
        assert!((d[1][1] - 2.0 * PI).abs() < 1e-14 && d[1][0].abs() < 1e-14);
    }

    #[test]
    fn degenerate_basis_rejected() {
        assert!(matches!(
            dual_basis(&[[1.0, 2.0], [2.0, 4.0]]),
            Err(Error::DegenerateLattice { .. })
        ));
    }

    #[test]
    fn reduce_examples() {
        let l = Lattice::one_dim_standard();
        let (x, n) = l.reduce_to_cell([1.3, 0.0]);
        assert!((x[0] - 0.3).abs() < 1e-12 && n == [1, 0]);
        let (x, n) = l.reduce_to_cell([0.3, 0.0]);
        assert!((x[0] - 0.3).abs() < 1e-15 && n == [0, 0]);
    }

    #[test]
    fn grid_coordinates() {
        let g = BZGrid::new(&Lattice::one_dim_standard(), 4).unwrap();
        let c: Vec<f64> = (0..4).map(|i| g.coords(i)[0]).collect();
        assert_eq!(c, vec![-0.5, -0.25, 0.0, 0.25]);
        assert!(BZGrid::new(&Lattice::one_dim_standard(), 1).is_err());
        assert_eq!(BZGrid::new(&Lattice::square_standard(), 3).unwrap().len(), 9);
    }

    #[test]
    fn shell_of_radius_one() {
        let s = DualShell::new(&Lattice::one_dim_standard(), 1.0).unwrap();
        assert_eq!(s.indices(), &[[-1, 0], [0, 0], [1, 0]]);
    }

    #[test]
    fn negated_index_maps_grid() {
        let g = BZGrid::new(&Lattice::square_standard(), 6).unwrap();
        for i in 0..g.len() {
            let j = g.negated_index(i);
            let (a, _) = g.lattice().reduce_to_cell([-g.point(i)[0], -g.point(i)[1]]);
            let b = g.point(j);
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }
}
