//! Magnetic fields, transversal-gauge vector potentials, line phases
//! `ω_A(x, y) = exp(−i ∫_{[x,y]} A)`, triangle fluxes, magnetic translations
//! and magnetic quantization on a finite position grid.
//!
//! Conventions: `A_j(x) = −Σ_k x_k ∫₀¹ B_jk(s x) s ds`, so a constant field
//! `B₁₂ = b` gives `A = (−b x₂/2, b x₁/2)` and `∂₁A₂ − ∂₂A₁ = b`. The quantized
//! symbol `η_j` is `D_j − A_j`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{dot, Vec2};
use crate::linalg::{self, CMat, C64};

const QUAD_NODES: usize = 16;

fn gauss() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(QUAD_NODES).expect("nonzero")))
}

/// Catalog of non-constant fields, given by `B₁₂(x)` before scaling by `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SmoothField {
    /// `B₁₂(x) = amplitude · cos(x₁)`.
    CosineX1 { amplitude: f64 },
    /// `B₁₂(x) = amplitude · exp(−|x|²/(2 width²))`.
    Gaussian { amplitude: f64, width: f64 },
}

impl SmoothField {
    fn b12(&self, x: Vec2) -> f64 {
        match *self {
            SmoothField::CosineX1 { amplitude } => amplitude * x[0].cos(),
            SmoothField::Gaussian { amplitude, width } => {
                amplitude * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant { b: [[f64; 2]; 2] },
    Smooth(SmoothField),
}

/// Two-dimensional field `ε B(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagneticField {
    pub kind: FieldKind,
    pub epsilon: f64,
}

impl MagneticField {
    /// Constant field from its full matrix; antisymmetry must hold exactly.
    pub fn constant(b: [[f64; 2]; 2], epsilon: f64) -> Result<Self> {
        if b[0][0] != 0.0 || b[1][1] != 0.0 || b[0][1] != -b[1][0] {
            return Err(Error::InvalidInput(format!(
                "field matrix {b:?} is not antisymmetric"
            )));
        }
        Ok(Self {
            kind: FieldKind::Constant { b },
            epsilon,
        })
    }

    pub fn uniform(b12: f64, epsilon: f64) -> Self {
        Self {
            kind: FieldKind::Constant {
                b: [[0.0, b12], [-b12, 0.0]],
            },
            epsilon,
        }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0, 0.0)
    }

    pub fn smooth(field: SmoothField, epsilon: f64) -> Self {
        Self {
            kind: FieldKind::Smooth(field),
            epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// `ε B₁₂(x)`.
    pub fn b12(&self, x: Vec2) -> f64 {
        self.epsilon
            * match self.kind {
                FieldKind::Constant { b } => b[0][1],
                FieldKind::Smooth(f) => f.b12(x),
            }
    }

    /// `ε B₁₂` for a constant field.
    pub fn uniform_strength(&self) -> Option<f64> {
        match self.kind {
            FieldKind::Constant { b } => Some(self.epsilon * b[0][1]),
            FieldKind::Smooth(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Constant { .. })
    }

    pub fn is_zero(&self) -> bool {
        self.uniform_strength() == Some(0.0) || self.epsilon == 0.0
    }
}

/// Gauge functions `χ` added as `A + ∇χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GaugeFunction {
    /// `⟨c, x⟩`: a constant shift of `A`.
    Linear { c: [f64; 2] },
    /// `c11 x₁² + c12 x₁x₂ + c22 x₂²`.
    Quadratic { c11: f64, c12: f64, c22: f64 },
    /// `amplitude · sin⟨k, x⟩`.
    Harmonic { amplitude: f64, k: [f64; 2] },
}

impl GaugeFunction {
    pub fn value(&self, x: Vec2) -> f64 {
        match *self {
            GaugeFunction::Linear { c } => dot(c, x),
            GaugeFunction::Quadratic { c11, c12, c22 } => c11 * x[0] * x[0] + c12 * x[0] * x[1] + c22 * x[1] * x[1],
            GaugeFunction::Harmonic { amplitude, k } => amplitude * dot(k, x).sin(),
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match *self {
            GaugeFunction::Linear { c } => c,
            GaugeFunction::Quadratic { c11, c12, c22 } => {
                [2.0 * c11 * x[0] + c12 * x[1], c12 * x[0] + 2.0 * c22 * x[1]]
            }
            GaugeFunction::Harmonic { amplitude, k } => {
                let c = amplitude * dot(k, x).cos();
                [c * k[0], c * k[1]]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Transversal,
    TransversalPlusGradient(GaugeFunction),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorPotential {
    pub field: MagneticField,
    pub gauge: Gauge,
}

impl VectorPotential {
    pub fn transversal(field: MagneticField) -> Self {
        Self {
            field,
            gauge: Gauge::Transversal,
        }
    }

    pub fn with_gradient(field: MagneticField, chi: GaugeFunction) -> Self {
        Self {
            field,
            gauge: Gauge::TransversalPlusGradient(chi),
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            field: self.field.with_epsilon(epsilon),
            gauge: self.gauge,
        }
    }

    pub fn chi(&self) -> Option<&GaugeFunction> {
        match &self.gauge {
            Gauge::Transversal => None,
            Gauge::TransversalPlusGradient(c) => Some(c),
        }
    }

    pub fn evaluate(&self, x: Vec2) -> Vec2 {
        let a = transversal_gauge(&self.field, x);
        match self.chi() {
            None => a,
            Some(c) => {
                let g = c.gradient(x);
                [a[0] + g[0], a[1] + g[1]]
            }
        }
    }
}

/// Transversal-gauge potential; 16-point Gauss quadrature in `s` for
/// non-constant fields.
pub fn transversal_gauge(field: &MagneticField, x: Vec2) -> Vec2 {
    match field.kind {
        FieldKind::Constant { .. } => {
            let b = field.b12(x);
            [-0.5 * b * x[1], 0.5 * b * x[0]]
        }
        FieldKind::Smooth(_) => {
            let m = gauss().integrate(0.0, 1.0, |s| field.b12([s * x[0], s * x[1]]) * s);
            // A_1 = −x₂ B₁₂ m, A_2 = −x₁ B₂₁ m
            [-x[1] * m, x[0] * m]
        }
    }
}

/// `∂₁A₂ − ∂₂A₁` by central differences.
pub fn numerical_curl(a: &VectorPotential, x: Vec2, h: f64) -> f64 {
    let d1 = (a.evaluate([x[0] + h, x[1]])[1] - a.evaluate([x[0] - h, x[1]])[1]) / (2.0 * h);
    let d2 = (a.evaluate([x[0], x[1] + h])[0] - a.evaluate([x[0], x[1] - h])[0]) / (2.0 * h);
    d1 - d2
}

fn cis(t: f64) -> C64 {
    C64::new(t.cos(), t.sin())
}

/// `∫_{[x,y]} A` by quadrature along the segment.
pub fn segment_integral_quadrature(a: &VectorPotential, x: Vec2, y: Vec2) -> f64 {
    let d = [y[0] - x[0], y[1] - x[1]];
    gauss().integrate(0.0, 1.0, |s| dot(a.evaluate([x[0] + s * d[0], x[1] + s * d[1]]), d))
}

/// `∫_{[x,y]} A`, closed form for constant fields.
pub fn segment_integral(a: &VectorPotential, x: Vec2, y: Vec2) -> f64 {
    match a.field.uniform_strength() {
        Some(b) => {
            let base = 0.5 * b * (x[0] * y[1] - x[1] * y[0]);
            base + a.chi().map_or(0.0, |c| c.value(y) - c.value(x))
        }
        None => segment_integral_quadrature(a, x, y),
    }
}

/// `ω_A(x, y) = exp(−i ∫_{[x,y]} A)`.
pub fn line_phase(a: &VectorPotential, x: Vec2, y: Vec2) -> C64 {
    cis(-segment_integral(a, x, y))
}

/// The triangle `⟨x − y + z, x − y − z, x + y − z⟩` of the magnetic
/// composition formula.
pub fn composition_triangle(x: Vec2, y: Vec2, z: Vec2) -> [Vec2; 3] {
    [
        [x[0] - y[0] + z[0], x[1] - y[1] + z[1]],
        [x[0] - y[0] - z[0], x[1] - y[1] - z[1]],
        [x[0] + y[0] - z[0], x[1] + y[1] - z[1]],
    ]
}

/// Signed flux `∫ B₁₂` through the triangle with vertices `u, v, w` (positive
/// for counter-clockwise order).
pub fn triangle_flux(field: &MagneticField, u: Vec2, v: Vec2, w: Vec2) -> f64 {
    let det = (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0]);
    match field.uniform_strength() {
        Some(b) => 0.5 * b * det,
        None => {
            // p(s, t) = u + s (v − u) + s t (w − v), Jacobian s · det
            let q = gauss();
            det * q.integrate(0.0, 1.0, |s| {
                s * q.integrate(0.0, 1.0, |t| {
                    let p = [
                        u[0] + s * (v[0] - u[0]) + s * t * (w[0] - v[0]),
                        u[1] + s * (v[1] - u[1]) + s * t * (w[1] - v[1]),
                    ];
                    field.b12(p)
                })
            })
        }
    }
}

/// Multiplier `e^{i⟨A(a), x⟩}` of the magnetic translation `T_a f(x) = e^{i⟨A(a),x⟩} f(x − a)`.
pub fn magnetic_translation_phase(a: &VectorPotential, shift: Vec2, x: Vec2) -> Result<C64> {
    if !a.field.is_constant() || a.chi().is_some() {
        return Err(Error::UnsupportedGauge(
            "magnetic translations need a constant field in the transversal gauge".into(),
        ));
    }
    Ok(cis(dot(a.evaluate(shift), x)))
}

/// Uniform position grid centred at the origin: `n` points of spacing `h`
/// per direction, flat index row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxGrid {
    pub dim: usize,
    pub n: usize,
    pub spacing: f64,
}

impl BoxGrid {
    pub fn new(dim: usize, n: usize, spacing: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!("box dimension {dim}")));
        }
        if n < 8 {
            return Err(Error::GridTooSmall(format!("{n} points per direction, need at least 8")));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput(format!("grid spacing {spacing}")));
        }
        Ok(Self { dim, n, spacing })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn axis(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.n as f64 - 1.0)) * self.spacing
    }

    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i, 0]
        } else {
            [i / self.n, i % self.n]
        }
    }

    pub fn point(&self, i: usize) -> Vec2 {
        let m = self.multi_index(i);
        if self.dim == 1 {
            [self.axis(m[0]), 0.0]
        } else {
            [self.axis(m[0]), self.axis(m[1])]
        }
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Discrete Fourier frequencies `2π k/(n h)`, `k = −⌊n/2⌋..`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n as i64;
        (-(n / 2)..n - n / 2)
            .map(|k| 2.0 * PI * k as f64 / (self.n as f64 * self.spacing))
            .collect()
    }

    fn momenta(&self) -> Vec<Vec2> {
        let f = self.frequencies();
        if self.dim == 1 {
            f.iter().map(|&a| [a, 0.0]).collect()
        } else {
            f.iter().flat_map(|&a| f.iter().map(move |&b| [a, b])).collect()
        }
    }
}

/// A symbol to quantize: momentum-only or full phase-space.
#[derive(Clone, Copy)]
pub enum GridSymbol<'a> {
    Momentum(&'a dyn Fn(Vec2) -> f64),
    Full(&'a dyn Fn(Vec2, Vec2) -> f64),
}

#[derive(Debug, Clone)]
pub struct QuantizedOperator {
    pub grid: BoxGrid,
    pub matrix: CMat,
}

/// `M[x, y] = N⁻¹ Σ_η e^{i⟨η, x−y⟩} ω_A(x, y) p((x+y)/2, η)` over the
/// discrete Fourier momenta of the box.
pub fn quantize_on_grid(symbol: GridSymbol<'_>, a: &VectorPotential, grid: &BoxGrid) -> Result<QuantizedOperator> {
    let pts = grid.points();
    let mom = grid.momenta();
    let nn = pts.len();
    let inv = 1.0 / mom.len() as f64;
    let n = grid.n as i64;
    let mut matrix = CMat::zeros(nn, nn);
    match symbol {
        GridSymbol::Momentum(p) => {
            let pv: Vec<f64> = mom.iter().map(|&e| p(e)).collect();
            let side = (2 * n - 1) as usize;
            let offs = |d: i64| (d + n - 1) as usize;
            let span = if grid.dim == 1 { 1 } else { side };
            let mut kernel = vec![C64::new(0.0, 0.0); side * span];
            for d0 in -(n - 1)..n {
                let d1_range = if grid.dim == 1 { 0..1 } else { -(n - 1)..n };
                for d1 in d1_range {
                    let dx = [d0 as f64 * grid.spacing, d1 as f64 * grid.spacing];
                    let mut s = C64::new(0.0, 0.0);
                    for (e, &v) in mom.iter().zip(&pv) {
                        s += cis(dot(*e, dx)) * v;
                    }
                    let col = if grid.dim == 1 { 0 } else { offs(d1) };
                    kernel[offs(d0) * span + col] = s * inv;
                }
            }
            for i in 0..nn {
                let mi = grid.multi_index(i);
                for j in 0..nn {
                    let mj = grid.multi_index(j);
                    let d0 = mi[0] as i64 - mj[0] as i64;
                    let col = if grid.dim == 1 {
                        0
                    } else {
                        offs(mi[1] as i64 - mj[1] as i64)
                    };
                    matrix[(i, j)] = line_phase(a, pts[i], pts[j]) * kernel[offs(d0) * span + col];
                }
            }
        }
        GridSymbol::Full(p) => {
            for i in 0..nn {
                for j in 0..nn {
                    let x = pts[i];
                    let y = pts[j];
                    let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
                    let d = [x[0] - y[0], x[1] - y[1]];
                    let mut s = C64::new(0.0, 0.0);
                    for e in &mom {
                        s += cis(dot(*e, d)) * p(mid, *e);
                    }
                    matrix[(i, j)] = line_phase(a, x, y) * s * inv;
                }
            }
        }
    }
    Ok(QuantizedOperator { grid: *grid, matrix })
}

impl QuantizedOperator {
    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.matrix)
    }
}

/// Diagonal `e^{iχ(x)}` over the grid points.
pub fn gauge_phases(chi: &GaugeFunction, grid: &BoxGrid) -> Vec<C64> {
    grid.points().iter().map(|&x| cis(chi.value(x))).collect()
}

/// Hermitian square root through the spectral decomposition.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    let e = linalg::eigh(m)?;
    if e.values[0] < 0.0 {
        return Err(Error::Indefinite { min_eig: e.values[0] });
    }
    let n = m.nrows();
    let u = &e.vectors;
    let scaled = CMat::from_fn(n, n, |i, j| u[(i, j)] * e.values[j].sqrt());
    Ok(&scaled * linalg::adjoint(u))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SqrtDeviation {
    pub epsilon: f64,
    /// `‖(M_NR)^{1/2} − M_R‖₂`.
    pub deviation: f64,
    /// Smallest eigenvalue of `M_NR`.
    pub min_eig: f64,
}

/// Compares the square root of the quantized `1 + |η|²` with the quantized
/// `⟨η⟩` for the potential `A` scaled to each `ε`.
pub fn relativistic_sqrt_compare(a: &VectorPotential, grid: &BoxGrid, epsilons: &[f64]) -> Result<Vec<SqrtDeviation>> {
    let nr = |e: Vec2| 1.0 + e[0] * e[0] + e[1] * e[1];
    let rel = |e: Vec2| (1.0 + e[0] * e[0] + e[1] * e[1]).sqrt();
    epsilons
        .iter()
        .map(|&eps| {
            let ae = a.with_epsilon(eps);
            let m_nr = quantize_on_grid(GridSymbol::Momentum(&nr), &ae, grid)?;
            let m_r = quantize_on_grid(GridSymbol::Momentum(&rel), &ae, grid)?;
            let min_eig = linalg::eigvalsh(&m_nr.matrix)?[0];
            if min_eig <= 0.0 {
                return Err(Error::Indefinite { min_eig });
            }
            let s = hermitian_sqrt(&m_nr.matrix)?;
            let deviation = linalg::hermitian_norm2(&(&s - &m_r.matrix))?;
            Ok(SqrtDeviation {
                epsilon: eps,
                deviation,
                min_eig,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_potential_example() {
        let f = MagneticField::uniform(2.0, 1.0);
        let a = transversal_gauge(&f, [1.0, 0.0]);
        assert_eq!(a, [0.0, 1.0]);
    }

    #[test]
    fn phase_closed_form_example() {
        let a = VectorPotential::transversal(MagneticField::uniform(PI, 1.0));
        let w = line_phase(&a, [1.0, 0.0], [0.0, 1.0]);
        assert!((w - C64::new(0.0, -1.0)).norm() < 1e-15);
        let q = cis(-segment_integral_quadrature(&a, [1.0, 0.0], [0.0, 1.0]));
        assert!((w - q).norm() < 1e-12);
    }

    #[test]
    fn smooth_gauge_matches_antiderivative() {
        let b = 0.7;
        let f = MagneticField::smooth(SmoothField::CosineX1 { amplitude: b }, 1.0);
        let x: [f64; 2] = [1.3, -0.4];
        // ∫₀¹ s b cos(s x₁) ds = b (cos x₁ + x₁ sin x₁ − 1)/x₁²
        let m = b * (x[0].cos() + x[0] * x[0].sin() - 1.0) / (x[0] * x[0]);
        let a = transversal_gauge(&f, x);
        assert!((a[0] + x[1] * m).abs() < 1e-10);
        assert!((a[1] - x[0] * m).abs() < 1e-10);
    }

    #[test]
    fn unit_right_triangle() {
        let f = MagneticField::uniform(1.0, 1.0);
        assert!((triangle_flux(&f, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]) - 0.5).abs() < 1e-15);
        assert_eq!(triangle_flux(&f, [0.0, 0.0], [1.0, 1.0], [2.0, 2.0]), 0.0);
    }

    #[test]
    fn translation_example() {
        let b = 0.9;
        let a = VectorPotential::transversal(MagneticField::uniform(b, 1.0));
        let p = magnetic_translation_phase(&a, [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!((p - cis(b / 2.0)).norm() < 1e-15);
        let s = VectorPotential::transversal(MagneticField::smooth(SmoothField::CosineX1 { amplitude: 1.0 }, 1.0));
        assert!(matches!(
            magnetic_translation_phase(&s, [1.0, 0.0], [0.0, 0.0]),
            Err(Error::UnsupportedGauge(_))
        ));
    }
}
