//! Γ-periodic symbols `p₀(y, η)` stored through the Fourier data of their
//! coefficient functions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{dot, norm, Coord, DualShell, Lattice, Vec2};
use crate::linalg::{C64, ZERO};

/// Tolerance for the hermitian symmetry check `V̂(−γ*) = conj V̂(γ*)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Real Γ-periodic function given by finitely many Fourier coefficients,
/// `V(y) = Σ V̂(γ*) e^{i⟨γ*, y⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    lattice: Lattice,
    coeffs: BTreeMap<Coord, C64>,
}

impl PeriodicPotential {
    pub fn new(lattice: &Lattice, coeffs: BTreeMap<Coord, C64>) -> Result<Self> {
        let scale = coeffs.values().fold(1.0f64, |a, c| a.max(c.norm()));
        for (k, c) in &coeffs {
            if lattice.dim() == 1 && k[1] != 0 {
                return Err(Error::InvalidInput(format!(
                    "coefficient index {k:?} has a second component in one dimension"
                )));
            }
            let partner = coeffs.get(&[-k[0], -k[1]]).copied().unwrap_or(ZERO);
            let defect = (partner - c.conj()).norm();
            if defect > HERMITIAN_TOL * scale {
                return Err(Error::NonHermitianPotential { index: *k, defect });
            }
        }
        let coeffs = coeffs.into_iter().filter(|(_, c)| *c != ZERO).collect();
        Ok(Self {
            lattice: *lattice,
            coeffs,
        })
    }

    pub fn zero(lattice: &Lattice) -> Self {
        Self {
            lattice: *lattice,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(lattice: &Lattice, c: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert([0, 0], C64::new(c, 0.0));
        Self::new(lattice, m).expect("constant is real")
    }

    /// `2a cos⟨e*₁, y⟩`, i.e. `V̂(±e*₁) = a`.
    pub fn cosine(lattice: &Lattice, amplitude: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert([1, 0], C64::new(amplitude, 0.0));
        m.insert([-1, 0], C64::new(amplitude, 0.0));
        Self::new(lattice, m).expect("cosine is real")
    }

    /// `2a (cos⟨e*₁, y⟩ + cos⟨e*₂, y⟩)`.
    pub fn separable_cosine_2d(lattice: &Lattice, amplitude: f64) -> Result<Self> {
        if lattice.dim() != 2 {
            return Err(Error::InvalidInput(
                "separable_cosine_2d requires a two-dimensional lattice".into(),
            ));
        }
        let mut m = BTreeMap::new();
        for k in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            m.insert(k, C64::new(amplitude, 0.0));
        }
        Self::new(lattice, m)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &BTreeMap<Coord, C64> {
        &self.coeffs
    }

    pub fn coeff(&self, k: Coord) -> C64 {
        self.coeffs.get(&k).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Whether all coefficients are real, i.e. `V` is even.
    pub fn is_even(&self) -> bool {
        self.coeffs.values().all(|c| c.im == 0.0)
    }

    /// Largest `|γ*|` over the support.
    pub fn support_radius(&self) -> f64 {
        self.coeffs
            .keys()
            .map(|k| norm(self.lattice.dual_point(*k)))
            .fold(0.0, f64::max)
    }

    pub fn evaluate(&self, y: Vec2) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let ph = dot(self.lattice.dual_point(*k), y);
                (c * C64::new(ph.cos(), ph.sin())).re
            })
            .sum()
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &PeriodicPotential, s: f64) -> PeriodicPotential {
        let mut m = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *m.entry(*k).or_insert(ZERO) += c * s;
        }
        let coeffs = m.into_iter().filter(|(_, c)| *c != ZERO).collect();
        PeriodicPotential {
            lattice: self.lattice,
            coeffs,
        }
    }
}

/// One Weyl-ordered term `a_α(y) η^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub alpha: [u32; 2],
    pub coeff: PeriodicPotential,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    /// `|η|² + V(y)`
    Nonrelativistic,
    /// `⟨η⟩ + V(y)` with `⟨η⟩ = (1 + |η|²)^{1/2}`
    Relativistic,
    /// `Σ a_α(y) η^α + V(y)`
    Polynomial { terms: Vec<PolyTerm> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSymbol {
    kind: SymbolKind,
    potential: PeriodicPotential,
    order: u32,
}

impl PeriodicSymbol {
    pub fn nonrelativistic(potential: PeriodicPotential) -> Self {
        Self {
            kind: SymbolKind::Nonrelativistic,
            potential,
            order: 2,
        }
    }

    pub fn relativistic(potential: PeriodicPotential) -> Self {
        Self {
            kind: SymbolKind::Relativistic,
            potential,
            order: 1,
        }
    }

    /// Polynomial symbol of declared even order `m`; the potential is
    /// added to the `α = 0` term.
    pub fn polynomial(terms: Vec<PolyTerm>, order: u32, potential: PeriodicPotential) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "polynomial order must be even and positive, got {order}"
            )));
        }
        let d = potential.lattice().dim();
        for t in &terms {
            if t.alpha[0] + t.alpha[1] > order {
                return Err(Error::InvalidInput(format!(
                    "term {:?} exceeds declared order {order}",
                    t.alpha
                )));
            }
            if d == 1 && t.alpha[1] != 0 {
                return Err(Error::InvalidInput(format!(
                    "term {:?} uses a second momentum component in one dimension",
                    t.alpha
                )));
            }
        }
        Ok(Self {
            kind: SymbolKind::Polynomial { terms },
            potential,
            order,
        })
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.potential
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn lattice(&self) -> &Lattice {
        self.potential.lattice()
    }

    /// Same kinetic part with potential `V + ε φ`.
    pub fn perturbed(&self, phi: &PeriodicPotential, eps: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            potential: self.potential.add_scaled(phi, eps),
            order: self.order,
        }
    }

    /// Whether `p₀(y, −η) = p₀(y, η)` holds structurally.
    pub fn is_even_in_momentum(&self) -> bool {
        match &self.kind {
            SymbolKind::Nonrelativistic | SymbolKind::Relativistic => true,
            SymbolKind::Polynomial { terms } => terms
                .iter()
                .all(|t| (t.alpha[0] + t.alpha[1]) % 2 == 0),
        }
    }

    /// Whether the fiber matrices are real symmetric and the conjugation
    /// construction of the band section applies: even in `η` and even `V`.
    pub fn has_conjugation_symmetry(&self) -> bool {
        let coeffs_even = match &self.kind {
            SymbolKind::Polynomial { terms } => terms.iter().all(|t| t.coeff.is_even()),
            _ => true,
        };
        self.is_even_in_momentum() && self.potential.is_even() && coeffs_even
    }

    /// Kinetic part of the nonrelativistic and relativistic kinds.
    pub fn kinetic(&self, eta: Vec2) -> f64 {
        let e2 = dot(eta, eta);
        match self.kind {
            SymbolKind::Nonrelativistic => e2,
            SymbolKind::Relativistic => (1.0 + e2).sqrt(),
            SymbolKind::Polynomial { .. } => 0.0,
        }
    }
}

#[inline]
pub fn monomial(eta: Vec2, alpha: [u32; 2]) -> f64 {
    eta[0].powi(alpha[0] as i32) * eta[1].powi(alpha[1] as i32)
}

/// `p₀(y, η)`.
pub fn evaluate_symbol(symbol: &PeriodicSymbol, y: Vec2, eta: Vec2) -> f64 {
    let v = symbol.potential.evaluate(y);
    match &symbol.kind {
        SymbolKind::Nonrelativistic | SymbolKind::Relativistic => symbol.kinetic(eta) + v,
        SymbolKind::Polynomial { terms } => {
            v + terms
                .iter()
                .map(|t| t.coeff.evaluate(y) * monomial(eta, t.alpha))
                .sum::<f64>()
        }
    }
}

/// Normalized discrete Fourier coefficients `V̂(γ*) = n^{-d} Σ V(y_i) e^{−i⟨γ*, y_i⟩}`
/// of samples on the grid `y_i = Σ (i_j/n) e_j`, restricted to the shell.
///
/// `samples` is row-major with the last axis fastest and `n` points per axis.
pub fn potential_fourier_coeffs(
    samples: &[f64],
    n: usize,
    lattice: &Lattice,
    shell: &DualShell,
) -> Result<PeriodicPotential> {
    let d = lattice.dim();
    if samples.len() != n.pow(d as u32) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} samples for {n} points per direction, got {}",
            n.pow(d as u32),
            samples.len()
        )));
    }
    let mc = shell.max_coeff();
    for j in 0..d {
        let need = 2 * mc[j] as usize + 1;
        if n < need {
            return Err(Error::Aliasing(format!(
                "{n} samples per direction cannot resolve shell coefficient {} (need {need})",
                mc[j]
            )));
        }
    }
    let total = samples.len() as f64;
    let mut coeffs = BTreeMap::new();
    for &k in shell.indices() {
        let mut acc = ZERO;
        for (i, &s) in samples.iter().enumerate() {
            let (i0, i1) = if d == 1 { (i, 0) } else { (i / n, i % n) };
            // ⟨γ*, y⟩ = 2π Σ k_j t_j in lattice coordinates
            let ph = -2.0 * PI * (k[0] as f64 * i0 as f64 + k[1] as f64 * i1 as f64) / n as f64;
            acc += C64::new(ph.cos(), ph.sin()) * s;
        }
        coeffs.insert(k, acc / total);
    }
    // enforce exact hermitian symmetry (real samples)
    let keys: Vec<Coord> = coeffs.keys().copied().collect();
    let mut sym = BTreeMap::new();
    for k in keys {
        let a = coeffs[&k];
        let b = coeffs.get(&[-k[0], -k[1]]).copied().unwrap_or(a.conj());
        sym.insert(k, (a + b.conj()) * 0.5);
    }
    PeriodicPotential::new(lattice, sym)
}

/// Sample points `y_i = Σ (i_j/n) e_j` matching [`potential_fourier_coeffs`].
pub fn cell_sample_points(lattice: &Lattice, n: usize) -> Vec<Vec2> {
    let d = lattice.dim();
    (0..n.pow(d as u32))
        .map(|i| {
            let t = if d == 1 {
                [i as f64 / n as f64, 0.0]
            } else {
                [(i / n) as f64 / n as f64, (i % n) as f64 / n as f64]
            };
            lattice.position(t)
        })
        .collect()
}

/// Ellipticity sample: minimum of `p₀(y, η)/|η|^m` over a grid of `y ∈ E`
/// and `|η| ≥ R` (radii `R·2^{k/4}` up to `R·2^{12}`).
pub fn symbol_ellipticity_check(symbol: &PeriodicSymbol, radius: f64, samples: usize) -> (bool, f64) {
    let lattice = symbol.lattice();
    let s = samples.max(2);
    let ys = cell_sample_points(lattice, s);
    let dirs: Vec<Vec2> = if lattice.dim() == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..2 * s)
            .map(|k| {
                let th = PI * k as f64 / s as f64;
                [th.cos(), th.sin()]
            })
            .collect()
    };
    let m = symbol.order() as i32;
    let mut c = f64::INFINITY;
    for k in 0..=48 {
        let r = radius * 2f64.powf(k as f64 / 4.0);
        for dvec in &dirs {
            let eta = [r * dvec[0], r * dvec[1]];
            for y in &ys {
                c = c.min(evaluate_symbol(symbol, *y, eta) / r.powi(m));
            }
        }
    }
    (c > 0.0, c)
}
