//! Run configuration: TOML schema, defaults and validation.

use std::collections::BTreeMap;
use std::path::Path;

use peierls::bloch_solver::{band_intervals, compute_bands, BandIntervals, BandStructure, DEFAULT_GAP_TOL};
use peierls::lattice::{BZGrid, DualShell, Lattice, Vec2};
use peierls::linalg::C64;
use peierls::magnetic::{GaugeFunction, MagneticField, VectorPotential};
use peierls::spectra::DEFAULT_MERGE_TOL;
use peierls::symbols::{symbol_ellipticity_check, PeriodicPotential, PeriodicSymbol};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub grushin: GrushinConfig,
    #[serde(default)]
    pub effective: EffectiveConfig,
    #[serde(default)]
    pub direct: DirectConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dim: usize,
    /// Basis vectors as rows.
    pub basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    /// Dual-lattice coordinates, one per dimension.
    pub index: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `cosine`, `separable_cosine_2d` or `zero`; exclusive with `coefficients`.
    pub name: Option<String>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub coefficients: Vec<CoefficientEntry>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            name: None,
            amplitude: 1.0,
            coefficients: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKindConfig {
    #[default]
    Nonrelativistic,
    Relativistic,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    #[serde(default)]
    pub kind: SymbolKindConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeConfig {
    #[default]
    Transversal,
    TransversalPlusGradient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(rename = "B12", default)]
    pub b12: f64,
    #[serde(rename = "B21")]
    pub b21: Option<f64>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub gauge: GaugeConfig,
    pub chi: Option<GaugeFunction>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            b12: 0.0,
            b21: None,
            epsilon: 1.0,
            gauge: GaugeConfig::Transversal,
            chi: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub cutoff: f64,
    pub resolution: usize,
    pub n_bands: usize,
    pub gap_tol: f64,
    /// Hopping truncation radius.
    pub radius: usize,
    pub merge_tol: f64,
    /// One-based band number.
    pub band: usize,
    pub window: Option<[f64; 2]>,
    pub lambda_points: usize,
    pub ellipticity_radius: f64,
    pub ellipticity_samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            cutoff: 8.0,
            resolution: 16,
            n_bands: 3,
            gap_tol: DEFAULT_GAP_TOL,
            radius: 4,
            merge_tol: DEFAULT_MERGE_TOL,
            band: 1,
            window: None,
            lambda_points: 101,
            ellipticity_radius: 50.0,
            ellipticity_samples: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    #[default]
    Section,
    Bump,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrushinConfig {
    pub family: FamilyConfig,
    /// Spectral cut of the bump family; defaults to the window top.
    pub lambda_max: Option<f64>,
    pub reference_per_dir: usize,
    pub lambda_points: usize,
}

impl Default for GrushinConfig {
    fn default() -> Self {
        Self {
            family: FamilyConfig::Section,
            lambda_max: None,
            reference_per_dir: 2,
            lambda_points: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveModeConfig {
    #[default]
    Bloch,
    Box,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectiveConfig {
    pub mode: EffectiveModeConfig,
    /// `"p/q"`; otherwise derived from the field.
    pub flux: Option<String>,
    /// Box half-width in lattice sites.
    pub box_size: usize,
    /// `θ` samples per direction; defaults to `2q`.
    pub n_theta: Option<usize>,
    pub lipschitz: f64,
    pub tol: f64,
    pub edge_res: f64,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        Self {
            mode: EffectiveModeConfig::Bloch,
            flux: None,
            box_size: 8,
            n_theta: None,
            lipschitz: 1.5,
            tol: 1e-13,
            edge_res: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectModeConfig {
    #[default]
    ZeroField,
    MagneticBloch,
    Box,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectConfig {
    pub mode: DirectModeConfig,
    pub points_per_cell: usize,
    pub half_width: f64,
    pub n_k: usize,
    pub n_theta: usize,
    /// Box side in lattice periods.
    pub cells: usize,
    pub box_points_per_cell: usize,
    /// Eigenvalues kept per sample in box mode.
    pub n_eigenvalues: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            mode: DirectModeConfig::ZeroField,
            points_per_cell: 12,
            half_width: 6.0,
            n_k: 2,
            n_theta: 2,
            cells: 2,
            box_points_per_cell: 16,
            n_eigenvalues: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub epsilons: Vec<f64>,
    pub max_denominator: i64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.08, 0.04, 0.02],
            max_denominator: 8,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Parsed and validated inputs shared by every command.
pub struct Setup {
    pub config: RunConfig,
    pub lattice: Lattice,
    pub symbol: PeriodicSymbol,
    pub grid: BZGrid,
    pub shell: DualShell,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn lattice_from(c: &LatticeConfig) -> Result<Lattice, CliError> {
    if !(1..=2).contains(&c.dim) {
        return Err(CliError::Config(format!("lattice.dim = {} must be 1 or 2", c.dim)));
    }
    if c.basis.len() != c.dim || c.basis.iter().any(|r| r.len() != c.dim) {
        return Err(CliError::Config(format!(
            "lattice.basis must hold {0} rows of length {0}",
            c.dim
        )));
    }
    let basis: Vec<Vec2> = c
        .basis
        .iter()
        .map(|r| if c.dim == 1 { [r[0], 0.0] } else { [r[0], r[1]] })
        .collect();
    Lattice::new(&basis).map_err(|e| CliError::Config(format!("lattice: {e}")))
}

fn potential_from(c: &PotentialConfig, l: &Lattice) -> Result<PeriodicPotential, CliError> {
    let h6 = |m: String| CliError::Config(format!("H.6 violated (real Γ-periodic smooth potential): {m}"));
    if !c.amplitude.is_finite() {
        return Err(h6("amplitude is not finite".into()));
    }
    match (&c.name, c.coefficients.is_empty()) {
        (Some(_), false) => Err(CliError::Config(
            "potential: give either name or coefficients, not both".into(),
        )),
        (Some(name), true) => match name.as_str() {
            "zero" => Ok(PeriodicPotential::zero(l)),
            "cosine" => Ok(PeriodicPotential::cosine(l, c.amplitude)),
            "separable_cosine_2d" => PeriodicPotential::separable_cosine_2d(l, c.amplitude).map_err(|e| h6(e.to_string())),
            other => Err(CliError::Config(format!("potential: unknown name {other:?}"))),
        },
        (None, true) => Ok(PeriodicPotential::zero(l)),
        (None, false) => {
            let mut coeffs = BTreeMap::new();
            for e in &c.coefficients {
                if e.index.len() != l.dim() {
                    return Err(h6(format!("coefficient index {:?} does not match dimension {}", e.index, l.dim())));
                }
                if !(e.re.is_finite() && e.im.is_finite()) {
                    return Err(h6(format!("coefficient {:?} is not finite", e.index)));
                }
                let k = [e.index[0], if l.dim() == 2 { e.index[1] } else { 0 }];
                if coeffs.insert(k, C64::new(e.re, e.im)).is_some() {
                    return Err(h6(format!("coefficient {:?} given twice", e.index)));
                }
            }
            PeriodicPotential::new(l, coeffs).map_err(|e| h6(e.to_string()))
        }
    }
}

impl RunConfig {
    /// Field checks: antisymmetry and a gauge consistent with the dimension.
    pub fn vector_potential(&self, dim: usize) -> Result<VectorPotential, CliError> {
        let f = &self.field;
        if !(f.b12.is_finite() && f.epsilon.is_finite()) {
            return Err(CliError::Config("H.1 violated: field entries must be finite".into()));
        }
        if let Some(b21) = f.b21 {
            if b21 != -f.b12 {
                return Err(CliError::Config(format!(
                    "H.1 violated: B12 = {} and B21 = {b21} are not antisymmetric",
                    f.b12
                )));
            }
        }
        if dim == 1 && f.b12 != 0.0 {
            return Err(CliError::Config(
                "H.1 violated: a one-dimensional lattice carries no magnetic field".into(),
            ));
        }
        let field = MagneticField::uniform(f.b12, f.epsilon);
        match (f.gauge, f.chi) {
            (GaugeConfig::Transversal, None) => Ok(VectorPotential::transversal(field)),
            (GaugeConfig::TransversalPlusGradient, Some(chi)) => Ok(VectorPotential::with_gradient(field, chi)),
            (GaugeConfig::Transversal, Some(_)) => Err(CliError::Config(
                "field.chi requires gauge = \"transversal_plus_gradient\"".into(),
            )),
            (GaugeConfig::TransversalPlusGradient, None) => {
                Err(CliError::Config("gauge \"transversal_plus_gradient\" requires field.chi".into()))
            }
        }
    }

    /// Window from the configuration, or a neighbourhood of `J_band` reaching
    /// a quarter of the way to the neighbouring bands.
    pub fn window(&self, iv: &BandIntervals) -> (f64, f64) {
        if let Some([lo, hi]) = self.numerics.window {
            return (lo, hi);
        }
        let k = self.numerics.band - 1;
        let (lo, hi) = iv.intervals[k];
        let below = if k > 0 { lo - iv.intervals[k - 1].1 } else { f64::INFINITY };
        let above = iv.intervals.get(k + 1).map_or(f64::INFINITY, |n| n.0 - hi);
        let mut d = 0.25 * below.min(above);
        if !d.is_finite() || d <= 0.0 {
            d = 0.1 * (hi - lo).max(1e-3);
        }
        (lo - d, hi + d)
    }
}

pub fn setup_from(config: RunConfig) -> Result<Setup, CliError> {
    let lattice = lattice_from(&config.lattice)?;
    let potential = potential_from(&config.potential, &lattice)?;
    config.vector_potential(lattice.dim())?;
    let n = &config.numerics;
    if n.band == 0 {
        return Err(CliError::Config("numerics.band is one-based".into()));
    }
    if n.n_bands == 0 || n.resolution == 0 || n.lambda_points == 0 {
        return Err(CliError::Config("numerics.n_bands, resolution and lambda_points must be positive".into()));
    }
    if let Some([lo, hi]) = n.window {
        if !(lo < hi) {
            return Err(CliError::Config(format!("numerics.window [{lo}, {hi}] is empty")));
        }
    }
    if !(n.gap_tol > 0.0 && n.merge_tol > 0.0 && n.cutoff > 0.0) {
        return Err(CliError::Config("numerics.gap_tol, merge_tol and cutoff must be positive".into()));
    }
    let symbol = match config.symbol.kind {
        SymbolKindConfig::Nonrelativistic => PeriodicSymbol::nonrelativistic(potential),
        SymbolKindConfig::Relativistic => PeriodicSymbol::relativistic(potential),
    };
    let (elliptic, c) = symbol_ellipticity_check(&symbol, n.ellipticity_radius, n.ellipticity_samples);
    if !elliptic {
        return Err(CliError::Config(format!(
            "H.5 violated: ellipticity sample check failed (constant {c:.3e})"
        )));
    }
    let grid = BZGrid::new(&lattice, n.resolution).map_err(|e| CliError::Config(format!("numerics.resolution: {e}")))?;
    let shell = DualShell::new(&lattice, n.cutoff).map_err(|e| CliError::Config(format!("numerics.cutoff: {e}")))?;
    Ok(Setup {
        config,
        lattice,
        symbol,
        grid,
        shell,
    })
}

impl Setup {
    /// Enough bands to certify the selected one: its upper neighbour is needed.
    pub fn n_bands(&self) -> usize {
        self.config.numerics.n_bands.max(self.config.numerics.band + 1)
    }

    pub fn bands(&self, vectors: bool) -> Result<BandStructure, CliError> {
        compute_bands(&self.symbol, &self.grid, &self.shell, self.n_bands(), vectors).map_err(|e| CliError::numeric("bloch_solver", e))
    }

    /// H.7 for the selected band; returns its zero-based index.
    pub fn require_simple(&self, iv: &BandIntervals) -> Result<usize, CliError> {
        let k = self.config.numerics.band - 1;
        if !iv.simple_flags[k] {
            return Err(CliError::Config(format!(
                "H.7 violated: band {} is not simple at gap_tol {:e} (interval [{:.6}, {:.6}])",
                k + 1,
                iv.gap_tol,
                iv.intervals[k].0,
                iv.intervals[k].1
            )));
        }
        Ok(k)
    }

    pub fn intervals(&self, bands: &BandStructure) -> BandIntervals {
        band_intervals(bands, self.config.numerics.gap_tol)
    }
}

/// `"p/q"` with `q > 0`.
pub fn parse_flux(s: &str) -> Result<(i64, i64), CliError> {
    let bad = || CliError::Config(format!("flux {s:?} is not of the form p/q with q > 0"));
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    let p: i64 = p.trim().parse().map_err(|_| bad())?;
    let q: i64 = q.trim().parse().map_err(|_| bad())?;
    if q <= 0 {
        return Err(bad());
    }
    Ok((p, q))
}

/// Best approximation `p/q` of `x` with `1 ≤ q ≤ max_q`; ties go to the smaller `q`.
pub fn rational_approx(x: f64, max_q: i64) -> (i64, i64) {
    let mut best = (x.round() as i64, 1);
    let mut err = (x - best.0 as f64).abs();
    for q in 2..=max_q.max(1) {
        let p = (x * q as f64).round() as i64;
        let e = (x - p as f64 / q as f64).abs();
        if e < err - 1e-15 {
            best = (p, q);
            err = e;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_strings() {
        assert_eq!(parse_flux("2/5").unwrap(), (2, 5));
        assert_eq!(parse_flux(" -1 / 3 ").unwrap(), (-1, 3));
        for bad in ["1", "1/0", "1/-2", "a/b", "0.5/2"] {
            assert!(parse_flux(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rational_approximation_prefers_small_denominators() {
        assert_eq!(rational_approx(0.5, 8), (1, 2));
        assert_eq!(rational_approx(0.08, 8), (1, 8));
        assert_eq!(rational_approx(0.16, 8), (1, 6));
        assert_eq!(rational_approx(1.0 / 3.0, 8), (1, 3));
        assert_eq!(rational_approx(-0.25, 8), (-1, 4));
        assert_eq!(rational_approx(0.0, 8), (0, 1));
    }

    #[test]
    fn default_window_stays_between_neighbours() {
        let cfg: RunConfig = toml::from_str("[lattice]\ndim = 1\nbasis = [[6.283185307179586]]\n").unwrap();
        let iv = BandIntervals {
            intervals: vec![(-1.0, -0.9), (0.5, 1.0), (2.0, 3.0)],
            simple_flags: vec![true, true, true],
            gap_tol: 1e-6,
        };
        let w = cfg.window(&iv);
        assert!((w.0 - (-1.0 - 0.35)).abs() < 1e-12 && (w.1 - (-0.9 + 0.35)).abs() < 1e-12, "{w:?}");
    }
}
