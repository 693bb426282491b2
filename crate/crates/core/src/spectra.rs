//! Spectra as closed subsets of a window: merged intervals, gaps, Hausdorff
//! distance, subband groups and power-law fits in `ε`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default merge tolerance for spectral sets.
pub const DEFAULT_MERGE_TOL: f64 = 1e-4;

/// A closed subset of the window `[lo, hi]`, stored as sorted disjoint intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSet {
    /// Sorted sample points inside the window.
    pub points: Vec<f64>,
    pub window: (f64, f64),
    /// Maximal intervals after merging pieces closer than `merge_tol`.
    pub merged_intervals: Vec<(f64, f64)>,
    pub merge_tol: f64,
}

fn merge(mut iv: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a - last.1 <= tol => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

impl SpectrumSet {
    /// Eigenvalue cloud restricted to the window.
    pub fn from_points(points: &[f64], window: (f64, f64), merge_tol: f64) -> Self {
        let mut p: Vec<f64> = points
            .iter()
            .copied()
            .filter(|x| *x >= window.0 && *x <= window.1)
            .collect();
        p.sort_by(|a, b| a.total_cmp(b));
        let merged_intervals = merge(p.iter().map(|&x| (x, x)).collect(), merge_tol);
        Self {
            points: p,
            window,
            merged_intervals,
            merge_tol,
        }
    }

    /// Union of closed intervals (such as band ranges) intersected with the window.
    pub fn from_intervals(intervals: &[(f64, f64)], window: (f64, f64), merge_tol: f64) -> Self {
        let clipped: Vec<(f64, f64)> = intervals
            .iter()
            .filter(|(a, b)| *b >= window.0 && *a <= window.1)
            .map(|&(a, b)| (a.max(window.0), b.min(window.1)))
            .collect();
        let mut points: Vec<f64> = clipped.iter().flat_map(|&(a, b)| [a, b]).collect();
        points.sort_by(|a, b| a.total_cmp(b));
        points.dedup();
        Self {
            points,
            window,
            merged_intervals: merge(clipped, merge_tol),
            merge_tol,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.merged_intervals.is_empty()
    }

    pub fn window_width(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// `dist(x, S)`; infinite for the empty set.
    pub fn distance(&self, x: f64) -> f64 {
        self.merged_intervals
            .iter()
            .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.distance(x) == 0.0
    }
}

/// `sup_{x ∈ A} dist(x, B)` for nonempty interval unions.
fn directed(a: &SpectrumSet, b: &SpectrumSet) -> f64 {
    let mut cands = Vec::new();
    for &(lo, hi) in &a.merged_intervals {
        cands.push(lo);
        cands.push(hi);
        for w in b.merged_intervals.windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            cands.push(mid.clamp(lo, hi));
        }
        if let (Some(f), Some(l)) = (b.merged_intervals.first(), b.merged_intervals.last()) {
            cands.push(f.0.clamp(lo, hi));
            cands.push(l.1.clamp(lo, hi));
        }
    }
    cands.into_iter().map(|x| b.distance(x)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HausdorffDistance {
    pub value: f64,
    /// Set when exactly one side is empty; `value` is then the window width.
    pub flagged: bool,
}

pub fn hausdorff_distance(a: &SpectrumSet, b: &SpectrumSet) -> Result<HausdorffDistance> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Err(Error::UndefinedDistance),
        (true, false) | (false, true) => Ok(HausdorffDistance {
            value: a.window_width().max(b.window_width()),
            flagged: true,
        }),
        (false, false) => Ok(HausdorffDistance {
            value: directed(a, b).max(directed(b, a)),
            flagged: false,
        }),
    }
}

/// Open complement intervals inside the window, each wider than `merge_tol`.
pub fn detect_gaps(s: &SpectrumSet) -> Vec<(f64, f64)> {
    let mut gaps = Vec::new();
    let mut cursor = s.window.0;
    for &(a, b) in &s.merged_intervals {
        if a - cursor > s.merge_tol {
            gaps.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if s.window.1 - cursor > s.merge_tol {
        gaps.push((cursor, s.window.1));
    }
    gaps
}

/// Groups of per-band ranges: two ranges join only when they overlap by more
/// than `merge_tol`, so bands that merely touch remain separate groups.
pub fn subband_groups(ranges: &[(f64, f64)], merge_tol: f64) -> Vec<(f64, f64)> {
    let mut iv = ranges.to_vec();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if last.1 - a > merge_tol => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFit {
    pub power: f64,
    /// `C` in `d ≈ C ε^power`, least squares through the origin.
    pub coefficient: f64,
    /// `max d/ε^power`.
    pub max_ratio: f64,
    /// `‖d − C ε^power‖ / ‖d‖`.
    pub relative_residual: f64,
}

/// Least-squares fit `d ≈ C ε^power` over `(ε, d)` pairs.
pub fn power_fit(pairs: &[(f64, f64)], power: f64) -> Result<PowerFit> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints(format!("{} points, need at least 3", pairs.len())));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0.powf(power)).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(pairs).map(|(v, p)| v * p.1).sum();
    let c = sxy / sxx;
    let max_ratio = x
        .iter()
        .zip(pairs)
        .map(|(v, p)| p.1 / v)
        .fold(f64::NEG_INFINITY, f64::max);
    let res: f64 = x.iter().zip(pairs).map(|(v, p)| (p.1 - c * v).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    Ok(PowerFit {
        power,
        coefficient: c,
        max_ratio,
        relative_residual: if norm == 0.0 { 0.0 } else { res / norm },
    })
}

/// Linear fit through the origin: slope and `max d/ε`.
pub fn lipschitz_fit(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    power_fit(pairs, 1.0)
}

/// Distances between two spectral families over a list of `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct HausdorffReport {
    /// `(ε, d_H, flagged)`.
    pub pairs: Vec<(f64, f64, bool)>,
    pub fitted_slope: f64,
    pub residual: f64,
    pub merge_tol: f64,
}

impl HausdorffReport {
    /// Builds the report; flagged rows are excluded from the fit.
    pub fn new(pairs: Vec<(f64, f64, bool)>, merge_tol: f64) -> Result<Self> {
        let fit_pairs: Vec<(f64, f64)> = pairs.iter().filter(|p| !p.2).map(|p| (p.0, p.1)).collect();
        let fit = lipschitz_fit(&fit_pairs)?;
        Ok(Self {
            pairs,
            fitted_slope: fit.coefficient,
            residual: fit.relative_residual,
            merge_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(v: &[(f64, f64)]) -> SpectrumSet {
        SpectrumSet::from_intervals(v, (-10.0, 10.0), 1e-9)
    }

    #[test]
    fn hausdorff_examples() {
        let d = hausdorff_distance(&iv(&[(0.0, 1.0)]), &iv(&[(0.5, 1.5)])).unwrap();
        assert!((d.value - 0.5).abs() < 1e-15 && !d.flagged);
        assert_eq!(hausdorff_distance(&iv(&[(0.0, 1.0)]), &iv(&[(0.0, 1.0)])).unwrap().value, 0.0);
        let a = SpectrumSet::from_points(&[0.0], (-1.0, 1.0), 1e-9);
        let b = SpectrumSet::from_points(&[0.0, 0.3], (-1.0, 1.0), 1e-9);
        assert!((hausdorff_distance(&a, &b).unwrap().value - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_sets() {
        let e = SpectrumSet::from_points(&[], (0.0, 2.0), 1e-9);
        let a = SpectrumSet::from_points(&[1.0], (0.0, 2.0), 1e-9);
        assert!(matches!(hausdorff_distance(&e, &e), Err(Error::UndefinedDistance)));
        let d = hausdorff_distance(&e, &a).unwrap();
        assert!(d.flagged && d.value == 2.0);
    }

    #[test]
    fn gap_in_interval_middle() {
        let d = hausdorff_distance(&iv(&[(0.0, 4.0)]), &iv(&[(0.0, 1.0), (3.0, 4.0)])).unwrap();
        assert!((d.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_point_has_two_gaps() {
        let s = SpectrumSet::from_points(&[0.5], (0.0, 1.0), 1e-6);
        assert_eq!(detect_gaps(&s), vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn fits() {
        let lin: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&e| (e, 2.0 * e)).collect();
        let f = lipschitz_fit(&lin).unwrap();
        assert!((f.coefficient - 2.0).abs() < 1e-14 && (f.max_ratio - 2.0).abs() < 1e-14);
        let sq: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&e| (e, e * e)).collect();
        assert!((lipschitz_fit(&sq).unwrap().max_ratio - 0.4).abs() < 1e-14);
        assert!(matches!(lipschitz_fit(&lin[..2]), Err(Error::TooFewPoints(_))));
    }

    #[test]
    fn touching_bands_stay_separate_groups() {
        let g = subband_groups(&[(0.0, 1.0), (1.0, 2.0), (1.5, 3.0)], 1e-6);
        assert_eq!(g, vec![(0.0, 1.0), (1.0, 3.0)]);
    }
}
