//! Dense linear-algebra helpers on top of `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigen-decomposition of a Hermitian matrix, ascending eigenvalues.
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMat,
}

fn is_real(m: &CMat) -> bool {
    let n = m.nrows();
    for j in 0..m.ncols() {
        for i in 0..n {
            if m[(i, j)].im != 0.0 {
                return false;
            }
        }
    }
    true
}

fn real_part(m: &CMat) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

/// Ascending order with ties broken by solver output order.
fn sort_pairs(values: Vec<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Full eigen-decomposition. Real symmetric input takes the real path.
pub fn eigh(m: &CMat) -> Result<Eigh> {
    let n = m.nrows();
    if is_real(m) {
        let r = real_part(m);
        let e = r
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })?;
        let vals: Vec<f64> = (0..n).map(|i| e.S()[i]).collect();
        let order = sort_pairs(vals.clone());
        let u = e.U();
        let vectors = CMat::from_fn(n, n, |i, j| C64::new(u[(i, order[j])], 0.0));
        Ok(Eigh {
            values: order.iter().map(|&k| vals[k]).collect(),
            vectors,
        })
    } else {
        let e = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })?;
        let vals: Vec<f64> = (0..n).map(|i| e.S()[i].re).collect();
        let order = sort_pairs(vals.clone());
        let u = e.U();
        let vectors = CMat::from_fn(n, n, |i, j| u[(i, order[j])]);
        Ok(Eigh {
            values: order.iter().map(|&k| vals[k]).collect(),
            vectors,
        })
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(m: &CMat) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = if is_real(m) {
        real_part(m)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })?
    } else {
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })?
    };
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    m.singular_values()
        .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })
}

/// 2-norm condition number.
pub fn condition_number(m: &CMat) -> Result<f64> {
    let s = singular_values(m)?;
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Operator 2-norm.
pub fn norm2(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Operator 2-norm of a Hermitian matrix (largest |eigenvalue|).
pub fn hermitian_norm2(m: &CMat) -> Result<f64> {
    let v = eigvalsh(m)?;
    Ok(v.iter().fold(0.0f64, |a, x| a.max(x.abs())))
}

pub fn inverse(m: &CMat) -> CMat {
    m.partial_piv_lu().inverse()
}

pub fn solve(m: &CMat, rhs: &CMat) -> CMat {
    m.partial_piv_lu().solve(rhs)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    let mut a = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            a = a.max(m[(i, j)].norm());
        }
    }
    a
}

/// Largest entrywise `|H − H†|`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut a = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            a = a.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    a
}

pub fn adjoint(m: &CMat) -> CMat {
    CMat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn identity(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn matvec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![ZERO; n];
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖₂`.
pub fn vdist(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn column(m: &CMat, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Lowest `k` eigenvalues of a Hermitian operator given by its action, by
/// Lanczos iteration with full reorthogonalization. Stops when the residual
/// bounds of the wanted Ritz values fall below `tol · max(1, |θ|)`.
pub fn lanczos_lowest(dim: usize, apply: &dyn Fn(&[C64], &mut [C64]), k: usize, tol: f64) -> Result<Vec<f64>> {
    let k = k.min(dim);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    // deterministic start vector
    let mut v: Vec<C64> = (0..dim)
        .map(|i| C64::new(1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5), 0.0))
        .collect();
    let n0 = vnorm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut w = vec![ZERO; dim];
    let check_every = 50;
    loop {
        apply(&v, &mut w);
        let a = inner(&v, &w).re;
        for (x, y) in w.iter_mut().zip(&v) {
            *x -= y * a;
        }
        if let Some(prev) = basis.last() {
            let b = *beta.last().expect("paired with basis");
            for (x, y) in w.iter_mut().zip(prev) {
                *x -= y * b;
            }
        }
        basis.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                for (x, y) in w.iter_mut().zip(q) {
                    *x -= y * c;
                }
            }
        }
        let b = vnorm(&w);
        let m = basis.len();
        let exhausted = m == dim || b < 1e-14;
        if exhausted || m.is_multiple_of(check_every) {
            let t = Mat::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let e = t
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| Error::NonConvergence { xi: [f64::NAN; 2] })?;
            let vals: Vec<f64> = (0..m).map(|i| e.S()[i]).collect();
            let order = sort_pairs(vals.clone());
            let want = k.min(m);
            let converged = exhausted
                || (0..want).all(|r| {
                    let c = order[r];
                    (b * e.U()[(m - 1, c)]).abs() < tol * vals[c].abs().max(1.0)
                });
            if converged && m >= want {
                return Ok(order[..want].iter().map(|&c| vals[c]).collect());
            }
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let m = CMat::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(4.0 - i as f64, 0.0)
            } else if i < j {
                C64::new(0.1, 0.2 * (i + j) as f64)
            } else {
                C64::new(0.1, -0.2 * (i + j) as f64)
            }
        });
        let e = eigh(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..4 {
            let v = column(&e.vectors, k);
            let hv = matvec(&m, &v);
            let r: f64 = hv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * e.values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let m = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(2.0 + (i as f64 * 0.37).sin(), 0.0)
            } else if i + 1 == j {
                C64::new(-1.0, 0.3)
            } else if j + 1 == i {
                C64::new(-1.0, -0.3)
            } else {
                ZERO
            }
        });
        let dense = eigvalsh(&m).unwrap();
        let apply = |x: &[C64], y: &mut [C64]| y.copy_from_slice(&matvec(&m, x));
        let l = lanczos_lowest(n, &apply, 4, 1e-12).unwrap();
        for i in 0..4 {
            assert!((l[i] - dense[i]).abs() < 1e-9, "{} {}", l[i], dense[i]);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let m = CMat::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64 + if i == j { 5.0 } else { 0.0 }, 0.3));
        let p = &m * inverse(&m);
        let d = &p - identity(3);
        assert!(max_abs(&d) < 1e-12);
    }
}
