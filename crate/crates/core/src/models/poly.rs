//! Polynomial regression on a full monomial basis, solved by orthogonal
//! decomposition (monomial bases are too ill-conditioned for normal
//! equations).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full polynomial basis of a given total degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolySpec {
    pub degree: usize,
    /// When true the basis holds every monomial of total degree up to
    /// `degree` (size C(d + degree, degree)); when false only pure powers
    /// of single features.
    pub include_interactions: bool,
}

impl PolySpec {
    pub fn new(degree: usize) -> Self {
        PolySpec {
            degree,
            include_interactions: true,
        }
    }

    /// Number of basis columns for `d` input features.
    pub fn basis_size(&self, d: usize) -> usize {
        if self.include_interactions {
            binomial(d + self.degree, self.degree)
        } else {
            1 + d * self.degree
        }
    }

    pub fn label(&self) -> String {
        format!("poly_deg{}", self.degree)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All exponent vectors of total degree <= `degree` over `d` variables, in
/// graded lexicographic order: degree 0 first, then within each total degree
/// the exponent of the first variable decreases.
pub(crate) fn monomial_exponents(d: usize, degree: usize, interactions: bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if interactions {
        for total in 0..=degree as u32 {
            let mut current = vec![0u32; d];
            fill_exponents(&mut out, &mut current, 0, total);
        }
    } else {
        out.push(vec![0; d]);
        for total in 1..=degree as u32 {
            for var in 0..d {
                let mut e = vec![0u32; d];
                e[var] = total;
                out.push(e);
            }
        }
    }
    out
}

fn fill_exponents(out: &mut Vec<Vec<u32>>, current: &mut [u32], var: usize, remaining: u32) {
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(current.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        fill_exponents(out, current, var + 1, remaining - e);
        current[var] = 0;
    }
}

fn eval_monomial(row: &[f64], exponents: &[u32]) -> f64 {
    let mut acc = 1.0;
    for (x, &e) in row.iter().zip(exponents) {
        if e > 0 {
            acc *= x.powi(e as i32);
        }
    }
    acc
}

/// Expand a feature matrix into the monomial basis of `spec`.
pub fn poly_features(x: &[Vec<f64>], spec: &PolySpec) -> Vec<Vec<f64>> {
    let d = x.first().map_or(0, Vec::len);
    let exponents = monomial_exponents(d, spec.degree, spec.include_interactions);
    x.iter()
        .map(|row| exponents.iter().map(|e| eval_monomial(row, e)).collect())
        .collect()
}

/// Least-squares polynomial coefficients, returned in the basis order of
/// [`poly_features`]. Requires strictly more rows than basis columns and a
/// full-rank basis.
pub(crate) fn solve_poly(x: &[Vec<f64>], y: &[f64], spec: &PolySpec) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    let d = x.first().map_or(0, Vec::len);
    let m = spec.basis_size(d);
    if n <= m {
        return Err(Error::SingularBasis);
    }
    let basis = poly_features(x, spec);
    let design = DMatrix::from_fn(n, m, |r, c| basis[r][c]);
    let rhs = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10 * n.max(m) as f64;
    if svd.rank(tol) < m {
        return Err(Error::SingularBasis);
    }
    let coeffs = svd
        .solve(&rhs, tol)
        .map_err(|_| Error::SingularBasis)?;
    Ok(coeffs.iter().copied().collect())
}

/// Evaluate a fitted polynomial at one input row.
pub(crate) fn predict_poly(row: &[f64], coeffs: &[f64], spec: &PolySpec, d: usize) -> f64 {
    let exponents = monomial_exponents(d, spec.degree, spec.include_interactions);
    exponents
        .iter()
        .zip(coeffs)
        .map(|(e, c)| c * eval_monomial(row, e))
        .sum()
}

/// Evaluate a fitted polynomial on many rows, expanding the basis once.
pub(crate) fn predict_poly_batch(
    rows: &[Vec<f64>],
    coeffs: &[f64],
    spec: &PolySpec,
    d: usize,
) -> Vec<f64> {
    let exponents = monomial_exponents(d, spec.degree, spec.include_interactions);
    rows.iter()
        .map(|row| {
            exponents
                .iter()
                .zip(coeffs)
                .map(|(e, c)| c * eval_monomial(row, e))
                .sum()
        })
        .collect()
}
