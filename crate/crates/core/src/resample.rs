//! Out-of-sample residual generation. Two protocols are provided: k-fold
//! cross-validation, and a bootstrap scheme that trains one model per round
//! and scores a single out-of-bag point, which removes the shared-model
//! dependence among residuals at the cost of one retraining per residual.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::util::{format_f64, stream_rng};

/// How a residual set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Kfold,
    OobBootstrap,
}

/// Out-of-sample prediction errors with their provenance.
#[derive(Debug, Clone)]
pub struct ResidualSet {
    /// One residual per evaluation, aligned with `indices`.
    pub residuals: Vec<f64>,
    /// Original sample index of each residual.
    pub indices: Vec<usize>,
    pub scheme: Scheme,
    pub model_id: String,
    pub seed: u64,
    /// Per-sample count of times used as a test point.
    pub coverage: Vec<usize>,
}

impl ResidualSet {
    pub fn coverage_spread(&self) -> usize {
        let max = self.coverage.iter().max().copied().unwrap_or(0);
        let min = self.coverage.iter().min().copied().unwrap_or(0);
        max - min
    }

    /// Two-column CSV (index, residual).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index,residual\n");
        for (i, r) in self.indices.iter().zip(&self.residuals) {
            out.push_str(&i.to_string());
            out.push(',');
            out.push_str(&format_f64(*r));
            out.push('\n');
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn sidecar(&self) -> ResidualSidecar {
        ResidualSidecar {
            scheme: self.scheme,
            seed: self.seed,
            model_id: self.model_id.clone(),
            count: self.residuals.len(),
            coverage_min: self.coverage.iter().min().copied().unwrap_or(0),
            coverage_max: self.coverage.iter().max().copied().unwrap_or(0),
        }
    }
}

/// Metadata written next to a residual CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSidecar {
    pub scheme: Scheme,
    pub seed: u64,
    pub model_id: String,
    pub count: usize,
    pub coverage_min: usize,
    pub coverage_max: usize,
}

/// Read a residual CSV back as (indices, residuals).
pub fn read_residuals_csv(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "index" || &headers[1] != "residual" {
        return Err(Error::Parse(format!(
            "{}: expected header 'index,residual'",
            path.display()
        )));
    }
    let mut indices = Vec::new();
    let mut residuals = Vec::new();
    for record in reader.records() {
        let record = record?;
        let idx: usize = record[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad index '{}': {e}", &record[0])))?;
        let res: f64 = record[1]
            .parse()
            .map_err(|e| Error::Parse(format!("bad residual '{}': {e}", &record[1])))?;
        indices.push(idx);
        residuals.push(res);
    }
    Ok((indices, residuals))
}

/// Fold id per original index: a seeded shuffle of the indices is cut into
/// k nearly equal blocks (the first n mod k folds get the extra sample).
pub fn kfold_assignments(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, 0);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let base = n / k;
    let extra = n % k;
    let mut assignment = vec![0usize; n];
    let mut cursor = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &idx in &order[cursor..cursor + size] {
            assignment[idx] = fold;
        }
        cursor += size;
    }
    assignment
}

/// Cross-validation residuals with an explicit fold assignment (fold id per
/// original index). Residuals come back in original index order.
pub fn kfold_residuals_with_assignment(
    x: &[Vec<f64>],
    y: &[f64],
    model: &ModelSpec,
    assignment: &[usize],
    k: usize,
    seed: u64,
) -> Result<ResidualSet> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if assignment.len() != n {
        return Err(Error::LengthMismatch {
            left: assignment.len(),
            right: n,
        });
    }
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!(
            "fold count {k} must be in 2..={n}"
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&f| f >= k) {
        return Err(Error::InvalidConfig(format!(
            "fold id {bad} is out of range for {k} folds"
        )));
    }
    let mut residuals = vec![0.0; n];
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..n).filter(|i| assignment[*i] != fold).collect();
        let test_idx: Vec<usize> = (0..n).filter(|i| assignment[*i] == fold).collect();
        if test_idx.is_empty() {
            return Err(Error::InvalidConfig(format!("fold {fold} is empty")));
        }
        let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let train_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let fitted = model.fit(&train_x, &train_y).map_err(|e| Error::FitFailure {
            unit: "fold",
            index: fold,
            source: Box::new(e),
        })?;
        for &i in &test_idx {
            residuals[i] = y[i] - fitted.predict_row(&x[i])?;
        }
    }
    Ok(ResidualSet {
        residuals,
        indices: (0..n).collect(),
        scheme: Scheme::Kfold,
        model_id: model.label(),
        seed,
        coverage: vec![1; n],
    })
}

/// k-fold cross-validation residuals with a seeded fold assignment.
pub fn kfold_residuals(
    x: &[Vec<f64>],
    y: &[f64],
    model: &ModelSpec,
    k: usize,
    seed: u64,
) -> Result<ResidualSet> {
    if k < 2 || k > x.len() {
        return Err(Error::InvalidConfig(format!(
            "fold count {k} must be in 2..={}",
            x.len()
        )));
    }
    let assignment = kfold_assignments(x.len(), k, seed);
    kfold_residuals_with_assignment(x, y, model, &assignment, k, seed)
}

const OOB_RETRIES: usize = 100;

/// Bootstrap out-of-bag residuals: each round draws a bootstrap training
/// multiset, picks the least-used out-of-bag index as the single test point
/// (ties broken by a seeded draw), trains, and records one residual. Round
/// r is driven by seed + r, so rounds are reproducible individually.
///
/// A draw whose out-of-bag set is empty or misses every least-covered
/// sample is discarded and redrawn (up to a retry cap); the coverage
/// ledger therefore fills level by level and the spread between the most
/// and least used test points never exceeds one.
pub fn oob_bootstrap_residuals(
    x: &[Vec<f64>],
    y: &[f64],
    model: &ModelSpec,
    rounds: usize,
    seed: u64,
) -> Result<ResidualSet> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("need at least one round".into()));
    }
    let mut coverage = vec![0usize; n];
    let mut residuals = Vec::with_capacity(rounds);
    let mut indices = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let mut rng = stream_rng(seed.wrapping_add(round as u64), 1);
        let mut draw = Vec::with_capacity(n);
        let mut in_bag = vec![false; n];
        let global_least = coverage.iter().min().copied().unwrap();
        let mut attempts = 0;
        let test = loop {
            draw.clear();
            in_bag.iter_mut().for_each(|b| *b = false);
            for _ in 0..n {
                let idx = rng.random_range(0..n);
                draw.push(idx);
                in_bag[idx] = true;
            }
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            attempts += 1;
            if oob.is_empty() {
                if attempts > OOB_RETRIES {
                    return Err(Error::EmptyOutOfBag {
                        round,
                        retries: OOB_RETRIES,
                    });
                }
                continue;
            }
            let least = oob.iter().map(|&i| coverage[i]).min().unwrap();
            if least > global_least && attempts <= OOB_RETRIES {
                continue;
            }
            let candidates: Vec<usize> =
                oob.iter().copied().filter(|&i| coverage[i] == least).collect();
            break candidates[rng.random_range(0..candidates.len())];
        };
        debug_assert!(!draw.contains(&test));
        let train_x: Vec<Vec<f64>> = draw.iter().map(|&i| x[i].clone()).collect();
        let train_y: Vec<f64> = draw.iter().map(|&i| y[i]).collect();
        let fitted = model.fit(&train_x, &train_y).map_err(|e| Error::FitFailure {
            unit: "round",
            index: round,
            source: Box::new(e),
        })?;
        residuals.push(y[test] - fitted.predict_row(&x[test])?);
        indices.push(test);
        coverage[test] += 1;
    }
    Ok(ResidualSet {
        residuals,
        indices,
        scheme: Scheme::OobBootstrap,
        model_id: model.label(),
        seed,
        coverage,
    })
}
