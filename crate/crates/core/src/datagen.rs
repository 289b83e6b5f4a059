//! Deterministic dataset generators for the simulation experiments plus a
//! generic tabular preprocessing pipeline (column drops, log target, Tukey
//! outlier removal) for user-supplied CSV data.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::models::{glorot_normal_init, NetSpec, TrainedModel};
use crate::util::{format_f64, quantile_sorted, stream_rng};

/// A feature matrix with its target vector and provenance metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Row-major feature matrix, n rows by d columns.
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Feature column names, length d.
    pub names: Vec<String>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Restrict to the given feature columns (indices must be strictly
    /// increasing).
    pub fn keep_features(&self, kept: &[usize]) -> Result<Dataset> {
        if kept.is_empty() {
            return Err(Error::EmptyFeatureSet);
        }
        if kept.iter().any(|&i| i >= self.width()) {
            return Err(Error::InvalidConfig(format!(
                "feature index out of range (width {})",
                self.width()
            )));
        }
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "kept feature indices must be strictly increasing".into(),
            ));
        }
        Ok(Dataset {
            features: self
                .features
                .iter()
                .map(|row| kept.iter().map(|&i| row[i]).collect())
                .collect(),
            target: self.target.clone(),
            names: kept.iter().map(|&i| self.names[i].clone()).collect(),
            meta: DatasetMeta {
                generator: self.meta.generator.clone(),
                seed: self.meta.seed,
                params: json!({
                    "parent": self.meta.params,
                    "kept_columns": kept,
                }),
            },
        })
    }

    /// CSV with the feature columns followed by a final `target` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for name in &self.names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("target\n");
        for (row, t) in self.features.iter().zip(&self.target) {
            for v in row {
                out.push_str(&format_f64(*v));
                out.push(',');
            }
            out.push_str(&format_f64(*t));
            out.push('\n');
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Write the metadata sidecar next to the CSV.
    pub fn write_sidecar(&self, csv_path: &Path) -> Result<PathBuf> {
        let path = sidecar_path(csv_path);
        let text = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Read a dataset from CSV. The column named `target_name` (default
    /// `target`) becomes the target; all others are features in header
    /// order. A header row is mandatory and every cell must be a finite,
    /// dot-decimal number.
    pub fn read_csv(path: &Path, target_name: Option<&str>) -> Result<Dataset> {
        let target_name = target_name.unwrap_or("target");
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers = reader.headers()?.clone();
        let target_pos = headers
            .iter()
            .position(|h| h == target_name)
            .ok_or_else(|| Error::UnknownColumn {
                name: target_name.to_string(),
            })?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_pos)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut features = Vec::new();
        let mut target = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Parse(format!(
                    "row {line}: expected {} fields, got {}",
                    headers.len(),
                    record.len()
                )));
            }
            let mut row = Vec::with_capacity(names.len());
            for (i, field) in record.iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|e| {
                    Error::Parse(format!("row {line}, column {i}: '{field}': {e}"))
                })?;
                if !value.is_finite() {
                    return Err(Error::NonFinite { context: "csv cell" });
                }
                if i == target_pos {
                    target.push(value);
                } else {
                    row.push(value);
                }
            }
            features.push(row);
        }
        Ok(Dataset {
            features,
            target,
            names,
            meta: DatasetMeta {
                generator: "file".into(),
                seed: 0,
                params: json!({ "path": path.display().to_string() }),
            },
        })
    }
}

/// Sidecar path convention: `data.csv` gets `data.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Lower triangular Cholesky factor of the equicorrelation matrix
/// (1 - rho) I + rho 11^t.
pub(crate) fn equicorrelation_cholesky(d: usize, rho: f64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
    if !(rho < 1.0 && rho > lower) {
        return Err(Error::InvalidCorrelation { rho, d });
    }
    let sigma = DMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { rho });
    nalgebra::Cholesky::new(sigma)
        .map(|c| c.l())
        .ok_or(Error::InvalidCorrelation { rho, d })
}

/// n rows of N(0, Sigma) with unit variances and constant pairwise
/// correlation `rho`, drawn through the Cholesky factor of Sigma.
pub fn sample_equicorrelated_gaussian(
    n: usize,
    d: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let l = equicorrelation_cholesky(d, rho)?;
    let mut rng = stream_rng(seed, 0);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut row = vec![0.0; d];
        for (r, item) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                acc += l[(r, c)] * zc;
            }
            *item = acc;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn sample_t_with<R: rand::Rng>(df: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let chi = ChiSquared::new(df).expect("validated df");
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let w: f64 = chi.sample(rng);
            z / (w / df).sqrt()
        })
        .collect()
}

/// i.i.d. Student t draws: a standard normal divided by the square root of
/// an independent chi-square over its degrees of freedom.
pub fn sample_t(df: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !df.is_finite() || df <= 0.0 {
        return Err(Error::InvalidDf { df });
    }
    Ok(sample_t_with(df, n, &mut stream_rng(seed, 0)))
}

/// Noiseless target of the first two simulated datasets: a logistic bump
/// plus a cosine of two linear combinations of the first four features.
pub(crate) fn sim12_target(row: &[f64]) -> f64 {
    let bump_arg = 2.0 * row[0] + 4.0 * row[1] + 3.0 * row[2] + 3.0 * row[3];
    let wave_arg = 2.0 * row[0] + 4.0 * row[1] - 3.0 * row[2] - 3.0 * row[3];
    3.0 / (1.0 + (-bump_arg).exp()) + 3.0 * wave_arg.cos()
}

const STREAM_NOISE: u64 = 1;

fn simdata12(n: usize, seed: u64, rho: f64, name: &str) -> Result<Dataset> {
    let features = sample_equicorrelated_gaussian(n, 8, rho, seed)?;
    let noise = sample_t_with(3.0, n, &mut stream_rng(seed, STREAM_NOISE));
    let target = features
        .iter()
        .zip(&noise)
        .map(|(row, e)| sim12_target(row) + e)
        .collect();
    Ok(Dataset {
        features,
        target,
        names: (0..8).map(|i| format!("x{i}")).collect(),
        meta: DatasetMeta {
            generator: name.into(),
            seed,
            params: json!({ "n": n, "rho": rho, "noise": "t3" }),
        },
    })
}

/// Eight equicorrelated (rho = 0.5) standard Gaussian features; only the
/// first four drive the target; t3 noise.
pub fn simdata1(n: usize, seed: u64) -> Result<Dataset> {
    simdata12(n, seed, 0.5, "simdata1")
}

/// Same target process as [`simdata1`] but with independent features.
pub fn simdata2(n: usize, seed: u64) -> Result<Dataset> {
    simdata12(n, seed, 0.0, "simdata2")
}

/// Noiseless target of the third dataset: the complete second-degree
/// polynomial with all-ones coefficients.
pub(crate) fn sim3_target(row: &[f64]) -> f64 {
    1.0 + row[0] + row[1] + row[0] * row[0] + row[0] * row[1] + row[1] * row[1]
}

/// Two independent standard Gaussian features, full quadratic target, t3
/// noise.
pub fn simdata3(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream_rng(seed, 0);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..2)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
        })
        .collect();
    let noise = sample_t_with(3.0, n, &mut stream_rng(seed, STREAM_NOISE));
    let target = features
        .iter()
        .zip(&noise)
        .map(|(row, e)| sim3_target(row) + e)
        .collect();
    Ok(Dataset {
        features,
        target,
        names: vec!["x0".into(), "x1".into()],
        meta: DatasetMeta {
            generator: "simdata3".into(),
            seed,
            params: json!({ "n": n, "noise": "t3" }),
        },
    })
}

/// Target generated by a trained (or freshly initialized) network over
/// independent standard Gaussian features, plus Gaussian noise whose
/// standard deviation is 5% of the spread of the noiseless outputs.
pub fn simdata4_from_generator(n: usize, seed: u64, generator: &TrainedModel) -> Result<Dataset> {
    let d = generator.input_dim;
    let mut rng = stream_rng(seed, 0);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
        })
        .collect();
    let clean = generator.predict(&features)?;
    let spread = crate::util::sample_variance(&clean).sqrt();
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::DegenerateGenerator);
    }
    let noise_sd = 0.05 * spread;
    let mut noise_rng = stream_rng(seed, STREAM_NOISE);
    let target = clean
        .iter()
        .map(|g| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            g + noise_sd * z
        })
        .collect();
    Ok(Dataset {
        features,
        target,
        names: (0..d).map(|i| format!("x{i}")).collect(),
        meta: DatasetMeta {
            generator: "simdata4".into(),
            seed,
            params: json!({
                "n": n,
                "generator": generator.spec.label(),
                "generator_seed": match &generator.spec {
                    crate::models::ModelSpec::Net(s) => s.init_seed,
                    _ => 0,
                },
                "noise_sd_fraction": 0.05,
            }),
        },
    })
}

/// Ten independent standard Gaussian features with a Glorot-initialized
/// network as the target generator.
pub fn simdata4(n: usize, seed: u64, generator_spec: &NetSpec) -> Result<Dataset> {
    generator_spec.validate()?;
    if generator_spec.input_width() != 10 {
        return Err(Error::DimensionMismatch {
            expected: 10,
            actual: generator_spec.input_width(),
        });
    }
    let params = glorot_normal_init(generator_spec);
    let generator = TrainedModel {
        spec: crate::models::ModelSpec::Net(generator_spec.clone()),
        input_dim: generator_spec.input_width(),
        parameters: params,
        training_loss_history: Vec::new(),
    };
    simdata4_from_generator(n, seed, &generator)
}

/// Drop named columns, optionally log-transform the target, then remove
/// every row with at least `tukey_max_outliers` features outside their
/// Tukey fences [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
pub fn preprocess_tabular(
    raw: &Dataset,
    drop_columns: &[String],
    log_target: bool,
    tukey_max_outliers: usize,
) -> Result<Dataset> {
    if tukey_max_outliers == 0 {
        return Err(Error::InvalidConfig(
            "outlier threshold must be at least 1 (a threshold of 0 removes every row)".into(),
        ));
    }
    for name in drop_columns {
        if !raw.names.contains(name) {
            return Err(Error::UnknownColumn { name: name.clone() });
        }
    }
    let kept_cols: Vec<usize> = (0..raw.width())
        .filter(|&i| !drop_columns.contains(&raw.names[i]))
        .collect();
    if kept_cols.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let names: Vec<String> = kept_cols.iter().map(|&i| raw.names[i].clone()).collect();
    let features: Vec<Vec<f64>> = raw
        .features
        .iter()
        .map(|row| kept_cols.iter().map(|&i| row[i]).collect())
        .collect();
    let mut target = raw.target.clone();
    if log_target {
        for (row, t) in target.iter_mut().enumerate() {
            if *t <= 0.0 {
                return Err(Error::NonPositiveTarget { row });
            }
            *t = t.ln();
        }
    }

    // Per-feature fences over all rows, then per-row outlier counts.
    let n = features.len();
    let mut fences = Vec::with_capacity(names.len());
    for c in 0..names.len() {
        let mut col: Vec<f64> = features.iter().map(|row| row[c]).collect();
        col.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_sorted(&col, 0.25);
        let q3 = quantile_sorted(&col, 0.75);
        let iqr = q3 - q1;
        fences.push((q1 - 1.5 * iqr, q3 + 1.5 * iqr));
    }
    let keep_row = |row: &[f64]| {
        let outliers = row
            .iter()
            .zip(&fences)
            .filter(|(v, (lo, hi))| **v < *lo || **v > *hi)
            .count();
        outliers < tukey_max_outliers
    };
    let mut kept_features = Vec::new();
    let mut kept_target = Vec::new();
    for (row, t) in features.iter().zip(&target) {
        if keep_row(row) {
            kept_features.push(row.clone());
            kept_target.push(*t);
        }
    }
    let removed = n - kept_features.len();
    Ok(Dataset {
        features: kept_features,
        target: kept_target,
        names,
        meta: DatasetMeta {
            generator: format!("preprocess({})", raw.meta.generator),
            seed: raw.meta.seed,
            params: json!({
                "dropped_columns": drop_columns,
                "log_target": log_target,
                "tukey_max_outliers": tukey_max_outliers,
                "rows_removed": removed,
            }),
        },
    })
}
