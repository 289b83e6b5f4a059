//! Diagnostics that accompany the variance test: residual bias t-tests,
//! a permutation test of independence built on distance correlation, the
//! order-statistic Wasserstein-1 distance, the nested-model F test, and
//! Gaussian kernel density curves for residual distributions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::special::{f_sf, student_t_cdf};
use crate::stats::{Alternative, Method, TestResult};
use crate::util::{
    all_finite, interquartile_range, is_constant, mean, sample_variance, stream_rng,
};

/// One-sample t-test that the residual mean is zero.
pub fn bias_test(residuals: &[f64]) -> Result<TestResult> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    if !all_finite(residuals) {
        return Err(Error::NonFinite {
            context: "bias test input",
        });
    }
    if is_constant(residuals) {
        return Err(Error::DegenerateSample {
            context: "constant residuals have zero variance",
        });
    }
    let m = mean(residuals);
    let sd = sample_variance(residuals).sqrt();
    let statistic = m / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    let cdf = student_t_cdf(statistic, df)?;
    Ok(TestResult {
        statistic,
        df,
        df_denom: None,
        p_value: (2.0 * cdf.min(1.0 - cdf)).min(1.0),
        alternative: Alternative::TwoSided,
        method: Method::TBias,
        degenerate: false,
    })
}

/// Paired t-test: [`bias_test`] applied to the elementwise differences.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    bias_test(&diffs)
}

/// A sample stored as its order statistics.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SampleTooSmall { n: 0, min: 1 });
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite {
                context: "empirical distribution",
            });
        }
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Wasserstein-1 distance between two equal-size samples: the mean absolute
/// difference of matched order statistics.
pub fn wasserstein1(f: &EmpiricalDistribution, g: &EmpiricalDistribution) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    let total: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / f.len() as f64)
}

/// Wasserstein-1 distance from the residual distribution to the point mass
/// at zero (the ideal model); equals the mean absolute residual.
pub fn wasserstein_to_delta(residuals: &[f64]) -> Result<f64> {
    let f = EmpiricalDistribution::new(residuals.to_vec())?;
    let zeros = EmpiricalDistribution::new(vec![0.0; residuals.len()])?;
    wasserstein1(&f, &zeros)
}

/// Pairwise |.| distances of a univariate sample, double-centered, stored
/// row-major. Also carries the mean square of the centered entries.
struct CenteredDistances {
    entries: Vec<f64>,
    n: usize,
    mean_square: f64,
}

impl CenteredDistances {
    fn new(xs: &[f64]) -> Self {
        let n = xs.len();
        let mut entries = vec![0.0; n * n];
        let mut row_means = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                let d = (xs[j] - xs[k]).abs();
                entries[j * n + k] = d;
                acc += d;
            }
            row_means[j] = acc / n as f64;
        }
        let grand_mean = mean(&row_means);
        let mut mean_square = 0.0;
        for j in 0..n {
            for k in 0..n {
                let c = entries[j * n + k] - row_means[j] - row_means[k] + grand_mean;
                entries[j * n + k] = c;
                mean_square += c * c;
            }
        }
        mean_square /= (n * n) as f64;
        CenteredDistances {
            entries,
            n,
            mean_square,
        }
    }

    fn dcov_sq(&self, other: &CenteredDistances) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n * n {
            acc += self.entries[i] * other.entries[i];
        }
        acc / (n * n) as f64
    }

    /// dCov^2 against the other matrix with its sample relabeled by `perm`.
    fn dcov_sq_permuted(&self, other: &CenteredDistances, perm: &[usize]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            let pj = perm[j] * n;
            let row = &self.entries[j * n..(j + 1) * n];
            for (k, a) in row.iter().enumerate() {
                acc += a * other.entries[pj + perm[k]];
            }
        }
        acc / (n * n) as f64
    }
}

fn dcor_from_parts(dcov_sq: f64, mean_sq_x: f64, mean_sq_y: f64) -> f64 {
    let denom = (mean_sq_x * mean_sq_y).sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    (dcov_sq.max(0.0) / denom).sqrt().min(1.0)
}

fn validate_dcor_input(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 4 {
        return Err(Error::SampleTooSmall {
            n: x.len(),
            min: 4,
        });
    }
    if !all_finite(x) || !all_finite(y) {
        return Err(Error::NonFinite {
            context: "distance correlation input",
        });
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::DegenerateSample {
            context: "constant vector has no defined distance correlation",
        });
    }
    Ok(())
}

/// Distance correlation of two univariate samples, from double-centered
/// pairwise distance matrices. Zero characterizes independence.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    validate_dcor_input(x, y)?;
    let a = CenteredDistances::new(x);
    let b = CenteredDistances::new(y);
    Ok(dcor_from_parts(a.dcov_sq(&b), a.mean_square, b.mean_square))
}

/// Permutation test of independence based on distance correlation.
///
/// Permutation k reshuffles y with an RNG derived from (seed, k), so the
/// result is identical however the loop is scheduled. The p-value is
/// (1 + #{permuted dCor >= observed}) / (1 + n_perm).
pub fn dcor_perm_test(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<TestResult> {
    validate_dcor_input(x, y)?;
    if n_perm < 99 {
        return Err(Error::InvalidConfig(format!(
            "need at least 99 permutations, got {n_perm}"
        )));
    }
    let n = x.len();
    let a = CenteredDistances::new(x);
    let b = CenteredDistances::new(y);
    let observed = dcor_from_parts(a.dcov_sq(&b), a.mean_square, b.mean_square);
    // Permuting the sample permutes rows and columns of the centered matrix,
    // so the distance variances are unchanged and only dCov^2 needs work.
    let exceed = (1..=n_perm)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            shuffle(&mut perm, &mut rng);
            let dcor_k = dcor_from_parts(a.dcov_sq_permuted(&b, &perm), a.mean_square, b.mean_square);
            dcor_k >= observed
        })
        .count();
    Ok(TestResult {
        statistic: observed,
        df: 0.0,
        df_denom: None,
        p_value: (1 + exceed) as f64 / (1 + n_perm) as f64,
        alternative: Alternative::Greater,
        method: Method::DcorPerm,
        degenerate: false,
    })
}

/// Fisher-Yates shuffle driven by an explicit RNG.
fn shuffle<R: rand::Rng>(xs: &mut [usize], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

/// F test for nested least-squares models from their residual sums of
/// squares and parameter counts.
pub fn nested_f_test(
    rss_small: f64,
    p_small: usize,
    rss_big: f64,
    p_big: usize,
    n: usize,
) -> Result<TestResult> {
    if p_small >= p_big || p_big >= n {
        return Err(Error::InvalidNesting { p_small, p_big });
    }
    if !rss_small.is_finite() || !rss_big.is_finite() {
        return Err(Error::NonFinite {
            context: "residual sum of squares",
        });
    }
    if rss_big <= 0.0 {
        return Err(Error::DegenerateSample {
            context: "big model has zero residual sum of squares",
        });
    }
    let tolerance = 1e-8 * rss_small.abs().max(1.0);
    if rss_big > rss_small + tolerance {
        return Err(Error::NegativeImprovement { rss_small, rss_big });
    }
    let df1 = (p_big - p_small) as f64;
    let df2 = (n - p_big) as f64;
    let improvement = (rss_small - rss_big).max(0.0);
    let statistic = (improvement / df1) / (rss_big / df2);
    Ok(TestResult {
        statistic,
        df: df1,
        df_denom: Some(df2),
        p_value: f_sf(statistic, df1, df2)?,
        alternative: Alternative::Greater,
        method: Method::FNested,
        degenerate: false,
    })
}

/// A kernel density estimate evaluated on a regular grid.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.grid.windows(2).zip(self.density.windows(2)) {
            let (g, d) = w;
            acc += 0.5 * (g[1] - g[0]) * (d[0] + d[1]);
        }
        acc
    }

    /// Two-column CSV (grid, density) for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,density\n");
        for (g, d) in self.grid.iter().zip(&self.density) {
            out.push_str(&crate::util::format_f64(*g));
            out.push(',');
            out.push_str(&crate::util::format_f64(*d));
            out.push('\n');
        }
        out
    }
}

/// Gaussian-kernel density estimate with Silverman's bandwidth
/// 0.9 min(sd, IQR/1.34) n^{-1/5}, evaluated on `grid_size` points spanning
/// the data range widened by three bandwidths.
pub fn kde_density(sample: &[f64], grid_size: usize) -> Result<DensityCurve> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }
    if !all_finite(sample) {
        return Err(Error::NonFinite {
            context: "kde input",
        });
    }
    if is_constant(sample) {
        return Err(Error::DegenerateSample {
            context: "constant sample has no density estimate",
        });
    }
    let sd = sample_variance(sample).sqrt();
    let iqr = interquartile_range(sample);
    let mut scale = sd.min(iqr / 1.34);
    if scale <= 0.0 {
        scale = sd;
    }
    let bandwidth = 0.9 * scale * (n as f64).powf(-0.2);
    let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (n as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + i as f64 * step).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|g| {
            let acc: f64 = sample
                .iter()
                .map(|x| {
                    let z = (g - x) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            acc * norm
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth,
    })
}
