//! Monte Carlo calibration of the variance tests: empirical Type I error
//! and power under seeded, order-independent replication.

use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{classic_mp_test, mp_hc4_test, Alternative, PairedSample};
use crate::util::stream_rng;

/// Marginal distribution of a simulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DistFamily {
    Normal,
    StudentT { df: f64 },
}

/// A distribution family with a standard-deviation multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: DistFamily,
    pub scale: f64,
}

impl DistSpec {
    pub fn standard_normal() -> Self {
        DistSpec {
            family: DistFamily::Normal,
            scale: 1.0,
        }
    }

    pub fn student_t(df: f64) -> Self {
        DistSpec {
            family: DistFamily::StudentT { df },
            scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if let DistFamily::StudentT { df } = self.family {
            if !df.is_finite() || df <= 0.0 {
                return Err(Error::InvalidDf { df });
            }
        }
        Ok(())
    }

    fn sample<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self.family {
            DistFamily::Normal => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    self.scale * z
                })
                .collect(),
            DistFamily::StudentT { df } => {
                let chi = ChiSquared::new(df).expect("validated df");
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        let w: f64 = chi.sample(rng);
                        self.scale * z / (w / df).sqrt()
                    })
                    .collect()
            }
        }
    }
}

/// Which variance test the harness drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    ClassicMp,
    Hc4Mp,
}

/// Replication setup: the first sample comes from `null_generator`, the
/// second from `alt_generator`; equal generators estimate the Type I error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: usize,
    pub sample_size: usize,
    pub alpha: f64,
    pub null_generator: DistSpec,
    pub alt_generator: DistSpec,
    pub test: TestKind,
    pub base_seed: u64,
    /// Retain the per-replication p-values in the report.
    #[serde(default)]
    pub keep_p_values: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("need at least one replication".into()));
        }
        if self.sample_size < 3 {
            return Err(Error::SampleTooSmall {
                n: self.sample_size,
                min: 3,
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        self.null_generator.validate()?;
        self.alt_generator.validate()
    }
}

/// Rejection-rate estimate with its 95% Wilson interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub rejection_rate: f64,
    pub replications: usize,
    pub successes: usize,
    /// Replications whose test errored out (degenerate draws); never
    /// silently dropped.
    pub failures: usize,
    pub alpha: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_values: Option<Vec<f64>>,
}

/// z for the central 95% of the standard normal.
const Z_95: f64 = 1.959963984540054;

/// 95% Wilson score interval for `k` successes out of `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    debug_assert!(n > 0);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The interval brackets p by construction; the min/max absorb the last
    // ulp of rounding at k = 0 and k = n.
    (
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    )
}

const STREAM_MC: u64 = 2;

fn replication_p_value(cfg: &McConfig, r: usize) -> Result<f64> {
    let mut rng = stream_rng(cfg.base_seed.wrapping_add(r as u64), STREAM_MC);
    let x = cfg.null_generator.sample(cfg.sample_size, &mut rng);
    let y = cfg.alt_generator.sample(cfg.sample_size, &mut rng);
    let sample = PairedSample::new(x, y)?;
    let result = match cfg.test {
        TestKind::ClassicMp => classic_mp_test(&sample, Alternative::TwoSided)?,
        TestKind::Hc4Mp => mp_hc4_test(&sample, Alternative::TwoSided)?,
    };
    Ok(result.p_value)
}

/// Run the configured replications and estimate the rejection rate at
/// `alpha` (strict inequality p < alpha). Replication r derives its RNG from
/// base_seed + r, so the estimate does not depend on how the replications
/// are scheduled across workers.
pub fn estimate_rejection_rate(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let outcomes: Vec<Option<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replication_p_value(cfg, r).ok())
        .collect();
    let p_values: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let successes = p_values.len();
    let failures = cfg.replications - successes;
    if successes == 0 {
        return Err(Error::InvalidConfig(
            "every replication failed; check the generators".into(),
        ));
    }
    let rejections = p_values.iter().filter(|p| **p < cfg.alpha).count();
    let rejection_rate = rejections as f64 / successes as f64;
    let (wilson_low, wilson_high) = wilson_interval(rejections, successes);
    Ok(McReport {
        rejection_rate,
        replications: cfg.replications,
        successes,
        failures,
        alpha: cfg.alpha,
        wilson_low,
        wilson_high,
        p_values: cfg.keep_p_values.then_some(p_values),
    })
}

/// One point of a power curve: the alternative's variance was scaled by
/// `variance_ratio` relative to the base configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerPoint {
    pub variance_ratio: f64,
    pub report: McReport,
}

/// Rejection rates across alternatives whose variance is the base
/// alternative's variance times each ratio.
pub fn power_curve(cfg: &McConfig, variance_ratios: &[f64]) -> Result<Vec<PowerPoint>> {
    cfg.validate()?;
    if variance_ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidConfig(
            "variance ratios must be positive".into(),
        ));
    }
    variance_ratios
        .iter()
        .map(|&ratio| {
            let mut point_cfg = cfg.clone();
            point_cfg.alt_generator.scale = cfg.alt_generator.scale * ratio.sqrt();
            Ok(PowerPoint {
                variance_ratio: ratio,
                report: estimate_rejection_rate(&point_cfg)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn base_config() -> McConfig {
        McConfig {
            replications: 200,
            sample_size: 200,
            alpha: 0.05,
            null_generator: DistSpec::standard_normal(),
            alt_generator: DistSpec::standard_normal(),
            test: TestKind::Hc4Mp,
            base_seed: 0,
            keep_p_values: false,
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = base_config();
        let a = estimate_rejection_rate(&cfg).unwrap();
        let b = estimate_rejection_rate(&cfg).unwrap();
        assert_eq!(a.rejection_rate, b.rejection_rate);
        assert_eq!(a.successes, b.successes);
    }

    #[test]
    fn single_replication_is_zero_or_one() {
        let mut cfg = base_config();
        cfg.replications = 1;
        let report = estimate_rejection_rate(&cfg).unwrap();
        assert!(report.rejection_rate == 0.0 || report.rejection_rate == 1.0);
    }

    #[test]
    fn gross_variance_difference_is_always_caught() {
        let mut cfg = base_config();
        cfg.replications = 100;
        cfg.sample_size = 1000;
        cfg.alt_generator.scale = 2.0;
        let report = estimate_rejection_rate(&cfg).unwrap();
        assert!(report.rejection_rate >= 0.99, "{}", report.rejection_rate);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        for (k, n) in [(0, 10), (3, 10), (10, 10), (52, 1000)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn wilson_interval_covers_true_rate() {
        // Meta-test on plain Bernoulli draws with known rates.
        for (meta_seed, p0) in [(0u64, 0.05f64), (1, 0.3)] {
            let meta_reps = 200;
            let n = 500;
            let mut misses = 0;
            for m in 0..meta_reps {
                let mut rng = stream_rng(meta_seed, 1000 + m);
                let k = (0..n).filter(|_| rng.random::<f64>() < p0).count();
                let (lo, hi) = wilson_interval(k, n);
                if p0 < lo || p0 > hi {
                    misses += 1;
                }
            }
            let miss_rate = misses as f64 / meta_reps as f64;
            assert!(miss_rate <= 0.10, "miss rate {miss_rate} for p0 = {p0}");
        }
    }

    #[test]
    fn power_curve_null_point_matches_type_i_run() {
        let cfg = base_config();
        let base = estimate_rejection_rate(&cfg).unwrap();
        let curve = power_curve(&cfg, &[1.0]).unwrap();
        assert_eq!(curve[0].report.rejection_rate, base.rejection_rate);
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config();
        cfg.alpha = 1.5;
        assert!(estimate_rejection_rate(&cfg).is_err());
        let mut cfg = base_config();
        cfg.replications = 0;
        assert!(estimate_rejection_rate(&cfg).is_err());
        let cfg = base_config();
        assert!(power_curve(&cfg, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn kept_p_values_match_replication_count() {
        let mut cfg = base_config();
        cfg.replications = 50;
        cfg.keep_p_values = true;
        let report = estimate_rejection_rate(&cfg).unwrap();
        let ps = report.p_values.unwrap();
        assert_eq!(ps.len(), report.successes);
        assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
