//! The Morgan-Pitman test of equality of variances for paired samples and
//! its heteroskedasticity-robust variant based on Cribari-Neto's HC4
//! covariance estimator.
//!
//! Both tests reduce the hypothesis Var(X) = Var(Y) to zero correlation of
//! U = X + Y and V = X - Y. The classic test uses the correlation t
//! statistic directly; the robust variant regresses V on U and tests the
//! slope with an HC4 sandwich standard error, which keeps the level honest
//! under heavy tails and heteroskedastic pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::student_t_cdf;
use crate::util::{all_finite, is_constant, mean};

/// Two equal-length residual vectors under comparison.
#[derive(Debug, Clone)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    /// Validates lengths (equal, at least 3) and finiteness.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.len() < 3 {
            return Err(Error::SampleTooSmall { n: x.len(), min: 3 });
        }
        if !all_finite(&x) || !all_finite(&y) {
            return Err(Error::NonFinite {
                context: "paired sample",
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// The sum/difference transform of a paired sample.
#[derive(Debug, Clone)]
pub struct UvPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// u_i = x_i + y_i, v_i = x_i - y_i.
pub fn uv_transform(sample: &PairedSample) -> UvPair {
    let u = sample.x.iter().zip(&sample.y).map(|(a, b)| a + b).collect();
    let v = sample.x.iter().zip(&sample.y).map(|(a, b)| a - b).collect();
    UvPair { u, v }
}

/// Direction of the alternative hypothesis. `Greater` means Var(X) > Var(Y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Less,
    Greater,
}

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClassicMp,
    Hc4Mp,
    TBias,
    DcorPerm,
    FNested,
}

/// Outcome of any of the tests in this crate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Degrees of freedom (numerator degrees for the F test).
    pub df: f64,
    /// Denominator degrees of freedom; only set for the F test.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub df_denom: Option<f64>,
    pub p_value: f64,
    pub alternative: Alternative,
    pub method: Method,
    /// Set when the inputs are degenerate (e.g. identical residual vectors)
    /// and the null holds trivially rather than by evidence.
    #[serde(default)]
    pub degenerate: bool,
}

impl TestResult {
    fn from_t_statistic(
        statistic: f64,
        df: f64,
        alternative: Alternative,
        method: Method,
    ) -> Result<Self> {
        let cdf = student_t_cdf(statistic, df)?;
        let p_value = match alternative {
            Alternative::TwoSided => (2.0 * cdf.min(1.0 - cdf)).min(1.0),
            Alternative::Greater => 1.0 - cdf,
            Alternative::Less => cdf,
        };
        Ok(TestResult {
            statistic,
            df,
            df_denom: None,
            p_value,
            alternative,
            method,
            degenerate: false,
        })
    }
}

/// Empirical Pearson correlation of two vectors.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::SampleTooSmall { n: x.len(), min: 3 });
    }
    if !all_finite(x) || !all_finite(y) {
        return Err(Error::NonFinite {
            context: "correlation input",
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample {
            context: "constant vector has no defined correlation",
        });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation t statistic: rho * sqrt((n - 2) / (1 - rho^2)).
pub fn mp_statistic(rho_hat: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    if rho_hat.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation);
    }
    Ok(rho_hat * ((n as f64 - 2.0) / (1.0 - rho_hat * rho_hat)).sqrt())
}

/// Classic Morgan-Pitman test: correlation of U and V referred to a
/// Student t distribution with n - 2 degrees of freedom.
pub fn classic_mp_test(sample: &PairedSample, alternative: Alternative) -> Result<TestResult> {
    let UvPair { u, v } = uv_transform(sample);
    if is_constant(&u) || is_constant(&v) {
        return Err(Error::DegenerateSample {
            context: "U or V is constant; the correlation test is undefined",
        });
    }
    let rho = pearson_corr(&u, &v)?;
    let statistic = mp_statistic(rho, sample.len())?;
    TestResult::from_t_statistic(
        statistic,
        (sample.len() - 2) as f64,
        alternative,
        Method::ClassicMp,
    )
}

/// Simple linear regression of `v` on `[1 | u]`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// (intercept, slope).
    pub beta_hat: [f64; 2],
    pub residuals: Vec<f64>,
    /// (M^t M)^{-1} for the two-column design.
    pub c_matrix: [[f64; 2]; 2],
    /// Centering statistics reused by the sandwich estimator.
    u_mean: f64,
    u_ss: f64,
}

/// Least-squares fit of v = b0 + b1 u. The 2x2 normal matrix is inverted in
/// closed form; centering u keeps the arithmetic stable.
pub fn ols_fit(u: &[f64], v: &[f64]) -> Result<OlsFit> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let n = u.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    if !all_finite(u) || !all_finite(v) {
        return Err(Error::NonFinite {
            context: "regression input",
        });
    }
    let u_mean = mean(u);
    let v_mean = mean(v);
    let mut u_ss = 0.0;
    let mut uv = 0.0;
    for (a, b) in u.iter().zip(v) {
        let du = a - u_mean;
        u_ss += du * du;
        uv += du * (b - v_mean);
    }
    let det = n as f64 * u_ss;
    if is_constant(u) || det.abs() <= 1e-300 {
        return Err(Error::SingularDesign);
    }
    let slope = uv / u_ss;
    let intercept = v_mean - slope * u_mean;
    let residuals = u
        .iter()
        .zip(v)
        .map(|(a, b)| b - intercept - slope * a)
        .collect();
    let c_matrix = [
        [1.0 / n as f64 + u_mean * u_mean / u_ss, -u_mean / u_ss],
        [-u_mean / u_ss, 1.0 / u_ss],
    ];
    Ok(OlsFit {
        beta_hat: [intercept, slope],
        residuals,
        c_matrix,
        u_mean,
        u_ss,
    })
}

/// The HC4 fit: OLS coefficients plus the leverage-discounted sandwich
/// covariance of the coefficient estimates.
#[derive(Debug, Clone)]
pub struct Hc4Fit {
    pub beta_hat: [f64; 2],
    pub residuals: Vec<f64>,
    pub leverages: Vec<f64>,
    pub mean_leverage: f64,
    pub discounts: Vec<f64>,
    /// The 2x2 sandwich covariance; the bottom-right entry is the squared
    /// standard error of the slope.
    pub s_matrix: [[f64; 2]; 2],
}

/// Threshold below 1 at which a leverage is treated as exactly 1 (the fit
/// interpolates that point and the discount weight blows up).
const LEVERAGE_ONE_TOL: f64 = 1e-12;

/// HC4 sandwich covariance for the regression of `v` on `[1 | u]`:
/// leverages h from the hat matrix, discount exponents d = min(4, h/mean(h)),
/// and S = C M^t diag(e^2 (1-h)^{-d}) M C.
pub fn hc4_covariance(u: &[f64], v: &[f64]) -> Result<Hc4Fit> {
    let ols = ols_fit(u, v)?;
    let n = u.len();
    let leverages: Vec<f64> = u
        .iter()
        .map(|a| {
            let du = a - ols.u_mean;
            1.0 / n as f64 + du * du / ols.u_ss
        })
        .collect();
    for (i, &h) in leverages.iter().enumerate() {
        if h >= 1.0 - LEVERAGE_ONE_TOL {
            return Err(Error::LeverageOne {
                index: i,
                leverage: h,
            });
        }
    }
    let mean_leverage = mean(&leverages);
    let discounts: Vec<f64> = leverages
        .iter()
        .map(|h| (h / mean_leverage).min(4.0))
        .collect();
    let s_matrix = sandwich(u, &ols, &leverages, &discounts);
    Ok(Hc4Fit {
        beta_hat: ols.beta_hat,
        residuals: ols.residuals,
        leverages,
        mean_leverage,
        discounts,
        s_matrix,
    })
}

/// C M^t Omega M C with Omega = diag(e_i^2 (1 - h_i)^{-d_i}). Exposed to the
/// unit tests so the discounts can be zeroed, which reduces the estimator to
/// White's HC0 form.
fn sandwich(u: &[f64], ols: &OlsFit, leverages: &[f64], discounts: &[f64]) -> [[f64; 2]; 2] {
    let mut a00 = 0.0;
    let mut a01 = 0.0;
    let mut a11 = 0.0;
    for i in 0..u.len() {
        let e = ols.residuals[i];
        let w = e * e * (1.0 - leverages[i]).powf(-discounts[i]);
        a00 += w;
        a01 += w * u[i];
        a11 += w * u[i] * u[i];
    }
    let a = [[a00, a01], [a01, a11]];
    let c = ols.c_matrix;
    let mut ca = [[0.0; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            ca[r][k] = c[r][0] * a[0][k] + c[r][1] * a[1][k];
        }
    }
    let mut s = [[0.0; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            s[r][k] = ca[r][0] * c[0][k] + ca[r][1] * c[1][k];
        }
    }
    s
}

/// HC4-robust Morgan-Pitman test: the slope of V on U divided by its HC4
/// standard error, referred to a Student t with n - 2 degrees of freedom.
///
/// Identical residual vectors (V constant while U varies) satisfy the null
/// trivially; that case returns p = 1 with the `degenerate` flag set instead
/// of an error so self-comparisons do not abort a pipeline.
pub fn mp_hc4_test(sample: &PairedSample, alternative: Alternative) -> Result<TestResult> {
    let UvPair { u, v } = uv_transform(sample);
    let n = sample.len();
    if is_constant(&u) {
        return Err(Error::SingularDesign);
    }
    if is_constant(&v) {
        return Ok(TestResult {
            statistic: 0.0,
            df: (n - 2) as f64,
            df_denom: None,
            p_value: 1.0,
            alternative,
            method: Method::Hc4Mp,
            degenerate: true,
        });
    }
    let fit = hc4_covariance(&u, &v)?;
    let se = fit.s_matrix[1][1].sqrt();
    let statistic = fit.beta_hat[1] / se;
    if statistic.is_nan() {
        // Slope and its variance both vanished: no evidence against the null.
        return Ok(TestResult {
            statistic: 0.0,
            df: (n - 2) as f64,
            df_denom: None,
            p_value: 1.0,
            alternative,
            method: Method::Hc4Mp,
            degenerate: true,
        });
    }
    TestResult::from_t_statistic(statistic, (n - 2) as f64, alternative, Method::Hc4Mp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::sample_variance;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn sample(x: &[f64], y: &[f64]) -> PairedSample {
        PairedSample::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn paired_sample_validates() {
        assert!(matches!(
            PairedSample::new(vec![1.0, 2.0], vec![1.0, 2.0, 3.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            PairedSample::new(vec![1.0, 2.0], vec![1.0, 2.0]),
            Err(Error::SampleTooSmall { .. })
        ));
        assert!(matches!(
            PairedSample::new(vec![1.0, f64::NAN, 2.0], vec![1.0, 2.0, 3.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn uv_transform_examples() {
        let s = sample(&[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0]);
        let uv = uv_transform(&s);
        assert_eq!(uv.u, vec![2.0, 4.0, 0.0]);
        assert_eq!(uv.v, vec![0.0, 0.0, 0.0]);

        let s = sample(&[3.0, -1.0, 2.0], &[1.0, 1.0, 1.0]);
        let uv = uv_transform(&s);
        assert_eq!(uv.u, vec![4.0, 0.0, 3.0]);
        assert_eq!(uv.v, vec![2.0, -2.0, 1.0]);
    }

    #[test]
    fn uv_identities_hold() {
        let mut rng = crate::util::stream_rng(7, 0);
        let x: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let s = sample(&x, &y);
        let uv = uv_transform(&s);
        for i in 0..50 {
            assert_abs_diff_eq!(uv.u[i] + uv.v[i], 2.0 * x[i], epsilon = 1e-12);
            assert_abs_diff_eq!(uv.u[i] - uv.v[i], 2.0 * y[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn pearson_corr_examples() {
        assert_abs_diff_eq!(
            pearson_corr(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(
            pearson_corr(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0
        );
        // Independent direct evaluation: sums of centered products give
        // 5.5 / sqrt(5 * 8.75).
        let expected = 5.5 / (5.0f64 * 8.75).sqrt();
        assert_abs_diff_eq!(
            pearson_corr(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0]).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 0.8315, epsilon = 5e-5);
    }

    #[test]
    fn pearson_corr_rejects_constants() {
        assert!(matches!(
            pearson_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateSample { .. })
        ));
    }

    #[test]
    fn mp_statistic_examples() {
        assert_eq!(mp_statistic(0.0, 10).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mp_statistic(0.5, 102).unwrap(),
            0.5 * (100.0f64 / 0.75).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(mp_statistic(0.5, 102).unwrap(), 5.7735, epsilon = 5e-5);
        assert!(matches!(
            mp_statistic(1.0, 50),
            Err(Error::DegenerateCorrelation)
        ));
        assert!(matches!(
            mp_statistic(0.2, 2),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn classic_test_rejects_shifted_copy() {
        let x = [1.0, 2.0, 5.0, -1.0];
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let s = sample(&x, &y);
        assert!(matches!(
            classic_mp_test(&s, Alternative::TwoSided),
            Err(Error::DegenerateSample { .. })
        ));
    }

    #[test]
    fn two_sided_p_uses_min_tail_rule() {
        let mut rng = crate::util::stream_rng(3, 0);
        let x: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..40).map(|_| 2.0 * (rng.random::<f64>() - 0.5)).collect();
        let s = sample(&x, &y);
        let r = classic_mp_test(&s, Alternative::TwoSided).unwrap();
        let cdf = student_t_cdf(r.statistic, r.df).unwrap();
        assert_abs_diff_eq!(r.p_value, 2.0 * cdf.min(1.0 - cdf), epsilon = 1e-15);
        // One-sided halves must partition the two-sided value.
        let lo = classic_mp_test(&s, Alternative::Less).unwrap();
        let hi = classic_mp_test(&s, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(lo.p_value + hi.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn greater_alternative_tracks_larger_x_variance() {
        let mut rng = crate::util::stream_rng(11, 0);
        let x: Vec<f64> = (0..500).map(|_| 3.0 * (rng.random::<f64>() - 0.5)).collect();
        let y: Vec<f64> = (0..500).map(|_| rng.random::<f64>() - 0.5).collect();
        let s = sample(&x, &y);
        let r = classic_mp_test(&s, Alternative::Greater).unwrap();
        assert!(r.statistic > 0.0);
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
        let r4 = mp_hc4_test(&s, Alternative::Greater).unwrap();
        assert!(r4.statistic > 0.0);
        assert!(r4.p_value < 0.01, "p = {}", r4.p_value);
    }

    #[test]
    fn corr_sign_matches_variance_difference() {
        let mut rng = crate::util::stream_rng(5, 0);
        for _ in 0..50 {
            let scale: f64 = rng.random::<f64>() * 2.0 + 0.1;
            let x: Vec<f64> = (0..30).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..30)
                .map(|_| scale * (rng.random::<f64>() - 0.5))
                .collect();
            let s = sample(&x, &y);
            let uv = uv_transform(&s);
            let rho = pearson_corr(&uv.u, &uv.v).unwrap();
            let var_diff = sample_variance(&x) - sample_variance(&y);
            assert_eq!(rho.signum(), var_diff.signum());
        }
    }

    #[test]
    fn ols_recovers_exact_line() {
        let u = [0.0, 1.0, 2.0, 3.0];
        let v: Vec<f64> = u.iter().map(|x| 2.0 + 3.0 * x).collect();
        let fit = ols_fit(&u, &v).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta_hat[1], 3.0, epsilon = 1e-12);
        for r in &fit.residuals {
            assert_abs_diff_eq!(*r, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ols_three_point_hand_case() {
        // Two symmetric points on the axis plus (0, 3): mean 1, slope 0.
        let fit = ols_fit(&[-1.0, 1.0, 0.0], &[0.0, 0.0, 3.0]).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta_hat[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        let mut rng = crate::util::stream_rng(13, 0);
        let u: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 10.0).collect();
        let v: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 10.0).collect();
        let fit = ols_fit(&u, &v).unwrap();
        let dot1: f64 = fit.residuals.iter().sum();
        let dot_u: f64 = fit.residuals.iter().zip(&u).map(|(r, a)| r * a).sum();
        let scale = 100.0 * 10.0;
        assert!(dot1.abs() <= 1e-8 * scale);
        assert!(dot_u.abs() <= 1e-8 * scale);
    }

    #[test]
    fn ols_rejects_constant_regressor() {
        assert!(matches!(
            ols_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn leverages_hand_case() {
        let u = [-3.0, -1.0, 1.0, 3.0];
        let v = [0.5, -0.25, 1.0, 0.0];
        let fit = hc4_covariance(&u, &v).unwrap();
        let expect_h = [0.7, 0.3, 0.3, 0.7];
        for (h, e) in fit.leverages.iter().zip(expect_h) {
            assert_abs_diff_eq!(*h, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(fit.mean_leverage, 0.5, epsilon = 1e-12);
        let expect_d = [1.4, 0.6, 0.6, 1.4];
        for (d, e) in fit.discounts.iter().zip(expect_d) {
            assert_abs_diff_eq!(*d, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn leverages_sum_to_two() {
        let mut rng = crate::util::stream_rng(17, 0);
        for n in [3usize, 10, 57, 400] {
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let fit = hc4_covariance(&u, &v).unwrap();
            let total: f64 = fit.leverages.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(fit.mean_leverage, 2.0 / n as f64, epsilon = 1e-12);
            for &h in &fit.leverages {
                assert!(h > 0.0 && h < 1.0);
            }
            for &d in &fit.discounts {
                assert!(d > 0.0 && d <= 4.0);
            }
            assert!(fit.s_matrix[0][0] >= 0.0 && fit.s_matrix[1][1] >= 0.0);
            assert_abs_diff_eq!(fit.s_matrix[0][1], fit.s_matrix[1][0], epsilon = 1e-15);
        }
    }

    #[test]
    fn leverage_one_detected() {
        // Two coincident points at 0 put all the slope information on the
        // third point, whose leverage is exactly 1.
        assert!(matches!(
            hc4_covariance(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::LeverageOne { .. })
        ));
    }

    #[test]
    fn zero_discounts_reduce_to_hc0() {
        let mut rng = crate::util::stream_rng(19, 0);
        let n = 25;
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ols = ols_fit(&u, &v).unwrap();
        let fit = hc4_covariance(&u, &v).unwrap();
        let zeros = vec![0.0; n];
        let s0 = sandwich(&u, &ols, &fit.leverages, &zeros);

        // Direct HC0: C M^t diag(e^2) M C with raw sums.
        let nf = n as f64;
        let su: f64 = u.iter().sum();
        let suu: f64 = u.iter().map(|a| a * a).sum();
        let det = nf * suu - su * su;
        let c = [[suu / det, -su / det], [-su / det, nf / det]];
        let mut a = [[0.0f64; 2]; 2];
        for (e, ui) in ols.residuals.iter().zip(&u) {
            let w = e * e;
            a[0][0] += w;
            a[0][1] += w * ui;
            a[1][1] += w * ui * ui;
        }
        a[1][0] = a[0][1];
        let mut expect = [[0.0f64; 2]; 2];
        for r in 0..2 {
            for k in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        expect[r][k] += c[r][p] * a[p][q] * c[q][k];
                    }
                }
            }
        }
        for r in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(s0[r][k], expect[r][k], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn hc4_identical_inputs_are_degenerate() {
        let x = [0.3, -1.0, 2.5, 0.0];
        let s = sample(&x, &x);
        let r = mp_hc4_test(&s, Alternative::TwoSided).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn hc4_exchange_symmetry() {
        let mut rng = crate::util::stream_rng(23, 0);
        let x: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..60).map(|_| 3.0 * (rng.random::<f64>() - 0.5)).collect();
        let fwd = mp_hc4_test(&sample(&x, &y), Alternative::TwoSided).unwrap();
        let rev = mp_hc4_test(&sample(&y, &x), Alternative::TwoSided).unwrap();
        assert_abs_diff_eq!(fwd.p_value, rev.p_value, epsilon = 1e-10);
        assert_abs_diff_eq!(fwd.statistic, -rev.statistic, epsilon = 1e-10);
    }

    #[test]
    fn tests_are_scale_equivariant() {
        let mut rng = crate::util::stream_rng(29, 0);
        let x: Vec<f64> = (0..80).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = (0..80).map(|_| 1.5 * (rng.random::<f64>() - 0.5)).collect();
        let base_c = classic_mp_test(&sample(&x, &y), Alternative::TwoSided).unwrap();
        let base_h = mp_hc4_test(&sample(&x, &y), Alternative::TwoSided).unwrap();
        for scale in [1e-3, 0.5, -3.0, 7.0, 1e4] {
            let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let c = classic_mp_test(&sample(&xs, &ys), Alternative::TwoSided).unwrap();
            let h = mp_hc4_test(&sample(&xs, &ys), Alternative::TwoSided).unwrap();
            assert_relative_eq!(c.statistic, base_c.statistic, max_relative = 1e-10);
            assert_relative_eq!(h.statistic, base_h.statistic, max_relative = 1e-10);
        }
    }
}
