//! Two-sample similarity testing for count vectors.
//!
//! The decision primitive of the whole harness: are two observed count
//! vectors drawn from the same underlying distribution? Verdicts come from
//! the chi-squared two-sample (dataset comparison) statistic with a
//! hand-rolled regularized incomplete gamma function for p-values, so the
//! crate stays `no_std`-friendly and byte-reproducible.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ValueCounts;

/// Convergence threshold for the incomplete gamma series and continued
/// fraction. Results are accurate to well under 1e-10 absolute error.
const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 1000;
/// Guard against division by zero in the Lentz continued fraction.
const FPMIN: f64 = 1e-300;

/// Outcome of one similarity comparison, with everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVerdict {
    pub similar: bool,
    pub statistic: f64,
    pub degrees_of_freedom: u32,
    pub p_value: f64,
    pub alpha: f64,
    /// Value labels dropped because both samples observed zero of them.
    pub dropped_categories: Vec<String>,
}

/// Chi-squared two-sample statistic for comparing two count vectors over the
/// same attribute, without assuming equal totals.
///
/// With totals `N1` and `N2`, each retained category contributes
///
/// ```text
/// (sqrt(N2/N1) * c1[i] - sqrt(N1/N2) * c2[i])^2 / (c1[i] + c2[i])
/// ```
///
/// Categories where both samples count zero carry no information and are
/// dropped before computing degrees of freedom, which are `k - 1` for `k`
/// retained categories.
///
/// Returns `(statistic, degrees_of_freedom, dropped_labels)`.
pub fn chi_square_statistic(
    c1: &ValueCounts,
    c2: &ValueCounts,
) -> Result<(f64, u32, Vec<String>), StatsError> {
    if c1.attribute != c2.attribute {
        return Err(StatsError::AttributeMismatch {
            left: c1.attribute.name.clone(),
            right: c2.attribute.name.clone(),
        });
    }
    let n1 = c1.total();
    let n2 = c2.total();
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::ZeroTotal);
    }

    let ratio = n2 as f64 / n1 as f64;
    let r1 = libm::sqrt(ratio);
    let r2 = libm::sqrt(1.0 / ratio);

    let mut statistic = 0.0;
    let mut retained = 0u32;
    let mut dropped = Vec::new();
    for (i, label) in c1.attribute.values.iter().enumerate() {
        let a = c1.counts[i];
        let b = c2.counts[i];
        if a == 0 && b == 0 {
            dropped.push(label.clone());
            continue;
        }
        retained += 1;
        let diff = r1 * a as f64 - r2 * b as f64;
        statistic += diff * diff / (a + b) as f64;
    }
    // totals are positive, so at least one category was retained
    debug_assert!(retained >= 1);
    Ok((statistic, retained - 1, dropped))
}

/// Upper-tail p-value of `statistic` under the chi-squared distribution with
/// `df` degrees of freedom: `Q(df / 2, statistic / 2)`.
pub fn p_value(statistic: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDegreesOfFreedom);
    }
    if statistic.is_nan() || statistic < 0.0 {
        return Err(StatsError::NegativeStatistic(statistic));
    }
    regularized_gamma_q(f64::from(df) / 2.0, statistic / 2.0)
}

/// Compares two count vectors at significance level `alpha` (exclusive in
/// `(0, 1)`). Similar means `p > alpha`.
///
/// A degenerate comparison where only one category survives the drop rule
/// has zero degrees of freedom and a statistic of exactly zero; both sides
/// put everything in the same single category, so the verdict is similar
/// with a p-value of 1.
pub fn similar(
    c1: &ValueCounts,
    c2: &ValueCounts,
    alpha: f64,
) -> Result<SimilarityVerdict, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    let (statistic, degrees_of_freedom, dropped_categories) = chi_square_statistic(c1, c2)?;
    let p = if degrees_of_freedom == 0 { 1.0 } else { p_value(statistic, degrees_of_freedom)? };
    Ok(SimilarityVerdict {
        similar: p > alpha,
        statistic,
        degrees_of_freedom,
        p_value: p,
        alpha,
        dropped_categories,
    })
}

/// A pluggable two-sample similarity decision.
pub trait SimilarityTest {
    /// Stable identifier recorded in reports.
    fn name(&self) -> &'static str;

    fn compare(
        &self,
        c1: &ValueCounts,
        c2: &ValueCounts,
        alpha: f64,
    ) -> Result<SimilarityVerdict, StatsError>;
}

/// The default similarity test.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiSquaredTwoSample;

impl SimilarityTest for ChiSquaredTwoSample {
    fn name(&self) -> &'static str {
        "chi-squared-two-sample"
    }

    fn compare(
        &self,
        c1: &ValueCounts,
        c2: &ValueCounts,
        alpha: f64,
    ) -> Result<SimilarityVerdict, StatsError> {
        similar(c1, c2, alpha)
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64, StatsError> {
    check_gamma_domain(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        Ok(1.0 - gamma_q_continued_fraction(a, x)?)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
///
/// Uses the series expansion for `x < a + 1` and the Lentz continued
/// fraction otherwise, each evaluated in the region where it converges
/// fastest, following the classic numerical-recipes split.
pub fn regularized_gamma_q(a: f64, x: f64) -> Result<f64, StatsError> {
    check_gamma_domain(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - gamma_p_series(a, x)?)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn check_gamma_domain(a: f64, x: f64) -> Result<(), StatsError> {
    if !a.is_finite() || a <= 0.0 || !x.is_finite() || x < 0.0 {
        return Err(StatsError::GammaDomain { a, x });
    }
    Ok(())
}

/// `exp(-x + a ln x - ln Gamma(a))`, the prefactor shared by both expansions.
fn gamma_prefactor(a: f64, x: f64) -> f64 {
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

/// Series expansion of `P(a, x)`: converges quickly for `x < a + 1`.
fn gamma_p_series(a: f64, x: f64) -> Result<f64, StatsError> {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if libm::fabs(del) < libm::fabs(sum) * GAMMA_EPS {
            return Ok(sum * gamma_prefactor(a, x));
        }
    }
    Err(StatsError::GammaNoConvergence { a, x })
}

/// Modified Lentz evaluation of the continued fraction for `Q(a, x)`:
/// converges quickly for `x >= a + 1`.
fn gamma_q_continued_fraction(a: f64, x: f64) -> Result<f64, StatsError> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if libm::fabs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < GAMMA_EPS {
            return Ok(gamma_prefactor(a, x) * h);
        }
    }
    Err(StatsError::GammaNoConvergence { a, x })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    AttributeMismatch { left: String, right: String },
    ZeroTotal,
    ZeroDegreesOfFreedom,
    NegativeStatistic(f64),
    InvalidAlpha(f64),
    GammaDomain { a: f64, x: f64 },
    GammaNoConvergence { a: f64, x: f64 },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::AttributeMismatch { left, right } => {
                write!(f, "cannot compare counts over attributes {left:?} and {right:?}")
            }
            StatsError::ZeroTotal => write!(f, "both samples must have a positive total count"),
            StatsError::ZeroDegreesOfFreedom => {
                write!(f, "p-value undefined at zero degrees of freedom")
            }
            StatsError::NegativeStatistic(s) => write!(f, "negative test statistic {s}"),
            StatsError::InvalidAlpha(a) => {
                write!(f, "significance level {a} outside the open interval (0, 1)")
            }
            StatsError::GammaDomain { a, x } => {
                write!(f, "incomplete gamma undefined for a={a}, x={x}")
            }
            StatsError::GammaNoConvergence { a, x } => {
                write!(f, "incomplete gamma failed to converge for a={a}, x={x}")
            }
        }
    }
}

impl core::error::Error for StatsError {}
