use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, mismatch, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "+")]
    Better,
    #[serde(rename = "-")]
    Worse,
    #[serde(rename = "=")]
    Equal,
}

impl Significance {
    pub fn symbol(self) -> char {
        match self {
            Self::Better => '+',
            Self::Worse => '-',
            Self::Equal => '=',
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// One-sided p-value for "a has lower errors than b".
    pub p_better: f64,
    /// One-sided p-value for "a has higher errors than b".
    pub p_worse: f64,
    pub outcome: Significance,
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.sf(t))
        .unwrap_or(f64::NAN)
}

/// One-sided paired t-test of `a` against `b` on matched errors.
///
/// Zero-variance differences are decided by the sign of their mean; all-zero
/// differences are `Equal`.
pub fn paired_ttest_onesided(errors_a: &[f64], errors_b: &[f64], alpha: f64) -> Result<TTest> {
    if errors_a.len() != errors_b.len() {
        return Err(mismatch(format!(
            "paired samples have lengths {} and {}",
            errors_a.len(),
            errors_b.len()
        )));
    }
    let n = errors_a.len();
    if n < 2 {
        return Err(invalid("paired t-test needs at least two pairs"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let d: Vec<f64> = errors_b.iter().zip(errors_a).map(|(b, a)| b - a).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let (t, p_better, p_worse, outcome) = if mean > 0.0 {
            (f64::INFINITY, 0.0, 1.0, Significance::Better)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0, 0.0, Significance::Worse)
        } else {
            (0.0, 0.5, 0.5, Significance::Equal)
        };
        return Ok(TTest { t, df, p_better, p_worse, outcome });
    }
    let t = mean / (var / n as f64).sqrt();
    let p_better = student_t_sf(t, df as f64);
    let p_worse = student_t_sf(-t, df as f64);
    let outcome = if p_better < alpha {
        Significance::Better
    } else if p_worse < alpha {
        Significance::Worse
    } else {
        Significance::Equal
    };
    Ok(TTest { t, df, p_better, p_worse, outcome })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(mismatch("labelings have different lengths"));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ca: HashMap<usize, usize> = HashMap::new();
    let mut cb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sa: f64 = ca.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cb.values().map(|&c| pairs(c)).sum();
    let expected = sa * sb / pairs(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
