//! Summary statistics over seeds and confidence-interval comparison.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub stdev: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean, sample deviation and `mean ± 1.96 s / sqrt(n)`. `None` on empty input.
pub fn summarize(values: &[f64]) -> Option<SummaryStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let stdev = variance.sqrt();
    let half = Z_95 * stdev / (n as f64).sqrt();
    Some(SummaryStats {
        n,
        mean,
        stdev,
        variance,
        // min/max keep ci_low <= mean <= ci_high through rounding.
        ci_low: (mean - half).min(mean),
        ci_high: (mean + half).max(mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `a.ci_high < b.ci_low`: A has the strictly lower interval.
    ADominates,
    BDominates,
    Overlap,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ADominates => "A_dominates",
            Verdict::BDominates => "B_dominates",
            Verdict::Overlap => "overlap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub verdict: Verdict,
    /// `a.mean - b.mean`.
    pub mean_difference: f64,
}

/// Lower is better: A dominates when its whole interval lies below B's.
pub fn compare(a: &SummaryStats, b: &SummaryStats) -> Comparison {
    let verdict = if a.ci_high < b.ci_low {
        Verdict::ADominates
    } else if b.ci_high < a.ci_low {
        Verdict::BDominates
    } else {
        Verdict::Overlap
    };
    Comparison {
        verdict,
        mean_difference: a.mean - b.mean,
    }
}
