use serde::Serialize;

use super::special::f_survival;
use super::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// Within-group variance was zero while group means differ: F is +∞ and p is 0.
    pub infinite_f: bool,
}

/// One-way ANOVA across `groups`.
pub fn anova_f(groups: &[Vec<f64>]) -> Result<AnovaResult, MetricError> {
    if groups.len() < 2 {
        return Err(MetricError::DegenerateInput("ANOVA needs at least two groups"));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(MetricError::DegenerateInput(
            "every ANOVA group needs at least two values",
        ));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand_mean = groups.iter().flatten().sum::<f64>() / n as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand_mean).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    if ss_between + ss_within == 0.0 {
        return Err(MetricError::DegenerateInput("all values are identical"));
    }

    let df_between = k - 1;
    let df_within = n - k;
    if ss_within == 0.0 {
        return Ok(AnovaResult {
            f: f64::INFINITY,
            p: 0.0,
            df_between,
            df_within,
            infinite_f: true,
        });
    }
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    Ok(AnovaResult {
        f,
        p: f_survival(f, df_between as f64, df_within as f64),
        df_between,
        df_within,
        infinite_f: false,
    })
}
