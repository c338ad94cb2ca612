//! One-way analysis of variance.

use crate::error::{Result, StatsError};
use crate::result::{notes, Df, Method, StatTestResult, Variant};
use crate::special::f_sf;

/// One-way ANOVA F test with df = (k - 1, N - k).
///
/// Zero within-group variance with nonzero between-group variance yields
/// F = +inf, p = 0 and `variant.infinite_statistic`; when both are zero the
/// result is F = 0, p = 1, flagged degenerate.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<StatTestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups {
            what: "one_way_anova",
            needed: 2,
            got: k,
        });
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    if groups.iter().flat_map(|g| g.iter()).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n <= k {
        return Err(StatsError::NoResidualDf { n, k });
    }
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand).powi(2);
        ssw += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let (d1, d2) = ((k - 1) as u64, (n - k) as u64);
    let msb = ssb / d1 as f64;
    let msw = ssw / d2 as f64;

    let mut variant = Variant::default();
    let scale = grand.abs().max(1.0);
    let within_zero = msw <= f64::EPSILON * scale * scale;
    let between_zero = msb <= f64::EPSILON * scale * scale;
    let (f, p, note) = if within_zero && between_zero {
        variant.degenerate = true;
        (0.0, 1.0, "degenerate: no variance")
    } else if within_zero {
        variant.infinite_statistic = true;
        (f64::INFINITY, 0.0, "zero within-group variance")
    } else {
        let f = msb / msw;
        (f, f_sf(f, d1 as f64, d2 as f64), "F distribution")
    };

    Ok(StatTestResult {
        method: Method::Anova,
        statistic: f,
        df: Some(Df::Two(d1, d2)),
        p_value: Some(p),
        n,
        variant,
        variant_notes: notes(&[note]),
    })
}
