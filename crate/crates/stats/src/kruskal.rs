//! Kruskal-Wallis H test for k independent groups.

use crate::error::{Result, StatsError};
use crate::rank::average_ranks;
use crate::result::{notes, Df, Method, StatTestResult, Variant};
use crate::special::chi2_sf;

/// Tie-corrected Kruskal-Wallis H with a chi-square(k - 1) p-value.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<StatTestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups {
            what: "kruskal_wallis",
            needed: 2,
            got: k,
        });
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = pooled.len();
    let nf = n as f64;
    let ranking = average_ranks(&pooled);
    let grand = (nf + 1.0) / 2.0;

    let mut offset = 0;
    let mut ss = 0.0;
    for g in groups {
        let sum: f64 = ranking.ranks[offset..offset + g.len()].iter().sum();
        let mean = sum / g.len() as f64;
        ss += g.len() as f64 * (mean - grand).powi(2);
        offset += g.len();
    }
    let h_raw = 12.0 / (nf * (nf + 1.0)) * ss;
    let c = 1.0 - ranking.tie_term() / (nf * nf * nf - nf);
    let df = (k - 1) as u64;

    let mut variant = Variant::default();
    let mut parts = vec!["chi-square approximation"];
    let (h, p) = if c <= 0.0 {
        variant.degenerate = true;
        parts.push("degenerate: all observations tied");
        (0.0, 1.0)
    } else {
        if ranking.has_ties() {
            variant.tie_correction = true;
            parts.push("tie-corrected");
        }
        let h = h_raw / c;
        (h, chi2_sf(h, df as f64))
    };

    Ok(StatTestResult {
        method: Method::KruskalWallis,
        statistic: h,
        df: Some(Df::One(df)),
        p_value: Some(p),
        n,
        variant,
        variant_notes: notes(&parts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_triplets() {
        let r = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]).unwrap();
        assert!((r.statistic - 7.2).abs() < 1e-12);
        assert_eq!(r.df, Some(Df::One(2)));
        assert!((r.p() - (-3.6f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn tie_correction_reference() {
        // scipy.stats.kruskal
        let a = [86.0, 77.0, 91.0, 69.0, 95.0, 84.0, 85.0, 85.0, 80.0, 90.0, 72.0, 86.0, 77.0, 86.0, 89.0];
        let b = [91.0, 86.0, 80.0, 66.0, 95.0, 91.0, 80.0, 86.0, 82.0, 95.0, 76.0, 83.0, 88.0, 92.0, 90.0];
        let c = [93.0, 81.0, 94.0, 90.0, 92.0, 90.0, 84.0, 92.0, 88.0, 93.0, 95.0, 86.0, 86.0, 95.0, 91.0];
        let r = kruskal_wallis(&[&a, &b, &c]).unwrap();
        assert!(r.variant.tie_correction);
        assert!((r.statistic - 7.582_8).abs() < 1e-3, "{}", r.statistic);
        assert!((r.p() - 0.022_56).abs() < 1e-4, "{}", r.p());
    }

    #[test]
    fn all_tied_is_degenerate() {
        let r = kruskal_wallis(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!(r.variant.degenerate);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(kruskal_wallis(&[&[1.0]]).is_err());
        assert_eq!(kruskal_wallis(&[&[1.0], &[]]).unwrap_err(), StatsError::EmptyGroup(1));
    }
}
