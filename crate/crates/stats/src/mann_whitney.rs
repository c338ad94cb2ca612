//! Mann-Whitney U test for two independent samples.

use crate::error::{Result, StatsError};
use crate::rank::average_ranks;
use crate::result::{notes, Method, Mode, StatTestResult, TestOptions, Variant};
use crate::special::normal_sf;

/// `Mode::Auto` uses the exact distribution when the smaller group has at
/// most this many observations and the pooled sample has no ties.
pub const EXACT_MAX_MIN_GROUP: usize = 8;
/// Pooled size above which forced-exact with ties falls back to the approximation.
const EXACT_TIES_LIMIT: usize = 200;

/// Two-sided Mann-Whitney U test. The reported statistic is min(U_a, U_b).
pub fn mann_whitney_u(a: &[f64], b: &[f64], opts: impl Into<TestOptions>) -> Result<StatTestResult> {
    let opts = opts.into();
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty("mann_whitney_u"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranking = average_ranks(&pooled);
    let rank_sum_a: f64 = ranking.ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let u = u_a.min(u_b);
    let ties = ranking.has_ties();

    let use_exact = match opts.mode {
        Mode::Exact => !ties || n <= EXACT_TIES_LIMIT,
        Mode::Auto => na.min(nb) <= EXACT_MAX_MIN_GROUP && !ties,
        Mode::Approx => false,
    };

    let mut variant = Variant::default();
    let mut parts: Vec<String> = Vec::new();
    let p = if use_exact {
        variant.exact = true;
        if ties {
            parts.push(format!("exact permutation distribution of midrank sums, C({n},{na}) splits"));
            exact_p_with_ties(&ranking.ranks, na, rank_sum_a)
        } else {
            parts.push(format!("exact distribution of U over C({n},{na}) rank splits"));
            exact_p_no_ties(na, nb, u)
        }
    } else {
        if opts.mode == Mode::Exact {
            parts.push(format!("exact requested but pooled n = {n} with ties exceeds {EXACT_TIES_LIMIT}"));
        }
        let nf = n as f64;
        let mean = (na * nb) as f64 / 2.0;
        let mut var = (na * nb) as f64 / 12.0 * (nf + 1.0);
        if ties {
            var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - ranking.tie_term() / (nf * (nf - 1.0)));
            variant.tie_correction = true;
        }
        parts.push("normal approximation".into());
        if ties {
            parts.push("tie-corrected variance".into());
        }
        if var <= 0.0 {
            variant.degenerate = true;
            parts.push("degenerate: all observations tied".into());
            1.0
        } else {
            let cc = if opts.continuity { 0.5 } else { 0.0 };
            variant.continuity_correction = opts.continuity;
            if opts.continuity {
                parts.push("continuity correction".into());
            }
            let z = ((u - mean).abs() - cc).max(0.0) / var.sqrt();
            (2.0 * normal_sf(z)).min(1.0)
        }
    };
    let parts: Vec<&str> = parts.iter().map(String::as_str).collect();

    Ok(StatTestResult {
        method: Method::MannWhitney,
        statistic: u,
        df: None,
        p_value: Some(p),
        n,
        variant,
        variant_notes: notes(&parts),
    })
}

/// Counts of U = 0..=m·n over all C(m+n, m) arrangements of distinct values.
///
/// Recurrence f(m, n; u) = f(m-1, n; u-n) + f(m, n-1; u), swept over n.
pub fn u_distribution(m: usize, n: usize) -> Vec<u128> {
    let (m, n) = if m <= n { (m, n) } else { (n, m) };
    let width = m * n + 1;
    // rows[i] holds f(i, j; ·) for the current j
    let mut rows = vec![vec![0u128; width]; m + 1];
    for row in rows.iter_mut() {
        row[0] = 1;
    }
    for j in 1..=n {
        for i in 1..=m {
            let (lo, hi) = rows.split_at_mut(i);
            let prev = &lo[i - 1];
            let cur = &mut hi[0];
            for u in (j..width).rev() {
                cur[u] += prev[u - j];
            }
        }
    }
    rows.swap_remove(m)
}

fn exact_p_no_ties(na: usize, nb: usize, u: f64) -> f64 {
    let counts = u_distribution(na, nb);
    let total: u128 = counts.iter().sum();
    let u = u.round() as usize;
    let tail: u128 = counts[..=u].iter().sum();
    (2.0 * tail as f64 / total as f64).min(1.0)
}

/// Exact two-sided p for rank sums when midranks are present: enumerate the
/// distribution of the doubled rank sum of a size-`na` subset.
fn exact_p_with_ties(ranks: &[f64], na: usize, rank_sum_a: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // dp[k][s]: number of k-subsets with doubled sum s
    let mut dp = vec![vec![0u128; max + 1]; na + 1];
    dp[0][0] = 1;
    for (seen, &r) in doubled.iter().enumerate() {
        for k in (1..=na.min(seen + 1)).rev() {
            let (lo, hi) = dp.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (r..=max).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &dp[na];
    let total: u128 = dist.iter().sum();
    let obs = (rank_sum_a * 2.0).round() as usize;
    let lower: u128 = dist[..=obs].iter().sum();
    let upper: u128 = dist[obs..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over every way of choosing which pooled ranks belong to `a`.
    fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let ranks = average_ranks(&pooled).ranks;
        let (na, n) = (a.len(), pooled.len());
        let u_of = |sum: f64| sum - (na * (na + 1)) as f64 / 2.0;
        let obs_u = {
            let ua = u_of(ranks[..na].iter().sum());
            ua.min((na * b.len()) as f64 - ua)
        };
        let (mut extreme, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            total += 1;
            let ua = u_of((0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum());
            if ua <= obs_u + 1e-9 {
                extreme += 1;
            }
        }
        (2.0 * extreme as f64 / total as f64).min(1.0)
    }

    #[test]
    fn fully_separated_pairs() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Mode::Auto).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.variant.exact);
        assert!((r.p() - 1.0 / 3.0).abs() < 1e-15);
        assert!((enumerate_p(&[1.0, 2.0], &[3.0, 4.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_multisets_center_u() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &a, Mode::Auto).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert!(r.p() > 0.95);
    }

    #[test]
    fn distribution_counts_sum_to_binomial() {
        let counts = u_distribution(3, 5);
        assert_eq!(counts.iter().sum::<u128>(), 56);
        assert_eq!(counts.len(), 16);
        // symmetric about m·n/2
        for u in 0..counts.len() {
            assert_eq!(counts[u], counts[counts.len() - 1 - u]);
        }
    }

    #[test]
    fn exact_matches_enumeration() {
        let a = [0.3, 2.2, 5.1, 0.9, 3.3];
        let b = [1.7, 4.4, 6.0, 7.5, 2.9, 8.8];
        let r = mann_whitney_u(&a, &b, Mode::Exact).unwrap();
        assert!((r.p() - enumerate_p(&a, &b)).abs() < 1e-15);
        let a = [1.0, 2.0, 2.0, 5.0];
        let b = [2.0, 3.0, 5.0, 6.0, 7.0];
        let r = mann_whitney_u(&a, &b, Mode::Exact).unwrap();
        assert!(r.variant.exact);
        let brute = enumerate_p(&a, &b);
        assert!((r.p() - brute).abs() < 1e-12, "{} vs {}", r.p(), brute);
    }

    #[test]
    fn tie_corrected_approximation_matches_reference() {
        // scipy.stats.mannwhitneyu(..., method="asymptotic", use_continuity=True)
        let a = [1.5, 2.7, 3.1, 4.8, 5.0, 6.2, 7.7, 8.1, 9.9, 10.4, 11.0, 12.5];
        let b = [3.3, 4.4, 5.5, 6.6, 7.7, 8.8, 9.9, 10.1, 12.0, 13.3, 14.2, 15.0, 16.1];
        let r = mann_whitney_u(&a, &b, Mode::Auto).unwrap();
        assert!(!r.variant.exact && r.variant.tie_correction && r.variant.continuity_correction);
        assert_eq!(r.statistic, 48.0);
        assert!((r.p() - 0.108_448_483_934_24).abs() < 1e-12);
    }

    #[test]
    fn singleton_group_approximation_is_loose() {
        // one observation against two: exact p = 2/3, approximation ~0.54
        let exact = mann_whitney_u(&[1.0], &[2.0, 3.0], Mode::Exact).unwrap();
        let approx = mann_whitney_u(&[1.0], &[2.0, 3.0], Mode::Approx).unwrap();
        assert!((exact.p() - 2.0 / 3.0).abs() < 1e-15);
        assert!((exact.p() - approx.p()).abs() > 0.1);
    }

    #[test]
    fn all_tied_is_degenerate() {
        let r = mann_whitney_u(&[2.0; 12], &[2.0; 12], Mode::Approx).unwrap();
        assert_eq!(r.p_value, Some(1.0));
        assert!(r.variant.degenerate);
    }

    #[test]
    fn empty_group_is_error() {
        assert!(mann_whitney_u(&[], &[1.0], Mode::Auto).is_err());
    }
}
