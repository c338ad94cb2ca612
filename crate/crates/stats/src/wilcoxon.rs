//! Wilcoxon signed-rank test for paired samples.

use crate::error::{Result, StatsError};
use crate::rank::average_ranks;
use crate::result::{notes, Method, Mode, StatTestResult, TestOptions, Variant};
use crate::special::normal_sf;

/// Largest effective n for which `Mode::Auto` uses the exact distribution.
pub const EXACT_MAX_N: usize = 25;
/// Hard ceiling for the exact path (u128 counts of 2^n sign patterns).
const EXACT_LIMIT: usize = 120;

/// Two-sided Wilcoxon signed-rank test on `x - y`.
///
/// Zero differences are dropped, |d| is ranked with average ranks and the
/// statistic is W = min(W+, W-). Uses the continuity-corrected normal
/// approximation unless the exact distribution applies (see [`Mode`]).
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], opts: impl Into<TestOptions>) -> Result<StatTestResult> {
    let opts = opts.into();
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(StatsError::Empty("wilcoxon_signed_rank"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(StatTestResult {
            method: Method::WilcoxonSignedRank,
            statistic: 0.0,
            df: None,
            p_value: Some(1.0),
            n: 0,
            variant: Variant {
                degenerate: true,
                ..Variant::default()
            },
            variant_notes: "degenerate: all differences are zero".into(),
        });
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranking = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranking.ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);
    let ties = ranking.has_ties();
    let dropped = x.len() - n;

    let use_exact = match opts.mode {
        Mode::Exact => n <= EXACT_LIMIT,
        Mode::Auto => n <= EXACT_MAX_N && !ties,
        Mode::Approx => false,
    };

    let mut variant = Variant::default();
    let mut parts: Vec<String> = Vec::new();
    let p = if use_exact {
        variant.exact = true;
        parts.push(format!("exact distribution over 2^{n} sign patterns"));
        if ties {
            parts.push("midranks enumerated as doubled integers".into());
        }
        exact_p(&ranking.ranks, w)
    } else {
        if opts.mode == Mode::Exact {
            parts.push(format!("exact requested but n = {n} exceeds {EXACT_LIMIT}; normal approximation used"));
        }
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        if ties {
            var -= ranking.tie_term() / 48.0;
            variant.tie_correction = true;
        }
        let cc = if opts.continuity { 0.5 } else { 0.0 };
        variant.continuity_correction = opts.continuity;
        parts.push("normal approximation".into());
        if ties {
            parts.push("tie-corrected variance".into());
        }
        if opts.continuity {
            parts.push("continuity correction".into());
        }
        let z = ((w - mean).abs() - cc).max(0.0) / var.sqrt();
        (2.0 * normal_sf(z)).min(1.0)
    };
    if dropped > 0 {
        parts.push(format!("{dropped} zero differences dropped"));
    }
    let parts: Vec<&str> = parts.iter().map(String::as_str).collect();

    Ok(StatTestResult {
        method: Method::WilcoxonSignedRank,
        statistic: w,
        df: None,
        p_value: Some(p),
        n,
        variant,
        variant_notes: notes(&parts),
    })
}

/// Two-sided exact p-value: 2 · P(T ≤ w) under the sign-flip null, capped at 1.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    // doubled ranks are integers even with midranks
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u128; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    let target = (w * 2.0).round() as usize;
    let tail: u128 = counts[..=target.min(max)].iter().sum();
    let total = 2f64.powi(ranks.len() as i32);
    (2.0 * tail as f64 / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force: flip every subset of signs and count patterns at least as extreme.
    fn enumerate_p(diffs: &[f64]) -> f64 {
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let ranks = average_ranks(&abs).ranks;
        let n = diffs.len();
        let total: f64 = ranks.iter().sum();
        let observed = {
            let wp: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
            wp.min(total - wp)
        };
        let mut extreme = 0u64;
        for mask in 0u64..(1 << n) {
            let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if wp <= observed + 1e-9 {
                extreme += 1;
            }
        }
        (2.0 * extreme as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn five_positive_differences() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y, Mode::Auto).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.variant.exact);
        assert_eq!(r.p_value, Some(0.0625));
        assert_eq!(enumerate_p(&x), 0.0625);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let x = [3.0, 1.0, 4.0];
        let r = wilcoxon_signed_rank(&x, &x, Mode::Auto).unwrap();
        assert_eq!(r.p_value, Some(1.0));
        assert_eq!(r.statistic, 0.0);
        assert!(r.variant.degenerate);
    }

    #[test]
    fn six_years_one_sided_extreme() {
        let g = [4.5, 4.25, 4.0, 3.75, 3.5, 3.25];
        let n: Vec<f64> = g.iter().map(|v| v - 1.0).collect();
        let r = wilcoxon_signed_rank(&g, &n, Mode::Auto).unwrap();
        // all |d| tie at 1.0, so auto falls back to the approximation
        assert!(!r.variant.exact);
        let r = wilcoxon_signed_rank(&g, &n, Mode::Exact).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(2.0 / 64.0));
    }

    #[test]
    fn exact_matches_enumeration_with_zeros_and_ties() {
        let x = [1.2, 3.4, 2.0, 5.0, 0.5, 7.0, 1.0, 2.5];
        let y = [0.2, 3.4, 3.0, 2.0, 1.5, 4.0, 2.0, 0.5];
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
        let r = wilcoxon_signed_rank(&x, &y, Mode::Exact).unwrap();
        assert_eq!(r.n, 7);
        assert!((r.p() - enumerate_p(&diffs)).abs() < 1e-15);
    }

    #[test]
    fn swapping_arguments_is_symmetric() {
        let x = [1.0, 5.0, 2.5, 8.0, 3.3, 9.1];
        let y = [2.0, 1.0, 2.0, 3.0, 4.0, 1.5];
        for mode in [Mode::Auto, Mode::Approx, Mode::Exact] {
            let a = wilcoxon_signed_rank(&x, &y, mode).unwrap();
            let b = wilcoxon_signed_rank(&y, &x, mode).unwrap();
            assert_eq!(a.statistic, b.statistic);
            assert_eq!(a.p_value, b.p_value);
        }
    }

    #[test]
    fn approximation_matches_reference() {
        // scipy.stats.wilcoxon(x, y, correction=True, method="approx")
        let x: Vec<f64> = (1..=30).map(|i| (i as f64 * 1.7).sin() * 3.0 + 0.4).collect();
        let y = vec![0.0; 30];
        let r = wilcoxon_signed_rank(&x, &y, Mode::Auto).unwrap();
        assert!(!r.variant.exact);
        assert!(r.variant.continuity_correction);
        assert_eq!(r.statistic, 170.0);
        assert!((r.p() - 0.202_225_354_715_061_76).abs() < 1e-12, "{}", r.p());
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], Mode::Auto),
            Err(StatsError::LengthMismatch { .. })
        ));
        assert!(wilcoxon_signed_rank(&[], &[], Mode::Auto).is_err());
    }

    #[test]
    fn approximation_is_loose_for_two_pairs() {
        // n = 2: exact p = 0.5, continuity-corrected normal gives ~0.371
        let exact = wilcoxon_signed_rank(&[1.0, 2.0], &[0.0, 0.0], Mode::Exact).unwrap();
        let approx = wilcoxon_signed_rank(&[1.0, 2.0], &[0.0, 0.0], Mode::Approx).unwrap();
        assert_eq!(exact.p(), 0.5);
        assert!((exact.p() - approx.p()).abs() > 0.12);
    }
}
