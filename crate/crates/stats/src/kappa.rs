//! Cohen's kappa for two raters.

use std::collections::BTreeMap;

use crate::error::{Result, StatsError};
use crate::result::{notes, Method, StatTestResult, Variant};

/// Cohen's kappa from paired labels. The label set is the union of both raters.
pub fn cohen_kappa<L: Ord + Clone>(a: &[L], b: &[L]) -> Result<StatTestResult> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(StatsError::Empty("cohen_kappa"));
    }
    let mut index = BTreeMap::new();
    for l in a.iter().chain(b) {
        let next = index.len();
        index.entry(l.clone()).or_insert(next);
    }
    let k = index.len();
    let mut table = vec![vec![0u64; k]; k];
    for (x, y) in a.iter().zip(b) {
        table[index[x]][index[y]] += 1;
    }
    kappa_from_confusion(&table)
}

/// Cohen's kappa from a square confusion matrix (rows: rater A, columns: rater B).
pub fn kappa_from_confusion(table: &[Vec<u64>]) -> Result<StatTestResult> {
    let k = table.len();
    if let Some(row) = table.iter().find(|r| r.len() != k) {
        return Err(StatsError::LengthMismatch {
            left: k,
            right: row.len(),
        });
    }
    let total: u64 = table.iter().flatten().sum();
    if total == 0 {
        return Err(StatsError::Empty("kappa_from_confusion"));
    }
    let t = total as f64;
    let agree: u64 = (0..k).map(|i| table[i][i]).sum();
    let p_o = agree as f64 / t;
    let p_e: f64 = (0..k)
        .map(|i| {
            let row: u64 = table[i].iter().sum();
            let col: u64 = table.iter().map(|r| r[i]).sum();
            (row as f64 / t) * (col as f64 / t)
        })
        .sum();

    let mut variant = Variant::default();
    let (kappa, note) = if (1.0 - p_e).abs() < 1e-12 {
        variant.degenerate = true;
        let v = if agree == total { 1.0 } else { 0.0 };
        (v, "degenerate: chance agreement is 1")
    } else {
        ((p_o - p_e) / (1.0 - p_e), "observed vs chance agreement")
    };

    Ok(StatTestResult {
        method: Method::Kappa,
        statistic: kappa,
        df: None,
        p_value: None,
        n: total as usize,
        variant,
        variant_notes: notes(&[note]),
    })
}
