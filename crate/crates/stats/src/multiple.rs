/// Bonferroni adjustment: each p multiplied by the number of comparisons, capped at 1.
pub fn bonferroni(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len() as f64;
    p_values.iter().map(|p| (p * m).min(1.0)).collect()
}

/// Bonferroni adjustment for one p-value out of `m` comparisons.
pub fn bonferroni_one(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}
