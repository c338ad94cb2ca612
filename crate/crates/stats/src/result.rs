use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "wilcoxon_sr")]
    WilcoxonSignedRank,
    #[serde(rename = "mann_whitney")]
    MannWhitney,
    #[serde(rename = "kruskal_wallis")]
    KruskalWallis,
    #[serde(rename = "anova")]
    Anova,
    #[serde(rename = "kappa")]
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(u64),
    Two(u64, u64),
}

/// How to pick between the exact null distribution and the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Auto,
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestOptions {
    pub mode: Mode,
    /// Apply the ±0.5 continuity correction in normal approximations.
    pub continuity: bool,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Auto,
            continuity: true,
        }
    }
}

impl From<Mode> for TestOptions {
    fn from(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Which computational path produced a result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub exact: bool,
    pub tie_correction: bool,
    pub continuity_correction: bool,
    pub degenerate: bool,
    pub infinite_statistic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub method: Method,
    /// Not finite only when `variant.infinite_statistic` is set (ANOVA with
    /// zero within-group variance); serializes as `null` in that case.
    pub statistic: f64,
    pub df: Option<Df>,
    pub p_value: Option<f64>,
    /// Effective number of observations (pairs after dropping zero
    /// differences for Wilcoxon, pooled N otherwise).
    pub n: usize,
    pub variant: Variant,
    pub variant_notes: String,
}

impl StatTestResult {
    pub fn p(&self) -> f64 {
        self.p_value.unwrap_or(f64::NAN)
    }
}

pub(crate) fn notes(parts: &[&str]) -> String {
    parts.join("; ")
}
