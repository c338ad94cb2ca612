//! Hypothesis tests used by the review-analysis pipeline.
//!
//! Each test returns a [`StatTestResult`] recording which computational
//! path was taken (exact or approximate, tie and continuity corrections).

pub mod anova;
pub mod error;
pub mod kappa;
pub mod kruskal;
pub mod mann_whitney;
pub mod multiple;
pub mod rank;
pub mod result;
pub mod special;
pub mod wilcoxon;

pub use anova::one_way_anova;
pub use error::{Result, StatsError};
pub use kappa::{cohen_kappa, kappa_from_confusion};
pub use kruskal::kruskal_wallis;
pub use mann_whitney::mann_whitney_u;
pub use multiple::{bonferroni, bonferroni_one};
pub use rank::{average_ranks, Ranking};
pub use result::{Df, Method, Mode, StatTestResult, TestOptions, Variant};
pub use wilcoxon::wilcoxon_signed_rank;
