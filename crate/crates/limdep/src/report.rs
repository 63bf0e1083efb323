//! Serializable report schemas emitted by the analysis pipeline and the
//! identity verification suite.

use serde::{Deserialize, Serialize};

use crate::composer::{SweepResult, WeightDiagnostics};
use crate::learners::LearnerSpec;
use crate::synth::SyntheticSpec;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The per-dataset analysis summary: zero share, the six benchmark
/// correlations, the adjustment sweep, and empirical weight diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    /// Unix seconds; the only field that differs between identical runs.
    pub generated_at_unix: u64,
    pub dataset: String,
    pub rows: usize,
    pub zero_share: f64,
    pub learner: LearnerSpec,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub table: TableStatistics,
    pub sweep: SweepResult,
    /// The sweep's best adjustment factor is chosen on the test split;
    /// diagnostic only. Use cross-validated selection for deployment.
    pub sweep_selection: String,
    pub diagnostics: WeightDiagnostics,
}

/// Test-set correlations, one column per benchmark statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableStatistics {
    /// Cor(y, c): how much of the composite is just occurrence.
    pub cor_y_c: f64,
    /// Cor(p_hat, c)
    pub cor_p_hat_c: f64,
    /// Cor(mu_hat, a) on the positive test rows.
    pub cor_mu_hat_a: f64,
    /// Cor(p_hat, y)
    pub cor_p_hat_y: f64,
    /// Cor(p_hat * mu_hat, y)
    pub cor_product_y: f64,
    /// Cor(zeta_hat, y)
    pub cor_single_y: f64,
}

impl TableStatistics {
    pub fn all(&self) -> [f64; 6] {
        [
            self.cor_y_c,
            self.cor_p_hat_c,
            self.cor_mu_hat_a,
            self.cor_p_hat_y,
            self.cor_product_y,
            self.cor_single_y,
        ]
    }
}

/// One verified identity: its measured deviation against the tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Human-readable statement of what was compared.
    pub formula: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational checks (e.g. sign reports on dependent processes)
    /// never fail the suite.
    pub enforced: bool,
    pub n: usize,
    pub seed: u64,
}

/// Outcome of the Monte-Carlo identity suite on one generated population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub n: usize,
    pub seed: u64,
    pub spec: SyntheticSpec,
    pub checks: Vec<IdentityCheck>,
    pub warnings: Vec<String>,
    /// True iff every enforced check passed.
    pub pass: bool,
}

impl VerificationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| c.enforced && !c.pass)
    }
}

pub(crate) fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_owned()
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
