//! Two-component model building: fit the occurrence, amount and single
//! models, combine `p_hat * mu_hat` with a coefficient-of-variation
//! adjustment, sweep the adjustment factor, and predict the product
//! model's composite performance from its parts.

use serde::{Deserialize, Serialize};

use crate::data::{ComponentView, SplitIndices, TabularDataset};
use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::learners::{self, FittedModel, KindTag, LearnerSpec};
use crate::report::{self, AnalysisReport, TableStatistics, REPORT_SCHEMA_VERSION};
use crate::stats::{self, coefficient_of_variation, mean, pearson};

/// The three models of the comparison: one for the composite target, one
/// per component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pipeline {
    pub zeta_hat: FittedModel,
    pub p_hat: FittedModel,
    pub mu_hat: FittedModel,
}

/// Fit the single model on all rows against `y`, the occurrence model on
/// all rows against `c`, and the amount model on the positive rows only —
/// predicting the conditional amount needs no selection correction.
pub fn fit_pipeline(
    dataset: &TabularDataset,
    view: &ComponentView,
    spec: &LearnerSpec,
) -> Result<Pipeline> {
    if view.a.len() < 2 * spec.min_leaf {
        return Err(Error::PositiveSubsetTooSmall {
            min: 2 * spec.min_leaf,
            got: view.a.len(),
        });
    }
    let zeta_hat = learners::fit(spec, &dataset.features, dataset.target(), KindTag::ZetaHat)?;
    let p_hat = learners::fit(spec, &dataset.features, &view.c, KindTag::PHat)?;
    let positive_features = dataset.features.select_rows(&view.positive_index);
    let mu_hat = learners::fit(spec, &positive_features, &view.a, KindTag::MuHat)?;
    Ok(Pipeline {
        zeta_hat,
        p_hat,
        mu_hat,
    })
}

/// A fitted occurrence/amount pair with its combination state: the
/// adjustment factor `s_ad` and the amount-model center `E[mu_hat]` taken
/// from a reference sample (training predictions by default).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoComponentModel {
    pub p_model: FittedModel,
    pub mu_model: FittedModel,
    pub s_ad: f64,
    pub mu_center: f64,
}

impl TwoComponentModel {
    /// Center the amount model on its mean prediction over the reference
    /// features (normally the full training set).
    pub fn new(
        p_model: FittedModel,
        mu_model: FittedModel,
        reference: &crate::data::FeatureMatrix,
    ) -> Result<Self> {
        let mu_center = mean(&learners::predict(&mu_model, reference)?);
        Ok(TwoComponentModel {
            p_model,
            mu_model,
            s_ad: 1.0,
            mu_center,
        })
    }

    /// `p_hat(x) * ((mu_hat(x) - mu_center) * s_ad + mu_center)` per row.
    pub fn combine(&self, features: &crate::data::FeatureMatrix) -> Result<Vec<f64>> {
        let p = learners::predict(&self.p_model, features)?;
        let mu = learners::predict(&self.mu_model, features)?;
        Ok(combine_values(&p, &mu, self.mu_center, self.s_ad))
    }
}

/// The combination formula on raw prediction vectors.
pub fn combine_values(p_pred: &[f64], mu_pred: &[f64], mu_center: f64, s_ad: f64) -> Vec<f64> {
    p_pred
        .iter()
        .zip(mu_pred)
        .map(|(&p, &m)| p * ((m - mu_center) * s_ad + mu_center))
        .collect()
}

/// Evenly spaced adjustment factors `start, start+step, ..., stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            start: 0.0,
            stop: 2.0,
            step: 0.05,
        }
    }
}

impl SweepGrid {
    pub fn values(&self) -> Vec<f64> {
        assert!(self.step > 0.0 && self.stop >= self.start, "bad sweep grid");
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Correlation of the adjusted product with the test target across a grid
/// of adjustment factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub correlations: Vec<f64>,
    /// Grid maximizer; ties break toward the smaller factor.
    pub best_s_ad: f64,
    pub best_correlation: f64,
    /// Correlation at `s_ad = 0`, i.e. of `p_hat` alone (up to the
    /// positive constant `mu_center`).
    pub cor_at_zero: f64,
    /// Correlation of the raw product (`s_ad = 1`).
    pub cor_at_one: f64,
    /// Correlation of the single model with the test target, when one was
    /// supplied.
    pub single_model_cor: Option<f64>,
}

/// Sweep on raw prediction vectors. Grid points are independent; the
/// result does not depend on evaluation order.
pub fn adjustment_sweep_values(
    p_pred: &[f64],
    mu_pred: &[f64],
    mu_center: f64,
    single_pred: Option<&[f64]>,
    y: &[f64],
    grid: &SweepGrid,
) -> Result<SweepResult> {
    let grid_values = grid.values();
    let cor_at = |s_ad: f64| -> Result<f64> {
        pearson(&combine_values(p_pred, mu_pred, mu_center, s_ad), y)
    };
    let correlations: Vec<f64> = exec::map_indexed(Mode::default(), grid_values.len(), |i| {
        cor_at(grid_values[i])
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, &c) in correlations.iter().enumerate() {
        if c > correlations[best] {
            best = i;
        }
    }
    let single_model_cor = match single_pred {
        Some(f) => Some(pearson(f, y)?),
        None => None,
    };
    Ok(SweepResult {
        best_s_ad: grid_values[best],
        best_correlation: correlations[best],
        grid: grid_values,
        correlations,
        cor_at_zero: cor_at(0.0)?,
        cor_at_one: cor_at(1.0)?,
        single_model_cor,
    })
}

/// Sweep a fitted pipeline on test data.
pub fn adjustment_sweep(
    pipeline: &Pipeline,
    mu_center: f64,
    test_features: &crate::data::FeatureMatrix,
    test_y: &[f64],
    grid: &SweepGrid,
) -> Result<SweepResult> {
    let p = learners::predict(&pipeline.p_hat, test_features)?;
    let mu = learners::predict(&pipeline.mu_hat, test_features)?;
    let zeta = learners::predict(&pipeline.zeta_hat, test_features)?;
    adjustment_sweep_values(&p, &mu, mu_center, Some(&zeta), test_y, grid)
}

/// The variance-component weights of a product model, driven by the
/// factors' coefficients of variation: `w_p : w_mu : w_pm` equals
/// `cv_p : cv_mu : cv_p*cv_mu`, normalized by the shared factor
/// `1 / sqrt(cv_p^2 + cv_mu^2 + cv_p^2 cv_mu^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductWeights {
    pub w_pm: f64,
    pub w_p: f64,
    pub w_mu: f64,
    pub shared_factor: f64,
}

pub fn product_weights(cv_p: f64, cv_mu: f64) -> ProductWeights {
    let shared_factor = 1.0 / (cv_p * cv_p + cv_mu * cv_mu + cv_p * cv_p * cv_mu * cv_mu).sqrt();
    ProductWeights {
        w_pm: cv_p * cv_mu * shared_factor,
        w_p: cv_p * shared_factor,
        w_mu: cv_mu * shared_factor,
        shared_factor,
    }
}

/// Transfer of one component model's quality to the composite target:
/// `Cor(f, target) * Cor(target, composite)`.
pub fn component_correlation_prediction(
    cor_model_target: f64,
    cor_target_composite: f64,
) -> Result<f64> {
    for v in [cor_model_target, cor_target_composite] {
        if v.abs() > 1.0 + 1e-12 {
            return Err(Error::OutOfRange(v));
        }
    }
    Ok(cor_model_target.clamp(-1.0, 1.0) * cor_target_composite.clamp(-1.0, 1.0))
}

/// Predicted correlation of the product model with the composite target
/// from component qualities, linear relation factors and the interaction
/// share.
pub fn product_correlation_prediction(
    weights: &ProductWeights,
    cor_p_hat_p: f64,
    cor_mu_hat_mu: f64,
    interaction_share: f64,
    cor_p_composite: f64,
    cor_mu_composite: f64,
) -> f64 {
    weights.w_pm * cor_p_hat_p * cor_mu_hat_mu * interaction_share
        + weights.w_p * cor_p_hat_p * cor_p_composite
        + weights.w_mu * cor_mu_hat_mu * cor_mu_composite
}

/// Whether diagnostics were computed against latent targets or observable
/// stand-ins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticsMode {
    Theoretical,
    /// Latents replaced by (c, a, y); correlations against observables are
    /// noisy proxies. In particular the amount-side linear relation factor
    /// degenerates to 1 because `y` equals `a` on the positive rows.
    Empirical,
}

/// Weight and interaction diagnostics of a product model, with the
/// predicted and observed composite correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub mode: DiagnosticsMode,
    pub w_pm: f64,
    pub w_p: f64,
    pub w_mu: f64,
    /// CV of the occurrence-model predictions.
    pub cv_p: f64,
    /// CV of the amount-model predictions.
    pub cv_mu: f64,
    /// Share of composite variation carried by the factor interaction.
    pub c_interaction: f64,
    pub cor_p_hat_target: f64,
    pub cor_mu_hat_target: f64,
    pub cor_p_composite: f64,
    pub cor_mu_composite: f64,
    pub predicted_product_cor: f64,
    pub observed_product_cor: f64,
    /// observed - predicted.
    pub r_residual: f64,
}

/// Interaction component of the composite's variation:
/// `Cov((p - E[p])(mu - E[mu]), pm) / (sd[p] sd[mu] sd[pm])`.
fn interaction_share(p: &[f64], mu: &[f64], pm: &[f64]) -> f64 {
    let mp = mean(p);
    let mm = mean(mu);
    let mpm = mean(pm);
    let n = p.len() as f64;
    let cov = stats::compensated_sum(
        p.iter()
            .zip(mu)
            .zip(pm)
            .map(|((&pi, &mi), &ci)| (pi - mp) * (mi - mm) * (ci - mpm)),
    ) / (n - 1.0);
    cov / (stats::sd(p) * stats::sd(mu) * stats::sd(pm))
}

fn assemble_diagnostics(
    mode: DiagnosticsMode,
    p_pred: &[f64],
    mu_pred: &[f64],
    cor_p_hat_target: f64,
    cor_mu_hat_target: f64,
    cor_p_composite: f64,
    cor_mu_composite: f64,
    c_interaction: f64,
    observed_product_cor: f64,
) -> Result<WeightDiagnostics> {
    let cv_p = coefficient_of_variation(p_pred)?;
    let cv_mu = coefficient_of_variation(mu_pred)?;
    if stats::variance(p_pred) <= 0.0 {
        return Err(Error::ZeroVariance("occurrence predictions"));
    }
    if stats::variance(mu_pred) <= 0.0 {
        return Err(Error::ZeroVariance("amount predictions"));
    }
    let weights = product_weights(cv_p, cv_mu);
    let predicted = product_correlation_prediction(
        &weights,
        cor_p_hat_target,
        cor_mu_hat_target,
        c_interaction,
        cor_p_composite,
        cor_mu_composite,
    );
    Ok(WeightDiagnostics {
        mode,
        w_pm: weights.w_pm,
        w_p: weights.w_p,
        w_mu: weights.w_mu,
        cv_p,
        cv_mu,
        c_interaction,
        cor_p_hat_target,
        cor_mu_hat_target,
        cor_p_composite,
        cor_mu_composite,
        predicted_product_cor: predicted,
        observed_product_cor,
        r_residual: observed_product_cor - predicted,
    })
}

/// Diagnostics against the true latents of a synthetic process.
pub fn weight_diagnostics(
    p_pred: &[f64],
    mu_pred: &[f64],
    p_latent: &[f64],
    mu_latent: &[f64],
) -> Result<WeightDiagnostics> {
    let composite: Vec<f64> = p_latent.iter().zip(mu_latent).map(|(&p, &m)| p * m).collect();
    let product: Vec<f64> = p_pred.iter().zip(mu_pred).map(|(&p, &m)| p * m).collect();
    assemble_diagnostics(
        DiagnosticsMode::Theoretical,
        p_pred,
        mu_pred,
        pearson(p_pred, p_latent)?,
        pearson(mu_pred, mu_latent)?,
        pearson(p_latent, &composite)?,
        pearson(mu_latent, &composite)?,
        interaction_share(p_latent, mu_latent, &composite),
        pearson(&product, &composite)?,
    )
}

/// Diagnostics on real data: latents are replaced by the observables
/// `(c, a, y)` and flagged as plug-ins. The interaction share uses the
/// independent-factor closed form from the observable CVs, since the
/// amount is only seen where the occurrence fired.
pub fn weight_diagnostics_empirical(
    p_pred: &[f64],
    mu_pred: &[f64],
    c: &[f64],
    y: &[f64],
) -> Result<WeightDiagnostics> {
    if p_pred.len() != c.len() || mu_pred.len() != c.len() || y.len() != c.len() {
        return Err(Error::LengthMismatch(p_pred.len(), c.len()));
    }
    let positive: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
    if positive.len() < 2 {
        return Err(Error::EmptyPositiveSubset);
    }
    let a: Vec<f64> = positive.iter().map(|&i| y[i]).collect();
    let mu_pred_pos: Vec<f64> = positive.iter().map(|&i| mu_pred[i]).collect();
    let y_pos: Vec<f64> = a.clone();

    let cv_c = coefficient_of_variation(c)?;
    let cv_a = coefficient_of_variation(&a)?;
    let c_interaction = cv_c * cv_a / (cv_c * cv_c + cv_a * cv_a + cv_c * cv_c * cv_a * cv_a).sqrt();

    let product: Vec<f64> = p_pred.iter().zip(mu_pred).map(|(&p, &m)| p * m).collect();
    assemble_diagnostics(
        DiagnosticsMode::Empirical,
        p_pred,
        mu_pred,
        pearson(p_pred, c)?,
        pearson(&mu_pred_pos, &a)?,
        pearson(c, y)?,
        pearson(&a, &y_pos).unwrap_or(1.0), // identically 1: y = a on these rows
        c_interaction,
        pearson(&product, y)?,
    )
}

/// Fit, predict, and collect the benchmark statistics on the test split.
pub fn summary_report(
    dataset: &TabularDataset,
    view: &ComponentView,
    split: &SplitIndices,
    pipeline: &Pipeline,
    grid: &SweepGrid,
    train_fraction: f64,
) -> Result<AnalysisReport> {
    let train_features = dataset.features.select_rows(&split.train_rows);
    let test_features = dataset.features.select_rows(&split.test_rows);
    let y_test: Vec<f64> = split.test_rows.iter().map(|&i| dataset.target()[i]).collect();
    let c_test: Vec<f64> = split.test_rows.iter().map(|&i| view.c[i]).collect();

    let p_pred = learners::predict(&pipeline.p_hat, &test_features)?;
    let mu_pred = learners::predict(&pipeline.mu_hat, &test_features)?;
    let zeta_pred = learners::predict(&pipeline.zeta_hat, &test_features)?;
    let product: Vec<f64> = p_pred.iter().zip(&mu_pred).map(|(&p, &m)| p * m).collect();

    let positive: Vec<usize> = (0..c_test.len()).filter(|&i| c_test[i] > 0.0).collect();
    let a_test: Vec<f64> = positive.iter().map(|&i| y_test[i]).collect();
    let mu_pred_pos: Vec<f64> = positive.iter().map(|&i| mu_pred[i]).collect();

    let table = TableStatistics {
        cor_y_c: pearson(&y_test, &c_test)?,
        cor_p_hat_c: pearson(&p_pred, &c_test)?,
        cor_mu_hat_a: pearson(&mu_pred_pos, &a_test)?,
        cor_p_hat_y: pearson(&p_pred, &y_test)?,
        cor_product_y: pearson(&product, &y_test)?,
        cor_single_y: pearson(&zeta_pred, &y_test)?,
    };

    let mu_center = mean(&learners::predict(&pipeline.mu_hat, &train_features)?);
    let sweep = adjustment_sweep_values(
        &p_pred,
        &mu_pred,
        mu_center,
        Some(&zeta_pred),
        &y_test,
        grid,
    )?;
    let diagnostics = weight_diagnostics_empirical(&p_pred, &mu_pred, &c_test, &y_test)?;

    Ok(AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: report::tool_version(),
        generated_at_unix: report::unix_now(),
        dataset: dataset.name.clone(),
        rows: dataset.n_rows(),
        zero_share: view.zero_share,
        learner: pipeline.p_hat.spec.clone(),
        train_fraction,
        split_seed: split.seed,
        train_rows: split.train_rows.len(),
        test_rows: split.test_rows.len(),
        table,
        sweep,
        sweep_selection: "best_s_ad maximizes test-split correlation; diagnostic, in-sample-of-test"
            .to_owned(),
        diagnostics,
    })
}

/// Honest adjustment-factor selection for deployment: k-fold
/// cross-validation inside the training rows, refitting the component
/// models per fold and averaging the sweep curves.
pub fn select_s_ad_by_cross_validation(
    dataset: &TabularDataset,
    split: &SplitIndices,
    spec: &LearnerSpec,
    grid: &SweepGrid,
    folds: usize,
) -> Result<(f64, Vec<f64>)> {
    assert!(folds >= 2, "need at least two folds");
    let grid_values = grid.values();
    let mut sums = vec![0.0; grid_values.len()];
    for fold in 0..folds {
        let hold: Vec<usize> = split
            .train_rows
            .iter()
            .copied()
            .skip(fold)
            .step_by(folds)
            .collect();
        let keep: Vec<usize> = split
            .train_rows
            .iter()
            .copied()
            .enumerate()
            .filter(|(k, _)| k % folds != fold)
            .map(|(_, i)| i)
            .collect();
        let keep_y: Vec<f64> = keep.iter().map(|&i| dataset.target()[i]).collect();
        let sub =
            TabularDataset::new(dataset.name.clone(), dataset.features.select_rows(&keep), keep_y)?;
        let sub_view = crate::data::decompose(&sub);
        let pipeline = fit_pipeline(&sub, &sub_view, spec)?;
        let hold_features = dataset.features.select_rows(&hold);
        let hold_y: Vec<f64> = hold.iter().map(|&i| dataset.target()[i]).collect();
        let mu_center = mean(&learners::predict(&pipeline.mu_hat, &sub.features)?);
        let p = learners::predict(&pipeline.p_hat, &hold_features)?;
        let mu = learners::predict(&pipeline.mu_hat, &hold_features)?;
        let sweep = adjustment_sweep_values(&p, &mu, mu_center, None, &hold_y, grid)?;
        for (s, c) in sums.iter_mut().zip(&sweep.correlations) {
            *s += c / folds as f64;
        }
    }
    let mut best = 0;
    for (i, &c) in sums.iter().enumerate() {
        if c > sums[best] {
            best = i;
        }
    }
    Ok((grid_values[best], sums))
}
