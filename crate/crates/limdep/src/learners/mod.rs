//! Pluggable supervised learners behind one prediction contract: a bagged
//! regression-tree ensemble, trivial baselines, and an oracle learner that
//! replays the links of a synthetic population.

mod tree;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::synth::{LatentBase, SyntheticPopulation, SyntheticSpec};
use tree::{GrowParams, Tree};

/// Probability predictions are kept inside the open unit interval.
const P_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Forest,
    ConstantMean,
    LinearLeastSquares,
    Oracle,
}

/// What a model predicts: the composite target, the occurrence
/// probability, the conditional amount, or anything else.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindTag {
    ZetaHat,
    PHat,
    MuHat,
    Generic,
}

/// Learner configuration. `mtry = None` resolves at fit time to
/// `floor(sqrt(d))` for binary targets and `max(1, floor(d/3))` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    /// Bagging on bootstrap resamples; turn off to grow on the raw sample.
    pub bootstrap: bool,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            kind: LearnerKind::Forest,
            n_trees: 500,
            mtry: None,
            min_leaf: 5,
            max_depth: None,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl LearnerSpec {
    pub fn with_kind(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            ..LearnerSpec::default()
        }
    }

    fn resolve_mtry(&self, d: usize, binary_target: bool) -> Result<usize> {
        let mtry = match self.mtry {
            Some(m) => m,
            None if binary_target => ((d as f64).sqrt().floor() as usize).max(1),
            None => (d / 3).max(1),
        };
        if mtry == 0 || mtry > d {
            return Err(Error::InvalidLearnerSpec(format!(
                "mtry = {mtry} outside 1..={d}"
            )));
        }
        Ok(mtry)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum ModelState {
    ConstantMean {
        value: f64,
    },
    Linear {
        weights: Vec<f64>,
        intercept: f64,
    },
    Forest {
        trees: Vec<Tree>,
    },
    Oracle {
        which: LatentBase,
        links: SyntheticSpec,
    },
}

/// A trained predictor. Predictions are deterministic given the spec's
/// seed, the training data and the query points, independent of internal
/// parallelism.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub kind_tag: KindTag,
    pub training_rows: usize,
    n_features: usize,
    state: ModelState,
}

/// Train a model.
pub fn fit(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    target: &[f64],
    kind_tag: KindTag,
) -> Result<FittedModel> {
    fit_with_mode(spec, features, target, kind_tag, Mode::default())
}

pub fn fit_with_mode(
    spec: &LearnerSpec,
    features: &FeatureMatrix,
    target: &[f64],
    kind_tag: KindTag,
    mode: Mode,
) -> Result<FittedModel> {
    let n = target.len();
    if features.n_rows() != n {
        return Err(Error::LengthMismatch(features.n_rows(), n));
    }
    // min_leaf gates splitting, not fitting: a node smaller than
    // 2*min_leaf becomes a leaf, so `min_leaf >= n` yields the mean
    // predictor instead of an error
    if n < 2 {
        return Err(Error::TooFewRows { min: 2, got: n });
    }
    let d = features.n_cols();
    let state = match spec.kind {
        LearnerKind::ConstantMean => ModelState::ConstantMean {
            value: crate::stats::mean(target),
        },
        LearnerKind::LinearLeastSquares => {
            let (weights, intercept) = least_squares(features, target);
            ModelState::Linear { weights, intercept }
        }
        LearnerKind::Forest => {
            let first = target[0];
            if target.iter().all(|&t| t == first) {
                return Err(Error::ConstantTarget);
            }
            if d == 0 {
                return Err(Error::EmptyFeatureSet);
            }
            let binary = target.iter().all(|&t| t == 0.0 || t == 1.0);
            let mtry = spec.resolve_mtry(d, binary)?;
            let columns: Vec<&[f64]> = (0..d).map(|j| features.column(j)).collect();
            let params = GrowParams {
                mtry,
                min_leaf: spec.min_leaf,
                max_depth: spec.max_depth,
            };
            // one RNG stream per tree: build order and thread count cannot
            // change the forest
            let trees = exec::map_indexed(mode, spec.n_trees, |t| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if spec.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::grow(&columns, target, rows, &params, &mut rng)
            });
            ModelState::Forest { trees }
        }
        LearnerKind::Oracle => {
            return Err(Error::InvalidLearnerSpec(
                "oracle models are built with fit_oracle on a synthetic population".into(),
            ))
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        kind_tag,
        training_rows: n,
        n_features: d,
        state,
    })
}

/// A model whose predictions equal the true latent of the generating
/// process at any query point.
pub fn fit_oracle(population: &SyntheticPopulation, which: LatentBase) -> FittedModel {
    let kind_tag = match which {
        LatentBase::P => KindTag::PHat,
        LatentBase::Mu => KindTag::MuHat,
        LatentBase::Zeta => KindTag::ZetaHat,
    };
    FittedModel {
        spec: LearnerSpec::with_kind(LearnerKind::Oracle),
        kind_tag,
        training_rows: population.n(),
        n_features: population.spec.d,
        state: ModelState::Oracle {
            which,
            links: population.spec.clone(),
        },
    }
}

/// Predict on query features.
pub fn predict(model: &FittedModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    predict_with_mode(model, features, Mode::default())
}

pub fn predict_with_mode(
    model: &FittedModel,
    features: &FeatureMatrix,
    mode: Mode,
) -> Result<Vec<f64>> {
    if features.n_cols() != model.n_features {
        return Err(Error::SchemaMismatch {
            expected: model.n_features,
            got: features.n_cols(),
        });
    }
    let n = features.n_rows();
    let mut out = match &model.state {
        ModelState::ConstantMean { value } => vec![*value; n],
        ModelState::Linear { weights, intercept } => (0..n)
            .map(|i| {
                intercept
                    + weights
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * features.value(i, j))
                        .sum::<f64>()
            })
            .collect(),
        ModelState::Forest { trees } => {
            let inv = 1.0 / trees.len() as f64;
            exec::map_indexed(mode, n, |i| {
                let row = |j: usize| features.value(i, j);
                trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() * inv
            })
        }
        ModelState::Oracle { which, links } => {
            let lam = links.dependence;
            exec::map_indexed(mode, n, |i| {
                let mut up = links.p_link.intercept;
                let mut um = links.mu_link.intercept;
                for j in 0..links.d {
                    let v = features.value(i, j);
                    let s = lam * links.shared_index.get(j).copied().unwrap_or(0.0) * v;
                    up += links.p_link.beta[j] * v + links.shared_loading_p * s;
                    um += links.mu_link.beta[j] * v + links.shared_loading_mu * s;
                }
                let p = 1.0 / (1.0 + (-up).exp());
                match which {
                    LatentBase::P => p,
                    LatentBase::Mu => um.exp(),
                    LatentBase::Zeta => p * um.exp(),
                }
            })
        }
    };
    if model.kind_tag == KindTag::PHat {
        for v in &mut out {
            *v = v.clamp(P_CLAMP, 1.0 - P_CLAMP);
        }
    }
    Ok(out)
}

/// Ordinary least squares with intercept, solved by Gaussian elimination
/// on the (tiny-ridge regularized) normal equations.
fn least_squares(features: &FeatureMatrix, target: &[f64]) -> (Vec<f64>, f64) {
    let n = target.len();
    let d = features.n_cols();
    let k = d + 1; // intercept last
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    let col = |j: usize, i: usize| if j == d { 1.0 } else { features.value(i, j) };
    for i in 0..n {
        for r in 0..k {
            let xr = col(r, i);
            aty[r] += xr * target[i];
            for c in r..k {
                ata[r][c] += xr * col(c, i);
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            ata[r][c] = ata[c][r];
        }
        ata[r][r] += 1e-9;
    }
    // partial-pivot elimination
    for pivot in 0..k {
        let mut best = pivot;
        for r in pivot + 1..k {
            if ata[r][pivot].abs() > ata[best][pivot].abs() {
                best = r;
            }
        }
        ata.swap(pivot, best);
        aty.swap(pivot, best);
        let diag = ata[pivot][pivot];
        for r in pivot + 1..k {
            let factor = ata[r][pivot] / diag;
            for c in pivot..k {
                ata[r][c] -= factor * ata[pivot][c];
            }
            aty[r] -= factor * aty[pivot];
        }
    }
    let mut solution = vec![0.0; k];
    for r in (0..k).rev() {
        let mut acc = aty[r];
        for c in r + 1..k {
            acc -= ata[r][c] * solution[c];
        }
        solution[r] = acc / ata[r][r];
    }
    let intercept = solution[d];
    solution.truncate(d);
    (solution, intercept)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: FittedModel,
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// Persist a model as versioned JSON. Floating-point values use the
/// shortest round-trippable representation, so a reloaded model predicts
/// bit-identically.
pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    std::fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    let bytes = std::fs::read(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedModelVersion(file.format_version));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;
    use crate::synth::{self, AmountDist, LinkSpec};

    fn grid_features(n: usize) -> FeatureMatrix {
        FeatureMatrix::from_columns(vec![(0..n).map(|i| i as f64).collect()])
    }

    #[test]
    fn spec_defaults_match_contract() {
        let spec = LearnerSpec::default();
        assert_eq!(spec.n_trees, 500);
        assert_eq!(spec.min_leaf, 5);
        assert_eq!(spec.mtry, None);
        assert_eq!(spec.max_depth, None);
        assert!(spec.bootstrap);
        // mtry rules
        assert_eq!(spec.resolve_mtry(9, true).unwrap(), 3);
        assert_eq!(spec.resolve_mtry(9, false).unwrap(), 3);
        assert_eq!(spec.resolve_mtry(5, false).unwrap(), 1);
        assert_eq!(spec.resolve_mtry(5, true).unwrap(), 2);
        assert!(spec.resolve_mtry(0, false).is_err());
    }

    #[test]
    fn constant_mean_predicts_mean() {
        let spec = LearnerSpec {
            min_leaf: 1,
            ..LearnerSpec::with_kind(LearnerKind::ConstantMean)
        };
        let features = grid_features(3);
        let model = fit(&spec, &features, &[1.0, 2.0, 3.0], KindTag::Generic).unwrap();
        assert_eq!(predict(&model, &features).unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn single_leaf_forest_predicts_training_mean() {
        let n = 8;
        let spec = LearnerSpec {
            n_trees: 1,
            min_leaf: n,
            bootstrap: false,
            ..LearnerSpec::default()
        };
        let features = grid_features(n);
        let target: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        let mean = crate::stats::mean(&target);
        assert!(predict(&model, &features)
            .unwrap()
            .iter()
            .all(|&v| v == mean));
    }

    #[test]
    fn deep_tree_memorizes_training_rows() {
        let n = 64;
        let spec = LearnerSpec {
            n_trees: 1,
            min_leaf: 1,
            mtry: Some(1),
            bootstrap: false,
            ..LearnerSpec::default()
        };
        let features = grid_features(n);
        let target: Vec<f64> = (0..n).map(|i| ((i * 37) % 19) as f64).collect();
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        assert_eq!(predict(&model, &features).unwrap(), target);
    }

    #[test]
    fn predictions_are_deterministic_and_row_independent() {
        let n = 200;
        let features = grid_features(n);
        let target: Vec<f64> = (0..n).map(|i| ((i * 13) % 31) as f64).collect();
        let spec = LearnerSpec {
            n_trees: 20,
            seed: 5,
            ..LearnerSpec::default()
        };
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        let once = predict(&model, &features).unwrap();
        let twice = predict(&model, &features).unwrap();
        assert_eq!(once, twice);

        let refit = fit_with_mode(&spec, &features, &target, KindTag::Generic, Mode::Sequential)
            .unwrap();
        assert_eq!(predict(&refit, &features).unwrap(), once);

        let rows: Vec<usize> = (0..n).rev().collect();
        let permuted = features.select_rows(&rows);
        let got = predict(&model, &permuted).unwrap();
        let expected: Vec<f64> = rows.iter().map(|&i| once[i]).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn constant_forest_target_errors() {
        let features = grid_features(12);
        assert!(matches!(
            fit(
                &LearnerSpec::default(),
                &features,
                &[3.0; 12],
                KindTag::Generic
            ),
            Err(Error::ConstantTarget)
        ));
    }

    #[test]
    fn too_few_rows_errors() {
        let features = grid_features(1);
        assert!(matches!(
            fit(&LearnerSpec::default(), &features, &[1.0], KindTag::Generic),
            Err(Error::TooFewRows { min: 2, got: 1 })
        ));
    }

    #[test]
    fn schema_mismatch_on_predict() {
        let features = grid_features(20);
        let target: Vec<f64> = (0..20).map(|i| (i % 5) as f64).collect();
        let spec = LearnerSpec {
            n_trees: 3,
            ..LearnerSpec::default()
        };
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        let wide = FeatureMatrix::from_columns(vec![vec![0.0; 4], vec![0.0; 4]]);
        assert!(matches!(
            predict(&model, &wide),
            Err(Error::SchemaMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn probability_predictions_stay_in_open_unit_interval() {
        let n = 40;
        let features = grid_features(n);
        let target: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
        let spec = LearnerSpec {
            n_trees: 10,
            min_leaf: 1,
            ..LearnerSpec::default()
        };
        let model = fit(&spec, &features, &target, KindTag::PHat).unwrap();
        let preds = predict(&model, &features).unwrap();
        assert!(preds.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn linear_baseline_recovers_plane() {
        let x0: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let x1: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let target: Vec<f64> = x0.iter().zip(&x1).map(|(&a, &b)| 2.0 * a - 0.5 * b + 3.0).collect();
        let features = FeatureMatrix::from_columns(vec![x0, x1]);
        let spec = LearnerSpec::with_kind(LearnerKind::LinearLeastSquares);
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        let preds = predict(&model, &features).unwrap();
        for (p, t) in preds.iter().zip(&target) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    fn bench_population(n: usize) -> SyntheticPopulation {
        // 5 informative-ish features, composite SNR near 3
        let spec = SyntheticSpec {
            n,
            d: 5,
            seed: 1234,
            p_link: LinkSpec {
                beta: vec![1.2, 0.9, 0.0, 0.0, 0.0],
                intercept: 0.3,
            },
            mu_link: LinkSpec {
                beta: vec![0.0, 0.0, 0.5, 0.4, 0.2],
                intercept: 1.0,
            },
            dependence: 0.0,
            shared_index: vec![],
            shared_loading_p: 1.0,
            shared_loading_mu: 1.0,
            amount_noise: 25.0,
            amount_dist: AmountDist::Gamma,
        };
        synth::generate(&spec).unwrap()
    }

    // threshold frozen from the first run of this seeded benchmark
    #[test]
    fn forest_learns_synthetic_signal() {
        let pop = bench_population(20_000);
        let train: Vec<usize> = (0..16_000).collect();
        let test: Vec<usize> = (16_000..20_000).collect();
        let train_y: Vec<f64> = train.iter().map(|&i| pop.y[i]).collect();
        let spec = LearnerSpec {
            n_trees: 200,
            seed: 99,
            ..LearnerSpec::default()
        };
        let model = fit(
            &spec,
            &pop.features.select_rows(&train),
            &train_y,
            KindTag::ZetaHat,
        )
        .unwrap();
        let preds = predict(&model, &pop.features.select_rows(&test)).unwrap();
        let zeta_test: Vec<f64> = test.iter().map(|&i| pop.zeta[i]).collect();
        let cor = pearson(&preds, &zeta_test).unwrap();
        assert!(cor > 0.8, "Cor(f, zeta) = {cor}");
    }

    #[test]
    fn more_trees_do_not_hurt_test_mse() {
        let pop = bench_population(6_000);
        let train: Vec<usize> = (0..4_800).collect();
        let test: Vec<usize> = (4_800..6_000).collect();
        let train_y: Vec<f64> = train.iter().map(|&i| pop.y[i]).collect();
        let test_y: Vec<f64> = test.iter().map(|&i| pop.y[i]).collect();
        let mse_with = |n_trees: usize| {
            let spec = LearnerSpec {
                n_trees,
                seed: 7,
                ..LearnerSpec::default()
            };
            let model = fit(
                &spec,
                &pop.features.select_rows(&train),
                &train_y,
                KindTag::ZetaHat,
            )
            .unwrap();
            let preds = predict(&model, &pop.features.select_rows(&test)).unwrap();
            crate::stats::mse_decomposition(&preds, &test_y).unwrap().mse
        };
        assert!(mse_with(500) <= mse_with(1));
    }

    #[test]
    fn oracle_models_replay_the_latents() {
        let pop = bench_population(4_000);
        let p_hat = fit_oracle(&pop, LatentBase::P);
        let preds = predict(&p_hat, &pop.features).unwrap();
        assert!((pearson(&preds, &pop.p).unwrap() - 1.0).abs() < 1e-12);

        // amount oracle matches mu on rows where the target is zero too
        let mu_hat = fit_oracle(&pop, LatentBase::Mu);
        let mu_preds = predict(&mu_hat, &pop.features).unwrap();
        for i in 0..pop.n() {
            if pop.c[i] == 0.0 {
                assert!((mu_preds[i] - pop.mu[i]).abs() < 1e-12);
            }
        }

        // composite oracle is unbiased for y
        let z_hat = fit_oracle(&pop, LatentBase::Zeta);
        let z_preds = predict(&z_hat, &pop.features).unwrap();
        let d = crate::stats::mse_decomposition(&z_preds, &pop.y).unwrap();
        assert!(d.bias_sq < 0.05 * d.var_y);
    }

    #[test]
    fn persistence_round_trip_is_prediction_exact() {
        let n = 300;
        let features = grid_features(n);
        let target: Vec<f64> = (0..n).map(|i| ((i * 13) % 31) as f64).collect();
        let spec = LearnerSpec {
            n_trees: 25,
            seed: 3,
            ..LearnerSpec::default()
        };
        let model = fit(&spec, &features, &target, KindTag::Generic).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        save_model(&model, file.path()).unwrap();
        let loaded = load_model(file.path()).unwrap();
        assert_eq!(
            predict(&model, &features).unwrap(),
            predict(&loaded, &features).unwrap()
        );
    }

    #[test]
    fn unsupported_model_version_rejected() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            file.path(),
            br#"{"format_version":99,"model":{"spec":{"kind":"constant_mean","n_trees":1,"mtry":null,"min_leaf":1,"max_depth":null,"seed":0,"bootstrap":true},"kind_tag":"generic","training_rows":1,"n_features":0,"state":{"ConstantMean":{"value":0.0}}}}"#,
        )
        .unwrap();
        assert!(matches!(
            load_model(file.path()),
            Err(Error::UnsupportedModelVersion(99))
        ));
    }
}
