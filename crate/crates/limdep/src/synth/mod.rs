//! Synthetic populations with fully retained latents, pseudo-models with
//! exactly controlled correlation, and the contour search for required
//! component-model quality.
//!
//! The generating process: features are independent standard normals,
//! `p = logistic(x·beta_p + b_p + lambda*load_p*(x·shared))` drives a
//! Bernoulli occurrence, `mu = exp(x·beta_mu + b_mu + lambda*load_mu*(x·shared))`
//! the conditional amount mean, and the amount is drawn around `mu` for
//! every row (observed only where the occurrence fires).

pub mod verify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, TabularDataset};
use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::stats::{self, LatentSample};

/// Linear index with intercept, applied to the feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub beta: Vec<f64>,
    pub intercept: f64,
}

/// Distribution of the amount around its conditional mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountDist {
    /// Gamma with shape `k`: variance `mu^2 / k`.
    Gamma,
    /// Lognormal moment-matched to the same mean and variance.
    LogNormal,
}

impl Default for AmountDist {
    fn default() -> Self {
        AmountDist::Gamma
    }
}

fn default_loading() -> f64 {
    1.0
}

/// Full description of a synthetic generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Occurrence-probability link: `p = logistic(x·beta + intercept + shared term)`.
    pub p_link: LinkSpec,
    /// Amount-mean link: `mu = exp(x·beta + intercept + shared term)`.
    pub mu_link: LinkSpec,
    /// Weight `lambda` of the shared index in both links; 0 removes it.
    #[serde(default)]
    pub dependence: f64,
    /// Coefficients of the shared latent index (empty = all zero).
    #[serde(default)]
    pub shared_index: Vec<f64>,
    /// Sign/scale of the shared index in the occurrence link.
    #[serde(default = "default_loading")]
    pub shared_loading_p: f64,
    /// Sign/scale of the shared index in the amount link.
    #[serde(default = "default_loading")]
    pub shared_loading_mu: f64,
    /// Gamma shape `k`; amount noise variance is `mu^2 / k`.
    pub amount_noise: f64,
    #[serde(default)]
    pub amount_dist: AmountDist,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::DegenerateSpec(format!("n = {} is too small", self.n)));
        }
        if self.d == 0 {
            return Err(Error::DegenerateSpec("d must be at least 1".into()));
        }
        if self.p_link.beta.len() != self.d || self.mu_link.beta.len() != self.d {
            return Err(Error::DegenerateSpec(format!(
                "link coefficient lengths ({}, {}) must equal d = {}",
                self.p_link.beta.len(),
                self.mu_link.beta.len(),
                self.d
            )));
        }
        if !self.shared_index.is_empty() && self.shared_index.len() != self.d {
            return Err(Error::DegenerateSpec(format!(
                "shared index length {} must equal d = {}",
                self.shared_index.len(),
                self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.dependence) {
            return Err(Error::DegenerateSpec(format!(
                "dependence {} outside [0, 1]",
                self.dependence
            )));
        }
        if !(self.amount_noise > 0.0) {
            return Err(Error::DegenerateSpec(format!(
                "amount noise shape {} must be positive",
                self.amount_noise
            )));
        }
        Ok(())
    }

    /// Parse a spec from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Named reference processes bundled with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Occurrence dominates: the amount mean is nearly constant, so the
    /// occurrence probability carries almost all composite variation.
    RegimeStrong,
    /// Balanced components with an antagonistic coefficient overlap; both
    /// component-to-composite correlations stay below 0.5.
    RegimeWeak,
}

impl Preset {
    pub fn spec(self) -> SyntheticSpec {
        match self {
            Preset::RegimeStrong => SyntheticSpec {
                n: 1_000_000,
                d: 6,
                seed: 7,
                p_link: LinkSpec {
                    beta: vec![0.9, 0.7, 0.0, 0.0, 0.0, 0.0],
                    intercept: -1.1,
                },
                mu_link: LinkSpec {
                    beta: vec![0.0, 0.0, 0.08, 0.06, 0.0, 0.0],
                    intercept: 1.4,
                },
                dependence: 0.0,
                shared_index: vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                shared_loading_p: 1.0,
                shared_loading_mu: 1.0,
                amount_noise: 0.6,
                amount_dist: AmountDist::Gamma,
            },
            Preset::RegimeWeak => SyntheticSpec {
                n: 1_000_000,
                d: 6,
                seed: 9,
                p_link: LinkSpec {
                    beta: vec![1.6, 1.2, 1.0, 0.0, 0.0, 0.0],
                    intercept: -3.4,
                },
                mu_link: LinkSpec {
                    beta: vec![0.0, 0.0, 0.0, 0.85, 0.75, 0.0],
                    intercept: 0.6,
                },
                dependence: 0.0,
                shared_index: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                shared_loading_p: 1.0,
                shared_loading_mu: -1.0,
                amount_noise: 1.5,
                amount_dist: AmountDist::Gamma,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::RegimeStrong => "REGIME-STRONG",
            Preset::RegimeWeak => "REGIME-WEAK",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regime-strong" | "regime_strong" | "strong" => Ok(Preset::RegimeStrong),
            "regime-weak" | "regime_weak" | "weak" => Ok(Preset::RegimeWeak),
            other => Err(Error::DegenerateSpec(format!(
                "unknown preset '{other}' (expected REGIME-STRONG or REGIME-WEAK)"
            ))),
        }
    }
}

/// Draws of the full generating process, latents included.
#[derive(Clone, Debug)]
pub struct SyntheticPopulation {
    pub spec: SyntheticSpec,
    pub features: FeatureMatrix,
    /// Occurrence probability per row.
    pub p: Vec<f64>,
    /// Conditional amount mean per row.
    pub mu: Vec<f64>,
    /// Bernoulli occurrence draw, as 0.0/1.0.
    pub c: Vec<f64>,
    /// Amount draw for every row (observed only where `c = 1`).
    pub a: Vec<f64>,
    /// Composite target `c * a`.
    pub y: Vec<f64>,
    pub eps_p: Vec<f64>,
    pub eps_mu: Vec<f64>,
    /// Conditional mean of the composite target, `p * mu`.
    pub zeta: Vec<f64>,
    /// `y - zeta`.
    pub eps: Vec<f64>,
}

impl SyntheticPopulation {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn latents(&self) -> LatentSample<'_> {
        LatentSample {
            y: &self.y,
            c: &self.c,
            a: &self.a,
            p: &self.p,
            mu: &self.mu,
            eps_p: &self.eps_p,
            eps_mu: &self.eps_mu,
            zeta: &self.zeta,
            eps: &self.eps,
        }
    }

    /// View the draws as an observable dataset (features and `y` only).
    pub fn to_dataset(&self, name: impl Into<String>) -> Result<TabularDataset> {
        TabularDataset::new(name, self.features.clone(), self.y.clone())
    }
}

const CHUNK_ROWS: usize = 16_384;

struct Chunk {
    features: Vec<Vec<f64>>,
    p: Vec<f64>,
    mu: Vec<f64>,
    c: Vec<f64>,
    a: Vec<f64>,
}

fn generate_chunk(spec: &SyntheticSpec, index: usize, rows: usize) -> Chunk {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let d = spec.d;
    let lam = spec.dependence;
    let shared = |j: usize| spec.shared_index.get(j).copied().unwrap_or(0.0);

    let mut out = Chunk {
        features: vec![Vec::with_capacity(rows); d],
        p: Vec::with_capacity(rows),
        mu: Vec::with_capacity(rows),
        c: Vec::with_capacity(rows),
        a: Vec::with_capacity(rows),
    };
    let mut x = vec![0.0; d];
    for _ in 0..rows {
        let mut up = spec.p_link.intercept;
        let mut um = spec.mu_link.intercept;
        for j in 0..d {
            let v: f64 = rng.sample(StandardNormal);
            x[j] = v;
            let s = lam * shared(j) * v;
            up += spec.p_link.beta[j] * v + spec.shared_loading_p * s;
            um += spec.mu_link.beta[j] * v + spec.shared_loading_mu * s;
        }
        let p = 1.0 / (1.0 + (-up).exp());
        let mu = um.exp();
        let c = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
        let a = match spec.amount_dist {
            AmountDist::Gamma => Gamma::new(spec.amount_noise, mu / spec.amount_noise)
                .expect("valid gamma parameters")
                .sample(&mut rng),
            AmountDist::LogNormal => {
                let sigma_sq = (1.0 + 1.0 / spec.amount_noise).ln();
                LogNormal::new(mu.ln() - 0.5 * sigma_sq, sigma_sq.sqrt())
                    .expect("valid lognormal parameters")
                    .sample(&mut rng)
            }
        };
        for j in 0..d {
            out.features[j].push(x[j]);
        }
        out.p.push(p);
        out.mu.push(mu);
        out.c.push(c);
        out.a.push(a);
    }
    out
}

/// Draw a population from the spec. Deterministic given the spec: rows are
/// produced in fixed-size chunks with per-chunk RNG streams, so the result
/// does not depend on the execution mode.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticPopulation> {
    generate_with_mode(spec, Mode::default())
}

pub fn generate_with_mode(spec: &SyntheticSpec, mode: Mode) -> Result<SyntheticPopulation> {
    spec.validate()?;
    let n = spec.n;
    let chunks = n.div_ceil(CHUNK_ROWS);
    let parts = exec::map_indexed(mode, chunks, |i| {
        let rows = CHUNK_ROWS.min(n - i * CHUNK_ROWS);
        generate_chunk(spec, i, rows)
    });

    let mut features = vec![Vec::with_capacity(n); spec.d];
    let mut p = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for part in parts {
        for (j, col) in part.features.into_iter().enumerate() {
            features[j].extend(col);
        }
        p.extend(part.p);
        mu.extend(part.mu);
        c.extend(part.c);
        a.extend(part.a);
    }

    let near_zero = p.iter().all(|&v| v < 1e-9);
    let near_one = p.iter().all(|&v| v > 1.0 - 1e-9);
    if near_zero || near_one {
        return Err(Error::DegenerateSpec(
            "occurrence probability is numerically 0 or 1 everywhere".into(),
        ));
    }

    let y: Vec<f64> = c.iter().zip(&a).map(|(&ci, &ai)| ci * ai).collect();
    let eps_p: Vec<f64> = c.iter().zip(&p).map(|(&ci, &pi)| ci - pi).collect();
    let eps_mu: Vec<f64> = a.iter().zip(&mu).map(|(&ai, &mi)| ai - mi).collect();
    let zeta: Vec<f64> = p.iter().zip(&mu).map(|(&pi, &mi)| pi * mi).collect();
    let eps: Vec<f64> = y.iter().zip(&zeta).map(|(&yi, &zi)| yi - zi).collect();

    Ok(SyntheticPopulation {
        spec: spec.clone(),
        features: FeatureMatrix::from_columns(features),
        p,
        mu,
        c,
        a,
        y,
        eps_p,
        eps_mu,
        zeta,
        eps,
    })
}

/// Which latent a pseudo-model is built against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentBase {
    P,
    Mu,
    Zeta,
}

/// A synthetic predictor with an exactly chosen sample correlation to its
/// base latent. Mean and standard deviation match the base, so pseudo-
/// models of equal `r` are directly comparable.
#[derive(Clone, Debug)]
pub struct PseudoModel {
    pub base: LatentBase,
    pub target_correlation: f64,
    pub values: Vec<f64>,
}

/// Mix noise into `base` so the sample Pearson correlation with it is
/// exactly `r` and sample mean and variance are preserved. The noise is a
/// seeded standard-normal draw orthogonalized against the base in-sample.
pub fn correlated_noise_vector(base: &[f64], r: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::OutOfRange(r));
    }
    if base.len() < 3 {
        return Err(Error::TooFewRows { min: 3, got: base.len() });
    }
    let mb = stats::mean(base);
    let centered: Vec<f64> = base.iter().map(|&b| b - mb).collect();
    let ss_base = stats::compensated_sum(centered.iter().map(|&v| v * v));
    if ss_base <= 0.0 {
        return Err(Error::ZeroVariance("pseudo-model base"));
    }
    if r == 1.0 {
        return Ok(base.to_vec());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..base.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mz = stats::mean(&z);
    let proj = stats::compensated_sum(z.iter().zip(&centered).map(|(&zi, &bi)| (zi - mz) * bi))
        / ss_base;
    let perp: Vec<f64> = z
        .iter()
        .zip(&centered)
        .map(|(&zi, &bi)| (zi - mz) - proj * bi)
        .collect();
    let ss_perp = stats::compensated_sum(perp.iter().map(|&v| v * v));
    if ss_perp <= 0.0 {
        return Err(Error::ZeroVariance("orthogonalized noise"));
    }
    let scale = (ss_base / ss_perp).sqrt() * (1.0 - r * r).sqrt();
    Ok(centered
        .iter()
        .zip(&perp)
        .map(|(&bi, &ni)| mb + r * bi + scale * ni)
        .collect())
}

/// Build a pseudo-model against one of the population's latents.
pub fn make_pseudo_model(
    population: &SyntheticPopulation,
    base: LatentBase,
    r: f64,
    seed: u64,
) -> Result<PseudoModel> {
    let values = match base {
        LatentBase::P => correlated_noise_vector(&population.p, r, seed)?,
        LatentBase::Mu => correlated_noise_vector(&population.mu, r, seed)?,
        LatentBase::Zeta => correlated_noise_vector(&population.zeta, r, seed)?,
    };
    Ok(PseudoModel {
        base,
        target_correlation: r,
        values,
    })
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ p))
}

/// One grid cell of the required-correlation contour.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContourPoint {
    pub r_p: f64,
    pub r_mu: f64,
    pub achieved_cor: f64,
    pub feasible: bool,
}

/// Contour search settings.
#[derive(Clone, Debug)]
pub struct ContourOptions {
    /// Product-model correlation with the composite latent to hit.
    pub target_cor: f64,
    /// Occurrence-model qualities to scan.
    pub r_p_grid: Vec<f64>,
    /// Stop when the achieved correlation is within this of the target.
    pub tolerance: f64,
    /// Seed for the per-cell pseudo-model draws.
    pub seed: u64,
    /// Bisection depth cap.
    pub max_depth: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions {
            target_cor: 0.3,
            r_p_grid: (2..=20).map(|i| i as f64 * 0.05).collect(),
            tolerance: 0.005,
            seed: 1,
            max_depth: 30,
        }
    }
}

/// For each occurrence-model quality on the grid, bisect over the amount-
/// model quality until the product pseudo-model's correlation with the
/// composite latent hits the target. Cells with `Cor < target` even at
/// `r_mu = 1` are reported infeasible. Every evaluation draws fresh
/// pseudo-models under a fixed per-(cell, depth) seed, so the contour is
/// deterministic and cells are independent.
pub fn required_correlation_contour(
    population: &SyntheticPopulation,
    options: &ContourOptions,
    mode: Mode,
) -> Result<Vec<ContourPoint>> {
    let evaluate = |cell: usize, depth: usize, r_p: f64, r_mu: f64| -> Result<f64> {
        let ph = correlated_noise_vector(
            &population.p,
            r_p,
            mix_seed(&[options.seed, cell as u64, depth as u64, 0]),
        )?;
        let mh = correlated_noise_vector(
            &population.mu,
            r_mu,
            mix_seed(&[options.seed, cell as u64, depth as u64, 1]),
        )?;
        let product: Vec<f64> = ph.iter().zip(&mh).map(|(&a, &b)| a * b).collect();
        stats::pearson(&product, &population.zeta)
    };

    let cells = exec::map_indexed(mode, options.r_p_grid.len(), |cell| -> Result<ContourPoint> {
        let r_p = options.r_p_grid[cell];
        let at_top = evaluate(cell, 0, r_p, 1.0)?;
        if at_top < options.target_cor {
            return Ok(ContourPoint {
                r_p,
                r_mu: 1.0,
                achieved_cor: at_top,
                feasible: false,
            });
        }
        let at_bottom = evaluate(cell, 1, r_p, 0.0)?;
        if at_bottom >= options.target_cor {
            return Ok(ContourPoint {
                r_p,
                r_mu: 0.0,
                achieved_cor: at_bottom,
                feasible: true,
            });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut mid = 0.5 * (lo + hi);
        let mut achieved = at_top;
        for depth in 2..options.max_depth {
            mid = 0.5 * (lo + hi);
            achieved = evaluate(cell, depth, r_p, mid)?;
            if (achieved - options.target_cor).abs() < options.tolerance {
                break;
            }
            if achieved < options.target_cor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(ContourPoint {
            r_p,
            r_mu: mid,
            achieved_cor: achieved,
            feasible: true,
        })
    });
    cells.into_iter().collect()
}
