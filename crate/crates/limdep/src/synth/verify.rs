//! Monte-Carlo verification of every identity the library relies on, run
//! against one generated population. Failures are report entries, not
//! panics.

use crate::composer::{self};
use crate::error::Result;
use crate::exec::Mode;
use crate::report::{self, IdentityCheck, VerificationReport, REPORT_SCHEMA_VERSION};
use crate::stats::{self, LatentSample};
use crate::synth::{self, mix_seed, SyntheticSpec};

/// Overrides for the verification run.
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Population size; defaults to the spec's `n`.
    pub n: Option<usize>,
    /// RNG seed; defaults to the spec's seed.
    pub seed: Option<u64>,
    /// Multiplies every tolerance; 1.0 runs the suite as designed.
    pub tolerance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n: None,
            seed: None,
            tolerance_scale: 1.0,
        }
    }
}

/// Sample size below which the stated tolerances are not guaranteed.
pub const RELIABLE_N: usize = 100_000;

const PSI_BLOCKS: usize = 20;

struct Suite {
    checks: Vec<IdentityCheck>,
    n: usize,
    seed: u64,
    scale: f64,
}

impl Suite {
    /// `pass` iff `|measured| <= tolerance` (tolerances pre-scaled).
    fn push(&mut self, name: &str, formula: &str, measured: f64, tolerance: f64, enforced: bool) {
        let tolerance = tolerance * self.scale;
        self.checks.push(IdentityCheck {
            name: name.to_owned(),
            formula: formula.to_owned(),
            measured,
            tolerance,
            pass: measured.abs() <= tolerance,
            enforced,
            n: self.n,
            seed: self.seed,
        });
    }

    /// Like [`push`], but widens the tolerance to three Monte-Carlo
    /// standard errors when the statistic's own sampling noise exceeds
    /// the stated bound. Heavy-tailed processes make some comparisons
    /// between independent estimators noisier than the bound at any
    /// fixed n; the identity is still confirmed at MC resolution.
    fn push_with_mc_floor(
        &mut self,
        name: &str,
        formula: &str,
        measured: f64,
        tolerance: f64,
        se: Option<f64>,
    ) {
        let widened = tolerance.max(3.0 * se.unwrap_or(0.0));
        self.push(name, formula, measured, widened, true);
    }
}

/// Standard error of a per-block statistic over contiguous blocks.
fn block_se(n: usize, blocks: usize, stat: impl Fn(usize, usize) -> Option<f64>) -> Option<f64> {
    let len = n / blocks;
    if len < 100 {
        return None;
    }
    let values: Vec<f64> = (0..blocks)
        .filter_map(|b| stat(b * len, (b + 1) * len))
        .collect();
    if values.len() != blocks {
        return None;
    }
    Some(crate::stats::sd(&values) / (blocks as f64).sqrt())
}

fn slice_sample<'a>(s: &LatentSample<'a>, lo: usize, hi: usize) -> LatentSample<'a> {
    LatentSample {
        y: &s.y[lo..hi],
        c: &s.c[lo..hi],
        a: &s.a[lo..hi],
        p: &s.p[lo..hi],
        mu: &s.mu[lo..hi],
        eps_p: &s.eps_p[lo..hi],
        eps_mu: &s.eps_mu[lo..hi],
        zeta: &s.zeta[lo..hi],
        eps: &s.eps[lo..hi],
    }
}

/// True when the spec builds occurrence and amount from disjoint feature
/// sets with no shared index, making the components independent by
/// construction.
fn independent_by_construction(spec: &SyntheticSpec) -> bool {
    if spec.dependence != 0.0 {
        return false;
    }
    spec.p_link
        .beta
        .iter()
        .zip(&spec.mu_link.beta)
        .all(|(&bp, &bm)| bp == 0.0 || bm == 0.0)
}

/// Generate one population from the spec and measure every identity the
/// crate's theory relies on.
pub fn verify_identities(
    spec: &SyntheticSpec,
    options: &VerifyOptions,
    mode: Mode,
) -> Result<VerificationReport> {
    let mut spec = spec.clone();
    if let Some(n) = options.n {
        spec.n = n;
    }
    if let Some(seed) = options.seed {
        spec.seed = seed;
    }
    let population = synth::generate_with_mode(&spec, mode)?;
    let sample = population.latents();
    let n = population.n();
    let seed = spec.seed;

    let mut suite = Suite {
        checks: Vec::new(),
        n,
        seed,
        scale: options.tolerance_scale,
    };

    // exact reconstructions of the generating identities
    let worst_product = sample
        .y
        .iter()
        .zip(sample.c.iter().zip(sample.a))
        .map(|(&y, (&c, &a))| (y - c * a).abs())
        .fold(0.0f64, f64::max);
    suite.push(
        "composite_product_exact",
        "y = c * a holds bit-exactly for every row",
        worst_product,
        0.0,
        true,
    );
    let worst_noise = sample
        .y
        .iter()
        .zip(sample.zeta.iter().zip(sample.eps))
        .map(|(&y, (&z, &e))| (e - (y - z)).abs())
        .fold(0.0f64, f64::max);
    suite.push(
        "noise_definition_exact",
        "eps = y - zeta holds bit-exactly for every row",
        worst_noise,
        0.0,
        true,
    );
    let worst_additive = sample
        .y
        .iter()
        .zip(sample.zeta.iter().zip(sample.eps))
        .map(|(&y, (&z, &e))| (y - (z + e)).abs() / y.abs().max(z.abs()).max(1.0))
        .fold(0.0f64, f64::max);
    suite.push(
        "composite_additive_reconstruction",
        "y = zeta + eps for every row, up to one rounding of the recomposition",
        worst_additive,
        1e-15,
        true,
    );

    // variance split of the composite target
    let split_deviation = |s: &LatentSample<'_>| -> Option<f64> {
        let d = stats::variance_decomposition(s).ok()?;
        Some((d.var_ac - (d.term_amount + d.term_binary)) / d.var_ac)
    };
    let split_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        split_deviation(&slice_sample(&sample, lo, hi))
    });
    suite.push_with_mc_floor(
        "variance_split",
        "Var[y] = E[p]*Var[a|c=1] + Var[c]*E[mu|c=1]^2 (relative, MC floor)",
        split_deviation(&sample).unwrap_or(f64::INFINITY),
        0.01,
        split_se,
    );

    // closed form for the occurrence correlation
    let closed_deviation = |s: &LatentSample<'_>| -> Option<f64> {
        let d = stats::variance_decomposition(s).ok()?;
        let cor = stats::pearson(s.y, s.c).ok()?;
        let closed_sq = d.cor_ac_c_closed * d.cor_ac_c_closed;
        Some((cor * cor - closed_sq) / closed_sq)
    };
    let closed_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        closed_deviation(&slice_sample(&sample, lo, hi))
    });
    suite.push_with_mc_floor(
        "occurrence_correlation_closed_form",
        "Cor(y, c)^2 = 1 / (1 + CV_a^2 / (1 - E[p])) (relative, MC floor)",
        closed_deviation(&sample).unwrap_or(f64::INFINITY),
        0.01,
        closed_se,
    );

    // conditional-mean shift of the amount latent
    let shift_deviation = |s: &LatentSample<'_>| -> Option<f64> {
        let mu_pos: Vec<f64> = s
            .mu
            .iter()
            .zip(s.c)
            .filter(|(_, &c)| c > 0.0)
            .map(|(&m, _)| m)
            .collect();
        if mu_pos.is_empty() {
            return None;
        }
        let e_p = stats::mean(s.p);
        let shift = stats::covariance(s.p, s.mu).ok()? / e_p;
        let lhs = stats::mean(s.mu);
        Some((lhs - (stats::mean(&mu_pos) - shift)) / lhs)
    };
    let shift_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        shift_deviation(&slice_sample(&sample, lo, hi))
    });
    suite.push_with_mc_floor(
        "conditional_mean_shift",
        "E[mu] = E[mu|c=1] - Cov(p, mu)/E[p] (relative, MC floor)",
        shift_deviation(&sample).unwrap_or(f64::INFINITY),
        0.01,
        shift_se,
    );

    // SNR mixture
    let mix = stats::snr_mixture(&sample)?;
    suite.push(
        "snr_weighted_sum_reconstruction",
        "snr_y = alpha*snr_a + (1-alpha)*snr_c + psi (absolute)",
        mix.snr_y - (mix.alpha * mix.snr_a + (1.0 - mix.alpha) * mix.snr_c + mix.psi),
        1e-12,
        true,
    );
    let var_eps_direct = stats::variance(sample.y) - stats::variance(sample.zeta);
    let noise_deviation = |s: &LatentSample<'_>| -> Option<f64> {
        let m = stats::snr_mixture(s).ok()?;
        let direct = stats::variance(s.y) - stats::variance(s.zeta);
        Some((m.noise_y - direct) / direct)
    };
    let noise_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        noise_deviation(&slice_sample(&sample, lo, hi))
    });
    suite.push_with_mc_floor(
        "composite_noise_formula",
        "E[p]*Var[eps_mu|c=1] + E[mu^2*eps_p^2] = Var[y] - Var[zeta] (relative, MC floor)",
        (mix.noise_y - var_eps_direct) / var_eps_direct,
        0.01,
        noise_se,
    );
    let penalty_deviation = |s: &LatentSample<'_>| -> Option<f64> {
        let m = stats::snr_mixture(s).ok()?;
        let positive = |values: &[f64]| -> Vec<f64> {
            values
                .iter()
                .zip(s.c)
                .filter(|(_, &c)| c > 0.0)
                .map(|(&v, _)| v)
                .collect()
        };
        let amount_noise = stats::mean(s.p) * stats::variance(&positive(s.eps_mu));
        let mean_mu_pos = stats::mean(&positive(s.mu));
        let binary_noise = mean_mu_pos * mean_mu_pos * stats::variance(s.eps_p);
        Some((m.noise_y - (amount_noise + binary_noise + m.d_eps)) / m.noise_y)
    };
    let penalty_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        penalty_deviation(&slice_sample(&sample, lo, hi))
    });
    suite.push_with_mc_floor(
        "noise_penalty_cross_check",
        "noise_y = amount_noise + binary_noise + d_eps (relative, MC floor)",
        penalty_deviation(&sample).unwrap_or(f64::INFINITY),
        0.01,
        penalty_se,
    );

    // penalty sign: strict only when components are independent by
    // construction; on dependent processes the sign is data and gets
    // reported without being enforced
    let independent = independent_by_construction(&spec) && stats::variance(sample.mu) > 0.0;
    let block = n / PSI_BLOCKS;
    let mut block_psi = Vec::with_capacity(PSI_BLOCKS);
    if block >= 100 {
        for b in 0..PSI_BLOCKS {
            let sub = slice_sample(&sample, b * block, (b + 1) * block);
            if let Ok(m) = stats::snr_mixture(&sub) {
                block_psi.push(m.psi);
            }
        }
    }
    if block_psi.len() == PSI_BLOCKS {
        let se = stats::sd(&block_psi) / (PSI_BLOCKS as f64).sqrt();
        let z = mix.psi / se;
        suite.push(
            "snr_penalty_margin",
            "independent components: psi < 0 by at least 3 MC standard errors \
             (measured = z + 3, informational when components are dependent)",
            (z + 3.0).max(0.0),
            0.0,
            independent,
        );
    }

    // attenuation of a noisy model of zeta
    let f = synth::correlated_noise_vector(&population.zeta, 0.8, mix_seed(&[seed, 1]))?;
    let cd = stats::correlation_decomposition(&f, &population.zeta, &population.y)?;
    let attenuation_se = block_se(n, PSI_BLOCKS, |lo, hi| {
        stats::correlation_decomposition(&f[lo..hi], &sample.zeta[lo..hi], &sample.y[lo..hi])
            .ok()
            .map(|d| d.residual)
    });
    suite.push_with_mc_floor(
        "model_attenuation_residual",
        "Cor(f, y) = Cor(f, zeta) * sqrt(Var[zeta]/Var[y]) (absolute residual, MC floor)",
        cd.residual,
        0.01,
        attenuation_se,
    );

    // component-to-composite transfer
    let p_hat = synth::correlated_noise_vector(&population.p, 0.7, mix_seed(&[seed, 2]))?;
    let transfer_p = stats::pearson(&p_hat, &population.zeta)?
        - 0.7 * stats::pearson(&population.p, &population.zeta)?;
    suite.push(
        "component_transfer_occurrence",
        "Cor(p_hat, zeta) = Cor(p_hat, p) * Cor(p, zeta) (absolute)",
        transfer_p,
        0.02,
        true,
    );
    let mu_hat = synth::correlated_noise_vector(&population.mu, 0.7, mix_seed(&[seed, 3]))?;
    let transfer_mu = stats::pearson(&mu_hat, &population.zeta)?
        - 0.7 * stats::pearson(&population.mu, &population.zeta)?;
    suite.push(
        "component_transfer_amount",
        "Cor(mu_hat, zeta) = Cor(mu_hat, mu) * Cor(mu, zeta) (absolute)",
        transfer_mu,
        0.02,
        true,
    );

    // predicted vs observed product correlation over a quality grid
    let qualities = [0.3, 0.6, 0.9];
    let mut worst_residual = 0.0f64;
    let mut worst_models: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut cell = 0u64;
    let mut last_diag = None;
    for &r_p in &qualities {
        for &r_mu in &qualities {
            let p_hat = synth::correlated_noise_vector(
                &population.p,
                r_p,
                mix_seed(&[seed, 0xA0, cell]),
            )?;
            let mu_hat = synth::correlated_noise_vector(
                &population.mu,
                r_mu,
                mix_seed(&[seed, 0xB0, cell]),
            )?;
            let diag = composer::weight_diagnostics(&p_hat, &mu_hat, &population.p, &population.mu)?;
            if diag.r_residual.abs() > worst_residual.abs() {
                worst_residual = diag.r_residual;
                worst_models = Some((p_hat, mu_hat));
            }
            last_diag = Some(diag);
            cell += 1;
        }
    }
    let grid_se = worst_models.as_ref().and_then(|(p_hat, mu_hat)| {
        block_se(n, PSI_BLOCKS, |lo, hi| {
            composer::weight_diagnostics(
                &p_hat[lo..hi],
                &mu_hat[lo..hi],
                &sample.p[lo..hi],
                &sample.mu[lo..hi],
            )
            .ok()
            .map(|d| d.r_residual)
        })
    });
    suite.push_with_mc_floor(
        "product_correlation_prediction_grid",
        "observed Cor(p_hat*mu_hat, zeta) matches the weighted prediction \
         over a 3x3 quality grid (worst absolute residual, MC floor)",
        worst_residual,
        0.02,
        grid_se,
    );
    if let Some(diag) = last_diag {
        let cv_ratio = diag.cv_p / diag.cv_mu;
        suite.push(
            "weight_ratio_identity",
            "w_p / w_mu = cv_p / cv_mu (relative)",
            (diag.w_p / diag.w_mu - cv_ratio) / cv_ratio,
            1e-10,
            true,
        );
    }

    // pseudo-model construction exactness
    let probe = synth::correlated_noise_vector(&population.p, 0.55, mix_seed(&[seed, 4]))?;
    suite.push(
        "pseudo_model_exactness",
        "sample Cor(pseudo, base) equals the requested correlation (absolute)",
        stats::pearson(&probe, &population.p)? - 0.55,
        1e-10,
        true,
    );

    let mut warnings = Vec::new();
    if n < RELIABLE_N {
        warnings.push(format!(
            "n = {n} is below {RELIABLE_N}; Monte-Carlo tolerances are not guaranteed"
        ));
    }
    if !independent {
        warnings.push(
            "components are dependent by construction; the SNR penalty sign is reported, \
             not enforced"
                .to_owned(),
        );
    }

    let pass = suite.checks.iter().all(|c| !c.enforced || c.pass);
    Ok(VerificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: report::tool_version(),
        n,
        seed,
        spec,
        checks: suite.checks,
        warnings,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Preset;

    #[test]
    fn small_run_warns_about_tolerances() {
        let report = verify_identities(
            &Preset::RegimeStrong.spec(),
            &VerifyOptions {
                n: Some(20_000),
                seed: Some(5),
                ..VerifyOptions::default()
            },
            Mode::Sequential,
        )
        .unwrap();
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("not guaranteed")));
    }

    #[test]
    fn zero_tolerance_scale_fails_the_suite() {
        let report = verify_identities(
            &Preset::RegimeStrong.spec(),
            &VerifyOptions {
                n: Some(20_000),
                seed: Some(5),
                tolerance_scale: 0.0,
            },
            Mode::Sequential,
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.failed_checks().count() > 0);
    }

    #[test]
    fn dependent_spec_reports_penalty_without_enforcing() {
        let mut spec = Preset::RegimeStrong.spec();
        spec.dependence = 0.8;
        spec.n = 30_000;
        let report =
            verify_identities(&spec, &VerifyOptions::default(), Mode::Sequential).unwrap();
        let margin = report
            .checks
            .iter()
            .find(|c| c.name == "snr_penalty_margin")
            .unwrap();
        assert!(!margin.enforced);
        let recon = report
            .checks
            .iter()
            .find(|c| c.name == "snr_weighted_sum_reconstruction")
            .unwrap();
        assert!(recon.pass);
    }
}
