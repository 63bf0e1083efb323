//! Sample-moment kernels: correlation, coefficient of variation, MSE and
//! correlation decompositions, signal-to-noise ratios, and the variance /
//! SNR identities for composite targets `y = c*a`.
//!
//! All reductions use compensated (Neumaier) summation so results do not
//! depend on chunking order. Variances and covariances use the unbiased
//! `1/(n-1)` estimator except inside [`mse_decomposition`], which needs
//! population moments for its identity to be exact (see there).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compensated sum over an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean. Empty input gives NaN.
pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance (`1/(n-1)`), two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    compensated_sum(xs.iter().map(|&x| (x - m) * (x - m))) / (n - 1.0)
}

/// Population variance (`1/n`), two-pass.
pub fn variance_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    compensated_sum(xs.iter().map(|&x| (x - m) * (x - m))) / n
}

/// Sample standard deviation (`1/(n-1)`).
pub fn sd(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Unbiased sample covariance (`1/(n-1)`).
pub fn covariance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    let mu = mean(u);
    let mv = mean(v);
    let n = u.len() as f64;
    Ok(compensated_sum(u.iter().zip(v).map(|(&a, &b)| (a - mu) * (b - mv))) / (n - 1.0))
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    if u.len() < 2 {
        return Err(Error::TooFewRows { min: 2, got: u.len() });
    }
    Ok(())
}

/// Sample Pearson correlation. Errors (never NaN) when either input is
/// constant.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    check_pair(u, v)?;
    let var_u = variance(u);
    let var_v = variance(v);
    if var_u <= 0.0 {
        return Err(Error::ZeroVariance("first input"));
    }
    if var_v <= 0.0 {
        return Err(Error::ZeroVariance("second input"));
    }
    let cov = covariance(u, v)?;
    Ok((cov / (var_u.sqrt() * var_v.sqrt())).clamp(-1.0, 1.0))
}

/// Standard deviation divided by the mean.
pub fn coefficient_of_variation(u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::TooFewRows { min: 1, got: 0 });
    }
    let m = mean(u);
    if m == 0.0 {
        return Err(Error::ZeroMean);
    }
    let s = if u.len() < 2 { 0.0 } else { sd(u) };
    Ok(s / m)
}

/// The additive split of a mean squared error into variance, scaling,
/// correlation and location terms.
///
/// Fields are population-normalized (`1/n`): the unbiased estimator would
/// break `mse = var_y + var_f + correlation_term + bias_sq`, which this
/// type guarantees to ~1e-10 relative on any finite sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MseDecomposition {
    pub mse: f64,
    pub var_y: f64,
    pub var_f: f64,
    /// `-2 * Cor(f, y) * sqrt(Var[f] * Var[y])`
    pub correlation_term: f64,
    /// `(E[y] - E[f])^2`
    pub bias_sq: f64,
}

impl MseDecomposition {
    /// Sum of the four decomposition terms; equals `mse` up to rounding.
    pub fn reassembled(&self) -> f64 {
        self.var_y + self.var_f + self.correlation_term + self.bias_sq
    }
}

/// Split the MSE of predictions `f` against targets `y`.
pub fn mse_decomposition(f: &[f64], y: &[f64]) -> Result<MseDecomposition> {
    check_pair(f, y)?;
    let var_y = variance_pop(y);
    if var_y <= 0.0 {
        return Err(Error::ZeroVariance("targets"));
    }
    let var_f = variance_pop(f);
    let n = y.len() as f64;
    let mse = compensated_sum(f.iter().zip(y).map(|(&a, &b)| (b - a) * (b - a))) / n;
    let mf = mean(f);
    let my = mean(y);
    let cov = compensated_sum(f.iter().zip(y).map(|(&a, &b)| (a - mf) * (b - my))) / n;
    Ok(MseDecomposition {
        mse,
        var_y,
        var_f,
        correlation_term: -2.0 * cov,
        bias_sq: (my - mf) * (my - mf),
    })
}

/// Correlation with the observable target, split into model quality times
/// the attenuation factor of the target's noise.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrelationDecomposition {
    pub cor_f_y: f64,
    pub cor_f_zeta: f64,
    /// `sqrt(Var[zeta] / Var[y])`
    pub attenuation: f64,
    /// `cor_f_y - cor_f_zeta * attenuation`; sampling noise only when the
    /// model noise is independent of the target noise.
    pub residual: f64,
}

/// Decompose `Cor(f, y)` against the conditional mean `zeta` (`y = zeta + noise`).
pub fn correlation_decomposition(
    f: &[f64],
    zeta: &[f64],
    y: &[f64],
) -> Result<CorrelationDecomposition> {
    check_pair(f, zeta)?;
    check_pair(zeta, y)?;
    let cor_f_y = pearson(f, y)?;
    let cor_f_zeta = pearson(f, zeta)?;
    let attenuation = (variance(zeta) / variance(y)).sqrt();
    Ok(CorrelationDecomposition {
        cor_f_y,
        cor_f_zeta,
        attenuation,
        residual: cor_f_y - cor_f_zeta * attenuation,
    })
}

/// `Var[zeta] / Var[eps]`.
pub fn snr(zeta: &[f64], eps: &[f64]) -> Result<f64> {
    let var_eps = variance(eps);
    if var_eps <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    Ok(variance(zeta) / var_eps)
}

/// Upper bound `sqrt(snr / (snr + 1))` on the correlation any model can
/// reach with the observable target.
pub fn snr_performance_cap(snr_value: f64) -> Result<f64> {
    if snr_value < 0.0 {
        return Err(Error::NegativeSnr(snr_value));
    }
    Ok((snr_value / (snr_value + 1.0)).sqrt())
}

/// A sample with the latent structure of a composite target retained:
/// `y = c * a`, `c = p + eps_p`, `a = mu + eps_mu`, `zeta = p * mu`,
/// `eps = y - zeta`. All slices are row-aligned over the full sample;
/// `a` carries the latently generated amount for every row.
#[derive(Clone, Copy, Debug)]
pub struct LatentSample<'a> {
    pub y: &'a [f64],
    pub c: &'a [f64],
    pub a: &'a [f64],
    pub p: &'a [f64],
    pub mu: &'a [f64],
    pub eps_p: &'a [f64],
    pub eps_mu: &'a [f64],
    pub zeta: &'a [f64],
    pub eps: &'a [f64],
}

fn positive_subset<'a>(values: &'a [f64], c: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(c)
        .filter(|(_, &ci)| ci > 0.0)
        .map(|(&v, _)| v)
        .collect()
}

/// The two-term split of `Var[y]` for a composite target, with the closed
/// form for `Cor(y, c)` that follows from it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub var_ac: f64,
    /// `E[p] * Var[a | c=1]`
    pub term_amount: f64,
    /// `Var[c] * E[mu | c=1]^2`
    pub term_binary: f64,
    /// Positive root of `1 / (1 + CV_a^2 / (1 - E[p]))`.
    pub cor_ac_c_closed: f64,
    /// Coefficient of variation of the amount on the positive subset.
    pub cv_a: f64,
    /// `Cov(p, mu) / E[p]`, the gap between the unconditional and the
    /// `c=1`-conditional mean of `mu`. `None` in plug-in (empirical) mode.
    pub mean_mu_shift: Option<f64>,
    /// True when latent quantities were replaced by observable plug-ins.
    pub plug_in: bool,
}

fn variance_split(
    y: &[f64],
    c: &[f64],
    e_p: f64,
    var_a_cond: f64,
    mean_mu_cond: f64,
    cv_a: f64,
    mean_mu_shift: Option<f64>,
    plug_in: bool,
) -> VarianceDecomposition {
    let var_c = variance(c);
    let cor_sq = 1.0 / (1.0 + cv_a * cv_a / (1.0 - e_p));
    VarianceDecomposition {
        var_ac: variance(y),
        term_amount: e_p * var_a_cond,
        term_binary: var_c * mean_mu_cond * mean_mu_cond,
        cor_ac_c_closed: cor_sq.sqrt(),
        cv_a,
        mean_mu_shift,
        plug_in,
    }
}

/// Evaluate the `Var[y]` split on a sample with retained latents.
pub fn variance_decomposition(sample: &LatentSample<'_>) -> Result<VarianceDecomposition> {
    let a_pos = positive_subset(sample.a, sample.c);
    if a_pos.is_empty() {
        return Err(Error::EmptyPositiveSubset);
    }
    let mu_pos = positive_subset(sample.mu, sample.c);
    let e_p = mean(sample.p);
    let var_a_cond = if a_pos.len() < 2 { 0.0 } else { variance(&a_pos) };
    let mean_a_pos = mean(&a_pos);
    let cv_a = if mean_a_pos == 0.0 { 0.0 } else { var_a_cond.sqrt() / mean_a_pos };
    let shift = covariance(sample.p, sample.mu)? / e_p;
    Ok(variance_split(
        sample.y,
        sample.c,
        e_p,
        var_a_cond,
        mean(&mu_pos),
        cv_a,
        Some(shift),
        false,
    ))
}

/// Plug-in variant for real data: `E[p]` becomes the positive-class
/// frequency and `E[mu | c=1]` the observed mean amount.
pub fn variance_decomposition_empirical(y: &[f64], c: &[f64]) -> Result<VarianceDecomposition> {
    let a_pos = positive_subset(y, c);
    if a_pos.is_empty() {
        return Err(Error::EmptyPositiveSubset);
    }
    let e_p = mean(c);
    let var_a_cond = if a_pos.len() < 2 { 0.0 } else { variance(&a_pos) };
    let mean_a = mean(&a_pos);
    let cv_a = if mean_a == 0.0 { 0.0 } else { var_a_cond.sqrt() / mean_a };
    Ok(variance_split(y, c, e_p, var_a_cond, mean_a, cv_a, None, true))
}

/// Signal-to-noise ratio of a composite target written as a weighted sum
/// of the component ratios plus a dependence penalty.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SnrMixture {
    pub snr_y: f64,
    pub snr_a: f64,
    pub snr_c: f64,
    /// Weight of the amount component's ratio.
    pub alpha: f64,
    /// Residual `snr_y - alpha*snr_a - (1-alpha)*snr_c`.
    pub psi: f64,
    /// Dependence penalty computed from its own closed form, for
    /// cross-checking the residual route.
    pub d_eps: f64,
    /// `Var[zeta]`
    pub signal_y: f64,
    /// `E[p]*Var[eps_mu | c=1] + E[mu^2 * eps_p^2]`
    pub noise_y: f64,
}

/// Compute the composite-target SNR mixture on a sample with retained
/// latents.
pub fn snr_mixture(sample: &LatentSample<'_>) -> Result<SnrMixture> {
    let mu_pos = positive_subset(sample.mu, sample.c);
    let eps_mu_pos = positive_subset(sample.eps_mu, sample.c);
    if mu_pos.len() < 2 {
        return Err(Error::EmptyPositiveSubset);
    }
    let var_eps_mu_cond = variance(&eps_mu_pos);
    let var_eps_p = variance(sample.eps_p);
    if var_eps_mu_cond <= 0.0 || var_eps_p <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    let var_eps = variance(sample.eps);
    if var_eps <= 0.0 {
        return Err(Error::ZeroNoise);
    }

    let e_p = mean(sample.p);
    let mean_mu_cond = mean(&mu_pos);
    let snr_y = variance(sample.zeta) / var_eps;
    let snr_a = variance(&mu_pos) / var_eps_mu_cond;
    let snr_c = variance(sample.p) / var_eps_p;

    let amount_noise = e_p * var_eps_mu_cond;
    let binary_noise = mean_mu_cond * mean_mu_cond * var_eps_p;
    let alpha = amount_noise / (amount_noise + binary_noise);
    let psi = snr_y - alpha * snr_a - (1.0 - alpha) * snr_c;

    let n = sample.y.len() as f64;
    let e_mu_sq_eps_p_sq = compensated_sum(
        sample
            .mu
            .iter()
            .zip(sample.eps_p)
            .map(|(&m, &ep)| m * m * ep * ep),
    ) / n;
    let noise_y = amount_noise + e_mu_sq_eps_p_sq;

    // Dependence penalty from its closed form:
    //   Var[mu]*Var[eps_p]
    //   + (Cov(p,mu)/E[p] - 2 E[mu|c=1]) * Cov(p,mu)/E[p] * Var[eps_p]
    //   + Cov(mu^2, eps_p^2)
    let cov_p_mu = covariance(sample.p, sample.mu)?;
    let shift = cov_p_mu / e_p;
    let mu_sq: Vec<f64> = sample.mu.iter().map(|&m| m * m).collect();
    let eps_p_sq: Vec<f64> = sample.eps_p.iter().map(|&e| e * e).collect();
    let cov_mu_sq_eps_p_sq = covariance(&mu_sq, &eps_p_sq)?;
    let d_eps = variance(sample.mu) * var_eps_p
        + (shift - 2.0 * mean_mu_cond) * shift * var_eps_p
        + cov_mu_sq_eps_p_sq;

    Ok(SnrMixture {
        snr_y,
        snr_a,
        snr_c,
        alpha,
        psi,
        d_eps,
        signal_y: variance(sample.zeta),
        noise_y,
    })
}
