//! Scratch calibration runner (not part of the deliverable).

use limdep::composer;
use limdep::stats::{self, mean, pearson, variance};
use limdep::synth::{self, Preset, SyntheticSpec};

fn describe(name: &str, spec: &SyntheticSpec) {
    let mut spec = spec.clone();
    spec.n = 1_000_000;
    let pop = synth::generate(&spec).unwrap();
    let lr_p = pearson(&pop.p, &pop.zeta).unwrap();
    let lr_mu = pearson(&pop.mu, &pop.zeta).unwrap();
    let sample = pop.latents();
    let mix = stats::snr_mixture(&sample).unwrap();
    let vd = stats::variance_decomposition(&sample).unwrap();
    let zero_share = 1.0 - mean(&pop.c);
    let cor_yc = pearson(&pop.y, &pop.c).unwrap();
    println!("== {name} ==");
    println!(
        "  E[p]={:.4} zero_share={:.4} E[mu]={:.3} CV_p={:.3} CV_mu={:.3}",
        mean(&pop.p),
        zero_share,
        mean(&pop.mu),
        variance(&pop.p).sqrt() / mean(&pop.p),
        variance(&pop.mu).sqrt() / mean(&pop.mu),
    );
    println!(
        "  LR_p={lr_p:.4} LR_mu={lr_mu:.4} Cor(y,c)={cor_yc:.4} closed={:.4}",
        vd.cor_ac_c_closed
    );
    println!(
        "  snr_y={:.4} snr_a={:.4} snr_c={:.4} alpha={:.4} psi={:+.5}",
        mix.snr_y, mix.snr_a, mix.snr_c, mix.alpha, mix.psi
    );
    // worst Eq-3 residual over the 3x3 grid
    let mut worst = 0.0f64;
    for (ci, &rp) in [0.3, 0.6, 0.9].iter().enumerate() {
        for (cj, &rm) in [0.3, 0.6, 0.9].iter().enumerate() {
            let ph = synth::correlated_noise_vector(&pop.p, rp, 1000 + ci as u64).unwrap();
            let mh = synth::correlated_noise_vector(&pop.mu, rm, 2000 + cj as u64).unwrap();
            let d = composer::weight_diagnostics(&ph, &mh, &pop.p, &pop.mu).unwrap();
            if d.r_residual.abs() > worst.abs() {
                worst = d.r_residual;
            }
            print!(" {:+.4}", d.r_residual);
        }
    }
    println!("\n  worst grid residual: {worst:+.5}");
    // oracle-model residual
    let d = composer::weight_diagnostics(&pop.p, &pop.mu, &pop.p, &pop.mu).unwrap();
    println!(
        "  oracle predicted={:.4} observed={:.4} residual={:+.5}  C^I={:.4}",
        d.predicted_product_cor, d.observed_product_cor, d.r_residual, d.c_interaction
    );
}

fn contours() {
    use limdep::exec::Mode;
    use limdep::synth::ContourOptions;
    let opts = ContourOptions::default();
    for preset in [Preset::RegimeStrong, Preset::RegimeWeak] {
        let mut spec = preset.spec();
        spec.n = 300_000;
        let pop = synth::generate(&spec).unwrap();
        let pts = synth::required_correlation_contour(&pop, &opts, Mode::default()).unwrap();
        println!("== contour {} ==", preset.name());
        for pt in &pts {
            println!(
                "  r_p={:.2} r_mu={:.4} achieved={:.4} feasible={}",
                pt.r_p, pt.r_mu, pt.achieved_cor, pt.feasible
            );
        }
    }
}

fn sweeps() {
    use limdep::composer::{adjustment_sweep_values, SweepGrid};
    // Figure-2-style patterns on REGIME-STRONG-like data
    let mut spec = Preset::RegimeStrong.spec();
    spec.n = 400_000;
    let pop = synth::generate(&spec).unwrap();
    let grid = SweepGrid::default();

    // (a) anti-correlated amount model: flip a pseudo-model around its mean
    let p_hat = synth::correlated_noise_vector(&pop.p, 0.6, 71).unwrap();
    let mu_pseudo = synth::correlated_noise_vector(&pop.mu, 0.4, 72).unwrap();
    let m = mean(&mu_pseudo);
    let mu_neg: Vec<f64> = mu_pseudo.iter().map(|&v| 2.0 * m - v).collect();
    let zeta_hat = synth::correlated_noise_vector(&pop.zeta, 0.5, 73).unwrap();
    let s = adjustment_sweep_values(&p_hat, &mu_neg, m, Some(&zeta_hat), &pop.y, &grid).unwrap();
    println!(
        "(a) best={:.2} corbest={:.4} at0={:.4} at1={:.4} single={:.4}",
        s.best_s_ad,
        s.best_correlation,
        s.cor_at_zero,
        s.cor_at_one,
        s.single_model_cor.unwrap()
    );

    // (b) weak-positive amount model with inflated CV on a population
    // where the amount matters: interior optimum
    let mut wspec = Preset::RegimeWeak.spec();
    wspec.n = 400_000;
    let wpop = synth::generate(&wspec).unwrap();
    let wp_hat = synth::correlated_noise_vector(&wpop.p, 0.6, 75).unwrap();
    let mu_weak = synth::correlated_noise_vector(&wpop.mu, 0.3, 74).unwrap();
    let wm = mean(&mu_weak);
    let inflated: Vec<f64> = mu_weak.iter().map(|&v| wm + (v - wm) * 3.0).collect();
    let s = adjustment_sweep_values(&wp_hat, &inflated, wm, None, &wpop.y, &grid).unwrap();
    println!(
        "(b) best={:.2} corbest={:.4} at0={:.4} at1={:.4}",
        s.best_s_ad, s.best_correlation, s.cor_at_zero, s.cor_at_one
    );

    // selection logic: equally calibrated against observable targets,
    // occurrence model transfers better when Cor(p, zeta) is high and
    // SNR_c >> SNR_y
    let q = 0.6;
    let p_from_c = synth::correlated_noise_vector(&pop.c, q, 81).unwrap();
    let z_from_y = synth::correlated_noise_vector(&pop.y, q, 82).unwrap();
    let cor_p = pearson(&p_from_c, &pop.zeta).unwrap();
    let cor_z = pearson(&z_from_y, &pop.zeta).unwrap();
    println!("selection: Cor(p_hat, zeta)={cor_p:.4} vs Cor(zeta_hat, zeta)={cor_z:.4}");
}

fn main() {
    describe("REGIME-STRONG", &Preset::RegimeStrong.spec());
    describe("REGIME-WEAK", &Preset::RegimeWeak.spec());
    contours();
    sweeps();
}
