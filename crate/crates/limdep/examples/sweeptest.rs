use limdep::composer::{adjustment_sweep_values, SweepGrid};
use limdep::stats::mean;
use limdep::synth::{self, Preset};

fn main() {
    let mut spec = Preset::RegimeWeak.spec();
    spec.n = 1_000_000;
    let pop = synth::generate(&spec).unwrap();
    let p_hat = synth::correlated_noise_vector(&pop.p, 0.6, 113).unwrap();
    for infl in [1.0, 1.5, 2.0] {
        let mu_weak = synth::correlated_noise_vector(&pop.mu, 0.3, 114).unwrap();
        let c = mean(&mu_weak);
        let m: Vec<f64> = mu_weak.iter().map(|&v| c + (v - c) * infl).collect();
        let s = adjustment_sweep_values(&p_hat, &m, c, None, &pop.y, &SweepGrid::default()).unwrap();
        println!(
            "infl={infl} best={} corbest={:.4} at0={:.4} at1={:.4}",
            s.best_s_ad, s.best_correlation, s.cor_at_zero, s.cor_at_one
        );
    }
}
