// scratch harness (deleted before finalizing)
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stlcode::dict::{learn_dictionary, LearnParams};
use stlcode::synth::{dictionary_recovery_score, synth_generate, SynthParams};
use stlcode::Family;

fn main() {
    let clean = synth_generate(&SynthParams {
        seed: 42, obs_dim: 16, n_basis: 8, examples: 500, sparsity: 2,
        family: Family::Gaussian, noiseless: true,
    }).unwrap();

    for sigma in [0.15f64, 0.2, 0.25, 0.3] {
        for noise_seed in [1006u64, 77, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let mut x = clean.x.clone();
            for v in x.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *v += sigma * n;
            }
            let mut line = format!("sigma={sigma} nseed={noise_seed}:");
            for learn_seed in [1u64, 2, 5] {
                let (dict, _) = learn_dictionary(&x, &LearnParams {
                    n_basis: 8, beta: 0.5, sweeps: 60, seed: learn_seed, tol: 1e-9,
                    ..LearnParams::default()
                }).unwrap();
                let score = dictionary_recovery_score(&clean.basis_true, dict.basis()).unwrap();
                line.push_str(&format!(" s{learn_seed}={score:.4}"));
            }
            println!("{line}");
        }
    }
}
