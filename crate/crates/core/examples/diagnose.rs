//! Tracks the effective rank of the stacked Page matrix as series are added
//! and turns it into a suitability verdict.

use mssa::diagnostics::{mssa_suitability, rank_scaling_report, suitability_from_ranks, WindowRule};
use mssa::synth::{corrupt, generate_latent, CorruptionSpec, FactorModelSpec, NoiseModel};
use mssa::Panel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> mssa::Result<()> {
    let sizes = [1, 10, 50];

    let latent = generate_latent(&FactorModelSpec::harmonic(50, 4000, 2, 2, 1))?;
    let shared = corrupt(&latent, &CorruptionSpec::new(1.0, NoiseModel::Gaussian { sigma: 0.1 }, 2))?;
    let report = rank_scaling_report(&shared, &sizes, WindowRule::Default, 0.9)?;
    for row in &report.rows {
        println!("N' = {:>2}: L = {:>3}, effective rank {}", row.n_sub, row.window, row.effective_rank);
    }
    let verdict = mssa_suitability(&report);
    println!("shared factors: {} ({})\n", verdict.suitability, verdict.rationale);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Panel::observed(DMatrix::from_fn(50, 4000, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let report = rank_scaling_report(&noise, &sizes, WindowRule::Default, 0.9)?;
    let verdict = mssa_suitability(&report);
    println!("independent noise: ranks {:?} -> {}", report.ranks(), verdict.suitability);

    // Rank tables measured elsewhere can be judged directly.
    for (name, ranks, window) in [("traffic-like", [14, 32, 69, 116], 102), ("electricity-like", [19, 37, 44, 31], 162)] {
        println!("{name}: {}", suitability_from_ranks(&ranks, window).suitability);
    }
    Ok(())
}
