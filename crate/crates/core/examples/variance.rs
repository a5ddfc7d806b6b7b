//! Estimates a time-varying noise variance from one fully observed panel by
//! imputing both `X` and `X²`.

use mssa::synth::{corrupt, generate_latent, CorruptionSpec, FactorModelSpec, HarmonicTerm, NoiseModel, SignalSpec};
use mssa::variance::{estimate_variance, VarianceConfig};
use mssa::RankPolicy;

fn main() -> mssa::Result<()> {
    let (n, t) = (20, 16000);
    let latent = generate_latent(&FactorModelSpec::harmonic(n, t, 1, 1, 3))?;
    // The noise variance itself follows a one-factor model: a level plus a slow cosine.
    let variance = FactorModelSpec {
        n,
        t,
        temporal: vec![SignalSpec::HarmonicMix {
            terms: vec![HarmonicTerm::cosine(0.3, 0.0, 0.0), HarmonicTerm::cosine(0.25, 0.002, 0.0)],
        }],
        loading_bound: 3.0,
        value_bound: None,
        seed: 5,
    };
    let corruption = CorruptionSpec {
        rho: 1.0,
        noise: NoiseModel::Gaussian { sigma: 1.0 },
        variance: Some(variance),
        seed: 9,
    };
    let truth = corruption.variance_field()?.expect("variance model set");
    let panel = corrupt(&latent, &corruption)?;

    let cfg = VarianceConfig {
        policy_mean: RankPolicy::Fixed(2),
        policy_squared: RankPolicy::Fixed(5),
        ..VarianceConfig::default()
    };
    let res = estimate_variance(&panel, &cfg)?;
    let mse = mssa::metrics::imp_err(&truth, &res.sigma2_hat);
    println!("mean true variance      {:.4}", truth.mean());
    println!("mean estimated variance {:.4}", res.sigma2_hat.mean());
    println!("MSE of the variance estimate {mse:.5}");
    // one period of the variance cosine is 500 steps
    for t in [8000, 8125, 8250, 8375] {
        let span = t..t + 50;
        let avg = |m: &nalgebra::DMatrix<f64>| m.columns(span.start, span.len()).mean();
        println!("  t in {span:?}: true {:.3}, estimated {:.3}", avg(&truth), avg(&res.sigma2_hat));
    }
    Ok(())
}
