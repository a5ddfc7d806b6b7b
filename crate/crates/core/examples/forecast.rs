//! Fits the linear forecaster on a partly observed panel and scores rolling
//! one-block-ahead forecasts against the noiseless signal.

use mssa::synth::{corrupt, generate_latent, CorruptionSpec, FactorModelSpec, NoiseModel};
use mssa::ssa::forecast_ahead;
use mssa::{fit_forecaster, rolling_forecast, ForecastConfig, RankPolicy};

fn main() -> mssa::Result<()> {
    let latent = generate_latent(&FactorModelSpec::harmonic(10, 3000, 1, 3, 11))?;
    let panel = corrupt(&latent, &CorruptionSpec::new(0.8, NoiseModel::Gaussian { sigma: 0.2 }, 2))?;
    let cfg = ForecastConfig::new(RankPolicy::Fixed(6));

    let model = fit_forecaster(&panel, &cfg)?;
    println!("window L = {}, rank k = {}, beta has {} weights", model.window, model.k, model.beta.len());

    let ahead = forecast_ahead(&model, &panel, 5)?;
    println!("next 5 steps of series 0: {:?}", ahead.row(0).iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let rolling = rolling_forecast(&panel, &cfg, 24, 5)?;
    println!("rolling 5 x 24 steps from t = {}", rolling.eval_start());
    for (w, err) in rolling.windows.iter().zip(rolling.for_err_series(&latent.values)) {
        println!("  targets {:?}: MSE {err:.4}", w.targets);
    }
    println!("NRMSE against the latent panel: {:.4}", rolling.nrmse(&latent.values));
    Ok(())
}
