//! Behavioural checks against independently computed reference values.

use std::f64::consts::PI;

use mssa::diagnostics::{mssa_suitability, rank_scaling_report, Suitability, WindowRule};
use mssa::hsvt::{fit_hsvt, RankPolicy};
use mssa::metrics::{imp_err, nrmse, Standardizer};
use mssa::ssa::{fit_forecaster, forecast_ahead, impute, rolling_forecast, ForecastConfig, ImputeConfig, Method};
use mssa::synth::{
    corrupt, generate_latent, harmonic_mixture_panel, CorruptionSpec, FactorModelSpec, HarmonicTerm, NoiseModel,
    SignalSpec,
};
use mssa::tssa::{tssa_impute, vanilla_me_impute, AlsOptions, TssaConfig};
use mssa::Panel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn cosine_panel(loadings: &[f64], t: usize, freq: f64, phase: f64) -> DMatrix<f64> {
    DMatrix::from_fn(loadings.len(), t, |s, step| loadings[s] * (2.0 * PI * freq * step as f64 + phase).cos())
}

#[test]
fn rank_one_sign_matrix_completes_from_thirty_percent() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let u: Vec<f64> = (0..200).map(|_| sign(&mut rng)).collect();
        let v: Vec<f64> = (0..200).map(|_| sign(&mut rng)).collect();
        let truth = DMatrix::from_fn(200, 200, |i, j| u[i] * v[j]);
        let mask = DMatrix::from_fn(200, 200, |_, _| rng.random::<f64>() < 0.3);
        let observed = truth.zip_map(&mask, |x, m| if m { x } else { 0.0 });
        let est = fit_hsvt(&observed, &mask, RankPolicy::Fixed(1)).unwrap().estimate();
        let rel = (&est - &truth).norm() / truth.norm();
        assert!(rel < 0.2, "seed {seed}: relative error {rel}");
    }
}

#[test]
fn noiseless_panel_forecasts_next_block_exactly() {
    let t = 600;
    let truth = cosine_panel(&[1.0, -0.5, 2.0], t, 0.031, 0.4) + cosine_panel(&[0.3, 0.8, -1.1], t, 0.007, 1.2);
    let cfg = ForecastConfig::new(RankPolicy::Fixed(4)).with_window(40);
    let history = Panel::observed(truth.columns(0, t - 40).into_owned());
    let model = fit_forecaster(&history, &cfg).unwrap();
    let ahead = forecast_ahead(&model, &history, 40).unwrap();
    let target = truth.columns(t - 40, 40).into_owned();
    assert!(max_abs_diff(&ahead, &target) < 1e-6, "{}", max_abs_diff(&ahead, &target));
}

#[test]
fn seasonal_signal_forecast_one_season_ahead() {
    let season = 24;
    let t = season * 60;
    let shape = |step: usize| {
        let x = 2.0 * PI * (step % season) as f64 / season as f64;
        3.0 + x.cos() + 0.5 * (2.0 * x).sin() + 0.25 * (3.0 * x + 0.3).cos()
    };
    let truth = DMatrix::from_fn(2, t, |s, step| (1.0 + s as f64) * shape(step));
    let p = Panel::observed(truth.clone());
    // a constant plus three harmonics of the season; a window coprime to the
    // season lets the Page columns visit every phase
    let cfg = ForecastConfig::new(RankPolicy::Fixed(7)).with_window(25);
    let rf = rolling_forecast(&p, &cfg, season, 3).unwrap();
    let score = rf.nrmse(&truth);
    assert!(score < 0.05, "NRMSE {score}");
}

#[test]
fn forecasting_the_wrong_series_scores_like_independent_noise() {
    let t = 3000;
    let a = cosine_panel(&[1.0], t, 0.013, 0.0);
    let b = cosine_panel(&[1.0], t, 0.037, 1.0);
    let truth = DMatrix::from_fn(2, t, |s, step| if s == 0 { a[(0, step)] } else { b[(0, step)] });
    let rf = rolling_forecast(&Panel::observed(truth.clone()), &ForecastConfig::new(RankPolicy::Fixed(4)).with_window(50), 50, 4).unwrap();
    let start = rf.eval_start();
    let pred = rf.predictions();
    let swapped = DMatrix::from_fn(2, pred.ncols(), |s, j| pred[(1 - s, j)]);
    let span = pred.ncols();
    let scored = DMatrix::from_element(2, span, true);
    let stats = Standardizer::fit(&truth, 0..start, None);
    let score = nrmse(&truth.columns(start, span).into_owned(), &swapped, &scored, &stats);

    // reference: RMS gap between the two standardized series, averaged over series
    let z = |s: usize, step: usize| {
        let row = truth.row(s).columns(0, start).into_owned();
        let mean = row.mean();
        let sd = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / start as f64).sqrt();
        (truth[(s, step)] - mean) / sd
    };
    let mut total = 0.0;
    for s in 0..2 {
        let ms = (start..start + span).map(|step| (z(s, step) - z(1 - s, step)).powi(2)).sum::<f64>() / span as f64;
        total += ms.sqrt();
    }
    let reference = total / 2.0;
    assert!((score - reference).abs() < 0.05, "{score} vs {reference}");
    assert!(score > 0.7, "{score}");
}

#[test]
fn tssa_single_series_matches_mssa() {
    let t = 900;
    let x = SignalSpec::HarmonicMix {
        terms: vec![HarmonicTerm::cosine(1.0, 0.043, 0.2)],
    }
    .sample(t);
    let truth = DMatrix::from_row_slice(1, t, &x);
    let p = Panel::observed(truth.clone());
    let tssa = tssa_impute(&p, &TssaConfig::new(2)).unwrap();
    let mssa = impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(2)).with_window(30)).unwrap();
    assert!(max_abs_diff(&tssa.estimates, &truth) < 1e-4, "{}", max_abs_diff(&tssa.estimates, &truth));
    assert!(max_abs_diff(&tssa.estimates, &mssa.estimates) < 1e-4);
}

#[test]
fn tssa_recovers_noiseless_factor_panel() {
    let spec = FactorModelSpec::harmonic(5, 400, 1, 1, 21);
    let lp = generate_latent(&spec).unwrap();
    let p = Panel::observed(lp.values.clone());
    let cfg = TssaConfig {
        window: None,
        rank: 2,
        als: AlsOptions {
            max_iters: 2000,
            tol: 1e-14,
            ..AlsOptions::default()
        },
    };
    let res = tssa_impute(&p, &cfg).unwrap();
    let err = max_abs_diff(&res.estimates, &lp.values);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn matrix_estimation_without_embedding_loses_to_mssa_on_two_series() {
    let (mut me_total, mut mssa_total) = (0.0, 0.0);
    for seed in 0..5 {
        let lp = generate_latent(&FactorModelSpec::harmonic(2, 1000, 1, 2, 100 + seed)).unwrap();
        let p = corrupt(&lp, &CorruptionSpec::new(0.8, NoiseModel::Gaussian { sigma: 0.3 }, seed)).unwrap();
        me_total += imp_err(&lp.values, &vanilla_me_impute(&p, RankPolicy::Fixed(1)).unwrap().estimates);
        mssa_total += imp_err(&lp.values, &impute(&p, &ImputeConfig::new(Method::Mssa, RankPolicy::Fixed(4))).unwrap().estimates);
    }
    assert!(me_total > 3.0 * mssa_total, "ME {me_total} vs mSSA {mssa_total}");
}

#[test]
fn stacked_rank_stays_at_factor_bound() {
    // one factor: a level plus a cosine, so its lag space has dimension 3
    let spec = FactorModelSpec {
        n: 20,
        t: 2000,
        temporal: vec![SignalSpec::HarmonicMix {
            terms: vec![HarmonicTerm::cosine(1.0, 0.0, 0.0), HarmonicTerm::cosine(1.0, 0.021, 0.6)],
        }],
        loading_bound: 3.0,
        value_bound: None,
        seed: 3,
    };
    let p = Panel::observed(generate_latent(&spec).unwrap().values);
    let report = rank_scaling_report(&p, &[1, 5, 20], WindowRule::Default, 0.999).unwrap();
    assert_eq!(report.ranks(), vec![3, 3, 3]);
    assert_eq!(mssa_suitability(&report).suitability, Suitability::Favorable);
}

#[test]
fn white_noise_rank_grows_with_series() {
    let (n, t) = (20, 400);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = Panel::observed(DMatrix::from_fn(n, t, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let report = rank_scaling_report(&p, &[1, 5, 20], WindowRule::Default, 0.9).unwrap();
    let ranks = report.ranks();
    assert!(ranks.windows(2).all(|w| w[0] < w[1]), "{ranks:?}");
    for row in &report.rows {
        // a near-flat spectrum needs a large share of its components for 90% of the
        // energy; the square case at N′ = 20 sits near one half
        let dims = row.window.min(row.n_sub * t / row.window);
        let share = row.effective_rank as f64 / dims as f64;
        assert!((0.4..0.95).contains(&share), "{row:?}: {share}");
    }
    assert_eq!(mssa_suitability(&report).suitability, Suitability::Unfavorable);
}

#[test]
fn price_like_series_has_rank_one_or_two() {
    let t = 3993;
    let x: Vec<f64> = (0..t).map(|s| 100.0 + 5.0 * (2.0 * PI * s as f64 / 500.0).cos()).collect();
    let p = Panel::observed(DMatrix::from_row_slice(1, t, &x));
    let report = rank_scaling_report(&p, &[1], WindowRule::Default, 0.9).unwrap();
    assert_eq!(report.rows[0].window, 63);
    assert!((1..=2).contains(&report.rows[0].effective_rank), "{:?}", report.rows);
}

#[test]
fn mixture_recipe_shape() {
    let lp = harmonic_mixture_panel(5, 10, 4, 15000, 1).unwrap();
    assert_eq!(lp.values.shape(), (50, 15000));
}
