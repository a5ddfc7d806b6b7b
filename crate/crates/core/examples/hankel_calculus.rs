//! Hankel ranks of basic signals and of their sums and products.

use mssa::embed::hankel;
use mssa::linalg::{numeric_rank, EXACT_RANK_TOL};
use mssa::synth::{calculus_check, hankel_rank_oracle, HarmonicTerm, SignalSpec};

fn cosine(frequency: f64) -> SignalSpec {
    SignalSpec::HarmonicMix {
        terms: vec![HarmonicTerm::cosine(1.0, frequency, 0.0)],
    }
}

fn main() -> mssa::Result<()> {
    let len = 200;
    let signals = [
        ("constant", SignalSpec::Constant { value: 2.0 }),
        ("line", SignalSpec::Polynomial { coefficients: vec![1.0, 0.5] }),
        ("quadratic", SignalSpec::Polynomial { coefficients: vec![1.0, 0.0, 0.01] }),
        ("cosine", cosine(0.05)),
        ("damped", SignalSpec::Lrf { coefficients: vec![1.8, -0.9], initial: vec![1.0, 0.5] }),
    ];
    for (name, spec) in &signals {
        println!("{name:>10}: rank {} (bound {:?})", hankel_rank_oracle(spec, len)?, spec.hankel_rank_bound());
    }

    let x = cosine(0.13).sample(40);
    println!("\n20x20 Hankel of cos(2pi 0.13 t): rank {}", numeric_rank(&hankel(&x)?.data, EXACT_RANK_TOL));

    let check = calculus_check(&cosine(0.05), &cosine(0.17), len)?;
    println!(
        "\ncos + cos: rank {} <= {}; cos * cos: rank {} <= {}; holds: {}",
        check.rank_sum,
        check.bound_sum,
        check.rank_prod,
        check.bound_prod,
        check.holds()
    );
    Ok(())
}
