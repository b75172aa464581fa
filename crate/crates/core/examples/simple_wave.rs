//! A vacuum simple wave: only the field solver moves, and the Riemann
//! invariant that should stay constant is printed against its initial value.
//!
//! ```bash
//! cargo run --example simple_wave
//! ```

use bivlasov::config::parse_config;
use bivlasov::run::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(r#"{"preset": "simple_wave", "grid": {"nx": 256}, "time": {"t_end": 0.5}}"#)?;
    let out = run(&cfg)?;
    let first = &out.plan.initial.inv;
    let last = &out.last.inv;
    // alpha is carried along its own characteristic and should stay flat
    let drift = first.alpha.iter().zip(&last.alpha).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("t = {:.3}, steps = {}, dt = {:.5}", out.last.t, out.last.step, out.plan.dt);
    println!("max |alpha(T) - alpha(0)| = {drift:.3e}");
    println!("beta range at T: {:.5} .. {:.5}", min(&last.beta), max(&last.beta));
    println!("frames with a failed bound: {}", out.bound_violations());
    Ok(())
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
