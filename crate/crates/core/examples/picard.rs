//! The Picard iteration behind the existence proof, run on a short interval
//! and compared with the direct time stepper.
//!
//! ```bash
//! cargo run --release --example picard
//! ```

use bivlasov::config::{parse_config, Mode};
use bivlasov::run::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = parse_config(r#"{"preset": "small_coupled", "grid": {"nx": 64, "nv1": 24, "nv2": 24}, "time": {"t_end": 0.1}}"#)?;
    cfg.solver.mode = Mode::Picard;
    cfg.solver.picard.t_final = Some(0.1);
    let picard = run(&cfg)?;
    let trace = picard.picard.as_ref().expect("picard mode records a trace");
    println!("{:>4} {:>12} {:>12} {:>8}", "n", "delta f", "delta field", "ratio");
    let mut prev: Option<f64> = None;
    for it in &trace.iterations {
        let ratio = prev.map_or(String::new(), |p| format!("{:.3}", it.delta_f / p));
        println!("{:>4} {:>12.3e} {:>12.3e} {:>8}", it.n, it.delta_f, it.delta_field, ratio);
        prev = Some(it.delta_f);
    }
    println!("converged: {}", trace.converged);

    cfg.solver.mode = Mode::Direct;
    let direct = run(&cfg)?;
    let gap = picard
        .last
        .inv
        .theta2()
        .iter()
        .zip(direct.last.inv.theta2())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("max |theta2 picard - theta2 direct| at T: {gap:.3e}");
    Ok(())
}
