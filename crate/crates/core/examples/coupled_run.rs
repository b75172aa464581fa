//! A small coupled plasma run with every a priori bound checked per frame.
//!
//! ```bash
//! cargo run --release --example coupled_run
//! ```

use bivlasov::config::parse_config;
use bivlasov::run::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(
        r#"{"preset": "small_coupled", "grid": {"nx": 64, "nv1": 24, "nv2": 24}, "output": {"every": 4}}"#,
    )?;
    let out = run(&cfg)?;
    let h = &out.plan.horizon;
    println!("certified end {:?}, running to {:.4} in {} steps", h.certified_end.value(), out.plan.t_stop, out.plan.steps);
    println!("{:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>5}", "t", "|D1|", "|B|", "Theta", "P", "P env", "d1 gap", "ok");
    for fr in &out.frames {
        println!(
            "{:>7.4} {:>10.3e} {:>10.3e} {:>10.6} {:>10.6} {:>10.6} {:>9.2e} {:>5}",
            fr.t, fr.d1_sup, fr.b_sup, fr.angle_sum_max, fr.p_measured, fr.p_envelope, fr.d1_gap, fr.ok_all
        );
    }
    println!("support growth within bound: {}", out.support_growth_ok(cfg.tolerances.envelope_tol));
    Ok(())
}
