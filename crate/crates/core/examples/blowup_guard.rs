//! Runs that must stop: data failing the angle condition are refused, and a
//! run driven towards the singular angle aborts before any NaN appears.
//!
//! ```bash
//! cargo run --release --example blowup_guard
//! ```

use bivlasov::config::parse_config;
use bivlasov::run::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let refused = parse_config(r#"{"preset": "a3_violation"}"#).and_then(|c| run(&c));
    match refused {
        Ok(_) => println!("a3_violation: unexpectedly accepted"),
        Err(e) => println!("a3_violation: refused with exit code {} ({e})", e.exit_code()),
    }

    let cfg = parse_config(r#"{"preset": "blowup_guard"}"#)?;
    let out = run(&cfg)?;
    match &out.abort {
        Some(a) => {
            println!("blowup_guard: {} at t = {:.4}, step {}, exit code {}", a.kind, a.t, a.step, a.exit_code);
            println!("  detail {}", a.detail);
        }
        None => println!("blowup_guard: reached t = {} without a guard", out.last.t),
    }
    let last = out.frames.last().expect("frames up to the abort");
    println!("  last frame: angle sum {:.6}, every value finite: {}", last.angle_sum_max, last.ok_uw_finite);
    Ok(())
}
