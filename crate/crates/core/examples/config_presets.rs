//! The bundled presets, and what a broken configuration reports.
//!
//! ```bash
//! cargo run --example config_presets
//! ```

use bivlasov::config::{parse_config, PRESETS};
use bivlasov::run::prepare;

fn main() {
    for name in PRESETS {
        let cfg = parse_config(&format!(r#"{{"preset": "{name}"}}"#)).expect("presets parse");
        let g = &cfg.grid;
        let verdict = match prepare(&cfg) {
            Ok(p) => format!("t_stop {:.4}, {} steps{}", p.t_stop, p.steps, if p.uncertified { ", uncertified" } else { "" }),
            Err(e) => format!("refused: {}", e.kind()),
        };
        println!("{name:<19} x [{}, {}] nx {:<4} v_max {:<5} nv {}x{}  {verdict}", g.x_min, g.x_max, g.nx, g.v_max, g.nv1, g.nv2);
    }

    let broken = r#"{"grid": {"nx": 2, "v_max": -1}, "time": {"t_end": "soon"}, "colour": "blue"}"#;
    if let Err(e) = parse_config(broken) {
        println!("\n{e}");
    }
}
