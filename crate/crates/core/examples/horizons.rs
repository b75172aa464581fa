//! Existence horizons of a few sets of initial norms.
//!
//! ```bash
//! cargo run --example horizons
//! ```

use bivlasov::horizon::{horizon_report, Horizon, HorizonOptions, InitialDataSummary};

fn show(h: Horizon) -> String {
    match h {
        Horizon::Finite(t) => format!("{t:.6}"),
        Horizon::ExceedsTMax => "> t_max".into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("fields only", InitialDataSummary { theta2_sup: 0.3, theta_b_sup: 0.2, f_sup: 0.0, f_l1: 0.0, n_sup: 0.1, n_l1: 0.1, p0: 0.0 }),
        ("light plasma", InitialDataSummary { theta2_sup: 0.1, theta_b_sup: 0.1, f_sup: 0.05, f_l1: 0.2, n_sup: 0.05, n_l1: 0.2, p0: 1.0 }),
        ("dense plasma", InitialDataSummary { theta2_sup: 0.1, theta_b_sup: 0.1, f_sup: 2.0, f_l1: 3.0, n_sup: 1.0, n_l1: 3.0, p0: 1.5 }),
        ("A3 fails", InitialDataSummary { theta2_sup: 0.7, theta_b_sup: 0.5, f_sup: 0.1, f_l1: 0.1, n_sup: 0.1, n_l1: 0.1, p0: 1.0 }),
    ];
    let opts = HorizonOptions::default();
    println!("{:<13} {:>6} {:>5} {:>12} {:>12} {:>12} {:>12}", "case", "Theta0", "A3", "t*", "T1", "T2", "certified");
    for (name, s) in cases {
        let (h, env) = horizon_report(&s, opts)?;
        println!(
            "{:<13} {:>6.3} {:>5} {:>12} {:>12} {:>12} {:>12}",
            name,
            s.theta0(),
            h.a3,
            show(h.t_star),
            show(h.t1),
            show(h.t2),
            show(h.certified_end)
        );
        if let Horizon::Finite(t) = h.certified_end {
            let (p, theta) = env.eval(t);
            println!("{:<13} envelope at certified end: P = {p:.4}, Theta = {theta:.4}", "");
        }
    }
    Ok(())
}
