//! The kinetic step alone: a bump drifting in x and turning in a constant
//! magnetic field, with the conserved quantities printed along the way.
//!
//! ```bash
//! cargo run --example free_streaming
//! ```

use bivlasov::config::bump_profile;
use bivlasov::interp::Interpolation;
use bivlasov::kinetic::{semi_lagrangian_step, DistributionGrid, FieldInterval, PhaseSpaceGrid, RawFields};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = PhaseSpaceGrid::new(-4.0, 4.0, 81, 1.2, 32, 32)?;
    let f0 = DistributionGrid::from_fn(g, |x, v1, v2| bump_profile(x / 1.5, 4) * bump_profile((v1 - 0.3).hypot(v2) / 0.6, 4));
    let fields = RawFields { d1: vec![0.0; g.nx], d2: vec![0.0; g.nx], b: vec![0.5; g.nx] };
    let interval = FieldInterval::constant(g.x_axis(), Interpolation::Cubic, &fields);

    let (mass0, l1_0, sup0) = (f0.mass(), f0.l1(), f0.sup());
    let mut f = f0;
    println!("{:>5} {:>12} {:>12} {:>10} {:>10} {:>8}", "t", "mass drift", "L1 drift", "max f", "min f", "P");
    for step in 0..=100 {
        if step % 20 == 0 {
            let min = f.values.iter().copied().fold(f64::INFINITY, f64::min);
            println!(
                "{:>5.2} {:>12.2e} {:>12.2e} {:>10.6} {:>10.2e} {:>8.4}",
                step as f64 * 0.02,
                (f.mass() - mass0).abs() / mass0,
                (f.l1() - l1_0).abs() / l1_0,
                f.max() / sup0,
                min,
                f.momentum_support(1e-8 * sup0)
            );
        }
        if step < 100 {
            f = semi_lagrangian_step(&f, &interval, 0.02, Interpolation::Cubic, 1e-4)?;
        }
    }
    Ok(())
}
