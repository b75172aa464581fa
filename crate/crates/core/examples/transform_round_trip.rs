//! Field angles and back: `(D1, D2, B) -> (θ2, θB, α, β) -> (D2, B)`.
//!
//! ```bash
//! cargo run --example transform_round_trip
//! ```

use bivlasov::transform::{
    constitutive_eh, eigenvalues_raw, eigenvalues_theta, from_theta, quasilinear_form, to_theta, RawFieldPoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let points = [
        RawFieldPoint::new(0.0, 0.0, 0.0),
        RawFieldPoint::new(0.3, -0.8, 1.2),
        RawFieldPoint::new(-2.0, 5.0, -0.4),
        RawFieldPoint::new(1e-3, 40.0, 40.0),
    ];
    println!("{:>8} {:>8} {:>8} | {:>10} {:>10} {:>10} {:>10} | {:>9}", "D1", "D2", "B", "theta2", "thetaB", "alpha", "beta", "rel err");
    for p in points {
        let t = to_theta(p)?;
        let (d2, b) = from_theta(t.theta2, t.theta_b, p.d1)?;
        let scale = p.d2.abs().max(p.b.abs()).max(1.0);
        let err = (d2 - p.d2).abs().max((b - p.b).abs()) / scale;
        println!(
            "{:>8} {:>8} {:>8} | {:>10.6} {:>10.6} {:>10.6} {:>10.6} | {:>9.1e}",
            p.d1, p.d2, p.b, t.theta2, t.theta_b, t.alpha, t.beta, err
        );
    }

    // characteristic speeds two ways
    let p = RawFieldPoint::new(0.3, -0.8, 1.2);
    let t = to_theta(p)?;
    let (l1, l2) = eigenvalues_theta(t.theta2, t.theta_b);
    let (r1, r2) = eigenvalues_raw(p)?;
    println!("\nspeeds from angles ({l1:.12}, {l2:.12})");
    println!("speeds from matrix ({r1:.12}, {r2:.12})");

    let q = quasilinear_form(p)?;
    println!("A = {:?}", q.a);
    let (e2, h) = constitutive_eh(p)?;
    println!("E2 = {e2:.6}, H = {h:.6}");
    Ok(())
}
