//! Trajectory oracles: membership, entry time and the converse Lyapunov
//! values W and V, against the closed forms for ẋ = −x + x³.

use roacert::dynamics::{Oracle, OracleConfig, VectorField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::scalar_cubic();
    let oracle = Oracle::new(&f, &OracleConfig::default())?;
    let (lambda, beta) = (1.0, 1);
    println!(
        "{:>6} {:>12} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "x0", "class", "entry", "W", "W exact", "V", "V exact"
    );
    for x0 in [0.0, 0.3, 0.6, 0.9, 0.99, 1.2f64] {
        let row = oracle.evaluate(&[x0], lambda, beta)?;
        let entry = oracle
            .entry_time(&[x0])?
            .map_or("-".into(), |t| format!("{t:.4}"));
        let (w_exact, v_exact) = if x0.abs() < 1.0 {
            (
                1.0 - (1.0 - x0 * x0).powf(lambda / 2.0),
                0.5 * (1.0 / (1.0 - x0 * x0)).ln(),
            )
        } else {
            (1.0, f64::INFINITY)
        };
        println!(
            "{x0:>6} {:>12} {entry:>10} {:>12.8} {w_exact:>12.8} {:>12.8} {v_exact:>12.8}",
            format!("{:?}", row.membership),
            row.w.value,
            row.v.value
        );
    }
    Ok(())
}
