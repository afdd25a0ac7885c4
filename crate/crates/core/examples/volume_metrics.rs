//! Monte Carlo volumes and the symmetric-difference metric D_V on shared
//! samples, including the shrinking-annulus family.

use roacert::metrics::{
    dv_mc, sublevel_convergence_check, volume_mc, write_report, Predicate, ReportRow, ScalarField,
};
use roacert::poly::BoxDomain;

/// `J_d = ‖x‖² + 1/d`, which dominates `V = ‖x‖²`.
struct Shifted(f64);

impl ScalarField for Shifted {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() + self.0
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let domain = BoxDomain::symmetric(&[1.5, 1.5])?;
    let disk = Predicate::new("unit disk", |x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0);
    let square = Predicate::new("unit square", |x: &[f64]| {
        x[0].abs() < 1.0 && x[1].abs() < 1.0
    });
    let n = 100_000;
    let rows = [
        ReportRow::new("unit disk", "-", &volume_mc(&disk, &domain, n, 0)),
        ReportRow::new("unit square", "-", &volume_mc(&square, &domain, n, 0)),
        ReportRow::new(
            "unit square",
            "unit disk",
            &dv_mc(&square, &disk, &domain, n, 0),
        ),
    ];
    print!("{}", write_report(&rows)?);
    println!(
        "exact: π = {:.4}, 4, 4 − π = {:.4}",
        std::f64::consts::PI,
        4.0 - std::f64::consts::PI
    );

    let v = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
    let shifts: Vec<(u32, Shifted)> = [1u32, 2, 4, 8, 16]
        .iter()
        .map(|&d| (d, Shifted(1.0 / d as f64)))
        .collect();
    let family: Vec<(u32, &dyn ScalarField)> = shifts
        .iter()
        .map(|(d, j)| (*d, j as &dyn ScalarField))
        .collect();
    println!("d, D_V, SE, exact π/d");
    for row in sublevel_convergence_check(&v, &family, 1.0, &domain, n, 0)? {
        println!(
            "{}, {:.4}, {:.4}, {:.4}",
            row.degree,
            row.dv.value,
            row.dv.std_error,
            std::f64::consts::PI / row.degree as f64
        );
    }
    Ok(())
}
