//! Reversed Van der Pol oscillator: degree sweep of the inner approximation
//! on Λ = [−2,2]×[−2.7,2.7], λ = 0.05, β = 2.

use std::time::Instant;

use roacert::dynamics::{OracleConfig, VectorField};
use roacert::pipeline::{degree_sweep, RoaSpec};
use roacert::poly::BoxDomain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::van_der_pol();
    let spec = RoaSpec::new(
        0.05,
        2,
        11.29f64.sqrt(),
        BoxDomain::symmetric(&[2.0, 2.7])?,
        12,
    );
    let cfg = OracleConfig::default();
    let degrees: Vec<u32> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let degrees = if degrees.is_empty() {
        vec![6, 8, 10, 12]
    } else {
        degrees
    };
    let start = Instant::now();
    let table = degree_sweep(&f, &spec, &degrees, &cfg)?;
    println!(
        "oracle ROA area in Λ: {:.4} ± {:.4}",
        table.oracle_volume.value, table.oracle_volume.std_error
    );
    for (row, cert) in table.rows.iter().zip(&table.certificates) {
        let Some(cert) = cert else {
            println!(
                "d={:2}  FAILED {}",
                row.degree,
                row.error.as_deref().unwrap_or("")
            );
            continue;
        };
        let checks = cert.checks.as_ref().expect("checked");
        println!(
            "d={:2}  {:?}  area {:.3} ± {:.3}  D_V {:.3}  iters {} reductions {} gap {:.1e}  residual {:.1e}  min eig {:.1e}  checks {}",
            row.degree,
            cert.status,
            row.volume.unwrap().value,
            row.volume.unwrap().std_error,
            row.dv.unwrap().value,
            cert.solver.iterations,
            cert.solver.reductions,
            cert.solver.gap,
            cert.residuals.relative(),
            cert.min_gram_eigenvalue(),
            checks.passed,
        );
    }
    println!("area non-decreasing: {}", table.volume_nondecreasing);
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
