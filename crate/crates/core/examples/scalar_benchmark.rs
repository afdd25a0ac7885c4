//! Certifies inner approximations of the region of attraction (−1, 1) of
//! ẋ = −x + x³ at several degrees.

use roacert::dynamics::{OracleConfig, VectorField};
use roacert::pipeline::{degree_sweep, RoaSpec};
use roacert::poly::BoxDomain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::scalar_cubic();
    let spec = RoaSpec::new(1.0, 1, 1.5, BoxDomain::symmetric(&[1.2])?, 4);
    let cfg = OracleConfig {
        eta: 0.1,
        escape_radius: 15.0,
        ..OracleConfig::default()
    };
    let table = degree_sweep(&f, &spec, &[4, 6, 8, 10], &cfg)?;
    println!("oracle ROA length in Λ: {:.4}", table.oracle_volume.value);
    for (row, cert) in table.rows.iter().zip(&table.certificates) {
        let Some(cert) = cert else {
            println!(
                "d={:2}  FAILED {}",
                row.degree,
                row.error.as_deref().unwrap_or("")
            );
            continue;
        };
        let v = cert.verification.as_ref().expect("verified");
        println!(
            "d={:2}  {:?}  objective {:.5}  length {:.4}  D_V {:.4} ± {:.4}  in-set {} diverged {}  residual {:.1e}  gap {:.1e}",
            row.degree,
            cert.status,
            cert.objective,
            row.volume.unwrap().value,
            row.dv.unwrap().value,
            row.dv.unwrap().std_error,
            v.in_set,
            v.diverged,
            cert.residuals.relative(),
            cert.solver.gap,
        );
    }
    print!("{}", table.to_csv()?);
    Ok(())
}
