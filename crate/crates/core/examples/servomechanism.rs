//! Third-order servomechanism on Λ = [−1,1]³ with λ = 0.5, β = 2, R = √3.
//! The linearization at the origin has eigenvalues ±i, so membership is
//! simulated with the marginal case allowed.

use std::time::Instant;

use roacert::dynamics::Oracle;
use roacert::dynamics::{OracleConfig, VectorField};
use roacert::metrics::volume_mc;
use roacert::pipeline::{estimate_roa, OracleRoa, RoaSpec};
use roacert::poly::BoxDomain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::servomechanism(1.0, 1.0, 1.0, 1.0);
    let degrees: Vec<u32> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let degrees = if degrees.is_empty() {
        vec![10]
    } else {
        degrees
    };
    let cfg = OracleConfig {
        allow_non_hurwitz: true,
        ..OracleConfig::default()
    };
    let domain = BoxDomain::symmetric(&[1.0; 3])?;

    let start = Instant::now();
    let oracle = Oracle::new(&f, &cfg)?;
    let roa = volume_mc(&OracleRoa { oracle: &oracle }, &domain, 20_000, 0);
    println!(
        "oracle ROA volume {:.4} ± {:.4} (fraction {:.4})  [{:.1} s]",
        roa.value,
        roa.std_error,
        roa.fraction,
        start.elapsed().as_secs_f64()
    );
    for d in degrees {
        let start = Instant::now();
        let spec = RoaSpec::new(0.5, 2, 3f64.sqrt(), domain.clone(), d);
        match estimate_roa(&f, &spec, &cfg) {
            Ok(cert) => {
                let v = cert.volume.expect("estimated");
                let rep = cert.verification.as_ref().expect("verified");
                println!(
                    "d={d:2}  {:?}  volume {:.4} ± {:.4}  in-set {} diverged {} undetermined {}  gap {:.1e} iters {}  [{:.1} s]",
                    cert.status,
                    v.value,
                    v.std_error,
                    rep.in_set,
                    rep.diverged,
                    rep.undetermined,
                    cert.solver.gap,
                    cert.solver.iterations,
                    start.elapsed().as_secs_f64()
                );
            }
            Err(e) => println!(
                "d={d:2}  FAILED {e}  [{:.1} s]",
                start.elapsed().as_secs_f64()
            ),
        }
    }
    Ok(())
}
