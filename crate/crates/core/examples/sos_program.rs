//! Compiles the SOS program for Van der Pol without solving it and prints the
//! block structure and row provenance summary.

use roacert::dynamics::VectorField;
use roacert::pipeline::RoaSpec;
use roacert::poly::BoxDomain;
use roacert::sos::{compile, Role};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::van_der_pol();
    for d in [6, 8, 10, 12] {
        let spec = RoaSpec::new(
            0.05,
            2,
            11.29f64.sqrt(),
            BoxDomain::symmetric(&[2.0, 2.7])?,
            d,
        );
        let prog = compile(&spec, &f)?;
        let size = |r| prog.block(r).map_or(0, |(_, b)| b.size());
        println!(
            "d={d:2}  plan {:?}  Gram sizes J {} k1 {} k2 {} s {}  free p {}  rows {} ({} identity)",
            prog.plan,
            size(Role::J),
            size(Role::K1),
            size(Role::K2),
            size(Role::S),
            prog.free.size(),
            prog.problem.n_rows(),
            prog.identity_rows()
        );
    }
    Ok(())
}
