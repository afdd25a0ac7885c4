//! Certifies Van der Pol at degree 8 and writes the {P_d < 1} contour with
//! the reverse-time limit cycle as an SVG figure.
//!
//! Usage: `cargo run --release --example contour_plot [output.svg]`

use roacert::dynamics::{reverse_time_orbit, OracleConfig, VectorField};
use roacert::pipeline::{certify, RoaSpec};
use roacert::plot::{interpolation_bound, level_set, svg, Figure, LevelSet, Provenance};
use roacert::poly::BoxDomain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "vanderpol-d8.svg".into());
    let f = VectorField::van_der_pol();
    let spec = RoaSpec::new(
        0.05,
        2,
        11.29f64.sqrt(),
        BoxDomain::symmetric(&[2.0, 2.7])?,
        8,
    );
    let cert = certify(&f, &spec)?;
    let points = 201;
    let ls = level_set(&cert.p_d, &spec.domain, points, 1.0)?;
    if let LevelSet::Contours(lines) = &ls {
        let vertices: usize = lines.iter().map(|l| l.points.len()).sum();
        println!("{} polylines, {vertices} vertices", lines.len());
    }
    println!(
        "interpolation bound on |P_d − 1| at vertices: {:.2e}",
        interpolation_bound(&cert.p_d, &spec.domain, points)
    );
    let cycle = reverse_time_orbit(
        &f,
        &[0.05 * spec.radius, 0.0],
        60.0,
        20.0,
        &OracleConfig::default(),
    )?;
    let provenance = Provenance {
        seed: 0,
        tol: spec.tol,
        problem_sha256: None,
        degree: spec.degree,
    };
    let fig = Figure {
        domain: &spec.domain,
        radius: spec.radius,
        level_set: &ls,
        profile: None,
        boundary: Some(&cycle),
        provenance: &provenance,
    };
    std::fs::write(&out, svg(&fig))?;
    println!("wrote {out}");
    Ok(())
}
