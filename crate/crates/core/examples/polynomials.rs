//! Sparse polynomial arithmetic, Lie derivatives and closed-form box moments.

use roacert::dynamics::VectorField;
use roacert::poly::{box_moments, lie_derivative, monomial_basis, norm_power, BoxDomain, Poly};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Poly::var(2, 0);
    let y = Poly::var(2, 1);
    let p = x.mul(&x)?.add(&y.mul(&y)?)?.add(&Poly::constant(2, 1.0))?;
    println!("p = {p}");
    println!("p(1, 2) = {}", p.eval(&[1.0, 2.0])?);
    println!("∇p = [{}, {}]", p.derivative(0), p.derivative(1));

    let f = VectorField::van_der_pol();
    println!(
        "Van der Pol: ẋ = [{}, {}]",
        f.components()[0],
        f.components()[1]
    );
    println!("∇p·f = {}", lie_derivative(&p, &f)?);
    println!("‖x‖⁴ = {}", norm_power(2, 2));

    let domain = BoxDomain::symmetric(&[2.0, 2.7])?;
    let mv = box_moments(4, &domain)?;
    println!(
        "degree-4 basis in 2 variables: {} monomials",
        monomial_basis(2, 4).len()
    );
    for (m, v) in mv.basis.iter().zip(&mv.entries).take(6) {
        println!("  ∫_Λ {m} = {v:.6}");
    }
    println!("∫_Λ p = {:.6}", mv.integrate(&p));
    Ok(())
}
