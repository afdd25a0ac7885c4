//! The three small conic problems the solver is tested against, solved and
//! printed in the text exchange format.

use roacert::sdp::{solve, write_problem, write_solution, Row, SdpProblem, Var};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = |a, b| Var::psd(0, a, b);
    let problems = [
        (
            "1x1: min x s.t. x = 1, x ≥ 0",
            SdpProblem {
                psd_blocks: vec![1],
                rows: vec![Row {
                    entries: vec![(x(0, 0), 1.0)],
                    rhs: 1.0,
                }],
                objective: vec![(x(0, 0), 1.0)],
                labels: vec!["x11".into()],
                ..Default::default()
            },
        ),
        (
            "2x2: min X11 s.t. X12 = 1, tr X = 2, X ⪰ 0 (optimum 1)",
            SdpProblem {
                psd_blocks: vec![2],
                rows: vec![
                    Row {
                        entries: vec![(x(0, 1), 1.0)],
                        rhs: 1.0,
                    },
                    Row {
                        entries: vec![(x(0, 0), 1.0), (x(1, 1), 1.0)],
                        rhs: 2.0,
                    },
                ],
                objective: vec![(x(0, 0), 1.0)],
                labels: vec!["x12".into(), "trace".into()],
                ..Default::default()
            },
        ),
        (
            "infeasible: x = −1, x ≥ 0",
            SdpProblem {
                psd_blocks: vec![1],
                rows: vec![Row {
                    entries: vec![(x(0, 0), 1.0)],
                    rhs: -1.0,
                }],
                objective: vec![(x(0, 0), 1.0)],
                labels: vec!["x11".into()],
                ..Default::default()
            },
        ),
    ];
    for (title, p) in &problems {
        let s = solve(p, 1e-8)?;
        println!("== {title}");
        println!(
            "status {:?}, objective {:.9}, gap {:.1e}, {} iterations",
            s.status, s.primal_objective, s.gap, s.iterations
        );
        if let Some(ray) = &s.dual_ray {
            println!("Farkas ray y = {ray:?}");
        }
        print!("{}", write_problem(p));
        print!("{}", write_solution(p, &s));
    }
    Ok(())
}
