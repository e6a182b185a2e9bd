//! A small inequality-constrained QP solved with the dense ADMM solver.

use lpvmpc::qp::{QpSolution, QpSolver, SolverSettings};
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> QpSolution {
    // min (x0 - 1)^2 + (x1 - 2)^2 + x0 x1  s.t.  x0 + x1 <= 1, x0 >= 0, x1 >= 0
    let p = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let q = DVector::from_row_slice(&[-2.0, -4.0]);
    let g = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    let h = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
    QpSolver::new(SolverSettings::default()).solve(&p, &q, &g, &h, None, None)
}

fn main() {
    let sol = run_example();
    println!("status     {}", sol.status);
    println!("x          {:?}", sol.primal.as_slice());
    println!("duals      {:?}", sol.dual.as_slice());
    println!("objective  {:.6}", sol.objective);
    println!("iterations {} (polished: {})", sol.iterations, sol.polished);
}
