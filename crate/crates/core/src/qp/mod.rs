//! Condensed (dense) MPC quadratic programs.
//!
//! Predicted states are eliminated through `Z = offset + Gamma U`, leaving a
//! QP over the decision vector `[U; E]` where `E` collects the soft-constraint
//! slacks. For an LPV model `offset = Phi z0`; for a linearization around a
//! nominal trajectory `offset = Z_bar - Gamma U_bar`.

mod solver;

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::constraints::HalfspacePolytope;
use crate::error::{Error, Result};
use crate::vehicle::LpvMatrices;

pub use solver::{solve_qp, QpSolution, QpSolver, QpStatus, SolverSettings};

/// `Phi` stacks `A_{i} .. A_0` products, `Gamma` the input-to-state blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOperators {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
}

impl PredictionOperators {
    /// Affine prediction from the initial state: `Z = Phi z0 + Gamma U`.
    pub fn predict_from(&self, z0: &DVector<f64>) -> AffinePrediction {
        AffinePrediction {
            gamma: self.gamma.clone(),
            offset: &self.phi * z0,
            nx: self.nx,
            nu: self.nu,
        }
    }
}

/// `Z = offset + Gamma U` with `Z = [z_1 .. z_N]`, `U = [u_0 .. u_{N-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePrediction {
    pub gamma: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub nx: usize,
    pub nu: usize,
}

impl AffinePrediction {
    pub fn horizon(&self) -> usize {
        self.offset.len() / self.nx
    }

    pub fn states(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.gamma * u
    }
}

fn check_pairs(a_seq: &[DMatrix<f64>], b_seq: &[DMatrix<f64>]) -> Result<(usize, usize)> {
    if a_seq.is_empty() || a_seq.len() != b_seq.len() {
        return Err(Error::DimensionMismatch(format!(
            "need N >= 1 matching A and B matrices, got {} and {}",
            a_seq.len(),
            b_seq.len()
        )));
    }
    let nx = a_seq[0].nrows();
    let nu = b_seq[0].ncols();
    for (a, b) in a_seq.iter().zip(b_seq) {
        if a.shape() != (nx, nx) || b.shape() != (nx, nu) {
            return Err(Error::DimensionMismatch(format!(
                "inconsistent model shapes {:?} / {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    Ok((nx, nu))
}

/// Builds `Phi` and `Gamma` for the time-varying model `z_{i+1} = A_i z_i + B_i u_i`.
pub fn condense(a_seq: &[DMatrix<f64>], b_seq: &[DMatrix<f64>]) -> Result<PredictionOperators> {
    let (nx, nu) = check_pairs(a_seq, b_seq)?;
    let n = a_seq.len();
    let mut phi = DMatrix::zeros(nx * n, nx);
    let mut gamma = DMatrix::zeros(nx * n, nu * n);

    let mut prod = DMatrix::<f64>::identity(nx, nx);
    for i in 0..n {
        prod = &a_seq[i] * prod;
        phi.view_mut((i * nx, 0), (nx, nx)).copy_from(&prod);
        // block (i, i) = B_i, block (i, j) = A_i * block (i-1, j)
        gamma.view_mut((i * nx, i * nu), (nx, nu)).copy_from(&b_seq[i]);
        if i > 0 {
            let prev = gamma.view(((i - 1) * nx, 0), (nx, i * nu)).clone_owned();
            gamma.view_mut((i * nx, 0), (nx, i * nu)).copy_from(&(&a_seq[i] * prev));
        }
    }
    Ok(PredictionOperators {
        phi,
        gamma,
        horizon: n,
        nx,
        nu,
    })
}

/// [`condense`] over a sequence of discrete LPV matrices.
pub fn condense_lpv(models: &[LpvMatrices]) -> Result<PredictionOperators> {
    let a: Vec<DMatrix<f64>> = models
        .iter()
        .map(|m| DMatrix::from_column_slice(6, 6, m.a.as_slice()))
        .collect();
    let b: Vec<DMatrix<f64>> = models
        .iter()
        .map(|m| DMatrix::from_column_slice(6, 2, m.b.as_slice()))
        .collect();
    condense(&a, &b)
}

/// Stage weights: `q` on `z_1 .. z_{N-1}`, `p` on `z_N`, `r` on every input,
/// `e_p` on each step's slack block.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub e_p: DMatrix<f64>,
}

/// `0.5 x' H x + f' x + constant` over `[U; E]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpCost {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub n_inputs: usize,
    pub n_slacks: usize,
}

/// Tracking cost `sum |z_i - z_ref_i|_Q^2 + |u_i|_R^2 + eps_i' E_p eps_i` in condensed form.
pub fn build_cost(pred: &AffinePrediction, w: &CostWeights, z_ref: &DVector<f64>) -> Result<QpCost> {
    let (nx, nu) = (pred.nx, pred.nu);
    let n = pred.horizon();
    let ns = w.e_p.nrows();
    if z_ref.len() != nx * n
        || w.q.shape() != (nx, nx)
        || w.p.shape() != (nx, nx)
        || w.r.shape() != (nu, nu)
        || w.e_p.ncols() != ns
        || pred.gamma.shape() != (nx * n, nu * n)
    {
        return Err(Error::DimensionMismatch(
            "cost weights do not match the prediction".into(),
        ));
    }

    let mut q_hat = DMatrix::zeros(nx * n, nx * n);
    for i in 0..n {
        let block = if i + 1 == n { &w.p } else { &w.q };
        q_hat.view_mut((i * nx, i * nx), (nx, nx)).copy_from(block);
    }
    let nu_tot = nu * n;
    let ns_tot = ns * n;
    let d = nu_tot + ns_tot;

    let qg = &q_hat * &pred.gamma;
    let mut hessian = DMatrix::zeros(d, d);
    let mut huu = pred.gamma.transpose() * &qg;
    for i in 0..n {
        let mut blk = huu.view_mut((i * nu, i * nu), (nu, nu));
        blk += &w.r;
    }
    huu *= 2.0;
    hessian.view_mut((0, 0), (nu_tot, nu_tot)).copy_from(&huu);
    for i in 0..n {
        hessian
            .view_mut((nu_tot + i * ns, nu_tot + i * ns), (ns, ns))
            .copy_from(&(2.0 * &w.e_p));
    }
    // exact symmetry
    let hessian = (&hessian + hessian.transpose()) * 0.5;

    let err = &pred.offset - z_ref;
    let mut linear = DVector::zeros(d);
    linear.rows_mut(0, nu_tot).copy_from(&(2.0 * qg.transpose() * &err));
    let constant = err.dot(&(&q_hat * &err));
    Ok(QpCost {
        hessian,
        linear,
        constant,
        n_inputs: nu_tot,
        n_slacks: ns_tot,
    })
}

/// A dense QP `min 0.5 x'Hx + f'x + c  s.t.  G x <= h` over `[U; E]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub ineq_g: DMatrix<f64>,
    pub ineq_h: DVector<f64>,
    pub n_inputs: usize,
    pub n_slacks: usize,
}

impl CondensedQp {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn rows(&self) -> usize {
        self.ineq_h.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    /// Writes the QP as plain text: a header line with dimensions, then each
    /// matrix row-major, one row per line.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# condensed-qp v1 n={} m={} n_inputs={} n_slacks={}",
            self.dim(),
            self.rows(),
            self.n_inputs,
            self.n_slacks
        )?;
        let mut block = |name: &str, m: &DMatrix<f64>| -> std::io::Result<()> {
            writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
            for r in 0..m.nrows() {
                let line: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            Ok(())
        };
        block("H", &self.hessian)?;
        block("f", &DMatrix::from_column_slice(self.dim(), 1, self.linear.as_slice()))?;
        block("G", &self.ineq_g)?;
        block("h", &DMatrix::from_column_slice(self.rows(), 1, self.ineq_h.as_slice()))?;
        Ok(())
    }
}

/// Maps every row family onto `[U; E]`.
///
/// `state_stage` and `input_stage` act on a single `z` / `u` and are
/// replicated over the horizon. `horizon_rows` act on `[Z; U]` and may be
/// soft. Slack nonnegativity rows are always appended.
pub fn assemble_qp(
    pred: &AffinePrediction,
    cost: &QpCost,
    state_stage: &HalfspacePolytope,
    input_stage: &HalfspacePolytope,
    horizon_rows: &HalfspacePolytope,
) -> Result<CondensedQp> {
    let (nx, nu) = (pred.nx, pred.nu);
    let n = pred.horizon();
    let nu_tot = nu * n;
    let nz_tot = nx * n;
    let ns_tot = cost.n_slacks;
    let d = nu_tot + ns_tot;
    if cost.n_inputs != nu_tot
        || (state_stage.rows() > 0 && state_stage.cols() != nx)
        || (input_stage.rows() > 0 && input_stage.cols() != nu)
        || (horizon_rows.rows() > 0 && horizon_rows.cols() != nz_tot + nu_tot)
    {
        return Err(Error::DimensionMismatch(
            "constraint polytopes do not match the prediction".into(),
        ));
    }
    if horizon_rows.soft.iter().flatten().any(|&s| s >= ns_tot) {
        return Err(Error::DimensionMismatch("soft row references a missing slack".into()));
    }

    let m_state = state_stage.rows() * n;
    let m_input = input_stage.rows() * n;
    let m_hor = horizon_rows.rows();
    let m = m_state + m_input + m_hor + ns_tot;
    let mut g = DMatrix::zeros(m, d);
    let mut h = DVector::zeros(m);
    let mut row = 0;

    // state boxes through the prediction
    for i in 0..n {
        let gam = pred.gamma.view((i * nx, 0), (nx, nu_tot));
        let off = pred.offset.rows(i * nx, nx);
        for r in 0..state_stage.rows() {
            let gz = state_stage.g.row(r);
            g.view_mut((row, 0), (1, nu_tot)).copy_from(&(gz * gam));
            h[row] = state_stage.h[r] - (gz * off)[0];
            row += 1;
        }
    }
    for i in 0..n {
        for r in 0..input_stage.rows() {
            for c in 0..nu {
                g[(row, i * nu + c)] = input_stage.g[(r, c)];
            }
            h[row] = input_stage.h[r];
            row += 1;
        }
    }
    if m_hor > 0 {
        let gz = horizon_rows.g.columns(0, nz_tot);
        let gu = horizon_rows.g.columns(nz_tot, nu_tot);
        let mapped = gz * &pred.gamma + gu;
        g.view_mut((row, 0), (m_hor, nu_tot)).copy_from(&mapped);
        let rhs = &horizon_rows.h - gz * &pred.offset;
        h.rows_mut(row, m_hor).copy_from(&rhs);
        for (k, s) in horizon_rows.soft.iter().enumerate() {
            if let Some(j) = s {
                g[(row + k, nu_tot + j)] = -1.0;
            }
        }
        row += m_hor;
    }
    for j in 0..ns_tot {
        g[(row + j, nu_tot + j)] = -1.0;
    }

    Ok(CondensedQp {
        hessian: cost.hessian.clone(),
        linear: cost.linear.clone(),
        constant: cost.constant,
        ineq_g: g,
        ineq_h: h,
        n_inputs: nu_tot,
        n_slacks: ns_tot,
    })
}
