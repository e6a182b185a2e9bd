//! Dense operator-splitting QP solver for `min 0.5 x'Px + q'x  s.t.  Gx <= h`.
//!
//! ADMM on the splitting `Gx = s, s <= h` with Ruiz equilibration, cost
//! scaling, over-relaxation and periodic step-size balancing. A final
//! polishing pass solves the equality-constrained problem on the detected
//! active set and is kept only if it is at least as accurate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::CondensedQp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Iterations between step-size updates (0 disables).
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    /// Tolerance of the primal infeasibility certificate.
    pub infeasibility_tol: f64,
    /// Consecutive certified iterations before declaring infeasibility.
    pub infeasibility_patience: usize,
    pub polish: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho_interval: 25,
            scaling_iters: 10,
            infeasibility_tol: 1e-5,
            infeasibility_patience: 50,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Solved,
    MaxIterations,
    Infeasible,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QpStatus::Solved => "solved",
            QpStatus::MaxIterations => "max_iterations",
            QpStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub primal: DVector<f64>,
    /// Multipliers of `Gx <= h` (nonnegative).
    pub dual: DVector<f64>,
    /// `0.5 x'Px + q'x` (no constant term).
    pub objective: f64,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

/// Solver with its own workspace; one problem at a time.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: SolverSettings,
}

/// Solves with default settings.
pub fn solve_qp(qp: &CondensedQp, warm_start: Option<&DVector<f64>>) -> QpSolution {
    QpSolver::default().solve(&qp.hessian, &qp.linear, &qp.ineq_g, &qp.ineq_h, warm_start, None)
}

struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn scale_problem(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, u: &DVector<f64>, iters: usize) -> Scaled {
    let (n, m) = (p.nrows(), a.nrows());
    let mut p = p.clone();
    let mut q = q.clone();
    let mut a = a.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };

    let mut dt = vec![0.0f64; n];
    let mut et = vec![0.0f64; m];
    for _ in 0..iters {
        et.iter_mut().for_each(|v| *v = 0.0);
        for (j, (pc, ac)) in p
            .as_slice()
            .chunks(n.max(1))
            .zip(a.as_slice().chunks(m.max(1)))
            .enumerate()
        {
            let mut cmax = pc.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
            for (ei, v) in et.iter_mut().zip(ac) {
                let av = v.abs();
                cmax = cmax.max(av);
                *ei = f64::max(*ei, av);
            }
            dt[j] = 1.0 / clamp(cmax).sqrt();
        }
        if m == 0 {
            for (j, d) in dt.iter_mut().enumerate() {
                *d = 1.0 / clamp(p.column(j).amax()).sqrt();
            }
        }
        for v in et.iter_mut() {
            *v = 1.0 / clamp(*v).sqrt();
        }
        for (j, pc) in p.as_mut_slice().chunks_mut(n.max(1)).enumerate() {
            for (v, di) in pc.iter_mut().zip(&dt) {
                *v *= di * dt[j];
            }
        }
        if m > 0 {
            for (j, ac) in a.as_mut_slice().chunks_mut(m).enumerate() {
                for (v, ei) in ac.iter_mut().zip(&et) {
                    *v *= ei * dt[j];
                }
            }
        }
        for j in 0..n {
            q[j] *= dt[j];
            d[j] *= dt[j];
        }
        for i in 0..m {
            e[i] *= et[i];
        }
        let settled = |v: &[f64]| v.iter().all(|f| (f - 1.0).abs() < 0.1);
        if settled(&dt) && settled(&et) {
            break;
        }
    }

    // cost scaling
    let mean_col = if n > 0 {
        (0..n)
            .map(|j| p.column(j).iter().fold(0.0f64, |mx, v| mx.max(v.abs())))
            .sum::<f64>()
            / n as f64
    } else {
        1.0
    };
    let c = 1.0 / clamp(mean_col.max(inf_norm(&q)));
    p *= c;
    q *= c;
    let u = u.component_mul(&e);
    Scaled { p, q, a, u, d, e, c }
}

fn factor(p: &DMatrix<f64>, a: &DMatrix<f64>, sigma: f64, rho: f64) -> Cholesky<f64, Dyn> {
    let n = p.nrows();
    let mut k = p + a.tr_mul(a) * rho;
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    let mut shift = 0.0;
    loop {
        let mut kk = k.clone();
        for i in 0..n {
            kk[(i, i)] += shift;
        }
        if let Some(ch) = kk.cholesky() {
            return ch;
        }
        shift = if shift == 0.0 { 1e-10 } else { shift * 10.0 };
    }
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
}

impl QpSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }

    /// Solves `min 0.5 x'Px + q'x  s.t.  Gx <= h` from an optional warm start.
    pub fn solve(
        &self,
        p: &DMatrix<f64>,
        q: &DVector<f64>,
        g: &DMatrix<f64>,
        h: &DVector<f64>,
        warm_x: Option<&DVector<f64>>,
        warm_y: Option<&DVector<f64>>,
    ) -> QpSolution {
        let st = &self.settings;
        let n = q.len();

        // rows without coefficients are either trivially satisfied or certify infeasibility
        let mut keep = Vec::with_capacity(h.len());
        for i in 0..h.len() {
            let zero_row = g.row(i).iter().all(|v| v.abs() < 1e-14);
            if zero_row {
                if h[i] < -st.eps_abs {
                    return self.infeasible(n, h.len(), 0);
                }
            } else {
                keep.push(i);
            }
        }
        let m = keep.len();
        let a = DMatrix::from_fn(m, n, |r, c| g[(keep[r], c)]);
        let u = DVector::from_fn(m, |r, _| h[keep[r]]);

        let s = scale_problem(p, q, &a, &u, st.scaling_iters);
        let mut rho = st.rho;
        let mut chol = factor(&s.p, &s.a, st.sigma, rho);

        let mut x = match warm_x {
            Some(w) if w.len() == n => w.component_div(&s.d),
            _ => DVector::zeros(n),
        };
        let mut y = match warm_y {
            Some(w) if w.len() == h.len() => DVector::from_fn(m, |r, _| w[keep[r]] * s.c / s.e[r]),
            _ => DVector::zeros(m),
        };
        let mut ax = &s.a * &x;
        let mut z = ax.zip_map(&s.u, |v, ub| v.min(ub));
        let mut aty = s.a.tr_mul(&y);

        let mut certified = 0usize;
        let mut status = QpStatus::MaxIterations;
        let mut iter = 0;
        while iter < st.max_iter {
            iter += 1;
            let mut rhs = s.a.tr_mul(&z) * rho - &aty;
            rhs.axpy(st.sigma, &x, 1.0);
            rhs -= &s.q;
            let x_tilde = chol.solve(&rhs);
            let z_tilde = &s.a * &x_tilde;
            x.axpy(st.alpha, &x_tilde, 1.0 - st.alpha);
            ax.axpy(st.alpha, &z_tilde, 1.0 - st.alpha);
            let z_relax = &z_tilde * st.alpha + &z * (1.0 - st.alpha);
            let z_new = (&z_relax + &y / rho).zip_map(&s.u, |v, ub| v.min(ub));
            let dy = (&z_relax - &z_new) * rho;
            y += &dy;
            aty += s.a.tr_mul(&dy);
            z = z_new;

            let res = self.residuals(&s, &x, &ax, &z, &aty);
            if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
                status = QpStatus::Solved;
                break;
            }

            if self.infeasibility_certificate(&s, &dy) {
                certified += 1;
                if certified >= st.infeasibility_patience {
                    status = QpStatus::Infeasible;
                    break;
                }
            } else {
                certified = 0;
            }

            if st.adaptive_rho_interval > 0 && iter % st.adaptive_rho_interval == 0 {
                // refresh the running products against drift
                ax = &s.a * &x;
                aty = s.a.tr_mul(&y);
                let new_rho = self.balanced_rho(&s, &x, &ax, &z, &aty, rho);
                if new_rho > 5.0 * rho || new_rho < rho / 5.0 {
                    rho = new_rho;
                    chol = factor(&s.p, &s.a, st.sigma, rho);
                }
            }
        }

        if status == QpStatus::Infeasible {
            return self.infeasible(n, h.len(), iter);
        }

        // unscale
        let mut x_out = x.component_mul(&s.d);
        let mut y_kept = y.component_mul(&s.e) / s.c;
        let (mut prim, mut dual) = self.unscaled_residuals(p, q, &a, &u, &x_out, &y_kept);
        let mut polished = false;
        if st.polish {
            if let Some((xp, yp)) = polish(p, q, &a, &u, &z.component_div(&s.e), &y_kept) {
                let (pp, dp) = self.unscaled_residuals(p, q, &a, &u, &xp, &yp);
                if pp <= prim.max(st.eps_abs) && dp <= dual.max(st.eps_abs) {
                    x_out = xp;
                    y_kept = yp;
                    prim = pp;
                    dual = dp;
                    polished = true;
                    if status == QpStatus::MaxIterations && prim <= st.eps_abs && dual <= st.eps_abs {
                        status = QpStatus::Solved;
                    }
                }
            }
        }

        let mut dual_full = DVector::zeros(h.len());
        for (r, &i) in keep.iter().enumerate() {
            dual_full[i] = y_kept[r].max(0.0);
        }
        QpSolution {
            objective: 0.5 * x_out.dot(&(p * &x_out)) + q.dot(&x_out),
            primal: x_out,
            dual: dual_full,
            status,
            primal_residual: prim,
            dual_residual: dual,
            iterations: iter,
            polished,
        }
    }

    fn infeasible(&self, n: usize, m: usize, iterations: usize) -> QpSolution {
        QpSolution {
            primal: DVector::zeros(n),
            dual: DVector::zeros(m),
            objective: f64::NAN,
            status: QpStatus::Infeasible,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations,
            polished: false,
        }
    }

    fn residuals(
        &self,
        s: &Scaled,
        x: &DVector<f64>,
        ax: &DVector<f64>,
        z: &DVector<f64>,
        aty: &DVector<f64>,
    ) -> Residuals {
        let mut prim = 0.0f64;
        let mut ax_norm = 0.0f64;
        let mut z_norm = 0.0f64;
        for i in 0..ax.len() {
            prim = prim.max(((ax[i] - z[i]) / s.e[i]).abs());
            ax_norm = ax_norm.max((ax[i] / s.e[i]).abs());
            z_norm = z_norm.max((z[i] / s.e[i]).abs());
        }
        let px = &s.p * x;
        let (mut dual, mut px_norm, mut aty_norm, mut q_norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for j in 0..x.len() {
            let k = 1.0 / (s.d[j] * s.c);
            dual = dual.max(((px[j] + s.q[j] + aty[j]) * k).abs());
            px_norm = px_norm.max((px[j] * k).abs());
            aty_norm = aty_norm.max((aty[j] * k).abs());
            q_norm = q_norm.max((s.q[j] * k).abs());
        }
        let st = &self.settings;
        Residuals {
            prim,
            dual,
            eps_prim: st.eps_abs + st.eps_rel * ax_norm.max(z_norm),
            eps_dual: st.eps_abs + st.eps_rel * px_norm.max(aty_norm).max(q_norm),
        }
    }

    fn unscaled_residuals(
        &self,
        p: &DMatrix<f64>,
        q: &DVector<f64>,
        a: &DMatrix<f64>,
        u: &DVector<f64>,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> (f64, f64) {
        let viol = (a * x - u).map(|v| v.max(0.0));
        let y_pos = y.map(|v| v.max(0.0));
        let stat = p * x + q + a.tr_mul(&y_pos);
        (inf_norm(&viol), inf_norm(&stat))
    }

    fn infeasibility_certificate(&self, s: &Scaled, dy: &DVector<f64>) -> bool {
        // a nonnegative y with A'y = 0 and u'y < 0 proves Ax <= u empty
        let dy_pos = dy.map(|v| v.max(0.0));
        let norm = inf_norm(&dy_pos.component_mul(&s.e));
        if norm < 1e-14 {
            return false;
        }
        let eps = self.settings.infeasibility_tol;
        if s.u.dot(&dy_pos) >= -eps * norm {
            return false;
        }
        let aty = s.a.tr_mul(&dy_pos).component_div(&s.d);
        inf_norm(&aty) <= eps * norm
    }

    fn balanced_rho(
        &self,
        s: &Scaled,
        x: &DVector<f64>,
        ax: &DVector<f64>,
        z: &DVector<f64>,
        aty: &DVector<f64>,
        rho: f64,
    ) -> f64 {
        let px = &s.p * x;
        let prim = inf_norm(&(ax - z)) / inf_norm(ax).max(inf_norm(z)).max(1e-10);
        let dual = inf_norm(&(&px + &s.q + aty)) / inf_norm(&px).max(inf_norm(aty)).max(inf_norm(&s.q)).max(1e-10);
        (rho * (prim / dual.max(1e-10)).sqrt()).clamp(1e-6, 1e6)
    }
}

/// Equality-constrained re-solve on the active set with iterative refinement.
fn polish(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    u: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (q.len(), u.len());
    let active: Vec<usize> = (0..m).filter(|&i| u[i] - z[i] < y[i]).collect();
    let k = active.len();
    let delta = 1e-9;
    let dim = n + k;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    for (r, &i) in active.iter().enumerate() {
        for c in 0..n {
            kkt[(n + r, c)] = a[(i, c)];
            kkt[(c, n + r)] = a[(i, c)];
        }
    }
    let mut reg = kkt.clone();
    for i in 0..n {
        reg[(i, i)] += delta;
    }
    for i in n..dim {
        reg[(i, i)] -= delta;
    }
    let lu = reg.lu();
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-q));
    for (r, &i) in active.iter().enumerate() {
        rhs[n + r] = u[i];
    }
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let corr = lu.solve(&(&rhs - &kkt * &sol))?;
        sol += corr;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, n).clone_owned();
    let mut yy = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        if sol[n + r] < -1e-9 {
            return None;
        }
        yy[i] = sol[n + r].max(0.0);
    }
    Some((x, yy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(p: &[f64], q: &[f64], g: &[f64], h: &[f64]) -> QpSolution {
        let n = q.len();
        let m = h.len();
        QpSolver::default().solve(
            &DMatrix::from_row_slice(n, n, p),
            &DVector::from_row_slice(q),
            &DMatrix::from_row_slice(m, n, g),
            &DVector::from_row_slice(h),
            None,
            None,
        )
    }

    #[test]
    fn unconstrained_scalar() {
        let s = solve(&[1.0], &[-1.0], &[], &[]);
        assert_eq!(s.status, QpStatus::Solved);
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.objective, -0.5, epsilon = 1e-6);
    }

    #[test]
    fn active_lower_bound() {
        // min u^2 s.t. u >= 1
        let s = solve(&[2.0], &[0.0], &[-1.0], &[-1.0]);
        assert_eq!(s.status, QpStatus::Solved);
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.dual[0], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn equality_as_two_inequalities() {
        let s = solve(
            &[2.0, 0.0, 0.0, 2.0],
            &[0.0, 0.0],
            &[1.0, 1.0, -1.0, -1.0],
            &[2.0, -2.0],
        );
        assert_eq!(s.status, QpStatus::Solved);
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.primal[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_interval_is_infeasible() {
        let s = solve(&[1.0], &[0.0], &[1.0, -1.0], &[-1.0, -1.0]);
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn zero_row_with_negative_rhs_is_infeasible() {
        let s = solve(&[1.0], &[0.0], &[0.0], &[-1.0]);
        assert_eq!(s.status, QpStatus::Infeasible);
        assert_eq!(s.iterations, 0);
        let s = solve(&[1.0], &[-1.0], &[0.0], &[1.0]);
        assert_eq!(s.status, QpStatus::Solved);
    }

    #[test]
    fn warm_start_keeps_the_solution() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let q = DVector::from_row_slice(&[1.0, 1.0]);
        let g = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let h = DVector::from_row_slice(&[0.0, 0.0, 1.0]);
        let solver = QpSolver::default();
        let cold = solver.solve(&p, &q, &g, &h, None, None);
        let warm = solver.solve(&p, &q, &g, &h, Some(&cold.primal), Some(&cold.dual));
        assert_eq!(cold.status, QpStatus::Solved);
        assert_eq!(warm.status, QpStatus::Solved);
        assert_abs_diff_eq!(cold.primal, warm.primal, epsilon = 1e-6);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn deterministic() {
        let a = solve(&[3.0, 0.5, 0.5, 1.0], &[-1.0, 2.0], &[1.0, 2.0, -1.0, 0.5], &[1.0, 0.3]);
        let b = solve(&[3.0, 0.5, 0.5, 1.0], &[-1.0, 2.0], &[1.0, 2.0, -1.0, 0.5], &[1.0, 0.3]);
        assert_eq!(a, b);
    }
}
