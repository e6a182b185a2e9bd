use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{
    check_context, input_slice, stacked_reference, unwrap_reference, Controller, ControllerConfig, ControllerKind,
    Plan, StepContext, StepDiagnostics, StepOutput, StepStatus,
};
use crate::constraints::{
    box_rows, obstacle_tangent, rate_rows, road_tangent_rows, EllipseObstacle, HalfspacePolytope, HorizonLayout,
};
use crate::error::Result;
use crate::qp::{assemble_qp, build_cost, condense, AffinePrediction, QpSolver, QpStatus};
use crate::reference::ReferenceState;
use crate::vehicle::{dynamics_jacobians, euler_step, InputVec, StateVec, INPUT_DIM, STATE_DIM};

/// Nonlinear MPC over the Euler-discretized bicycle model, solved by
/// sequential quadratic programming with a Gauss-Newton Hessian.
pub struct NmpcSqp {
    cfg: ControllerConfig,
    solver: QpSolver,
    warm: Option<Vec<InputVec>>,
}

enum Iterate {
    Converged,
    Continue,
    Infeasible,
}

impl NmpcSqp {
    pub fn new(cfg: ControllerConfig) -> Self {
        let solver = QpSolver::new(cfg.solver);
        Self {
            cfg,
            solver,
            warm: None,
        }
    }

    fn rollout(&self, z0: &StateVec, us: &[InputVec]) -> Result<Vec<StateVec>> {
        let mut z = *z0;
        us.iter()
            .map(|u| {
                z = euler_step(&z, u, &self.cfg.vehicle)?;
                Ok(z)
            })
            .collect()
    }

    fn tracking_cost(&self, zs: &[StateVec], us: &[InputVec], refs: &[ReferenceState]) -> f64 {
        let n = zs.len();
        let mut j = 0.0;
        for (i, z) in zs.iter().enumerate() {
            let w = if i + 1 == n { &self.cfg.p } else { &self.cfg.q };
            let e = z - refs[i + 1].to_vector();
            j += (0..STATE_DIM).map(|c| w[c] * e[c] * e[c]).sum::<f64>();
        }
        for u in us {
            j += self.cfg.r[0] * u[0] * u[0] + self.cfg.r[1] * u[1] * u[1];
        }
        j
    }

    fn violation(&self, ctx: &StepContext<'_>, zs: &[StateVec]) -> f64 {
        let b = &self.cfg.bounds;
        let mut v = 0.0;
        for z in zs {
            v += (z[2] - b.v_lon_max).max(0.0) + (b.v_lon_min - z[2]).max(0.0);
            v += (z[3].abs() - b.v_lat_max).max(0.0) + (z[5].abs() - b.omega_max).max(0.0);
            v += (-ctx.road.margin(z[0], z[1])).max(0.0);
            for obs in ctx.obstacles {
                v += (-obs.inflated(self.cfg.obstacle_margin).normalized_margin(z[0], z[1])).max(0.0);
            }
        }
        v
    }

    fn merit(&self, ctx: &StepContext<'_>, refs: &[ReferenceState], us: &[InputVec]) -> f64 {
        match self.rollout(ctx.z, us) {
            Ok(zs) => self.tracking_cost(&zs, us, refs) + self.cfg.sqp.merit_penalty * self.violation(ctx, &zs),
            Err(_) => f64::INFINITY,
        }
    }

    /// Linearized `G >= 0` on step `step` around the iterate position.
    fn obstacle_row(
        obs: &EllipseObstacle,
        z: &StateVec,
        ctx: &StepContext<'_>,
        step: usize,
        layout: &HorizonLayout,
    ) -> Result<HalfspacePolytope> {
        let (x, y) = (z[0], z[1]);
        if obs.contains(x, y) {
            let here = ReferenceState {
                x,
                y,
                psi: z[4],
                ..Default::default()
            };
            return Ok(obstacle_tangent(obs, &[here], ctx.road)?.row(step, layout));
        }
        let (gx, gy) = obs.gradient(x, y);
        let mut poly = HalfspacePolytope::empty(layout.width());
        poly.push_row(
            &[(layout.state(step, 0), -gx), (layout.state(step, 1), -gy)],
            obs.g_value(x, y) - gx * x - gy * y,
            None,
        );
        Ok(poly)
    }

    /// One SQP iteration: linearize around `us`, solve, line-search.
    fn iterate(
        &self,
        ctx: &StepContext<'_>,
        refs: &[ReferenceState],
        us: &mut Vec<InputVec>,
        merit_now: &mut f64,
    ) -> Result<Iterate> {
        let n = self.cfg.horizon;
        let layout = HorizonLayout::new(n);
        let zs = self.rollout(ctx.z, us)?;

        let mut a_seq = Vec::with_capacity(n);
        let mut b_seq = Vec::with_capacity(n);
        for i in 0..n {
            let z = if i == 0 { *ctx.z } else { zs[i - 1] };
            let (jz, ju) = dynamics_jacobians(&z, &us[i], &self.cfg.vehicle)?;
            let ts = self.cfg.vehicle.t_s;
            a_seq.push(DMatrix::from_column_slice(
                6,
                6,
                (nalgebra::Matrix6::identity() + jz * ts).as_slice(),
            ));
            b_seq.push(DMatrix::from_column_slice(6, 2, (ju * ts).as_slice()));
        }
        let ops = condense(&a_seq, &b_seq)?;
        let u_bar = DVector::from_iterator(INPUT_DIM * n, us.iter().flat_map(|u| u.iter().copied()));
        let z_bar = DVector::from_iterator(STATE_DIM * n, zs.iter().flat_map(|z| z.iter().copied()));
        let pred = AffinePrediction {
            offset: &z_bar - &ops.gamma * &u_bar,
            gamma: ops.gamma,
            nx: STATE_DIM,
            nu: INPUT_DIM,
        };
        let cost = build_cost(&pred, &self.cfg.weights(false), &stacked_reference(refs, n))?;

        let (state_box, input_box) = box_rows(&self.cfg.bounds);
        let mut rows = rate_rows(ctx.u_prev, &self.cfg.bounds, &layout);
        rows.append(&road_tangent_rows(ctx.road, &refs[1..=n], &layout)?)?;
        // the step-1 position does not depend on the inputs
        for obs in ctx.obstacles {
            let obs = obs.inflated(self.cfg.obstacle_margin);
            for (i, z) in zs.iter().enumerate().skip(1) {
                rows.append(&Self::obstacle_row(&obs, z, ctx, i + 1, &layout)?)?;
            }
        }
        let qp = assemble_qp(&pred, &cost, &state_box, &input_box, &rows)?;
        let sol = self
            .solver
            .solve(&qp.hessian, &qp.linear, &qp.ineq_g, &qp.ineq_h, Some(&u_bar), None);
        if sol.status == QpStatus::Infeasible {
            return Ok(Iterate::Infeasible);
        }

        let d = &sol.primal - &u_bar;
        let step_norm = d.amax();
        let mut t = 1.0;
        let mut candidate: Vec<InputVec>;
        let mut m;
        let mut tries = 0;
        loop {
            let trial = &u_bar + &d * t;
            candidate = (0..n).map(|i| input_slice(&trial, i)).collect();
            m = self.merit(ctx, refs, &candidate);
            if m <= *merit_now || tries >= self.cfg.sqp.max_backtracks {
                break;
            }
            t *= 0.5;
            tries += 1;
        }
        if m.is_finite() {
            *us = candidate;
            *merit_now = m;
        }
        Ok(if step_norm < self.cfg.sqp.step_tol {
            Iterate::Converged
        } else {
            Iterate::Continue
        })
    }

    fn fallback(
        &mut self,
        ctx: &StepContext<'_>,
        status: StepStatus,
        solve_time: f64,
        iterations: usize,
    ) -> StepOutput {
        self.warm = None;
        let mut diag = StepDiagnostics::failed(status);
        diag.solve_time = solve_time;
        diag.iterations = iterations;
        diag.qp_status = (status == StepStatus::Infeasible).then_some(QpStatus::Infeasible);
        StepOutput {
            input: self.cfg.bounds.clamp_input_with_rate(ctx.u_prev, ctx.u_prev),
            plan: Plan::default(),
            diagnostics: diag,
        }
    }
}

impl Controller for NmpcSqp {
    fn kind(&self) -> ControllerKind {
        ControllerKind::NmpcSqp
    }

    fn step(&mut self, ctx: &StepContext<'_>) -> StepOutput {
        let n = self.cfg.horizon;
        if check_context(ctx, n).is_err() {
            return self.fallback(ctx, StepStatus::Failed, 0.0, 0);
        }
        let refs = unwrap_reference(ctx.refs, ctx.z[4]);
        let mut us = match &self.warm {
            Some(w) if w.len() == n => {
                let mut s: Vec<InputVec> = w.iter().skip(1).copied().collect();
                s.push(w[n - 1]);
                s
            }
            _ => vec![*ctx.u_prev; n],
        };

        let t0 = Instant::now();
        let mut merit = self.merit(ctx, &refs, &us);
        let mut converged = false;
        let mut iterations = 0;
        let mut infeasible = false;
        let mut failed = false;
        while iterations < self.cfg.sqp.max_iterations {
            iterations += 1;
            match self.iterate(ctx, &refs, &mut us, &mut merit) {
                Ok(Iterate::Converged) => {
                    converged = true;
                    break;
                }
                Ok(Iterate::Continue) => {}
                Ok(Iterate::Infeasible) => {
                    infeasible = iterations == 1;
                    break;
                }
                Err(_) => {
                    failed = iterations == 1;
                    break;
                }
            }
        }
        let solve_time = t0.elapsed().as_secs_f64();

        if infeasible {
            return self.fallback(ctx, StepStatus::Infeasible, solve_time, iterations);
        }
        let Ok(states) = (if failed {
            Err(())
        } else {
            self.rollout(ctx.z, &us).map_err(|_| ())
        }) else {
            return self.fallback(ctx, StepStatus::Failed, solve_time, iterations);
        };

        let objective = self.tracking_cost(&states, &us, &refs);
        let obstacle_active = ctx
            .obstacles
            .iter()
            .any(|o| refs[1..].iter().any(|r| o.contains(r.x, r.y)));
        self.warm = Some(us.clone());
        StepOutput {
            input: us[0],
            plan: Plan { states, inputs: us },
            diagnostics: StepDiagnostics {
                status: if converged {
                    StepStatus::Solved
                } else {
                    StepStatus::NotConverged
                },
                qp_status: Some(QpStatus::Solved),
                objective,
                slack_max: [0.0; 4],
                solve_time,
                obstacle_active,
                scheduling_error: 0.0,
                iterations,
                converged,
            },
        }
    }

    fn reset(&mut self) {
        self.warm = None;
    }
}
