use std::time::Instant;

use nalgebra::DVector;

use super::{
    check_context, horizon_rows, init_scheduling, input_slice, shift_scheduling, stacked_reference, unwrap_reference,
    Controller, ControllerConfig, ControllerKind, Plan, SchedulingTrajectory, StepContext, StepDiagnostics, StepOutput,
    StepStatus,
};
use crate::constraints::{box_rows, trust_region_rows, HorizonLayout, SLACKS_PER_STEP};
use crate::error::Result;
use crate::qp::{assemble_qp, build_cost, condense_lpv, QpSolver, QpStatus};
use crate::vehicle::{lpv_continuous, lpv_discretize, scheduling_of, SchedulingVector, StateVec, INPUT_DIM, STATE_DIM};

/// LPVMPC with frozen scheduling along the predicted trajectory. The
/// scheduling trust region is active iff `cfg.trust.enabled`.
pub struct LpvMpc {
    cfg: ControllerConfig,
    solver: QpSolver,
    /// Scheduling guess for the next call (already shifted).
    scheduling: Option<SchedulingTrajectory>,
    /// Previous plan shifted to the next call's time base.
    guess: Option<Plan>,
    warm: Option<DVector<f64>>,
}

struct Solved {
    input: crate::vehicle::InputVec,
    plan: Plan,
    diag: StepDiagnostics,
    warm: DVector<f64>,
}

impl LpvMpc {
    pub fn new(cfg: ControllerConfig) -> Self {
        let solver = QpSolver::new(cfg.solver);
        Self {
            cfg,
            solver,
            scheduling: None,
            guess: None,
            warm: None,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// The scheduling trajectory the next call will use (before the
    /// measured-state override of entry 0).
    pub fn scheduling(&self) -> Option<&SchedulingTrajectory> {
        self.scheduling.as_ref()
    }

    fn solve(&mut self, ctx: &StepContext<'_>, sched: &SchedulingTrajectory) -> Result<Option<Solved>> {
        let n = self.cfg.horizon;
        let layout = HorizonLayout::new(n);
        let refs = unwrap_reference(ctx.refs, ctx.z[4]);

        let models = sched.entries[..n]
            .iter()
            .map(|p| lpv_continuous(p, &self.cfg.vehicle).map(|c| lpv_discretize(&c, self.cfg.vehicle.t_s)))
            .collect::<Result<Vec<_>>>()?;
        let ops = condense_lpv(&models)?;
        let z0 = DVector::from_column_slice(ctx.z.as_slice());
        let pred = ops.predict_from(&z0);
        let cost = build_cost(&pred, &self.cfg.weights(true), &stacked_reference(&refs, n))?;

        let (state_box, input_box) = box_rows(&self.cfg.bounds);
        let (mut rows, obstacle_active) = horizon_rows(ctx, &refs, &self.cfg, &layout)?;
        if self.cfg.trust.enabled {
            if let Some(g) = &self.guess {
                rows.append(&trust_region_rows(&g.states, &g.inputs, &self.cfg.trust, &layout)?)?;
            }
        }
        let qp = assemble_qp(&pred, &cost, &state_box, &input_box, &rows)?;

        let t0 = Instant::now();
        let sol = self.solver.solve(
            &qp.hessian,
            &qp.linear,
            &qp.ineq_g,
            &qp.ineq_h,
            self.warm.as_ref(),
            None,
        );
        let solve_time = t0.elapsed().as_secs_f64();

        let base = StepDiagnostics {
            status: StepStatus::Infeasible,
            qp_status: Some(sol.status),
            objective: f64::NAN,
            slack_max: [0.0; 4],
            solve_time,
            obstacle_active,
            scheduling_error: 0.0,
            iterations: sol.iterations,
            converged: false,
        };
        if sol.status == QpStatus::Infeasible {
            return Ok(Some(Solved {
                input: *ctx.u_prev,
                plan: Plan::default(),
                diag: base,
                warm: DVector::zeros(0),
            }));
        }

        let nu_tot = INPUT_DIM * n;
        let u = sol.primal.rows(0, nu_tot).clone_owned();
        let eps = sol.primal.rows(nu_tot, layout.slack_count());
        let mut slack_max = [0.0f64; 4];
        for i in 0..n {
            for (ch, s) in slack_max.iter_mut().enumerate() {
                *s = s.max(eps[SLACKS_PER_STEP * i + ch]);
            }
        }
        let zs = pred.states(&u);
        let plan = Plan {
            states: (0..n)
                .map(|i| StateVec::from_column_slice(zs.rows(STATE_DIM * i, STATE_DIM).as_slice()))
                .collect(),
            inputs: (0..n).map(|i| input_slice(&u, i)).collect(),
        };

        // shifted warm start, tail held, slacks cleared
        let mut warm = DVector::zeros(sol.primal.len());
        for i in 0..n {
            let src = (i + 1).min(n - 1);
            warm.rows_mut(INPUT_DIM * i, INPUT_DIM)
                .copy_from(&u.rows(INPUT_DIM * src, INPUT_DIM));
        }

        let status = match sol.status {
            QpStatus::Solved => StepStatus::Solved,
            _ => StepStatus::MaxIterations,
        };
        Ok(Some(Solved {
            input: plan.inputs[0],
            diag: StepDiagnostics {
                status,
                objective: sol.objective + qp.constant,
                slack_max,
                converged: sol.status == QpStatus::Solved,
                ..base
            },
            plan,
            warm,
        }))
    }
}

impl Controller for LpvMpc {
    fn kind(&self) -> ControllerKind {
        if self.cfg.trust.enabled {
            ControllerKind::LpvTrust
        } else {
            ControllerKind::LpvStandard
        }
    }

    fn step(&mut self, ctx: &StepContext<'_>) -> StepOutput {
        let n = self.cfg.horizon;
        let predicted = match &self.scheduling {
            Some(s) => s.clone(),
            None => init_scheduling(ctx.z, ctx.u_prev, n),
        };
        // entry 0 is measured, only its steering comes from the plan
        let mut sched = predicted.clone();
        let measured = scheduling_of(ctx.z, ctx.u_prev);
        sched.entries[0] = SchedulingVector {
            delta: predicted.entries[0].delta,
            ..measured
        };

        let result = check_context(ctx, n).and_then(|_| self.solve(ctx, &sched));
        let (input, plan, mut diag) = match result {
            Ok(Some(s)) if !s.diag.status.is_infeasible() => {
                let mut states = Vec::with_capacity(n + 1);
                states.push(*ctx.z);
                states.extend_from_slice(&s.plan.states);
                let mut next = SchedulingTrajectory::from_plan(&states, &s.plan.inputs);
                next.clamp_speeds();
                self.scheduling = Some(shift_scheduling(&next));
                self.guess = Some(s.plan.shifted());
                self.warm = Some(s.warm);
                (s.input, s.plan, s.diag)
            }
            other => {
                let diag = match other {
                    Ok(Some(s)) => s.diag,
                    _ => StepDiagnostics::failed(StepStatus::Failed),
                };
                let input = self.cfg.bounds.clamp_input_with_rate(ctx.u_prev, ctx.u_prev);
                self.scheduling = Some(shift_scheduling(&sched));
                self.guess = self.guess.as_ref().map(|g| g.shifted());
                self.warm = None;
                (input, Plan::default(), diag)
            }
        };
        let realized = scheduling_of(ctx.z, &input);
        diag.scheduling_error = predicted.entries[0].max_abs_diff(&realized);
        StepOutput {
            input,
            plan,
            diagnostics: diag,
        }
    }

    fn reset(&mut self) {
        self.scheduling = None;
        self.guess = None;
        self.warm = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::RoadBoundary;
    use crate::controller::Preset;
    use crate::reference::{build_reference_window, circular_arc};
    use crate::vehicle::InputVec;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn on_reference_start_keeps_inputs_small() {
        let center = (0.0, 100.0);
        let wps = circular_arc(center, 100.0, -FRAC_PI_2, 10.0, 200, 0.05);
        let road = RoadBoundary {
            center_x: center.0,
            center_y: center.1,
            radius: 100.0,
            r1: -1.0,
            r2: 4.0,
        };
        let cfg = ControllerConfig::preset(ControllerKind::LpvTrust, Preset::Scenario1, 8);
        let mut ctrl = LpvMpc::new(cfg);
        let refs = build_reference_window(&wps, 0, 8, 0.05).unwrap();
        let z = StateVec::new(wps[0].x, wps[0].y, 10.0, 0.0, 0.0, 0.0);
        let u = InputVec::zeros();
        let ctx = StepContext {
            z: &z,
            u_prev: &u,
            refs: &refs,
            obstacles: &[],
            road: &road,
        };
        let out = ctrl.step(&ctx);
        assert_eq!(out.diagnostics.status, StepStatus::Solved);
        assert_eq!(out.plan.states.len(), 8);
        assert!(out.input[0].abs() < 0.1, "{:?}", out.input);
        for (i, s) in out.plan.states.iter().enumerate() {
            let r = &refs[i + 1];
            assert!((s[0] - r.x).hypot(s[1] - r.y) < 0.5);
        }
        assert!(ctrl.scheduling().is_some());
    }
}
