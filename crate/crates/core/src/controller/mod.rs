//! Predictive controllers: scheduling-trust-region LPVMPC, the standard
//! LPVMPC (trust region off) and an SQP approximation of the nonlinear MPC.

mod lpv;
mod nmpc;
mod scheduling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{
    obstacle_tangent, rate_rows, road_tangent_rows, Bounds, EllipseObstacle, HalfspacePolytope, HorizonLayout,
    RoadBoundary, TrustRegionConfig,
};
use crate::error::{Error, Result};
use crate::qp::{CostWeights, QpStatus, SolverSettings};
use crate::reference::{wrap_angle, ReferenceState};
use crate::vehicle::{InputVec, StateVec, VehicleParams, INPUT_DIM, STATE_DIM};

pub use lpv::LpvMpc;
pub use nmpc::NmpcSqp;
pub use scheduling::{init_scheduling, shift_scheduling, SchedulingTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    LpvTrust,
    LpvStandard,
    NmpcSqp,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::LpvTrust => "lpv_trust",
            ControllerKind::LpvStandard => "lpv_standard",
            ControllerKind::NmpcSqp => "nmpc_sqp",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lpv_trust" => Ok(ControllerKind::LpvTrust),
            "lpv_standard" => Ok(ControllerKind::LpvStandard),
            "nmpc_sqp" => Ok(ControllerKind::NmpcSqp),
            other => Err(Error::InvalidParameter {
                key: "controller.kind".into(),
                reason: format!("unknown controller `{other}` (expected lpv_trust, lpv_standard or nmpc_sqp)"),
            }),
        }
    }
}

/// Named weight sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Tracking-oriented weights with moderate input penalty.
    Scenario1,
    /// Heavy longitudinal-speed weight with nearly free inputs.
    Scenario2,
}

impl Preset {
    /// `(q, r)` diagonals for the given controller family.
    pub fn weights(&self, kind: ControllerKind) -> ([f64; 6], [f64; 2]) {
        let nmpc = kind == ControllerKind::NmpcSqp;
        match (self, nmpc) {
            (Preset::Scenario1, true) => ([10.0, 10.0, 5.0, 1.0, 1.0, 1.0], [0.1, 0.1]),
            (Preset::Scenario1, false) => ([10.0, 10.0, 1.0, 1.0, 10.0, 1.0], [0.1, 0.1]),
            (Preset::Scenario2, true) => ([10.0, 10.0, 1000.0, 1.0, 1.0, 1.0], [0.001, 0.001]),
            (Preset::Scenario2, false) => ([10.0, 10.0, 300.0, 1.0, 1.0, 1.0], [0.001, 0.001]),
        }
    }

    /// Road offsets `(r1, r2)` used with this preset.
    pub fn road_offsets(&self) -> (f64, f64) {
        match self {
            Preset::Scenario1 => (-1.0, 4.0),
            Preset::Scenario2 => (-1.5, 5.0),
        }
    }
}

/// Outer-loop settings of the SQP controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqpSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the input step.
    pub step_tol: f64,
    /// Penalty on constraint violation in the line-search merit function.
    pub merit_penalty: f64,
    pub max_backtracks: usize,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            step_tol: 1e-4,
            merit_penalty: 1e3,
            max_backtracks: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub horizon: usize,
    /// Diagonals of the stage, input and terminal weights.
    pub q: [f64; 6],
    pub r: [f64; 2],
    pub p: [f64; 6],
    pub trust: TrustRegionConfig,
    pub solver: SolverSettings,
    pub sqp: SqpSettings,
    pub bounds: Bounds,
    pub vehicle: VehicleParams,
    /// Growth of every obstacle's semi-axes inside the controller (m).
    pub obstacle_margin: f64,
}

impl ControllerConfig {
    pub fn preset(kind: ControllerKind, preset: Preset, horizon: usize) -> Self {
        let (q, r) = preset.weights(kind);
        let vehicle = VehicleParams::default();
        Self {
            kind,
            horizon,
            q,
            r,
            p: q,
            trust: TrustRegionConfig {
                enabled: kind == ControllerKind::LpvTrust,
                ..Default::default()
            },
            solver: SolverSettings::default(),
            sqp: SqpSettings::default(),
            bounds: Bounds::for_sampling_time(vehicle.t_s),
            vehicle,
            obstacle_margin: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidParameter {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.horizon == 0 {
            return bad("controller.horizon", "must be >= 1");
        }
        if self
            .q
            .iter()
            .chain(self.p.iter())
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return bad("controller.q", "state weights must be finite and >= 0");
        }
        if self.r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("controller.r", "input weights must be finite and > 0");
        }
        if !(self.obstacle_margin >= 0.0 && self.obstacle_margin.is_finite()) {
            return bad("controller.obstacle_margin", "must be finite and >= 0");
        }
        self.trust.validate()?;
        self.vehicle.validate()
    }

    pub(crate) fn weights(&self, slacks: bool) -> CostWeights {
        let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_row_slice(v));
        CostWeights {
            q: diag(&self.q),
            r: diag(&self.r),
            p: diag(&self.p),
            e_p: if slacks {
                diag(&self.trust.e_p)
            } else {
                DMatrix::zeros(0, 0)
            },
        }
    }
}

/// Outcome of one controller call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Solved,
    /// QP iteration cap reached; the iterate was still used.
    MaxIterations,
    /// SQP outer-iteration cap reached; the last iterate was used.
    NotConverged,
    /// The QP was infeasible; the fallback input was applied.
    Infeasible,
    /// The model could not be evaluated; the fallback input was applied.
    Failed,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Solved => "solved",
            StepStatus::MaxIterations => "max_iterations",
            StepStatus::NotConverged => "not_converged",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Failed => "failed",
        }
    }

    /// Whether the step used the fallback input instead of a plan.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, StepStatus::Infeasible | StepStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub status: StepStatus,
    pub qp_status: Option<QpStatus>,
    pub objective: f64,
    /// Largest slack per channel `(v_lon, v_lat, psi, delta)`.
    pub slack_max: [f64; 4],
    /// Wall time of the solver call(s) in seconds.
    pub solve_time: f64,
    pub obstacle_active: bool,
    /// `|p_hat_0 - p(z_k, u_k)|_inf` against the applied input.
    pub scheduling_error: f64,
    /// QP iterations (LPV) or SQP outer iterations (NMPC).
    pub iterations: usize,
    pub converged: bool,
}

impl StepDiagnostics {
    pub(crate) fn failed(status: StepStatus) -> Self {
        Self {
            status,
            qp_status: None,
            objective: f64::NAN,
            slack_max: [0.0; 4],
            solve_time: 0.0,
            obstacle_active: false,
            scheduling_error: 0.0,
            iterations: 0,
            converged: false,
        }
    }
}

/// Open-loop plan: `states[i]` is `z_{i+1|k}`, `inputs[i]` is `u_{i|k}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub states: Vec<StateVec>,
    pub inputs: Vec<InputVec>,
}

impl Plan {
    /// Order-sensitive FNV-1a hash of the plan's bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let values = self
            .states
            .iter()
            .flat_map(|z| z.iter())
            .chain(self.inputs.iter().flat_map(|u| u.iter()));
        for v in values {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// The plan advanced by one step, holding the last entries.
    pub fn shifted(&self) -> Plan {
        Plan {
            states: shift_hold(&self.states),
            inputs: shift_hold(&self.inputs),
        }
    }
}

fn shift_hold<T: Copy>(v: &[T]) -> Vec<T> {
    let mut out: Vec<T> = v.iter().skip(1).copied().collect();
    if let Some(last) = v.last() {
        out.push(*last);
    }
    out
}

/// Everything a controller sees at time `k`.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub z: &'a StateVec,
    pub u_prev: &'a InputVec,
    /// Reference window for steps `k ..= k + N`.
    pub refs: &'a [ReferenceState],
    pub obstacles: &'a [EllipseObstacle],
    pub road: &'a RoadBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub input: InputVec,
    pub plan: Plan,
    pub diagnostics: StepDiagnostics,
}

pub trait Controller: Send {
    fn kind(&self) -> ControllerKind;
    fn step(&mut self, ctx: &StepContext<'_>) -> StepOutput;
    /// Forgets warm starts and scheduling history.
    fn reset(&mut self);
}

pub fn make_controller(cfg: &ControllerConfig) -> Box<dyn Controller> {
    match cfg.kind {
        ControllerKind::LpvTrust | ControllerKind::LpvStandard => Box::new(LpvMpc::new(cfg.clone())),
        ControllerKind::NmpcSqp => Box::new(NmpcSqp::new(cfg.clone())),
    }
}

/// Shifts the reference headings by a multiple of `2 pi` so the first entry is
/// within `pi` of the vehicle heading.
pub fn unwrap_reference(refs: &[ReferenceState], psi: f64) -> Vec<ReferenceState> {
    let Some(first) = refs.first() else { return Vec::new() };
    let offset = psi + wrap_angle(first.psi - psi) - first.psi;
    refs.iter()
        .map(|r| ReferenceState {
            psi: r.psi + offset,
            ..*r
        })
        .collect()
}

/// Stacked `[z_ref_1 .. z_ref_N]`.
pub(crate) fn stacked_reference(refs: &[ReferenceState], horizon: usize) -> DVector<f64> {
    let mut out = DVector::zeros(STATE_DIM * horizon);
    for i in 0..horizon {
        out.rows_mut(STATE_DIM * i, STATE_DIM)
            .copy_from(&refs[i + 1].to_vector());
    }
    out
}

/// Rate, road and per-step obstacle rows over `[Z; U]`.
///
/// An obstacle row is installed on every step whose reference point lies
/// inside an ellipse; returns whether any was installed.
pub(crate) fn horizon_rows(
    ctx: &StepContext<'_>,
    refs: &[ReferenceState],
    cfg: &ControllerConfig,
    layout: &HorizonLayout,
) -> Result<(HalfspacePolytope, bool)> {
    let n = layout.horizon;
    let mut rows = rate_rows(ctx.u_prev, &cfg.bounds, layout);
    rows.append(&road_tangent_rows(ctx.road, &refs[1..=n], layout)?)?;
    let mut active = false;
    // Per-step tangents; a step whose reference already left the obstacle
    // keeps the tangent of the latest reference inside it. The step-1
    // position is fixed by the measured state, so rows start at step 2.
    for obs in ctx.obstacles {
        let obs = obs.inflated(cfg.obstacle_margin);
        let mut held = None;
        for (i, r) in refs.iter().enumerate().take(n + 1) {
            let hs = obstacle_tangent(&obs, std::slice::from_ref(r), ctx.road)?;
            if hs.active {
                active = true;
                held = Some(hs);
            }
            if let (Some(hs), true) = (&held, i >= 2) {
                rows.append(&hs.row(i, layout))?;
            }
        }
    }
    Ok((rows, active))
}

pub(crate) fn check_context(ctx: &StepContext<'_>, horizon: usize) -> Result<()> {
    if ctx.refs.len() != horizon + 1 {
        return Err(Error::DimensionMismatch(format!(
            "reference window has {} entries, expected {}",
            ctx.refs.len(),
            horizon + 1
        )));
    }
    Ok(())
}

pub(crate) fn input_slice(u: &DVector<f64>, i: usize) -> InputVec {
    InputVec::new(u[INPUT_DIM * i], u[INPUT_DIM * i + 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn preset_weights() {
        let c = ControllerConfig::preset(ControllerKind::LpvTrust, Preset::Scenario1, 8);
        assert_eq!(c.q, [10.0, 10.0, 1.0, 1.0, 10.0, 1.0]);
        assert_eq!(c.p, c.q);
        assert!(c.trust.enabled);
        let s = ControllerConfig::preset(ControllerKind::LpvStandard, Preset::Scenario2, 15);
        assert!(!s.trust.enabled);
        assert_eq!(s.q[2], 300.0);
        let n = ControllerConfig::preset(ControllerKind::NmpcSqp, Preset::Scenario2, 8);
        assert_eq!(n.q[2], 1000.0);
        assert_eq!(n.r, [0.001, 0.001]);
        c.validate().unwrap();
        assert!(ControllerConfig {
            horizon: 0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(ControllerConfig { r: [0.0, 1.0], ..c }.validate().is_err());
    }

    #[test]
    fn kind_round_trip() {
        for k in [
            ControllerKind::LpvTrust,
            ControllerKind::LpvStandard,
            ControllerKind::NmpcSqp,
        ] {
            assert_eq!(k.as_str().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("mpc".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn reference_unwrapping() {
        let refs: Vec<ReferenceState> = [PI - 0.1, PI, PI + 0.1]
            .iter()
            .map(|&psi| ReferenceState {
                psi,
                ..Default::default()
            })
            .collect();
        let u = unwrap_reference(&refs, -PI + 0.05);
        assert!((u[0].psi - (-PI - 0.1)).abs() < 1e-12);
        assert!((u[2].psi - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn plan_shift_and_fingerprint() {
        let p = Plan {
            states: vec![StateVec::from_element(1.0), StateVec::from_element(2.0)],
            inputs: vec![InputVec::from_element(0.1), InputVec::from_element(0.2)],
        };
        let s = p.shifted();
        assert_eq!(s.states, vec![StateVec::from_element(2.0); 2]);
        assert_eq!(s.inputs, vec![InputVec::from_element(0.2); 2]);
        assert_ne!(p.fingerprint(), s.fingerprint());
        assert_eq!(p.fingerprint(), p.clone().fingerprint());
    }
}
