//! Closed-loop simulation, the seeded feasibility study and timing tables.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{EllipseObstacle, RoadBoundary, Side};
use crate::controller::{make_controller, ControllerConfig, ControllerKind, Preset, StepContext, StepDiagnostics};
use crate::error::{Error, Result};
use crate::reference::{build_reference_window, circular_arc, Waypoint};
use crate::vehicle::{rk4_integrate, InputVec, StateVec, VehicleState};

/// Circular road driven counter-clockwise from polar angle `start_angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub r1: f64,
    pub r2: f64,
    /// Reference speed (m/s); sets the waypoint spacing.
    pub speed: f64,
    /// Polar angle of the first waypoint (rad).
    pub start_angle: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            center_x: 150.0,
            center_y: 110.0,
            radius: 100.0,
            r1: -1.0,
            r2: 4.0,
            speed: 12.0,
            start_angle: -FRAC_PI_2,
        }
    }
}

impl TrackConfig {
    pub fn road(&self) -> RoadBoundary {
        RoadBoundary {
            center_x: self.center_x,
            center_y: self.center_y,
            radius: self.radius,
            r1: self.r1,
            r2: self.r2,
        }
    }

    pub fn waypoints(&self, n_points: usize, t_s: f64) -> Vec<Waypoint> {
        circular_arc(
            (self.center_x, self.center_y),
            self.radius,
            self.start_angle,
            self.speed,
            n_points,
            t_s,
        )
    }

    /// Point on the center line at arc length `s` from the start, shifted
    /// outward by `lateral`.
    pub fn point_at(&self, s: f64, lateral: f64) -> (f64, f64) {
        let th = self.start_angle + s / self.radius;
        let r = self.radius + lateral;
        (self.center_x + r * th.cos(), self.center_y + r * th.sin())
    }

    pub fn validate(&self) -> Result<()> {
        self.road().validate()?;
        if !(self.speed > 0.0) {
            return Err(Error::InvalidParameter {
                key: "track.speed".into(),
                reason: "must be > 0".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub track: TrackConfig,
    pub obstacles: Vec<EllipseObstacle>,
    /// Defaults to the first reference state when absent.
    pub initial_state: Option<VehicleState>,
    pub controller: ControllerConfig,
    pub duration: usize,
    /// Relative plant error on `(C_af, C_ar, m)`.
    pub perturbation: [f64; 3],
    /// RK4 substeps per sampling period in the plant.
    pub substeps: usize,
    pub seed: u64,
}

impl Scenario {
    /// Obstacle-free scenario on the default track.
    pub fn tracking(kind: ControllerKind, preset: Preset, horizon: usize, duration: usize) -> Self {
        let (r1, r2) = preset.road_offsets();
        Self {
            name: "tracking".into(),
            track: TrackConfig {
                r1,
                r2,
                ..Default::default()
            },
            obstacles: Vec::new(),
            initial_state: None,
            controller: ControllerConfig::preset(kind, preset, horizon),
            duration,
            perturbation: [0.0; 3],
            substeps: 10,
            seed: 0,
        }
    }

    pub fn with_kind(&self, kind: ControllerKind) -> Self {
        let mut s = self.clone();
        s.controller.kind = kind;
        s.controller.trust.enabled = kind == ControllerKind::LpvTrust;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration == 0 {
            return Err(Error::InvalidParameter {
                key: "sim.duration".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter {
                key: "sim.substeps".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.perturbation.iter().any(|f| !(*f > -1.0 && f.is_finite())) {
            return Err(Error::InvalidParameter {
                key: "sim.perturbation".into(),
                reason: "relative errors must be finite and > -1".into(),
            });
        }
        self.track.validate()?;
        self.controller.validate()?;
        let road = self.track.road();
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate().map_err(|e| match e {
                Error::InvalidParameter { key, reason } => Error::InvalidParameter {
                    key: format!("obstacles[{i}].{key}"),
                    reason,
                },
                other => other,
            })?;
            if road.margin(o.cx, o.cy) < 0.0 {
                return Err(Error::InvalidParameter {
                    key: format!("obstacles[{i}]"),
                    reason: "center must lie within the road annulus".into(),
                });
            }
        }
        Ok(())
    }

    pub fn waypoints(&self) -> Vec<Waypoint> {
        self.track
            .waypoints(self.duration + self.controller.horizon + 2, self.controller.vehicle.t_s)
    }

    fn initial(&self, wps: &[Waypoint]) -> Result<StateVec> {
        if let Some(s) = self.initial_state {
            return Ok(s.to_vector());
        }
        let r = build_reference_window(wps, 0, 0, self.controller.vehicle.t_s)?[0];
        Ok(StateVec::new(r.x, r.y, r.v_lon, 0.0, r.psi, r.omega))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub time: f64,
    /// Plant state at time `k`.
    pub state: StateVec,
    pub input: InputVec,
    pub reference: (f64, f64),
    pub plan_hash: u64,
    pub diagnostics: StepDiagnostics,
    /// Smallest `G(X, Y)` over all obstacles (`inf` without obstacles).
    pub obstacle_margin: f64,
    /// Signed clearance to the nearer road edge (m).
    pub road_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSummary {
    pub steps: usize,
    pub rms_xy_error: f64,
    pub infeasible_steps: usize,
    pub unsolved_steps: usize,
    pub min_obstacle_margin: f64,
    pub max_road_violation: f64,
    pub avg_solve_time: f64,
    pub max_solve_time: f64,
    pub min_solve_time: f64,
    pub converged_fraction: f64,
    pub mean_scheduling_error: f64,
    pub max_slack: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub controller: ControllerKind,
    pub horizon: usize,
    pub has_obstacles: bool,
    pub records: Vec<StepRecord>,
    pub summary: LogSummary,
    pub abort_reason: Option<String>,
}

impl TrajectoryLog {
    /// Every step solved and the run completed.
    pub fn feasible(&self) -> bool {
        !self.summary.aborted && self.summary.infeasible_steps == 0
    }
}

fn summarize(records: &[StepRecord], aborted: bool) -> LogSummary {
    let n = records.len();
    let sq: f64 = records
        .iter()
        .map(|r| (r.state[0] - r.reference.0).powi(2) + (r.state[1] - r.reference.1).powi(2))
        .sum();
    let times: Vec<f64> = records.iter().map(|r| r.diagnostics.solve_time).collect();
    let nf = n.max(1) as f64;
    LogSummary {
        steps: n,
        rms_xy_error: (sq / nf).sqrt(),
        infeasible_steps: records.iter().filter(|r| r.diagnostics.status.is_infeasible()).count(),
        unsolved_steps: records.iter().filter(|r| !r.diagnostics.converged).count(),
        min_obstacle_margin: records.iter().map(|r| r.obstacle_margin).fold(f64::INFINITY, f64::min),
        max_road_violation: records.iter().map(|r| (-r.road_margin).max(0.0)).fold(0.0, f64::max),
        avg_solve_time: times.iter().sum::<f64>() / nf,
        max_solve_time: times.iter().copied().fold(0.0, f64::max),
        min_solve_time: if n == 0 {
            0.0
        } else {
            times.iter().copied().fold(f64::INFINITY, f64::min)
        },
        converged_fraction: records.iter().filter(|r| r.diagnostics.converged).count() as f64 / nf,
        mean_scheduling_error: records.iter().map(|r| r.diagnostics.scheduling_error).sum::<f64>() / nf,
        max_slack: records
            .iter()
            .flat_map(|r| r.diagnostics.slack_max.iter().copied())
            .fold(0.0, f64::max),
        aborted,
    }
}

/// Runs controller and RK4 plant in closed loop for `scn.duration` steps.
pub fn run_closed_loop(scn: &Scenario) -> Result<TrajectoryLog> {
    scn.validate()?;
    let cfg = &scn.controller;
    let t_s = cfg.vehicle.t_s;
    let wps = scn.waypoints();
    let road = scn.track.road();
    let [kf, kr, km] = scn.perturbation;
    let plant = cfg.vehicle.perturbed(kf, kr, km);
    let mut controller = make_controller(cfg);

    let mut z = scn.initial(&wps)?;
    let mut u_prev = InputVec::zeros();
    let mut records = Vec::with_capacity(scn.duration);
    let mut abort_reason = None;

    for k in 0..scn.duration {
        let refs = build_reference_window(&wps, k, cfg.horizon, t_s)?;
        let ctx = StepContext {
            z: &z,
            u_prev: &u_prev,
            refs: &refs,
            obstacles: &scn.obstacles,
            road: &road,
        };
        let out = controller.step(&ctx);
        records.push(StepRecord {
            k,
            time: k as f64 * t_s,
            state: z,
            input: out.input,
            reference: (refs[0].x, refs[0].y),
            plan_hash: out.plan.fingerprint(),
            diagnostics: out.diagnostics,
            obstacle_margin: scn
                .obstacles
                .iter()
                .map(|o| o.g_value(z[0], z[1]))
                .fold(f64::INFINITY, f64::min),
            road_margin: road.margin(z[0], z[1]),
        });
        match rk4_integrate(&z, &out.input, &plant, scn.substeps) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => z = next,
            Ok(_) => {
                abort_reason = Some(format!("non-finite plant state at step {k}"));
                break;
            }
            Err(e) => {
                abort_reason = Some(format!("plant error at step {k}: {e}"));
                break;
            }
        }
        u_prev = out.input;
    }

    let summary = summarize(&records, abort_reason.is_some());
    Ok(TrajectoryLog {
        scenario: scn.name.clone(),
        controller: cfg.kind,
        horizon: cfg.horizon,
        has_obstacles: !scn.obstacles.is_empty(),
        records,
        summary,
        abort_reason,
    })
}

/// Parameters of the seeded scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub count: usize,
    pub seed: u64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub horizons: Vec<usize>,
    /// Obstacle arc position as fractions of the distance covered in a run.
    pub placement_min: f64,
    pub placement_max: f64,
    /// Range of the obstacle center's outward offset from the center line (m).
    pub lateral_min: f64,
    pub lateral_max: f64,
    pub side: Side,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            count: 10,
            seed: 42,
            radius_min: 0.7,
            radius_max: 1.4,
            horizons: vec![8, 15],
            placement_min: 0.25,
            placement_max: 0.75,
            lateral_min: 0.0,
            lateral_max: 0.0,
            side: Side::Right,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidParameter {
                key: format!("study.{key}"),
                reason: reason.into(),
            })
        };
        if self.count == 0 {
            return bad("count", "must be >= 1");
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max) {
            return bad("radius_min", "need 0 < radius_min <= radius_max");
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons", "need at least one horizon >= 1");
        }
        if !(0.0..=1.0).contains(&self.placement_min)
            || !(self.placement_min <= self.placement_max && self.placement_max <= 1.0)
        {
            return bad("placement_min", "need 0 <= placement_min <= placement_max <= 1");
        }
        if self.lateral_min > self.lateral_max {
            return bad("lateral_min", "must be <= lateral_max");
        }
        Ok(())
    }

    /// Radii outside [0.7, 1.4] m are allowed but worth a warning.
    pub fn radius_warning(&self) -> Option<String> {
        (self.radius_min < 0.7 || self.radius_max > 1.4).then(|| {
            format!(
                "obstacle radii [{}, {}] m extend beyond [0.7, 1.4] m",
                self.radius_min, self.radius_max
            )
        })
    }
}

/// One circular obstacle per scenario on `base`'s track, drawn from `study`.
pub fn generate_study_scenarios(base: &Scenario, study: &StudyConfig) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(study.seed);
    let reach = base.track.speed * base.controller.vehicle.t_s * base.duration as f64;
    (0..study.count)
        .map(|i| {
            let radius = rng.gen_range(study.radius_min..=study.radius_max);
            let horizon = study.horizons[rng.gen_range(0..study.horizons.len())];
            let frac = rng.gen_range(study.placement_min..=study.placement_max);
            let lateral = rng.gen_range(study.lateral_min..=study.lateral_max);
            let s = (frac * reach) % (TAU * base.track.radius);
            let (cx, cy) = base.track.point_at(s, lateral);
            let mut scn = base.clone();
            scn.name = format!("study-{i:02}");
            scn.controller.horizon = horizon;
            scn.obstacles = vec![EllipseObstacle::circle(cx, cy, radius, study.side)];
            scn.seed = study.seed.wrapping_add(i as u64);
            scn
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub id: String,
    pub horizon: usize,
    pub obstacle_radius: f64,
    pub standard_feasible: bool,
    pub trust_feasible: bool,
    pub standard_infeasible_steps: usize,
    pub trust_infeasible_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub standard_logs: Vec<TrajectoryLog>,
    pub trust_logs: Vec<TrajectoryLog>,
}

impl StudyTable {
    /// Every scenario feasible for the standard controller is feasible with the trust region.
    pub fn superset_holds(&self) -> bool {
        self.rows.iter().all(|r| !r.standard_feasible || r.trust_feasible)
    }

    pub fn trust_feasible_count(&self) -> usize {
        self.rows.iter().filter(|r| r.trust_feasible).count()
    }

    pub fn standard_feasible_count(&self) -> usize {
        self.rows.iter().filter(|r| r.standard_feasible).count()
    }
}

/// Runs every scenario with the standard and the trust-region LPVMPC.
pub fn feasibility_study(scenarios: &[Scenario]) -> Result<StudyTable> {
    let runs: Vec<Result<(TrajectoryLog, TrajectoryLog)>> = scenarios
        .par_iter()
        .map(|s| {
            let (std_log, trust_log) = rayon::join(
                || run_closed_loop(&s.with_kind(ControllerKind::LpvStandard)),
                || run_closed_loop(&s.with_kind(ControllerKind::LpvTrust)),
            );
            Ok((std_log?, trust_log?))
        })
        .collect();

    let mut table = StudyTable {
        rows: Vec::new(),
        standard_logs: Vec::new(),
        trust_logs: Vec::new(),
    };
    for (scn, run) in scenarios.iter().zip(runs) {
        let (std_log, trust_log) = run?;
        table.rows.push(StudyRow {
            id: scn.name.clone(),
            horizon: scn.controller.horizon,
            obstacle_radius: scn.obstacles.first().map(|o| o.rx.max(o.ry)).unwrap_or(0.0),
            standard_feasible: std_log.feasible(),
            trust_feasible: trust_log.feasible(),
            standard_infeasible_steps: std_log.summary.infeasible_steps,
            trust_infeasible_steps: trust_log.summary.infeasible_steps,
        });
        table.standard_logs.push(std_log);
        table.trust_logs.push(trust_log);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioClass {
    Tracking,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub controller: ControllerKind,
    pub class: ScenarioClass,
    pub samples: usize,
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

/// Solve-time statistics grouped by controller and scenario class. Groups
/// without samples are omitted.
pub fn timing_report(logs: &[TrajectoryLog]) -> Vec<TimingRow> {
    let mut rows = Vec::new();
    for kind in [
        ControllerKind::LpvTrust,
        ControllerKind::LpvStandard,
        ControllerKind::NmpcSqp,
    ] {
        for class in [ScenarioClass::Tracking, ScenarioClass::Obstacle] {
            let times: Vec<f64> = logs
                .iter()
                .filter(|l| l.controller == kind && (l.has_obstacles == (class == ScenarioClass::Obstacle)))
                .flat_map(|l| l.records.iter().map(|r| r.diagnostics.solve_time))
                .collect();
            if times.is_empty() {
                continue;
            }
            rows.push(TimingRow {
                controller: kind,
                class,
                samples: times.len(),
                avg: times.iter().sum::<f64>() / times.len() as f64,
                max: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min: times.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
    }
    rows
}

pub const TRAJECTORY_HEADER: &str = "# lpvmpc trajectory v1";
pub const SUMMARY_HEADER: &str = "# lpvmpc summary v1";
pub const STUDY_HEADER: &str = "# lpvmpc study v1";
pub const TIMING_HEADER: &str = "# lpvmpc timing v1";
pub const PLOT_HEADER: &str = "# lpvmpc plot v1";
pub const INPUTS_HEADER: &str = "# lpvmpc inputs v1";

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_trajectory_csv<W: Write>(mut w: W, log: &TrajectoryLog) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "k",
        "time",
        "x",
        "y",
        "v_lon",
        "v_lat",
        "psi",
        "omega",
        "delta",
        "a_lon",
        "x_ref",
        "y_ref",
        "status",
        "objective",
        "solve_time",
        "iterations",
        "obstacle_active",
        "obstacle_margin",
        "road_margin",
        "slack_v_lon",
        "slack_v_lat",
        "slack_psi",
        "slack_delta",
        "scheduling_error",
        "plan_hash",
    ])?;
    for r in &log.records {
        let d = &r.diagnostics;
        let mut row = vec![r.k.to_string(), format!("{:.2}", r.time)];
        row.extend(r.state.iter().map(|v| fmt_f(*v)));
        row.extend(r.input.iter().map(|v| fmt_f(*v)));
        row.extend([
            fmt_f(r.reference.0),
            fmt_f(r.reference.1),
            d.status.as_str().to_string(),
            fmt_f(d.objective),
        ]);
        row.extend([
            format!("{:.6}", d.solve_time),
            d.iterations.to_string(),
            d.obstacle_active.to_string(),
        ]);
        row.extend([fmt_f(r.obstacle_margin), fmt_f(r.road_margin)]);
        row.extend(d.slack_max.iter().map(|v| fmt_f(*v)));
        row.extend([fmt_f(d.scheduling_error), format!("{:016x}", r.plan_hash)]);
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, logs: &[TrajectoryLog]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "scenario",
        "controller",
        "horizon",
        "steps",
        "rms_xy_error",
        "infeasible_steps",
        "unsolved_steps",
        "min_obstacle_margin",
        "max_road_violation",
        "avg_solve_time",
        "max_solve_time",
        "min_solve_time",
        "converged_fraction",
        "mean_scheduling_error",
        "max_slack",
        "aborted",
    ])?;
    for l in logs {
        let s = &l.summary;
        wtr.write_record([
            l.scenario.clone(),
            l.controller.to_string(),
            l.horizon.to_string(),
            s.steps.to_string(),
            fmt_f(s.rms_xy_error),
            s.infeasible_steps.to_string(),
            s.unsolved_steps.to_string(),
            fmt_f(s.min_obstacle_margin),
            fmt_f(s.max_road_violation),
            format!("{:.4}", s.avg_solve_time),
            format!("{:.4}", s.max_solve_time),
            format!("{:.4}", s.min_solve_time),
            fmt_f(s.converged_fraction),
            fmt_f(s.mean_scheduling_error),
            fmt_f(s.max_slack),
            s.aborted.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_study_csv<W: Write>(mut w: W, table: &StudyTable) -> Result<()> {
    writeln!(w, "{STUDY_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "scenario",
        "horizon",
        "obstacle_radius",
        "standard_feasible",
        "trust_feasible",
        "standard_infeasible_steps",
        "trust_infeasible_steps",
    ])?;
    for r in &table.rows {
        wtr.write_record([
            r.id.clone(),
            r.horizon.to_string(),
            format!("{:.3}", r.obstacle_radius),
            r.standard_feasible.to_string(),
            r.trust_feasible.to_string(),
            r.standard_infeasible_steps.to_string(),
            r.trust_infeasible_steps.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_timing_csv<W: Write>(mut w: W, rows: &[TimingRow]) -> Result<()> {
    writeln!(w, "{TIMING_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["controller", "class", "samples", "avg_s", "max_s", "min_s"])?;
    for r in rows {
        let class = match r.class {
            ScenarioClass::Tracking => "tracking",
            ScenarioClass::Obstacle => "obstacle",
        };
        wtr.write_record([
            r.controller.to_string(),
            class.to_string(),
            r.samples.to_string(),
            format!("{:.4}", r.avg),
            format!("{:.4}", r.max),
            format!("{:.4}", r.min),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Point series for plotting: the driven path, both road edges and obstacle outlines.
pub fn write_plot_data<W: Write>(mut w: W, scn: &Scenario, log: &TrajectoryLog) -> Result<()> {
    writeln!(w, "{PLOT_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["series", "x", "y"])?;
    for r in &log.records {
        wtr.write_record(["path".to_string(), fmt_f(r.state[0]), fmt_f(r.state[1])])?;
    }
    for r in &log.records {
        wtr.write_record(["reference".to_string(), fmt_f(r.reference.0), fmt_f(r.reference.1)])?;
    }
    let road = scn.track.road();
    let samples = 360;
    for (name, rad) in [("road_inner", road.inner_radius()), ("road_outer", road.outer_radius())] {
        for i in 0..=samples {
            let th = TAU * i as f64 / samples as f64;
            wtr.write_record([
                name.to_string(),
                fmt_f(road.center_x + rad * th.cos()),
                fmt_f(road.center_y + rad * th.sin()),
            ])?;
        }
    }
    for (j, o) in scn.obstacles.iter().enumerate() {
        for i in 0..=72 {
            let th = TAU * i as f64 / 72.0;
            wtr.write_record([
                format!("obstacle_{j}"),
                fmt_f(o.cx + o.rx * th.cos()),
                fmt_f(o.cy + o.ry * th.sin()),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Input traces of several runs aligned on the step index.
pub fn write_input_traces<W: Write>(mut w: W, logs: &[TrajectoryLog]) -> Result<()> {
    writeln!(w, "{INPUTS_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["controller", "k", "time", "delta", "a_lon"])?;
    for l in logs {
        for r in &l.records {
            wtr.write_record([
                l.controller.to_string(),
                r.k.to_string(),
                format!("{:.2}", r.time),
                fmt_f(r.input[0]),
                fmt_f(r.input[1]),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::StepStatus;

    fn record(t: f64) -> StepRecord {
        let mut d = StepDiagnostics::failed(StepStatus::Solved);
        d.solve_time = t;
        d.converged = true;
        StepRecord {
            k: 0,
            time: 0.0,
            state: StateVec::zeros(),
            input: InputVec::zeros(),
            reference: (0.0, 0.0),
            plan_hash: 0,
            diagnostics: d,
            obstacle_margin: f64::INFINITY,
            road_margin: 1.0,
        }
    }

    fn log(kind: ControllerKind, times: &[f64], obstacles: bool) -> TrajectoryLog {
        let records: Vec<_> = times.iter().map(|&t| record(t)).collect();
        let summary = summarize(&records, false);
        TrajectoryLog {
            scenario: "t".into(),
            controller: kind,
            horizon: 8,
            has_obstacles: obstacles,
            records,
            summary,
            abort_reason: None,
        }
    }

    #[test]
    fn timing_examples() {
        let rows = timing_report(&[log(ControllerKind::LpvTrust, &[0.001, 0.002, 0.003], false)]);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].avg - 0.002).abs() < 1e-15);
        assert_eq!(rows[0].max, 0.003);
        assert_eq!(rows[0].min, 0.001);
        assert_eq!(rows[0].class, ScenarioClass::Tracking);
    }

    #[test]
    fn single_step_run() {
        let mut scn = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, 1);
        scn.duration = 1;
        let log = run_closed_loop(&scn).unwrap();
        assert_eq!(log.records.len(), 1);
        assert!(log.feasible());
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut scn = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, 10);
        scn.duration = 0;
        assert!(run_closed_loop(&scn).is_err());
        let mut scn = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, 10);
        scn.obstacles.push(EllipseObstacle::circle(0.0, 0.0, 1.0, Side::Right));
        assert!(matches!(scn.validate(), Err(Error::InvalidParameter { key, .. }) if key == "obstacles[0]"));
    }

    #[test]
    fn generator_respects_ranges() {
        let base = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, 200);
        let study = StudyConfig::default();
        let scns = generate_study_scenarios(&base, &study);
        assert_eq!(scns.len(), 10);
        for s in &scns {
            let o = s.obstacles[0];
            assert!((0.7..=1.4).contains(&o.rx));
            assert!([8, 15].contains(&s.controller.horizon));
            assert!(s.validate().is_ok());
        }
        assert_eq!(scns, generate_study_scenarios(&base, &study));
    }
}
