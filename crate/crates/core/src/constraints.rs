//! Linear inequality rows for the predictive controllers: state and input
//! boxes, input-rate windows, road-boundary tangents, the adaptive obstacle
//! tangent halfspace and the soft scheduling trust-region rows.
//!
//! Stage-level polytopes (boxes) act on a single `z` or `u`. Horizon-level
//! polytopes act on the stacked vector `[z_1 .. z_N, u_0 .. u_{N-1}]` whose
//! column layout is given by [`HorizonLayout`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::ReferenceState;
use crate::vehicle::{InputVec, StateVec, INPUT_DIM, STATE_DIM};

/// Slack channels per horizon step: `v_lon`, `v_lat`, `psi`, `delta`.
pub const SLACKS_PER_STEP: usize = 4;

/// Stacked linear inequalities `g x <= h`. Soft rows carry the index of the
/// slack that relaxes them (`g x - eps <= h`).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspacePolytope {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub soft: Vec<Option<usize>>,
}

impl HalfspacePolytope {
    pub fn empty(cols: usize) -> Self {
        Self {
            g: DMatrix::zeros(0, cols),
            h: DVector::zeros(0),
            soft: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.h.len()
    }

    pub fn cols(&self) -> usize {
        self.g.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    /// Appends `sum coeffs[k].1 * x[coeffs[k].0] <= rhs`.
    pub fn push_row(&mut self, coeffs: &[(usize, f64)], rhs: f64, soft: Option<usize>) {
        let r = self.rows();
        let cols = self.cols();
        self.g = std::mem::replace(&mut self.g, DMatrix::zeros(0, 0)).insert_row(r, 0.0);
        for &(c, v) in coeffs {
            assert!(c < cols, "column {c} out of range {cols}");
            self.g[(r, c)] += v;
        }
        self.h = std::mem::replace(&mut self.h, DVector::zeros(0)).push(rhs);
        self.soft.push(soft);
    }

    /// Concatenates the rows of `other` (same column space).
    pub fn append(&mut self, other: &HalfspacePolytope) -> Result<()> {
        if other.cols() != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack polytopes with {} and {} columns",
                self.cols(),
                other.cols()
            )));
        }
        let (r0, r1) = (self.rows(), other.rows());
        let mut g = DMatrix::zeros(r0 + r1, self.cols());
        g.rows_mut(0, r0).copy_from(&self.g);
        g.rows_mut(r0, r1).copy_from(&other.g);
        let mut h = DVector::zeros(r0 + r1);
        h.rows_mut(0, r0).copy_from(&self.h);
        h.rows_mut(r0, r1).copy_from(&other.h);
        self.g = g;
        self.h = h;
        self.soft.extend_from_slice(&other.soft);
        Ok(())
    }

    /// `g x - eps_soft - h` per row; nonpositive entries are satisfied.
    pub fn residuals(&self, x: &DVector<f64>, slacks: Option<&DVector<f64>>) -> DVector<f64> {
        let mut r = &self.g * x - &self.h;
        if let Some(eps) = slacks {
            for (i, s) in self.soft.iter().enumerate() {
                if let Some(j) = s {
                    r[i] -= eps[*j];
                }
            }
        }
        r
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.residuals(x, None).iter().all(|&r| r <= tol)
    }
}

/// Column layout of the stacked horizon vector `[z_1 .. z_N, u_0 .. u_{N-1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonLayout {
    pub horizon: usize,
}

impl HorizonLayout {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    pub fn width(&self) -> usize {
        (STATE_DIM + INPUT_DIM) * self.horizon
    }

    pub fn state_cols(&self) -> usize {
        STATE_DIM * self.horizon
    }

    /// Column of state component `comp` at prediction step `step` in `1..=N`.
    pub fn state(&self, step: usize, comp: usize) -> usize {
        debug_assert!(step >= 1 && step <= self.horizon && comp < STATE_DIM);
        STATE_DIM * (step - 1) + comp
    }

    /// Column of input component `comp` at step `step` in `0..N`.
    pub fn input(&self, step: usize, comp: usize) -> usize {
        debug_assert!(step < self.horizon && comp < INPUT_DIM);
        self.state_cols() + INPUT_DIM * step + comp
    }

    pub fn slack(&self, step: usize, channel: usize) -> usize {
        SLACKS_PER_STEP * step + channel
    }

    pub fn slack_count(&self) -> usize {
        SLACKS_PER_STEP * self.horizon
    }
}

/// Box and rate limits on states and inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub v_lon_min: f64,
    pub v_lon_max: f64,
    pub v_lat_max: f64,
    pub psi_max: f64,
    pub omega_max: f64,
    pub delta_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub delta_rate_max: f64,
    pub a_rate_max: f64,
}

impl Bounds {
    /// Limits for sampling time `t_s` (only the yaw-rate bound depends on it).
    pub fn for_sampling_time(t_s: f64) -> Self {
        Self {
            x_min: -1.0,
            x_max: 1500.0,
            y_min: -600.0,
            y_max: 800.0,
            v_lon_min: 1.0,
            v_lon_max: 100.0,
            v_lat_max: 10.0,
            psi_max: PI,
            omega_max: PI / (3.0 * t_s),
            delta_max: 34.0 * PI / 180.0,
            a_min: -6.0,
            a_max: 2.0,
            delta_rate_max: 25.0 * PI / 180.0,
            a_rate_max: 1.5,
        }
    }

    pub fn clamp_input(&self, u: &InputVec) -> InputVec {
        InputVec::new(
            u[0].clamp(-self.delta_max, self.delta_max),
            u[1].clamp(self.a_min, self.a_max),
        )
    }

    /// Clamps `u` into the box intersected with the rate window around `u_prev`.
    pub fn clamp_input_with_rate(&self, u: &InputVec, u_prev: &InputVec) -> InputVec {
        let lo_d = (u_prev[0] - self.delta_rate_max).max(-self.delta_max);
        let hi_d = (u_prev[0] + self.delta_rate_max).min(self.delta_max);
        let lo_a = (u_prev[1] - self.a_rate_max).max(self.a_min);
        let hi_a = (u_prev[1] + self.a_rate_max).min(self.a_max);
        InputVec::new(u[0].clamp(lo_d, hi_d.max(lo_d)), u[1].clamp(lo_a, hi_a.max(lo_a)))
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::for_sampling_time(0.05)
    }
}

/// Stage boxes: 12 rows on `z` and 4 rows on `u` (`[I; -I]` structure).
pub fn box_rows(bounds: &Bounds) -> (HalfspacePolytope, HalfspacePolytope) {
    let upper = [
        bounds.x_max,
        bounds.y_max,
        bounds.v_lon_max,
        bounds.v_lat_max,
        bounds.psi_max,
        bounds.omega_max,
    ];
    let lower = [
        bounds.x_min,
        bounds.y_min,
        bounds.v_lon_min,
        -bounds.v_lat_max,
        -bounds.psi_max,
        -bounds.omega_max,
    ];
    let mut state = HalfspacePolytope::empty(STATE_DIM);
    for (i, ub) in upper.iter().enumerate() {
        state.push_row(&[(i, 1.0)], *ub, None);
    }
    for (i, lb) in lower.iter().enumerate() {
        state.push_row(&[(i, -1.0)], -lb, None);
    }
    let mut input = HalfspacePolytope::empty(INPUT_DIM);
    input.push_row(&[(0, 1.0)], bounds.delta_max, None);
    input.push_row(&[(1, 1.0)], bounds.a_max, None);
    input.push_row(&[(0, -1.0)], bounds.delta_max, None);
    input.push_row(&[(1, -1.0)], -bounds.a_min, None);
    (state, input)
}

/// Rate windows: `|u_0 - u_prev| <= rate` and `|u_i - u_{i-1}| <= rate` for `i >= 1`.
pub fn rate_rows(u_prev: &InputVec, bounds: &Bounds, layout: &HorizonLayout) -> HalfspacePolytope {
    let rate = [bounds.delta_rate_max, bounds.a_rate_max];
    let mut poly = HalfspacePolytope::empty(layout.width());
    for i in 0..layout.horizon {
        for (c, r) in rate.iter().enumerate() {
            let col = layout.input(i, c);
            if i == 0 {
                poly.push_row(&[(col, 1.0)], r + u_prev[c], None);
                poly.push_row(&[(col, -1.0)], r - u_prev[c], None);
            } else {
                let prev = layout.input(i - 1, c);
                poly.push_row(&[(col, 1.0), (prev, -1.0)], *r, None);
                poly.push_row(&[(col, -1.0), (prev, 1.0)], *r, None);
            }
        }
    }
    poly
}

/// Side of the travel direction on which an obstacle is passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseObstacle {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub side: Side,
}

impl EllipseObstacle {
    pub fn circle(cx: f64, cy: f64, r: f64, side: Side) -> Self {
        Self {
            cx,
            cy,
            rx: r,
            ry: r,
            side,
        }
    }

    /// Same ellipse with both semi-axes grown by `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            rx: self.rx + margin,
            ry: self.ry + margin,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("rx", self.rx), ("ry", self.ry)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: format!("semi-axis must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// `G(X, Y) = ry^2 (X - cx)^2 + rx^2 (Y - cy)^2 - rx^2 ry^2`; negative inside.
    pub fn g_value(&self, x: f64, y: f64) -> f64 {
        let (rx2, ry2) = (self.rx * self.rx, self.ry * self.ry);
        ry2 * (x - self.cx).powi(2) + rx2 * (y - self.cy).powi(2) - rx2 * ry2
    }

    /// `G / (rx^2 ry^2)`, i.e. `(X-cx)^2/rx^2 + (Y-cy)^2/ry^2 - 1`.
    pub fn normalized_margin(&self, x: f64, y: f64) -> f64 {
        ((x - self.cx) / self.rx).powi(2) + ((y - self.cy) / self.ry).powi(2) - 1.0
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (
            2.0 * self.ry * self.ry * (x - self.cx),
            2.0 * self.rx * self.rx * (y - self.cy),
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.g_value(x, y) < 0.0
    }

    /// Boundary point reached from `(x, y)` along direction `(dx, dy)`, `t >= 0`.
    ///
    /// Requires `(x, y)` strictly inside; the ray then always leaves the ellipse.
    fn ray_exit(&self, x: f64, y: f64, dx: f64, dy: f64) -> (f64, f64) {
        let (rx2, ry2) = (self.rx * self.rx, self.ry * self.ry);
        let (px, py) = (x - self.cx, y - self.cy);
        let a = ry2 * dx * dx + rx2 * dy * dy;
        let b = 2.0 * (ry2 * px * dx + rx2 * py * dy);
        let c = self.g_value(x, y);
        // c < 0 < a: one positive root; use the cancellation-free form
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let t = if b >= 0.0 {
            -2.0 * c / (b + disc)
        } else {
            (disc - b) / (2.0 * a)
        };
        let (mut qx, mut qy) = (x + t * dx, y + t * dy);
        // one Newton correction along the ray
        let (gx, gy) = self.gradient(qx, qy);
        let slope = gx * dx + gy * dy;
        if slope.abs() > 0.0 {
            let dt = -self.g_value(qx, qy) / slope;
            qx += dt * dx;
            qy += dt * dy;
        }
        (qx, qy)
    }
}

/// Linear obstacle constraint `a3 X + b3 Y >= c3`; inactive means no row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleHalfspace {
    pub a3: f64,
    pub b3: f64,
    pub c3: f64,
    pub active: bool,
    /// Window index of the reference point that defined the tangent.
    pub source: Option<usize>,
    /// Tangent point on the ellipse boundary.
    pub projected: Option<(f64, f64)>,
}

impl ObstacleHalfspace {
    pub fn inactive() -> Self {
        Self {
            a3: 0.0,
            b3: 0.0,
            c3: f64::NEG_INFINITY,
            active: false,
            source: None,
            projected: None,
        }
    }

    /// `c3 - (a3 X + b3 Y)`: positive when `(X, Y)` violates the halfspace.
    pub fn violation(&self, x: f64, y: f64) -> f64 {
        self.c3 - (self.a3 * x + self.b3 * y)
    }

    /// The halfspace as a row on step `step` of the horizon vector.
    pub fn row(&self, step: usize, layout: &HorizonLayout) -> HalfspacePolytope {
        let mut poly = HalfspacePolytope::empty(layout.width());
        if self.active {
            poly.push_row(
                &[(layout.state(step, 0), -self.a3), (layout.state(step, 1), -self.b3)],
                -self.c3,
                None,
            );
        }
        poly
    }
}

/// Circular road: center line of radius `radius`, lateral limits `radius + r1`
/// (inner) and `radius + r2` (outer).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadBoundary {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub r1: f64,
    pub r2: f64,
}

impl RoadBoundary {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 < self.r2) {
            return Err(Error::InvalidParameter {
                key: "r1".into(),
                reason: format!("r1 ({}) must be < r2 ({})", self.r1, self.r2),
            });
        }
        if !(self.radius > 0.0 && self.radius + self.r1 > 0.0) {
            return Err(Error::InvalidParameter {
                key: "radius".into(),
                reason: "inner boundary radius must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn inner_radius(&self) -> f64 {
        self.radius + self.r1
    }

    pub fn outer_radius(&self) -> f64 {
        self.radius + self.r2
    }

    /// Distance from the track center.
    pub fn radial_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.center_x).hypot(y - self.center_y)
    }

    /// Signed clearance to the nearer boundary; negative outside the annulus.
    pub fn margin(&self, x: f64, y: f64) -> f64 {
        let d = self.radial_distance(x, y);
        (d - self.inner_radius()).min(self.outer_radius() - d)
    }

    /// Outward unit normal of the center line at the projection of `(x, y)`.
    pub fn outward_normal(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        let d = dx.hypot(dy);
        (d > 1e-9).then(|| (dx / d, dy / d))
    }
}

/// Adaptive tangent halfspace for one obstacle over a reference window.
///
/// The first window point strictly inside the ellipse is moved along the
/// road's lateral normal toward `obs.side` until it hits the boundary, and the
/// tangent there defines `a3 X + b3 Y >= c3`. Without such a point the
/// halfspace is inactive.
pub fn obstacle_tangent(
    obs: &EllipseObstacle,
    ref_window: &[ReferenceState],
    road: &RoadBoundary,
) -> Result<ObstacleHalfspace> {
    let Some((idx, r)) = ref_window.iter().enumerate().find(|(_, r)| obs.contains(r.x, r.y)) else {
        return Ok(ObstacleHalfspace::inactive());
    };

    let (lx, ly) = (-r.psi.sin(), r.psi.cos());
    let direction = road.outward_normal(r.x, r.y).map(|(nx, ny)| {
        let toward_left = if nx * lx + ny * ly > 0.0 { (nx, ny) } else { (-nx, -ny) };
        match obs.side {
            Side::Left => toward_left,
            Side::Right => (-toward_left.0, -toward_left.1),
        }
    });
    let (dx, dy) = match direction {
        Some(d) => d,
        None => {
            // radial from the ellipse center
            let (px, py) = (r.x - obs.cx, r.y - obs.cy);
            let n = px.hypot(py);
            if n < 1e-9 {
                return Err(Error::ProjectionFailure);
            }
            (px / n, py / n)
        }
    };

    let (qx, qy) = obs.ray_exit(r.x, r.y, dx, dy);
    let a3 = obs.ry * obs.ry * (qx - obs.cx);
    let b3 = obs.rx * obs.rx * (qy - obs.cy);
    Ok(ObstacleHalfspace {
        a3,
        b3,
        c3: a3 * qx + b3 * qy,
        active: true,
        source: Some(idx),
        projected: Some((qx, qy)),
    })
}

/// Outer (`a1 X + b1 Y <= c1`) and inner (`a2 X + b2 Y >= c2`) tangents at the
/// radial projection of each window point; window entry `i` constrains step `i + 1`.
pub fn road_tangent_rows(
    road: &RoadBoundary,
    ref_window: &[ReferenceState],
    layout: &HorizonLayout,
) -> Result<HalfspacePolytope> {
    if ref_window.len() != layout.horizon {
        return Err(Error::DimensionMismatch(format!(
            "road rows need {} reference points, got {}",
            layout.horizon,
            ref_window.len()
        )));
    }
    let mut poly = HalfspacePolytope::empty(layout.width());
    for (i, r) in ref_window.iter().enumerate() {
        let (nx, ny) = road
            .outward_normal(r.x, r.y)
            .ok_or_else(|| Error::DegenerateGeometry(format!("reference point {i} is at the track center")))?;
        let offset = nx * road.center_x + ny * road.center_y;
        let (cx, cy) = (layout.state(i + 1, 0), layout.state(i + 1, 1));
        poly.push_row(&[(cx, nx), (cy, ny)], road.outer_radius() + offset, None);
        poly.push_row(&[(cx, -nx), (cy, -ny)], -(road.inner_radius() + offset), None);
    }
    Ok(poly)
}

/// Bounds on how far the new plan may move away from the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustRegionConfig {
    /// Set from the controller kind, never read from a file.
    #[serde(skip)]
    pub enabled: bool,
    /// Bounds on `(v_lon, v_lat, psi)` deviations.
    pub e_z_max: [f64; 3],
    /// Bound on the steering deviation (rad).
    pub e_u_max: f64,
    /// Diagonal of the slack penalty.
    pub e_p: [f64; 4],
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            e_z_max: [0.5, 0.3, 0.1],
            e_u_max: 0.05,
            e_p: [1e3; 4],
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let all = self.e_z_max.iter().chain(std::iter::once(&self.e_u_max));
        if all.clone().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter {
                key: "trust.e_z_max".into(),
                reason: "bounds must be >= 0".into(),
            });
        }
        if self.e_p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter {
                key: "trust.e_p".into(),
                reason: "slack weights must be >= 0".into(),
            });
        }
        Ok(())
    }
}

/// Soft rows `|s_{i} - s_hat_{i}| <= e_max + eps` on the scheduling-relevant
/// components. `z_hat[i]` is the guess for `z_{i+1}`, `u_hat[i]` for `u_i`.
pub fn trust_region_rows(
    z_hat: &[StateVec],
    u_hat: &[InputVec],
    cfg: &TrustRegionConfig,
    layout: &HorizonLayout,
) -> Result<HalfspacePolytope> {
    let mut poly = HalfspacePolytope::empty(layout.width());
    if !cfg.enabled {
        return Ok(poly);
    }
    if z_hat.len() != layout.horizon || u_hat.len() != layout.horizon {
        return Err(Error::DimensionMismatch(format!(
            "trust region needs {} states and inputs, got {} and {}",
            layout.horizon,
            z_hat.len(),
            u_hat.len()
        )));
    }
    // (column, guess, bound) per slack channel
    for i in 0..layout.horizon {
        let channels = [
            (layout.state(i + 1, 2), z_hat[i][2], cfg.e_z_max[0]),
            (layout.state(i + 1, 3), z_hat[i][3], cfg.e_z_max[1]),
            (layout.state(i + 1, 4), z_hat[i][4], cfg.e_z_max[2]),
            (layout.input(i, 0), u_hat[i][0], cfg.e_u_max),
        ];
        for (ch, (col, guess, bound)) in channels.into_iter().enumerate() {
            let slack = Some(layout.slack(i, ch));
            poly.push_row(&[(col, 1.0)], guess + bound, slack);
            poly.push_row(&[(col, -1.0)], bound - guess, slack);
        }
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn box_examples() {
        let (state, input) = box_rows(&Bounds::default());
        assert_eq!(state.rows(), 12);
        assert_eq!(input.rows(), 4);
        assert!(state.contains(&dv(&[0.0, 0.0, 10.0, 0.0, 0.0, 0.0]), 0.0));
        assert!(!input.contains(&dv(&[0.6, 0.0]), 0.0));
        assert!(input.contains(&dv(&[0.59, 0.0]), 0.0));
        let r = input.residuals(&dv(&[0.0, -6.0]), None);
        assert_eq!(r.max(), 0.0);
        assert!(state.contains(&dv(&[-1.0, 800.0, 1.0, -10.0, PI, 0.0]), 0.0));
        assert!(!state.contains(&dv(&[0.0, 0.0, 0.99, 0.0, 0.0, 0.0]), 0.0));
    }

    fn interval(poly: &HalfspacePolytope, col: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for r in 0..poly.rows() {
            let row = poly.g.row(r);
            let nz: Vec<usize> = (0..poly.cols()).filter(|&c| row[c] != 0.0).collect();
            if nz == vec![col] {
                if row[col] > 0.0 {
                    hi = hi.min(poly.h[r] / row[col]);
                } else {
                    lo = lo.max(poly.h[r] / row[col]);
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn rate_examples() {
        let layout = HorizonLayout::new(3);
        let b = Bounds::default();
        let poly = rate_rows(&InputVec::zeros(), &b, &layout);
        assert_eq!(poly.rows(), 12);
        let (lo, hi) = interval(&poly, layout.input(0, 0));
        assert_abs_diff_eq!(hi, 0.4363, epsilon = 1e-4);
        assert_abs_diff_eq!(lo, -0.4363, epsilon = 1e-4);
        let (lo, hi) = interval(&poly, layout.input(0, 1));
        assert_abs_diff_eq!((lo, hi).0, -1.5);
        assert_abs_diff_eq!(hi, 1.5);

        let poly = rate_rows(&InputVec::new(0.5, 0.0), &b, &layout);
        let (lo, hi) = interval(&poly, layout.input(0, 0));
        assert_abs_diff_eq!(lo, 0.0637, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.9363, epsilon = 1e-4);
        assert_abs_diff_eq!(hi.min(b.delta_max), 0.5934, epsilon = 1e-4);

        // coupled rows on later steps
        let mut x = DVector::zeros(layout.width());
        x[layout.input(0, 0)] = 0.5;
        x[layout.input(1, 0)] = 0.5 + 0.43;
        x[layout.input(2, 0)] = 0.5 + 0.43;
        assert!(poly.contains(&x, 0.0));
        x[layout.input(2, 0)] = 0.5 + 0.43 + 0.44;
        assert!(!poly.contains(&x, 0.0));
    }

    #[test]
    fn unit_circle_tangent() {
        let obs = EllipseObstacle::circle(0.0, 0.0, 1.0, Side::Right);
        // road center far below so the lateral normal at the origin points along +/-Y;
        // traveling along -Y (psi = -pi/2) the right-hand side is -X... use a road centered left
        let road = RoadBoundary {
            center_x: -50.0,
            center_y: 0.0,
            radius: 50.0,
            r1: -1.0,
            r2: 4.0,
        };
        let r = ReferenceState {
            x: 0.0,
            y: 0.0,
            psi: FRAC_PI_2,
            v_lon: 10.0,
            ..Default::default()
        };
        let hs = obstacle_tangent(&obs, &[r], &road).unwrap();
        assert!(hs.active);
        let (qx, qy) = hs.projected.unwrap();
        assert_abs_diff_eq!(qx, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(qy, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs.a3, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs.b3, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs.c3, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_tangent() {
        let obs = EllipseObstacle {
            cx: 0.0,
            cy: 0.0,
            rx: 2.0,
            ry: 1.0,
            side: Side::Right,
        };
        let road = RoadBoundary {
            center_x: -50.0,
            center_y: 0.0,
            radius: 50.0,
            r1: -1.0,
            r2: 4.0,
        };
        let r = ReferenceState {
            x: 0.0,
            y: 0.0,
            psi: FRAC_PI_2,
            ..Default::default()
        };
        let hs = obstacle_tangent(&obs, &[r], &road).unwrap();
        assert_abs_diff_eq!(hs.a3, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs.b3, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs.c3, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn left_side_goes_the_other_way() {
        let obs = EllipseObstacle::circle(0.0, 0.0, 1.0, Side::Left);
        let road = RoadBoundary {
            center_x: -50.0,
            center_y: 0.0,
            radius: 50.0,
            r1: -1.0,
            r2: 4.0,
        };
        let r = ReferenceState {
            x: 0.2,
            y: 0.1,
            psi: FRAC_PI_2,
            ..Default::default()
        };
        let hs = obstacle_tangent(&obs, &[r], &road).unwrap();
        let (qx, _) = hs.projected.unwrap();
        assert!(qx < 0.0);
        assert!(hs.violation(0.0, 0.0) > 0.0);
    }

    #[test]
    fn no_point_inside_is_inactive() {
        let obs = EllipseObstacle::circle(10.0, 10.0, 1.0, Side::Right);
        let road = RoadBoundary {
            center_x: 0.0,
            center_y: 0.0,
            radius: 14.0,
            r1: -1.0,
            r2: 4.0,
        };
        let r = ReferenceState {
            x: 0.0,
            y: 14.0,
            ..Default::default()
        };
        let hs = obstacle_tangent(&obs, &[r, r], &road).unwrap();
        assert!(!hs.active);
        assert_eq!(hs.c3, f64::NEG_INFINITY);
        assert!(hs.row(1, &HorizonLayout::new(2)).is_empty());
    }

    #[test]
    fn first_inside_point_defines_the_tangent() {
        let obs = EllipseObstacle::circle(50.0, 0.0, 1.0, Side::Right);
        let road = RoadBoundary {
            center_x: 0.0,
            center_y: 0.0,
            radius: 50.0,
            r1: -1.0,
            r2: 4.0,
        };
        let pts: Vec<ReferenceState> = [-3.0, -0.5, 0.0, 0.5]
            .iter()
            .map(|&y| ReferenceState {
                x: 50.0,
                y,
                psi: FRAC_PI_2,
                ..Default::default()
            })
            .collect();
        let hs = obstacle_tangent(&obs, &pts, &road).unwrap();
        assert_eq!(hs.source, Some(1));
    }

    #[test]
    fn center_coincidence_without_normal_fails() {
        let obs = EllipseObstacle::circle(0.0, 0.0, 1.0, Side::Right);
        let road = RoadBoundary {
            center_x: 0.0,
            center_y: 0.0,
            radius: 5.0,
            r1: -1.0,
            r2: 4.0,
        };
        let r = ReferenceState::default();
        assert_eq!(obstacle_tangent(&obs, &[r], &road), Err(Error::ProjectionFailure));
    }

    #[test]
    fn road_examples() {
        let road = RoadBoundary {
            center_x: 0.0,
            center_y: 0.0,
            radius: 50.0,
            r1: -1.0,
            r2: 4.0,
        };
        let layout = HorizonLayout::new(2);
        let refs = [
            ReferenceState {
                x: 50.0,
                y: 0.0,
                ..Default::default()
            },
            ReferenceState {
                x: 0.0,
                y: 50.0,
                ..Default::default()
            },
        ];
        let poly = road_tangent_rows(&road, &refs, &layout).unwrap();
        assert_eq!(poly.rows(), 4);
        // step 1: X <= 54 and X >= 49
        assert_abs_diff_eq!(poly.g[(0, layout.state(1, 0))], 1.0);
        assert_abs_diff_eq!(poly.h[0], 54.0);
        assert_abs_diff_eq!(poly.g[(1, layout.state(1, 0))], -1.0);
        assert_abs_diff_eq!(poly.h[1], -49.0);
        // step 2: Y <= 54 and Y >= 49
        assert_abs_diff_eq!(poly.g[(2, layout.state(2, 1))], 1.0);
        assert_abs_diff_eq!(poly.g[(2, layout.state(2, 0))], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(poly.h[2], 54.0, epsilon = 1e-12);
        assert_abs_diff_eq!(poly.h[3], -49.0, epsilon = 1e-12);

        let center = ReferenceState::default();
        assert!(matches!(
            road_tangent_rows(&road, &[center, center], &layout),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn trust_region_examples() {
        let layout = HorizonLayout::new(1);
        let cfg = TrustRegionConfig {
            e_z_max: [0.1, 0.3, 0.1],
            ..Default::default()
        };
        let z_hat = [StateVec::new(0.0, 0.0, 10.0, 0.0, 0.0, 0.0)];
        let u_hat = [InputVec::zeros()];
        let poly = trust_region_rows(&z_hat, &u_hat, &cfg, &layout).unwrap();
        assert_eq!(poly.rows(), 8);
        assert_eq!(poly.soft[0], Some(0));
        let col = layout.state(1, 2);
        assert_eq!(poly.g[(0, col)], 1.0);
        assert_abs_diff_eq!(poly.h[0], 10.1, epsilon = 1e-12);
        assert_eq!(poly.g[(1, col)], -1.0);
        assert_abs_diff_eq!(poly.h[1], -9.9, epsilon = 1e-12);

        let off = TrustRegionConfig { enabled: false, ..cfg };
        assert!(trust_region_rows(&z_hat, &u_hat, &off, &layout).unwrap().is_empty());

        // zero bounds: only the slacks admit deviation
        let zero = TrustRegionConfig {
            e_z_max: [0.0; 3],
            e_u_max: 0.0,
            ..cfg
        };
        let poly = trust_region_rows(&z_hat, &u_hat, &zero, &layout).unwrap();
        let mut x = DVector::zeros(layout.width());
        x[layout.state(1, 2)] = 10.2;
        let mut eps = DVector::zeros(4);
        assert!(poly.residuals(&x, Some(&eps)).max() > 0.0);
        eps[0] = 0.2;
        assert!(poly.residuals(&x, Some(&eps)).max() <= 1e-12);
    }
}
