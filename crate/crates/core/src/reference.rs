//! Reference trajectories built from XY waypoints.
//!
//! Only positions are given; heading, yaw rate and body-frame speeds are
//! derived from consecutive waypoint displacements.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::StateVec;

const MIN_DISPLACEMENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Full six-component reference `(X, Y, v_lon, v_lat, psi, omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceState {
    pub x: f64,
    pub y: f64,
    pub v_lon: f64,
    pub v_lat: f64,
    pub psi: f64,
    pub omega: f64,
}

impl ReferenceState {
    pub fn to_vector(&self) -> StateVec {
        StateVec::new(self.x, self.y, self.v_lon, self.v_lat, self.psi, self.omega)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn displacement(prev: &Waypoint, cur: &Waypoint) -> Result<(f64, f64)> {
    let (dx, dy) = (cur.x - prev.x, cur.y - prev.y);
    let len = dx.hypot(dy);
    if len < MIN_DISPLACEMENT {
        return Err(Error::DegenerateWaypoint(len));
    }
    Ok((dx, dy))
}

/// Four-quadrant heading of the displacement `cur - prev`.
pub fn heading_ref(prev: &Waypoint, cur: &Waypoint) -> Result<f64> {
    let (dx, dy) = displacement(prev, cur)?;
    Ok(dy.atan2(dx))
}

/// Shortest signed heading change over one sample.
pub fn yaw_rate_ref(psi_cur: f64, psi_prev: f64, t_s: f64) -> f64 {
    wrap_angle(psi_cur - psi_prev) / t_s
}

/// Body-frame speeds `(v_lon, v_lat)` of the displacement `cur - prev` seen at heading `psi_ref`.
pub fn body_frame_speeds(prev: &Waypoint, cur: &Waypoint, psi_ref: f64, t_s: f64) -> Result<(f64, f64)> {
    let (dx, dy) = displacement(prev, cur)?;
    let (s, c) = psi_ref.sin_cos();
    let x_body = c * dx + s * dy;
    let y_body = -s * dx + c * dy;
    Ok((x_body / t_s, y_body / t_s))
}

/// Reference states for steps `k..=k+n`.
///
/// Waypoint `j` carries the heading of the segment that ends at it (the first
/// waypoint uses the first segment). Past the last waypoint the final reference
/// is repeated with zero yaw rate. Headings are unwrapped along the window.
pub fn build_reference_window(waypoints: &[Waypoint], k: usize, n: usize, t_s: f64) -> Result<Vec<ReferenceState>> {
    if waypoints.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let last = waypoints.len() - 1;
    let segment = |j: usize| -> (usize, usize) {
        if j == 0 {
            (0, 1.min(last))
        } else {
            (j - 1, j)
        }
    };
    let heading_at = |j: usize| -> Result<f64> {
        if last == 0 {
            return Ok(0.0);
        }
        let (a, b) = segment(j);
        heading_ref(&waypoints[a], &waypoints[b])
    };

    let mut window = Vec::with_capacity(n + 1);
    let mut prev_psi: Option<f64> = None;
    for i in 0..=n {
        let j = k + i;
        let padded = j > last;
        let jc = j.min(last);
        let raw = heading_at(jc)?;
        let psi = match prev_psi {
            Some(p) => p + wrap_angle(raw - p),
            None => raw,
        };
        let (v_lon, v_lat) = if last == 0 {
            (0.0, 0.0)
        } else {
            let (a, b) = segment(jc);
            body_frame_speeds(&waypoints[a], &waypoints[b], raw, t_s)?
        };
        let omega = if padded || jc == 0 {
            0.0
        } else {
            yaw_rate_ref(raw, heading_at(jc - 1)?, t_s)
        };
        window.push(ReferenceState {
            x: waypoints[jc].x,
            y: waypoints[jc].y,
            v_lon,
            v_lat,
            psi,
            omega,
        });
        prev_psi = Some(psi);
    }
    Ok(window)
}

/// `n_points` counter-clockwise points on a circle, spaced `speed * t_s` in arc
/// length and starting at polar angle `start_angle`.
pub fn circular_arc(
    center: (f64, f64),
    radius: f64,
    start_angle: f64,
    speed: f64,
    n_points: usize,
    t_s: f64,
) -> Vec<Waypoint> {
    let dtheta = speed * t_s / radius;
    (0..n_points)
        .map(|i| {
            let th = start_angle + dtheta * i as f64;
            Waypoint::new(center.0 + radius * th.cos(), center.1 + radius * th.sin())
        })
        .collect()
}

/// Counter-clockwise circular track starting at polar angle 0.
pub fn circular_track(center: (f64, f64), radius: f64, speed: f64, n_points: usize, t_s: f64) -> Vec<Waypoint> {
    circular_arc(center, radius, 0.0, speed, n_points, t_s)
}

/// Reads waypoints from CSV with header `x,y`.
pub fn read_waypoints_csv<R: Read>(reader: R) -> Result<Vec<Waypoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Io(format!(
            "expected header `x,y`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_waypoints_csv<W: Write>(writer: W, waypoints: &[Waypoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for wp in waypoints {
        wtr.serialize(wp)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn heading_examples() {
        let o = Waypoint::new(0.0, 0.0);
        assert_abs_diff_eq!(heading_ref(&o, &Waypoint::new(1.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(heading_ref(&o, &Waypoint::new(0.0, 1.0)).unwrap(), FRAC_PI_2);
        assert_abs_diff_eq!(heading_ref(&o, &Waypoint::new(-1.0, 0.0)).unwrap(), PI);
        assert!(matches!(heading_ref(&o, &o), Err(Error::DegenerateWaypoint(_))));
    }

    #[test]
    fn yaw_rate_examples() {
        assert_eq!(yaw_rate_ref(0.1, 0.1, 0.05), 0.0);
        assert_abs_diff_eq!(yaw_rate_ref(0.2, 0.1, 0.05), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(yaw_rate_ref(-PI + 0.01, PI - 0.01, 0.05), 0.4, epsilon = 1e-9);
    }

    #[test]
    fn body_speed_examples() {
        let o = Waypoint::new(0.0, 0.0);
        let (v, n) = body_frame_speeds(&o, &Waypoint::new(0.5, 0.0), 0.0, 0.05).unwrap();
        assert_abs_diff_eq!(v, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n, 0.0, epsilon = 1e-12);
        let (v, n) = body_frame_speeds(&o, &Waypoint::new(0.0, 0.5), FRAC_PI_2, 0.05).unwrap();
        assert_abs_diff_eq!(v, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn straight_line_window() {
        let wps: Vec<_> = (0..30).map(|i| Waypoint::new(0.5 * i as f64, 0.0)).collect();
        let w = build_reference_window(&wps, 3, 8, 0.05).unwrap();
        assert_eq!(w.len(), 9);
        for r in &w {
            assert_abs_diff_eq!(r.psi, 0.0);
            assert_abs_diff_eq!(r.omega, 0.0);
            assert_abs_diff_eq!(r.v_lon, 10.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.v_lat, 0.0);
        }
        assert_abs_diff_eq!(w[0].x, 1.5);
    }

    #[test]
    fn padding_repeats_final_reference() {
        let wps: Vec<_> = circular_track((0.0, 0.0), 20.0, 10.0, 12, 0.05);
        let w = build_reference_window(&wps, 8, 8, 0.05).unwrap();
        let last = w[3];
        assert_abs_diff_eq!(last.x, wps[11].x);
        for r in &w[4..] {
            assert_eq!(r.x, last.x);
            assert_eq!(r.y, last.y);
            assert_eq!(r.omega, 0.0);
        }
        assert!(w[3].omega > 0.0);
    }

    #[test]
    fn empty_waypoints_rejected() {
        assert_eq!(build_reference_window(&[], 0, 4, 0.05), Err(Error::EmptyTrajectory));
    }

    #[test]
    fn circle_examples() {
        let wps = circular_track((0.0, 0.0), 50.0, 10.0, 700, 0.05);
        assert_abs_diff_eq!(wps[0].x, 50.0);
        assert_abs_diff_eq!(wps[0].y, 0.0);
        let chord = (wps[1].x - wps[0].x).hypot(wps[1].y - wps[0].y);
        // chord of a 0.5 m arc on R = 50
        assert_abs_diff_eq!(chord, 2.0 * 50.0 * (0.25f64 / 50.0).sin(), epsilon = 1e-12);
        assert!((chord - 0.5).abs() < 1e-4);
        // one full loop = 2 pi R / 0.5 points
        let n = (TAU * 50.0 / 0.5).round() as usize;
        let p = wps[n];
        assert!((p.x - 50.0).hypot(p.y) < 0.25);
    }

    #[test]
    fn csv_round_trip() {
        let wps = circular_track((1.0, 2.0), 5.0, 3.0, 7, 0.1);
        let mut buf = Vec::new();
        write_waypoints_csv(&mut buf, &wps).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,y\n"));
        let back = read_waypoints_csv(buf.as_slice()).unwrap();
        assert_eq!(back, wps);
    }
}
