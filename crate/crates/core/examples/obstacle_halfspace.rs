//! Tangent halfspace for an obstacle on the center line, for both passing sides.

use lpvmpc::constraints::{obstacle_tangent, EllipseObstacle, ObstacleHalfspace, Side};
use lpvmpc::reference::build_reference_window;
use lpvmpc::sim::TrackConfig;

pub fn run_example() -> lpvmpc::Result<Vec<(Side, ObstacleHalfspace)>> {
    let track = TrackConfig::default();
    let waypoints = track.waypoints(600, 0.05);
    let window = build_reference_window(&waypoints, 40, 15, 0.05)?;
    // obstacle centered on the tenth window point
    let (cx, cy) = (window[10].x, window[10].y);
    [Side::Right, Side::Left]
        .into_iter()
        .map(|side| {
            let obs = EllipseObstacle {
                cx,
                cy,
                rx: 1.2,
                ry: 0.8,
                side,
            };
            Ok((side, obstacle_tangent(&obs, &window, &track.road())?))
        })
        .collect()
}

fn main() -> lpvmpc::Result<()> {
    for (side, hs) in run_example()? {
        let (qx, qy) = hs.projected.unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{side:?}: {:.4} X + {:.4} Y >= {:.4}  (from window point {:?}, tangent point ({qx:.3}, {qy:.3}))",
            hs.a3, hs.b3, hs.c3, hs.source
        );
    }
    Ok(())
}
