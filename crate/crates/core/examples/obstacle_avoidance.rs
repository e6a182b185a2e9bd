//! Passing a circular obstacle with the trust-region and the standard LPV MPC.
//! Pass a directory to also get trajectory CSVs.

use lpvmpc::constraints::{EllipseObstacle, Side};
use lpvmpc::controller::{ControllerKind, Preset};
use lpvmpc::sim::{run_closed_loop, write_trajectory_csv, Scenario, TrajectoryLog};

pub fn run_example(steps: usize, radius: f64) -> lpvmpc::Result<Vec<TrajectoryLog>> {
    let mut base = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, steps);
    base.name = "obstacle".into();
    // 2 s down the road, on the center line
    let (cx, cy) = base.track.point_at(24.0, 0.0);
    base.obstacles = vec![EllipseObstacle::circle(cx, cy, radius, Side::Right)];
    [ControllerKind::LpvTrust, ControllerKind::LpvStandard]
        .into_iter()
        .map(|k| run_closed_loop(&base.with_kind(k)))
        .collect()
}

fn main() -> lpvmpc::Result<()> {
    let out = std::env::args().nth(1);
    for log in run_example(120, 1.0)? {
        let s = &log.summary;
        println!(
            "{:<13} infeasible {:>3}  min normalized G {:.3}  road violation {:.3} m  rms {:.3} m",
            log.controller.as_str(),
            s.infeasible_steps,
            s.min_obstacle_margin,
            s.max_road_violation,
            s.rms_xy_error
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let path = std::path::Path::new(dir).join(format!("{}.csv", log.controller.as_str()));
            write_trajectory_csv(std::fs::File::create(path)?, &log)?;
        }
    }
    Ok(())
}
