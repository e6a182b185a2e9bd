//! Circular-track tracking with each controller, no obstacle.

use lpvmpc::controller::{ControllerKind, Preset};
use lpvmpc::sim::{run_closed_loop, Scenario, TrajectoryLog};

pub fn run_example(steps: usize) -> lpvmpc::Result<Vec<TrajectoryLog>> {
    [
        ControllerKind::LpvTrust,
        ControllerKind::LpvStandard,
        ControllerKind::NmpcSqp,
    ]
    .into_iter()
    .map(|kind| run_closed_loop(&Scenario::tracking(kind, Preset::Scenario1, 8, steps)))
    .collect()
}

fn main() -> lpvmpc::Result<()> {
    for log in run_example(400)? {
        let s = &log.summary;
        println!(
            "{:<13} rms {:.3} m  infeasible {}  converged {:.1}%  avg solve {:.2} ms  max {:.2} ms",
            log.controller.as_str(),
            s.rms_xy_error,
            s.infeasible_steps,
            100.0 * s.converged_fraction,
            1e3 * s.avg_solve_time,
            1e3 * s.max_solve_time,
        );
    }
    Ok(())
}
