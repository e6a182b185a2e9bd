//! Solve-time report for LPV MPC and SQP NMPC on the same tracking and obstacle runs.

use lpvmpc::controller::{ControllerKind, Preset};
use lpvmpc::sim::{generate_study_scenarios, run_closed_loop, timing_report, Scenario, StudyConfig, TimingRow};

pub fn run_example(steps: usize) -> lpvmpc::Result<Vec<TimingRow>> {
    let study = StudyConfig {
        count: 1,
        horizons: vec![8],
        ..Default::default()
    };
    let mut logs = Vec::new();
    for kind in [ControllerKind::LpvTrust, ControllerKind::NmpcSqp] {
        let tracking = Scenario::tracking(kind, Preset::Scenario1, 8, steps);
        let obstacle = generate_study_scenarios(&tracking, &study).remove(0);
        logs.push(run_closed_loop(&tracking)?);
        logs.push(run_closed_loop(&obstacle)?);
    }
    Ok(timing_report(&logs))
}

fn main() -> lpvmpc::Result<()> {
    println!(
        "{:<13} {:<9} {:>7} {:>9} {:>9} {:>9}",
        "controller", "class", "samples", "avg ms", "max ms", "min ms"
    );
    for r in run_example(400)? {
        println!(
            "{:<13} {:<9} {:>7} {:>9.3} {:>9.3} {:>9.3}",
            r.controller.as_str(),
            format!("{:?}", r.class).to_lowercase(),
            r.samples,
            1e3 * r.avg,
            1e3 * r.max,
            1e3 * r.min
        );
    }
    Ok(())
}
