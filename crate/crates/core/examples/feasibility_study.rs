//! Seeded obstacle suite run with the standard and the trust-region LPV MPC.

use lpvmpc::controller::{ControllerKind, Preset};
use lpvmpc::sim::{feasibility_study, generate_study_scenarios, Scenario, StudyConfig, StudyTable};

pub fn run_example(count: usize, steps: usize, horizons: Vec<usize>) -> lpvmpc::Result<StudyTable> {
    let base = Scenario::tracking(ControllerKind::LpvTrust, Preset::Scenario1, 8, steps);
    let study = StudyConfig {
        count,
        horizons,
        ..Default::default()
    };
    feasibility_study(&generate_study_scenarios(&base, &study))
}

fn main() -> lpvmpc::Result<()> {
    let table = run_example(10, 400, vec![8, 15])?;
    for r in &table.rows {
        println!(
            "{} N={:<2} r={:.2}  standard {:<5} ({:>3} infeasible)  trust {:<5} ({:>3} infeasible)",
            r.id,
            r.horizon,
            r.obstacle_radius,
            r.standard_feasible,
            r.standard_infeasible_steps,
            r.trust_feasible,
            r.trust_infeasible_steps
        );
    }
    println!(
        "standard {}/{}  trust {}/{}  superset holds: {}",
        table.standard_feasible_count(),
        table.rows.len(),
        table.trust_feasible_count(),
        table.rows.len(),
        table.superset_holds()
    );
    Ok(())
}
