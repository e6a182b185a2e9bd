//! Loading a partial TOML configuration and running it.

use lpvmpc::config::ConfigFile;
use lpvmpc::sim::{run_closed_loop, TrajectoryLog};

pub const SAMPLE: &str = r#"
[controller]
kind = "nmpc_sqp"
horizon = 10

[sim]
duration = 100

# 6 m down the road from the start
[[obstacles]]
cx = 155.996
cy = 10.18
rx = 0.8
ry = 0.8
side = "right"
"#;

pub fn run_example(src: &str) -> lpvmpc::Result<(ConfigFile, TrajectoryLog)> {
    let cfg = ConfigFile::parse(src)?;
    let log = run_closed_loop(&cfg.scenario())?;
    Ok((cfg, log))
}

fn main() -> lpvmpc::Result<()> {
    let (cfg, log) = run_example(SAMPLE)?;
    println!("{}", cfg.to_toml());
    println!(
        "{}: rms {:.3} m, infeasible {}, min normalized G {:.3}",
        log.controller, log.summary.rms_xy_error, log.summary.infeasible_steps, log.summary.min_obstacle_margin
    );
    Ok(())
}
