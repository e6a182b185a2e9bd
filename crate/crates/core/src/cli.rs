//! Command-line front end: `run`, `study`, `compare`, `dump-defaults`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{locate_key, ConfigFile};
use crate::controller::ControllerKind;
use crate::error::{Error, Result};
use crate::sim::{
    feasibility_study, generate_study_scenarios, run_closed_loop, timing_report, write_input_traces, write_plot_data,
    write_study_csv, write_summary_csv, write_timing_csv, write_trajectory_csv, StudyTable, TrajectoryLog,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// Infeasible steps in `run`, or a failed study property.
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lpvmpc",
    version,
    about = "LPV MPC with a scheduling trust region for vehicle tracking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// lpv_trust, lpv_standard or nmpc_sqp.
    #[arg(long, global = true)]
    pub controller: Option<ControllerKind>,
    /// Overrides the study and simulation seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the horizon (and the study's horizon set).
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Switches an LPV controller between trust-region and standard.
    #[arg(long, global = true)]
    pub trust: Option<Toggle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-loop run; writes trajectory.csv, summary.csv and plot.csv.
    Run,
    /// Standard vs trust-region feasibility study; writes study.csv.
    Study,
    /// lpv_trust vs nmpc_sqp on one scenario; writes timing.csv, summary.csv and inputs.csv.
    Compare,
    /// Prints the effective configuration as TOML.
    DumpDefaults,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = effective_config(cli)?;
    match cli.command {
        Command::Run => cmd_run(&cfg, &cli.out_dir),
        Command::Study => cmd_study(&cfg, &cli.out_dir),
        Command::Compare => cmd_compare(&cfg, &cli.out_dir),
        Command::DumpDefaults => {
            print!("{}", cfg.to_toml());
            Ok(EXIT_OK)
        }
    }
}

/// File (or defaults) with the command-line overrides applied.
pub fn effective_config(cli: &Cli) -> Result<ConfigFile> {
    let src = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = ConfigFile::parse(&src)?;
    if let Some(kind) = cli.controller {
        cfg.controller.kind = kind;
    }
    if let Some(t) = cli.trust {
        cfg.controller.kind = match (cfg.controller.kind, t) {
            (ControllerKind::NmpcSqp, _) => {
                return Err(Error::InvalidParameter {
                    key: "--trust".into(),
                    reason: "only applies to the LPV controllers".into(),
                })
            }
            (_, Toggle::On) => ControllerKind::LpvTrust,
            (_, Toggle::Off) => ControllerKind::LpvStandard,
        };
    }
    if let Some(seed) = cli.seed {
        cfg.study.seed = seed;
        cfg.sim.seed = seed;
    }
    if let Some(h) = cli.horizon {
        cfg.controller.horizon = h;
        cfg.study.horizons = vec![h];
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidParameter { key, reason } => Error::Config {
            line: locate_key(&src, &key),
            message: format!("`{key}`: {reason}"),
        },
        other => other,
    })?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn print_summary(log: &TrajectoryLog) {
    let s = &log.summary;
    println!(
        "{:<13} N={:<3} steps={:<4} rms_xy={:.4} m  infeasible={}  unsolved={}  min_G={:.4}  road_violation={:.4} m  solve avg/max/min = {:.4}/{:.4}/{:.4} s",
        log.controller.as_str(),
        log.horizon,
        s.steps,
        s.rms_xy_error,
        s.infeasible_steps,
        s.unsolved_steps,
        s.min_obstacle_margin,
        s.max_road_violation,
        s.avg_solve_time,
        s.max_solve_time,
        s.min_solve_time
    );
}

pub fn cmd_run(cfg: &ConfigFile, out_dir: &Path) -> Result<i32> {
    let scn = cfg.scenario();
    let log = run_closed_loop(&scn)?;
    write_trajectory_csv(create(out_dir, "trajectory.csv")?, &log)?;
    write_summary_csv(create(out_dir, "summary.csv")?, std::slice::from_ref(&log))?;
    write_plot_data(create(out_dir, "plot.csv")?, &scn, &log)?;
    print_summary(&log);
    if let Some(reason) = &log.abort_reason {
        eprintln!("run aborted: {reason}");
        return Ok(EXIT_ERROR);
    }
    if log.summary.infeasible_steps > 0 {
        eprintln!("infeasible steps: {}", log.summary.infeasible_steps);
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(EXIT_OK)
}

pub fn print_study_table(table: &StudyTable, mut w: impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<10} {:>3} {:>8} {:>10} {:>10} {:>8} {:>8}",
        "scenario", "N", "radius", "standard", "trust", "std_inf", "tr_inf"
    )?;
    for r in &table.rows {
        writeln!(
            w,
            "{:<10} {:>3} {:>8.3} {:>10} {:>10} {:>8} {:>8}",
            r.id,
            r.horizon,
            r.obstacle_radius,
            r.standard_feasible,
            r.trust_feasible,
            r.standard_infeasible_steps,
            r.trust_infeasible_steps
        )?;
    }
    writeln!(
        w,
        "feasible: standard {}/{}, trust {}/{}; superset {}",
        table.standard_feasible_count(),
        table.rows.len(),
        table.trust_feasible_count(),
        table.rows.len(),
        if table.superset_holds() { "holds" } else { "violated" }
    )
}

pub fn cmd_study(cfg: &ConfigFile, out_dir: &Path) -> Result<i32> {
    if let Some(w) = cfg.study.radius_warning() {
        eprintln!("warning: {w}");
    }
    let scenarios = generate_study_scenarios(&cfg.scenario(), &cfg.study);
    let table = feasibility_study(&scenarios)?;
    write_study_csv(create(out_dir, "study.csv")?, &table)?;
    print_study_table(&table, std::io::stdout().lock())?;
    let ok = table.superset_holds() && table.trust_feasible_count() == table.rows.len();
    Ok(if ok { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn cmd_compare(cfg: &ConfigFile, out_dir: &Path) -> Result<i32> {
    let logs = [ControllerKind::LpvTrust, ControllerKind::NmpcSqp]
        .into_iter()
        .map(|k| {
            let mut c = cfg.clone();
            c.controller.kind = k;
            run_closed_loop(&c.scenario())
        })
        .collect::<Result<Vec<_>>>()?;
    let timing = timing_report(&logs);
    write_timing_csv(create(out_dir, "timing.csv")?, &timing)?;
    write_summary_csv(create(out_dir, "summary.csv")?, &logs)?;
    write_input_traces(create(out_dir, "inputs.csv")?, &logs)?;
    for log in &logs {
        print_summary(log);
    }
    Ok(EXIT_OK)
}
