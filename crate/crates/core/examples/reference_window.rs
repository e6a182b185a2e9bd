//! Reference window derived from XY waypoints on a circle.

use lpvmpc::reference::{build_reference_window, circular_track, ReferenceState};

pub fn run_example(k: usize, horizon: usize) -> lpvmpc::Result<Vec<ReferenceState>> {
    let t_s = 0.05;
    let waypoints = circular_track((150.0, 110.0), 100.0, 12.0, 600, t_s);
    build_reference_window(&waypoints, k, horizon, t_s)
}

fn main() -> lpvmpc::Result<()> {
    let window = run_example(100, 8)?;
    println!(
        "{:>3} {:>9} {:>9} {:>7} {:>8} {:>8} {:>7}",
        "i", "X", "Y", "v_lon", "v_lat", "psi", "omega"
    );
    for (i, r) in window.iter().enumerate() {
        println!(
            "{i:>3} {:>9.3} {:>9.3} {:>7.3} {:>8.1e} {:>8.4} {:>7.4}",
            r.x, r.y, r.v_lon, r.v_lat, r.psi, r.omega
        );
    }
    Ok(())
}
