//! Step steer on the single-track model: Euler, one RK4 step and sub-stepped
//! RK4 per sample, plus the LPV form evaluated along the way.

use lpvmpc::vehicle::{
    euler_step, lpv_continuous, rk4_integrate, rk4_step, scheduling_of, ControlInput, StateVec, VehicleParams,
};

pub struct Trace {
    pub euler: Vec<StateVec>,
    pub rk4: Vec<StateVec>,
    pub rk4_sub: Vec<StateVec>,
    /// Largest `|A(p) z + B(p) u - f(z, u)|` seen along the sub-stepped run.
    pub lpv_gap: f64,
}

pub fn run_example(steps: usize) -> lpvmpc::Result<Trace> {
    let par = VehicleParams::default();
    let z0 = StateVec::new(0.0, 0.0, 12.0, 0.0, 0.0, 0.0);
    let u = ControlInput::new(0.05, 0.0).to_vector();
    let (mut e, mut r, mut s) = (z0, z0, z0);
    let mut out = Trace {
        euler: vec![z0],
        rk4: vec![z0],
        rk4_sub: vec![z0],
        lpv_gap: 0.0,
    };
    for _ in 0..steps {
        e = euler_step(&e, &u, &par)?;
        r = rk4_step(&r, &u, &par)?;
        s = rk4_integrate(&s, &u, &par, 10)?;
        let m = lpv_continuous(&scheduling_of(&s, &u), &par)?;
        let f = lpvmpc::vehicle::dynamics_rhs(&s, &u, &par)?;
        out.lpv_gap = out.lpv_gap.max((m.a * s + m.b * u - f).amax());
        out.euler.push(e);
        out.rk4.push(r);
        out.rk4_sub.push(s);
    }
    Ok(out)
}

fn main() -> lpvmpc::Result<()> {
    let t = run_example(40)?;
    println!(
        "{:>4} {:>10} {:>10} {:>10}   (yaw rate, rad/s)",
        "k", "euler", "rk4", "rk4 x10"
    );
    for k in (0..t.euler.len()).step_by(5) {
        println!(
            "{k:>4} {:>10.5} {:>10.5} {:>10.5}",
            t.euler[k][5], t.rk4[k][5], t.rk4_sub[k][5]
        );
    }
    println!("LPV form vs nonlinear right-hand side: max gap {:.2e}", t.lpv_gap);
    Ok(())
}
