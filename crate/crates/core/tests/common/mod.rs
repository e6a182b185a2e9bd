//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use lpvmpc::vehicle::{dynamics_rhs, InputVec, StateVec, VehicleParams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Exact solution of `min 0.5 x'Px + q'x  s.t.  Gx <= h` by enumerating
/// every active set. Only for strictly convex problems with few rows.
pub fn enumerate_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (q.len(), h.len());
    assert!(m <= 16, "enumeration oracle is exponential in the row count");
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if act.len() > n {
            continue;
        }
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        rhs.rows_mut(0, n).copy_from(&(-q));
        for (j, &i) in act.iter().enumerate() {
            for c in 0..n {
                kkt[(n + j, c)] = g[(i, c)];
                kkt[(c, n + j)] = g[(i, c)];
            }
            rhs[n + j] = h[i];
        }
        let svd = kkt.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() < 1e-10 * smax.max(1.0) {
            continue;
        }
        let Ok(sol) = svd.solve(&rhs, 0.0) else { continue };
        let x = sol.rows(0, n).clone_owned();
        let lam = sol.rows(n, k).clone_owned();
        let scale = 1.0 + h.amax();
        if (g * &x - h).iter().any(|v| *v > 1e-9 * scale) || lam.iter().any(|l| *l < -1e-9) {
            continue;
        }
        let mut y = DVector::zeros(m);
        for (j, &i) in act.iter().enumerate() {
            y[i] = lam[j].max(0.0);
        }
        let obj = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
        if best.as_ref().is_none_or(|b| obj < b.0 - 1e-12) {
            best = Some((obj, x, y));
        }
    }
    best.map(|(_, x, y)| (x, y))
}

/// Largest of the stationarity, primal, dual and complementarity residuals,
/// each relative to the magnitude of the terms it balances.
pub fn kkt_residual(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let px = p * x;
    let gty = g.transpose() * y;
    let gx = g * x;
    let stat = (&px + q + &gty).amax() / 1f64.max(px.amax()).max(q.amax()).max(gty.amax());
    let prim = (&gx - h).iter().fold(0.0f64, |a, v| a.max(*v)) / 1f64.max(gx.amax()).max(h.amax());
    let dual = y.iter().fold(0.0f64, |a, v| a.max(-*v));
    let comp = y
        .iter()
        .zip((h - &gx).iter())
        .fold(0.0f64, |a, (yi, si)| a.max((yi * si).abs()))
        / 1f64.max(y.amax() * (h - &gx).amax());
    stat.max(prim).max(dual).max(comp)
}

/// Strictly convex QP whose feasible set contains a random point.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let p = &l * l.transpose() + DMatrix::identity(n, n) * rng.gen_range(0.05..1.0);
    let q = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let h = &g * &x0 + DVector::from_fn(m, |_, _| rng.gen_range(0.0..1.0));
    (p, q, g, h)
}

/// Central-difference Jacobians of the vehicle right-hand side.
pub fn fd_jacobians(z: &StateVec, u: &InputVec, par: &VehicleParams, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut jz = DMatrix::zeros(6, 6);
    let mut ju = DMatrix::zeros(6, 2);
    for c in 0..6 {
        let mut zp = *z;
        let mut zm = *z;
        let step = h * z[c].abs().max(1.0);
        zp[c] += step;
        zm[c] -= step;
        let d = (dynamics_rhs(&zp, u, par).unwrap() - dynamics_rhs(&zm, u, par).unwrap()) / (2.0 * step);
        jz.set_column(c, &d);
    }
    for c in 0..2 {
        let mut up = *u;
        let mut um = *u;
        let step = h * u[c].abs().max(1.0);
        up[c] += step;
        um[c] -= step;
        let d = (dynamics_rhs(z, &up, par).unwrap() - dynamics_rhs(z, &um, par).unwrap()) / (2.0 * step);
        ju.set_column(c, &d);
    }
    (jz, ju)
}

/// Integrates with many explicit midpoint steps, independent of the crate's RK4.
pub fn midpoint_reference(z: &StateVec, u: &InputVec, par: &VehicleParams, t: f64, steps: usize) -> StateVec {
    let h = t / steps as f64;
    let mut s = *z;
    for _ in 0..steps {
        let k1 = dynamics_rhs(&s, u, par).unwrap();
        let k2 = dynamics_rhs(&(s + 0.5 * h * k1), u, par).unwrap();
        s += h * k2;
    }
    s
}

/// Uniform state and input in the domain where the model is defined.
pub fn random_point<R: Rng>(rng: &mut R) -> (StateVec, InputVec) {
    let z = StateVec::new(
        rng.gen_range(-100.0..100.0),
        rng.gen_range(-100.0..100.0),
        rng.gen_range(1.0..100.0),
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.gen_range(-5.0..5.0),
    );
    let u = InputVec::new(rng.gen_range(-0.6..0.6), rng.gen_range(-5.0..5.0));
    (z, u)
}
