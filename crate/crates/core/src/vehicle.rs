//! Dynamic bicycle model with linear tire forces, its fixed-step integrators,
//! and the exact LPV re-factorization used by the predictive controllers.
//!
//! State ordering is `[X, Y, v_lon, v_lat, psi, omega]`, input ordering is
//! `[delta, a_lon]`. Angles are unwrapped radians throughout.

use nalgebra::{Matrix2x6, Matrix6, Matrix6x2, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 6;
pub const INPUT_DIM: usize = 2;
pub const SCHEDULING_DIM: usize = 4;

/// Lower bound on the longitudinal speed used when evaluating the model (m/s).
pub const V_MIN: f64 = 1.0;
/// Upper bound on the longitudinal speed used for scheduling (m/s).
pub const V_MAX: f64 = 100.0;

pub type StateVec = SVector<f64, STATE_DIM>;
pub type InputVec = SVector<f64, INPUT_DIM>;

/// Physical parameters of the single-track model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Front cornering stiffness (N/rad).
    pub c_alpha_f: f64,
    /// Rear cornering stiffness (N/rad).
    pub c_alpha_r: f64,
    /// CoG to front axle (m).
    pub l_f: f64,
    /// CoG to rear axle (m).
    pub l_r: f64,
    /// Yaw inertia (kg m^2).
    pub i_z: f64,
    /// Mass (kg).
    pub m: f64,
    /// Sampling time (s).
    pub t_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            c_alpha_f: 156e3,
            c_alpha_r: 193e3,
            l_f: 1.04,
            l_r: 1.4,
            i_z: 2937.0,
            m: 1919.0,
            t_s: 0.05,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_alpha_f", self.c_alpha_f),
            ("c_alpha_r", self.c_alpha_r),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("i_z", self.i_z),
            ("m", self.m),
            ("t_s", self.t_s),
        ];
        for (key, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    key: key.to_string(),
                    reason: format!("must be strictly positive, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Scales stiffnesses and mass by `(1 + k)` factors, used to emulate plant/model mismatch.
    pub fn perturbed(&self, k_cf: f64, k_cr: f64, k_m: f64) -> Self {
        Self {
            c_alpha_f: self.c_alpha_f * (1.0 + k_cf),
            c_alpha_r: self.c_alpha_r * (1.0 + k_cr),
            m: self.m * (1.0 + k_m),
            ..*self
        }
    }

    /// beta_f = 2 C_af / m
    pub fn beta_f(&self) -> f64 {
        2.0 * self.c_alpha_f / self.m
    }

    /// beta_r = 2 C_ar / m
    pub fn beta_r(&self) -> f64 {
        2.0 * self.c_alpha_r / self.m
    }

    /// gamma_f = 2 l_f C_af / I_z
    pub fn gamma_f(&self) -> f64 {
        2.0 * self.l_f * self.c_alpha_f / self.i_z
    }

    /// gamma_r = 2 l_r C_ar / I_z
    pub fn gamma_r(&self) -> f64 {
        2.0 * self.l_r * self.c_alpha_r / self.i_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v_lon: f64,
    pub v_lat: f64,
    pub psi: f64,
    pub omega: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, v_lon: f64, v_lat: f64, psi: f64, omega: f64) -> Self {
        Self {
            x,
            y,
            v_lon,
            v_lat,
            psi,
            omega,
        }
    }

    pub fn to_vector(&self) -> StateVec {
        StateVec::new(self.x, self.y, self.v_lon, self.v_lat, self.psi, self.omega)
    }

    pub fn from_vector(v: &StateVec) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    /// Front steering angle (rad).
    pub delta: f64,
    /// Longitudinal acceleration (m/s^2).
    pub a_lon: f64,
}

impl ControlInput {
    pub fn new(delta: f64, a_lon: f64) -> Self {
        Self { delta, a_lon }
    }

    pub fn to_vector(&self) -> InputVec {
        InputVec::new(self.delta, self.a_lon)
    }

    pub fn from_vector(v: &InputVec) -> Self {
        Self::new(v[0], v[1])
    }
}

/// The scheduling vector `(v_lon, v_lat, delta, psi)` that parametrizes `A(p)` and `B(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchedulingVector {
    pub v_lon: f64,
    pub v_lat: f64,
    pub delta: f64,
    pub psi: f64,
}

impl SchedulingVector {
    pub fn new(v_lon: f64, v_lat: f64, delta: f64, psi: f64) -> Self {
        Self {
            v_lon,
            v_lat,
            delta,
            psi,
        }
    }

    pub fn as_array(&self) -> [f64; SCHEDULING_DIM] {
        [self.v_lon, self.v_lat, self.delta, self.psi]
    }

    /// Largest componentwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `A(p)`, `B(p)` in continuous or Euler-discretized form.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvMatrices {
    pub a: Matrix6<f64>,
    pub b: Matrix6x2<f64>,
    pub discrete: bool,
}

fn check_speed(v_lon: f64) -> Result<()> {
    if v_lon >= V_MIN {
        Ok(())
    } else {
        Err(Error::Domain { v_lon, v_min: V_MIN })
    }
}

/// Right-hand side of the bicycle model: `(Xdot, Ydot, v_lon_dot, v_lat_dot, psi_dot, omega_dot)`.
pub fn dynamics_rhs(z: &StateVec, u: &InputVec, par: &VehicleParams) -> Result<StateVec> {
    let (v, nu, psi, w) = (z[2], z[3], z[4], z[5]);
    let (delta, a) = (u[0], u[1]);
    check_speed(v)?;

    let alpha_f = delta - (nu + par.l_f * w) / v;
    let alpha_r = (par.l_r * w - nu) / v;
    let f_yf = par.c_alpha_f * alpha_f;
    let f_yr = par.c_alpha_r * alpha_r;
    let (s, c) = psi.sin_cos();

    Ok(StateVec::new(
        v * c - nu * s,
        v * s + nu * c,
        w * nu + a,
        -w * v + 2.0 / par.m * (f_yf * delta.cos() + f_yr),
        w,
        2.0 / par.i_z * (par.l_f * f_yf - par.l_r * f_yr),
    ))
}

/// Analytic Jacobians `(df/dz, df/du)` of [`dynamics_rhs`].
pub fn dynamics_jacobians(z: &StateVec, u: &InputVec, par: &VehicleParams) -> Result<(Matrix6<f64>, Matrix6x2<f64>)> {
    let (v, nu, psi, w) = (z[2], z[3], z[4], z[5]);
    let delta = u[0];
    check_speed(v)?;

    let (s, c) = psi.sin_cos();
    let (sd, cd) = delta.sin_cos();
    let (bf, br, gf, gr) = (par.beta_f(), par.beta_r(), par.gamma_f(), par.gamma_r());

    let alpha_f = delta - (nu + par.l_f * w) / v;
    // partials of the slip angles
    let daf_dv = (nu + par.l_f * w) / (v * v);
    let daf_dnu = -1.0 / v;
    let daf_dw = -par.l_f / v;
    let dar_dv = -(par.l_r * w - nu) / (v * v);
    let dar_dnu = -1.0 / v;
    let dar_dw = par.l_r / v;

    let mut jz = Matrix6::zeros();
    jz[(0, 2)] = c;
    jz[(0, 3)] = -s;
    jz[(0, 4)] = -v * s - nu * c;
    jz[(1, 2)] = s;
    jz[(1, 3)] = c;
    jz[(1, 4)] = v * c - nu * s;
    jz[(2, 3)] = w;
    jz[(2, 5)] = nu;
    jz[(3, 2)] = -w + bf * cd * daf_dv + br * dar_dv;
    jz[(3, 3)] = bf * cd * daf_dnu + br * dar_dnu;
    jz[(3, 5)] = -v + bf * cd * daf_dw + br * dar_dw;
    jz[(4, 5)] = 1.0;
    jz[(5, 2)] = gf * daf_dv - gr * dar_dv;
    jz[(5, 3)] = gf * daf_dnu - gr * dar_dnu;
    jz[(5, 5)] = gf * daf_dw - gr * dar_dw;

    let mut ju = Matrix6x2::zeros();
    ju[(2, 1)] = 1.0;
    ju[(3, 0)] = bf * (cd - alpha_f * sd);
    ju[(5, 0)] = gf;
    Ok((jz, ju))
}

/// Forward Euler: `z + t_s f(z, u)`.
pub fn euler_step(z: &StateVec, u: &InputVec, par: &VehicleParams) -> Result<StateVec> {
    Ok(z + par.t_s * dynamics_rhs(z, u, par)?)
}

/// One classical RK4 step of length `t_s` with the input held constant.
pub fn rk4_step(z: &StateVec, u: &InputVec, par: &VehicleParams) -> Result<StateVec> {
    rk4_advance(z, u, par, par.t_s)
}

/// Integrates over one sampling period with `substeps` RK4 steps (zero-order hold on `u`).
pub fn rk4_integrate(z: &StateVec, u: &InputVec, par: &VehicleParams, substeps: usize) -> Result<StateVec> {
    let substeps = substeps.max(1);
    let h = par.t_s / substeps as f64;
    let mut state = *z;
    for _ in 0..substeps {
        state = rk4_advance(&state, u, par, h)?;
    }
    Ok(state)
}

fn rk4_advance(z: &StateVec, u: &InputVec, par: &VehicleParams, h: f64) -> Result<StateVec> {
    let k1 = dynamics_rhs(z, u, par)?;
    let k2 = dynamics_rhs(&(z + 0.5 * h * k1), u, par)?;
    let k3 = dynamics_rhs(&(z + 0.5 * h * k2), u, par)?;
    let k4 = dynamics_rhs(&(z + h * k3), u, par)?;
    Ok(z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Continuous-time `A_c(p)`, `B_c(p)`.
pub fn lpv_continuous(p: &SchedulingVector, par: &VehicleParams) -> Result<LpvMatrices> {
    let v = p.v_lon;
    check_speed(v)?;
    let (s, c) = p.psi.sin_cos();
    let cd = p.delta.cos();
    let (bf, br, gf, gr) = (par.beta_f(), par.beta_r(), par.gamma_f(), par.gamma_r());

    let a44 = -bf * cd / v - br / v;
    let a46 = -v - bf * cd * par.l_f / v + br * par.l_r / v;
    let a64 = (gr - gf) / v;
    let a66 = -(gf * par.l_f + gr * par.l_r) / v;

    let mut a = Matrix6::zeros();
    a[(0, 2)] = c;
    a[(0, 3)] = -s;
    a[(1, 2)] = s;
    a[(1, 3)] = c;
    a[(2, 5)] = p.v_lat;
    a[(3, 3)] = a44;
    a[(3, 5)] = a46;
    a[(4, 5)] = 1.0;
    a[(5, 3)] = a64;
    a[(5, 5)] = a66;

    let bt = Matrix2x6::new(
        0.0,
        0.0,
        0.0,
        bf * cd,
        0.0,
        gf, //
        0.0,
        0.0,
        1.0,
        0.0,
        0.0,
        0.0,
    );
    Ok(LpvMatrices {
        a,
        b: bt.transpose(),
        discrete: false,
    })
}

/// Euler discretization `A = I + t_s A_c`, `B = t_s B_c`.
pub fn lpv_discretize(cont: &LpvMatrices, t_s: f64) -> LpvMatrices {
    debug_assert!(!cont.discrete, "matrices are already discrete");
    LpvMatrices {
        a: Matrix6::identity() + cont.a * t_s,
        b: cont.b * t_s,
        discrete: true,
    }
}

/// `p = g(z, u)` with the speed clamped into `[V_MIN, V_MAX]`.
pub fn scheduling_of(z: &StateVec, u: &InputVec) -> SchedulingVector {
    SchedulingVector::new(z[2].clamp(V_MIN, V_MAX), z[3], u[0], z[4])
}
