//! Continuous-time model of the elliptic restricted three-body problem with
//! true anomaly `ν` as the independent variable.
//!
//! State ordering is fixed because the transcription depends on it:
//!
//! | index | ER3BP transfer state | CR3BP coast state |
//! |-------|----------------------|-------------------|
//! | 0..3  | x, y, z  [LU]        | x, y, z  [LU]     |
//! | 3..6  | x', y', z' [LU/rad]  | x', y', z' [LU/TU]|
//! | 6     | τ  (t / T(0))        | τ                 |
//! | 7     | m_s (m / m_0)        | n/a               |
//!
//! Controls are `[u_x, u_y, u_z, δ1, δ2]`.
//!
//! Nothing here converts between true, eccentric and mean anomaly; the
//! model is written directly in `ν`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::Scalar;

/// Distances below this are treated as a collision with a primary.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

pub const ER3BP_STATE_DIM: usize = 8;
pub const CR3BP_STATE_DIM: usize = 7;
pub const CONTROL_DIM: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("spacecraft at primary {primary} (distance {distance:e} LU)")]
    SingularLocation { primary: u8, distance: f64 },
    #[error("nonpositive normalized mass {0}")]
    NonPositiveMass(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Primaries' constants and the shape of their mutual orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Gravitational parameter of primary 1 [km^3/s^2].
    pub mu1: f64,
    /// Gravitational parameter of primary 2 [km^3/s^2].
    pub mu2: f64,
    /// Mean equatorial radius of primary 1 [km].
    pub radius1: f64,
    /// Mean equatorial radius of primary 2 [km].
    pub radius2: f64,
    /// Universal gravitational constant [km^3/kg/s^2].
    pub gravitational_constant: f64,
    /// Sea-level gravity [km/s^2].
    pub g0: f64,
    /// Mass ratio.
    pub mu: f64,
    /// Semi-major axis of the primaries' orbit [km].
    pub semi_major_axis: f64,
    /// Eccentricity of the primaries' orbit.
    pub eccentricity: f64,
}

impl SystemParams {
    /// Earth-Moon constants.
    pub fn earth_moon() -> Self {
        Self {
            mu1: 3.986002221116981e5,
            mu2: 4.902797989481230e3,
            radius1: 6.378137e3,
            radius2: 1.7371e3,
            gravitational_constant: 6.67430e-20,
            g0: 9.80665e-3,
            mu: 1.215058560962404e-2,
            semi_major_axis: 3.89703e5,
            eccentricity: 5.49e-2,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParameter(m.to_string()));
        if !(0.0..1.0).contains(&self.eccentricity) {
            return bad("eccentricity must lie in [0, 1)");
        }
        if !(self.mu > 0.0 && self.mu <= 0.5) {
            return bad("mass ratio must lie in (0, 0.5]");
        }
        for (name, v) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("radius1", self.radius1),
            ("radius2", self.radius2),
            ("gravitational_constant", self.gravitational_constant),
            ("g0", self.g0),
            ("semi_major_axis", self.semi_major_axis),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        let recomputed = self.mu2 / (self.mu1 + self.mu2);
        if ((recomputed - self.mu) / self.mu).abs() > 1e-12 {
            return bad(&format!(
                "mass ratio {} inconsistent with mu2/(mu1+mu2) = {}",
                self.mu, recomputed
            ));
        }
        Ok(())
    }

    /// Same system with a circular primary orbit.
    pub fn circular(&self) -> Self {
        Self { eccentricity: 0.0, ..*self }
    }

    /// `G M` of the primaries [km^3/s^2].
    pub fn gm(&self) -> f64 {
        self.mu1 + self.mu2
    }

    /// Characteristic mass [kg].
    pub fn characteristic_mass(&self) -> f64 {
        self.gm() / self.gravitational_constant
    }

    /// Mean motion of the primaries [rad/s].
    pub fn mean_motion(&self) -> f64 {
        (self.gravitational_constant * self.characteristic_mass() / self.semi_major_axis.powi(3))
            .sqrt()
    }

    /// `(1 - e^2)^{3/2}`.
    fn ecc_factor(&self) -> f64 {
        (1.0 - self.eccentricity * self.eccentricity).powf(1.5)
    }
}

/// Instantaneous distance between the primaries [km].
pub fn char_length(sys: &SystemParams, nu: f64) -> f64 {
    let e = sys.eccentricity;
    sys.semi_major_axis * (1.0 - e * e) / (1.0 + e * nu.cos())
}

/// Time unit that scales the nondimensional gravitational constant to one [s].
pub fn char_time(sys: &SystemParams, nu: f64) -> f64 {
    (char_length(sys, nu).powi(3) / sys.gm()).sqrt()
}

/// Angular velocity of the rotating frame seen from the inertial frame [rad/s].
pub fn angular_rate(sys: &SystemParams, nu: f64) -> f64 {
    let k = 1.0 + sys.eccentricity * nu.cos();
    sys.mean_motion() * k * k / sys.ecc_factor()
}

/// Distances to primary 1 and primary 2 [LU].
pub fn primary_distances(mu: f64, x: f64, y: f64, z: f64) -> (f64, f64) {
    distances(mu, x, y, z)
}

fn distances<T: Scalar>(mu: f64, x: T, y: T, z: T) -> (T, T) {
    let yz = y * y + z * z;
    let d1 = x + mu;
    let d2 = x - (1.0 - mu);
    ((d1 * d1 + yz).sqrt(), (d2 * d2 + yz).sqrt())
}

fn guard(r1: f64, r2: f64) -> Result<(), DynamicsError> {
    if !(r1 >= SINGULAR_DISTANCE) {
        return Err(DynamicsError::SingularLocation { primary: 1, distance: r1 });
    }
    if !(r2 >= SINGULAR_DISTANCE) {
        return Err(DynamicsError::SingularLocation { primary: 2, distance: r2 });
    }
    Ok(())
}

/// Pseudopotential `W(x, y, z, ν)`.
pub fn pseudopotential(sys: &SystemParams, x: f64, y: f64, z: f64, nu: f64) -> Result<f64, DynamicsError> {
    let mu = sys.mu;
    let (r1, r2) = distances(mu, x, y, z);
    guard(r1, r2)?;
    let ec = sys.eccentricity * nu.cos();
    let bracket = 0.5 * (x * x + y * y - ec * z * z) + (1.0 - mu) / r1 + mu / r2;
    Ok(bracket / (1.0 + ec))
}

fn gradient_generic<T: Scalar>(mu: f64, e: f64, pos: [T; 3], nu: T) -> Result<[T; 3], DynamicsError> {
    let [x, y, z] = pos;
    let (r1, r2) = distances(mu, x, y, z);
    guard(r1.value(), r2.value())?;
    let ec = nu.cos() * e;
    let inv_k = (ec + 1.0).recip();
    let c1 = r1.powi(-3) * (1.0 - mu);
    let c2 = r2.powi(-3) * mu;
    let common = c1 + c2;
    let gx = x - c1 * (x + mu) - c2 * (x - (1.0 - mu));
    let gy = y - common * y;
    let gz = -(ec * z) - common * z;
    Ok([gx * inv_k, gy * inv_k, gz * inv_k])
}

/// Analytic gradient `(∂W/∂x, ∂W/∂y, ∂W/∂z)`.
pub fn pseudopotential_gradient(
    sys: &SystemParams,
    x: f64,
    y: f64,
    z: f64,
    nu: f64,
) -> Result<[f64; 3], DynamicsError> {
    gradient_generic(sys.mu, sys.eccentricity, [x, y, z], nu)
}

/// Spacecraft propulsion and mass data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacecraftParams {
    /// Maximum thrust per mode [kN]. One kN is exactly one kg·km/s², so the
    /// stored value is already in the base units used by the model.
    pub tmax: [f64; 2],
    /// Specific impulse per mode [s].
    pub isp: [f64; 2],
    /// Initial spacecraft mass [kg].
    pub m0: f64,
}

impl SpacecraftParams {
    /// 1 N / 250 s and 0.5 N / 3100 s modes on a 100 kg spacecraft.
    pub fn case1() -> Self {
        Self { tmax: [1.0e-3, 0.5e-3], isp: [2.5e2, 3.1e3], m0: 1.0e2 }
    }

    /// As [`Self::case1`] with mode 2 reduced to 0.25 N.
    pub fn case2() -> Self {
        Self { tmax: [1.0e-3, 2.5e-4], isp: [2.5e2, 3.1e3], m0: 1.0e2 }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let all = [self.tmax[0], self.tmax[1], self.isp[0], self.isp[1], self.m0];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(DynamicsError::InvalidParameter(
                "thrust, specific impulse and initial mass must be positive".into(),
            ))
        }
    }

    /// Propellant mass flow of mode `i` at full throttle [kg/s].
    pub fn full_throttle_flow(&self, sys: &SystemParams, mode: usize) -> f64 {
        self.tmax[mode] / (self.isp[mode] * sys.g0)
    }
}

/// Transfer-phase state, derivatives taken with respect to `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Er3bpState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub xp: f64,
    pub yp: f64,
    pub zp: f64,
    pub tau: f64,
    pub m_s: f64,
}

impl Er3bpState {
    pub fn to_array(&self) -> [f64; 8] {
        [self.x, self.y, self.z, self.xp, self.yp, self.zp, self.tau, self.m_s]
    }

    pub fn from_array(a: &[f64; 8]) -> Self {
        Self { x: a[0], y: a[1], z: a[2], xp: a[3], yp: a[4], zp: a[5], tau: a[6], m_s: a[7] }
    }
}

/// Thrust direction and per-mode throttles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl ControlInput {
    pub fn to_array(&self) -> [f64; 5] {
        [self.ux, self.uy, self.uz, self.delta1, self.delta2]
    }

    pub fn from_array(a: &[f64; 5]) -> Self {
        Self { ux: a[0], uy: a[1], uz: a[2], delta1: a[3], delta2: a[4] }
    }
}

/// Thrust acceleration magnitude in the pulsating frame.
pub fn thrust_accel_magnitude(
    sys: &SystemParams,
    sc: &SpacecraftParams,
    m_s: f64,
    delta1: f64,
    delta2: f64,
    nu: f64,
) -> Result<f64, DynamicsError> {
    if !(m_s > 0.0) {
        return Err(DynamicsError::NonPositiveMass(m_s));
    }
    let k = 1.0 + sys.eccentricity * nu.cos();
    let len = char_length(sys, nu);
    let time = char_time(sys, nu);
    let thrust = delta1 * sc.tmax[0] + delta2 * sc.tmax[1];
    Ok(thrust * time * time / (k * sc.m0 * m_s * len))
}

/// `d m_s / dν`.
pub fn mass_flow(sys: &SystemParams, sc: &SpacecraftParams, delta1: f64, delta2: f64, nu: f64) -> f64 {
    let flow = sc.tmax[0] / sc.isp[0] * delta1 + sc.tmax[1] / sc.isp[1] * delta2;
    -flow / (angular_rate(sys, nu) * sys.g0 * sc.m0)
}

/// Precomputed constants for repeated evaluation of the transfer dynamics.
#[derive(Debug, Clone, Copy)]
pub struct Er3bpModel {
    pub mu: f64,
    pub e: f64,
    /// `a^2 (1-e^2)^2 / (GM m0)`; multiplies `thrust / (k^3 m_s)`.
    accel_coeff: f64,
    /// `(1-e^2)^{3/2} / (n T(0))`; multiplies `1/k^2`.
    tau_coeff: f64,
    /// `(1-e^2)^{3/2} / (n g0 m0)`; multiplies `flow / k^2`.
    mass_coeff: f64,
    tmax: [f64; 2],
    flow_per_throttle: [f64; 2],
}

impl Er3bpModel {
    pub fn new(sys: &SystemParams, sc: &SpacecraftParams) -> Self {
        let e = sys.eccentricity;
        let one_m_e2 = 1.0 - e * e;
        let n = sys.mean_motion();
        let a = sys.semi_major_axis;
        Self {
            mu: sys.mu,
            e,
            accel_coeff: a * a * one_m_e2 * one_m_e2 / (sys.gm() * sc.m0),
            tau_coeff: sys.ecc_factor() / (n * char_time(sys, 0.0)),
            mass_coeff: sys.ecc_factor() / (n * sys.g0 * sc.m0),
            tmax: sc.tmax,
            flow_per_throttle: [sc.tmax[0] / sc.isp[0], sc.tmax[1] / sc.isp[1]],
        }
    }

    /// Derivative of the 8-component transfer state with respect to `ν`.
    pub fn rhs<T: Scalar>(&self, x: &[T; 8], u: &[T; 5], nu: T) -> Result<[T; 8], DynamicsError> {
        let grad = gradient_generic(self.mu, self.e, [x[0], x[1], x[2]], nu)?;
        let m = x[7];
        if !(m.value() > 0.0) {
            return Err(DynamicsError::NonPositiveMass(m.value()));
        }
        let k = nu.cos() * self.e + 1.0;
        let inv_k2 = (k * k).recip();
        let thrust = u[3] * self.tmax[0] + u[4] * self.tmax[1];
        let a_t = thrust * inv_k2 * self.accel_coeff / (k * m);
        let flow = u[3] * self.flow_per_throttle[0] + u[4] * self.flow_per_throttle[1];
        Ok([
            x[3],
            x[4],
            x[5],
            x[4] * 2.0 + grad[0] + a_t * u[0],
            -(x[3] * 2.0) + grad[1] + a_t * u[1],
            grad[2] + a_t * u[2],
            inv_k2 * self.tau_coeff,
            -(flow * inv_k2 * self.mass_coeff),
        ])
    }

    /// Integrand of the mode-1 propellant integral, `d q / dν`.
    pub fn mode1_flow<T: Scalar>(&self, delta1: T, nu: T) -> T {
        let k = nu.cos() * self.e + 1.0;
        delta1 * self.flow_per_throttle[0] * self.mass_coeff / (k * k)
    }

    /// `d τ / dν` on the transfer phase.
    pub fn tau_rate(&self, nu: f64) -> f64 {
        let k = 1.0 + self.e * nu.cos();
        self.tau_coeff / (k * k)
    }
}

/// Precomputed constants for the ballistic circular model used on coasts.
#[derive(Debug, Clone, Copy)]
pub struct Cr3bpModel {
    pub mu: f64,
    /// `1 / (n T(0))` with `T(0)` taken from the elliptic system.
    pub tau_rate: f64,
}

impl Cr3bpModel {
    pub fn new(sys: &SystemParams) -> Self {
        Self { mu: sys.mu, tau_rate: 1.0 / (sys.mean_motion() * char_time(sys, 0.0)) }
    }

    pub fn rhs<T: Scalar>(&self, x: &[T; 7]) -> Result<[T; 7], DynamicsError> {
        let grad = gradient_generic(self.mu, 0.0, [x[0], x[1], x[2]], T::cst(0.0))?;
        Ok([
            x[3],
            x[4],
            x[5],
            x[4] * 2.0 + grad[0],
            -(x[3] * 2.0) + grad[1],
            grad[2],
            T::cst(self.tau_rate),
        ])
    }

    /// Position/velocity part only, for orbit propagation in TU.
    pub fn rhs6(&self, x: &[f64; 6]) -> Result<[f64; 6], DynamicsError> {
        let grad = gradient_generic(self.mu, 0.0, [x[0], x[1], x[2]], 0.0)?;
        Ok([x[3], x[4], x[5], 2.0 * x[4] + grad[0], -2.0 * x[3] + grad[1], grad[2]])
    }
}

/// Controlled transfer dynamics `d(state)/dν`.
pub fn er3bp_rhs(
    sys: &SystemParams,
    sc: &SpacecraftParams,
    state: &Er3bpState,
    ctrl: &ControlInput,
    nu: f64,
) -> Result<[f64; 8], DynamicsError> {
    Er3bpModel::new(sys, sc).rhs(&state.to_array(), &ctrl.to_array(), nu)
}

/// Ballistic coast dynamics. `τ` advances at `1/(n T(0))` of the elliptic
/// system so that coast and transfer phases share one time scale.
pub fn cr3bp_rhs(sys: &SystemParams, state: &[f64; 7]) -> Result<[f64; 7], DynamicsError> {
    Cr3bpModel::new(sys).rhs(state)
}

/// Jacobi constant `2 W|_{e=0} - |v|^2` of a position/velocity state.
pub fn jacobi_constant(sys: &SystemParams, state: &[f64; 6]) -> Result<f64, DynamicsError> {
    let w = pseudopotential(&sys.circular(), state[0], state[1], state[2], 0.0)?;
    Ok(2.0 * w - (state[3] * state[3] + state[4] * state[4] + state[5] * state[5]))
}

/// Scalars relating circular and elliptic frames at a phase interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScaling {
    /// Ratio of elliptic to circular length units.
    pub gamma: f64,
    pub eta: f64,
    pub xi: f64,
}

pub fn link_scaling(sys: &SystemParams, nu: f64) -> LinkScaling {
    link_scaling_generic(sys, nu).into()
}

pub(crate) fn link_scaling_generic<T: Scalar>(sys: &SystemParams, nu: T) -> LinkScalingOf<T> {
    let e = sys.eccentricity;
    let k = nu.cos() * e + 1.0;
    let inv_k = k.recip();
    let gamma = inv_k * (1.0 - e * e);
    let eta = nu.sin() * e * inv_k;
    // n / ν̇ = (1-e^2)^{3/2} / k^2
    let xi = -(inv_k * inv_k * sys.ecc_factor()) + 1.0;
    // a n / (L ν̇) = (1-e^2)^{1/2} / k
    let velocity_factor = inv_k * (1.0 - e * e).sqrt();
    LinkScalingOf { gamma, eta, xi, velocity_factor }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkScalingOf<T> {
    pub gamma: T,
    pub eta: T,
    pub xi: T,
    /// `a n / (L(ν) ν̇(ν))`, the factor applied to circular-frame velocity.
    pub velocity_factor: T,
}

impl From<LinkScalingOf<f64>> for LinkScaling {
    fn from(v: LinkScalingOf<f64>) -> Self {
        Self { gamma: v.gamma, eta: v.eta, xi: v.xi }
    }
}

/// `a n / (L(ν) ν̇(ν))`, the factor applied to circular-frame velocity at an
/// interface.
pub fn velocity_link_factor(sys: &SystemParams, nu: f64) -> f64 {
    link_scaling_generic(sys, nu).velocity_factor
}

/// Converts a circular-frame position/velocity at anomaly `nu` into the
/// pulsating elliptic frame, inverting the interface linkage.
pub fn circular_to_pulsating(sys: &SystemParams, nu: f64, s: &[f64; 6]) -> [f64; 6] {
    let l = link_scaling_generic(sys, nu);
    let r = [s[0] / l.gamma, s[1] / l.gamma, s[2] / l.gamma];
    [
        r[0],
        r[1],
        r[2],
        l.velocity_factor * s[3] - l.eta * r[0] + l.xi * r[1],
        l.velocity_factor * s[4] - l.eta * r[1] - l.xi * r[0],
        l.velocity_factor * s[5] - l.eta * r[2],
    ]
}

/// Inverse of [`circular_to_pulsating`].
pub fn pulsating_to_circular(sys: &SystemParams, nu: f64, s: &[f64; 6]) -> [f64; 6] {
    let l = link_scaling_generic(sys, nu);
    let v = [
        s[3] + l.eta * s[0] - l.xi * s[1],
        s[4] + l.eta * s[1] + l.xi * s[0],
        s[5] + l.eta * s[2],
    ];
    [
        l.gamma * s[0],
        l.gamma * s[1],
        l.gamma * s[2],
        v[0] / l.velocity_factor,
        v[1] / l.velocity_factor,
        v[2] / l.velocity_factor,
    ]
}
