//! Planar control-point kinematics for surface vessels.
//!
//! The state of a vessel is the pose of a point offset `gamma` meters ahead
//! of the pivot. Offsetting the point makes the rudder command show up in the
//! translational velocity, which is what lets a position barrier act on both
//! inputs. With `gamma = 0` the model is the plain unicycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Scalar};

/// Pose of a vessel's control point: east/north position in meters and
/// heading in radians, kept in (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> VehicleState<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> [T; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Thrust / rudder command: forward speed of the control point (m/s) and
/// yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub u_thr: T,
    pub u_rud: T,
}

impl<T: Scalar> ControlInput<T> {
    pub fn new(u_thr: T, u_rud: T) -> Self {
        Self { u_thr, u_rud }
    }

    pub fn zero() -> Self {
        Self { u_thr: T::zero(), u_rud: T::zero() }
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.u_thr, self.u_rud]
    }

    pub fn from_array(u: [T; 2]) -> Self {
        Self { u_thr: u[0], u_rud: u[1] }
    }
}

/// Box of admissible inputs `[-thr_min, thr_max] x [-rud_min, rud_max]`.
///
/// The reverse limits are stored as magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds<T> {
    pub thr_min: T,
    pub thr_max: T,
    pub rud_min: T,
    pub rud_max: T,
}

impl<T: Scalar> ControlBounds<T> {
    pub fn new(thr_min: T, thr_max: T, rud_min: T, rud_max: T) -> Result<Self> {
        let all_finite = [thr_min, thr_max, rud_min, rud_max].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidBounds("limits must be finite".into()));
        }
        if thr_min < T::zero() || rud_min < T::zero() {
            return Err(Error::InvalidBounds("reverse limits are magnitudes and must be >= 0".into()));
        }
        if thr_max <= T::zero() || rud_max <= T::zero() {
            return Err(Error::InvalidBounds("thr_max and rud_max must be > 0".into()));
        }
        Ok(Self { thr_min, thr_max, rud_min, rud_max })
    }

    /// Box symmetric about the origin.
    pub fn symmetric(thr: T, rud: T) -> Result<Self> {
        Self::new(thr, thr, rud, rud)
    }

    /// Lower corner `[-thr_min, -rud_min]`.
    pub fn lower(&self) -> [T; 2] {
        [-self.thr_min, -self.rud_min]
    }

    /// Upper corner `[thr_max, rud_max]`.
    pub fn upper(&self) -> [T; 2] {
        [self.thr_max, self.rud_max]
    }

    pub fn contains(&self, u: &ControlInput<T>) -> bool {
        u.u_thr >= -self.thr_min && u.u_thr <= self.thr_max && u.u_rud >= -self.rud_min && u.u_rud <= self.rud_max
    }

    pub fn vertices(&self) -> [ControlInput<T>; 4] {
        let [lt, lr] = self.lower();
        let [ut, ur] = self.upper();
        [ControlInput::new(lt, lr), ControlInput::new(ut, lr), ControlInput::new(ut, ur), ControlInput::new(lt, ur)]
    }

    /// Rudder box scaled by `factor` in [0, 1] (used by the thrust gate).
    pub fn with_rudder_scale(&self, factor: T) -> Self {
        Self { rud_min: self.rud_min * factor, rud_max: self.rud_max * factor, ..*self }
    }

    /// Fastest the control point can move under this box with offset `gamma`.
    pub fn max_control_point_speed(&self, gamma: T) -> T {
        let thr = self.thr_min.max(self.thr_max);
        let lat = gamma * self.rud_min.max(self.rud_max);
        thr.hypot(lat)
    }

    /// Smallest speed the control point can reach in *every* direction,
    /// i.e. the minimum of the support function of the body-frame velocity
    /// box over unit directions.
    pub fn min_support(&self, gamma: T) -> T {
        self.thr_min.min(self.thr_max).min(gamma * self.rud_min).min(gamma * self.rud_max)
    }
}

/// Per-vessel model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec<T> {
    /// Control-point offset ahead of the pivot (m).
    pub gamma: T,
    /// Safety radius used in this vessel's barriers (m).
    pub r_safe: T,
    pub bounds: ControlBounds<T>,
    /// Fraction of `thr_max` below which rudder authority ramps down.
    /// Zero disables the gate.
    pub rudder_gate_threshold: T,
}

impl<T: Scalar> VehicleSpec<T> {
    pub fn new(gamma: T, r_safe: T, bounds: ControlBounds<T>, rudder_gate_threshold: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma < r_safe) {
            return Err(Error::InvalidSpec(format!(
                "control-point offset must satisfy 0 < gamma < r_safe (gamma = {gamma}, r_safe = {r_safe})"
            )));
        }
        if !(rudder_gate_threshold >= T::zero() && rudder_gate_threshold <= T::one()) {
            return Err(Error::InvalidSpec(format!(
                "rudder_gate_threshold must lie in [0, 1], got {rudder_gate_threshold}"
            )));
        }
        let spec = Self { gamma, r_safe, bounds, rudder_gate_threshold };
        if !spec.outruns_own_thrust() {
            log::warn!(
                "gamma * rud_max ({}) < thr_max ({}): rudder cannot move the control point as fast as thrust",
                gamma * bounds.rud_max,
                bounds.thr_max
            );
        }
        Ok(spec)
    }

    /// `gamma * rud >= thr` for every pairing of rudder and thrust limits.
    pub fn outruns_own_thrust(&self) -> bool {
        let b = &self.bounds;
        let lat = self.gamma * b.rud_min.min(b.rud_max);
        lat >= b.thr_max.max(b.thr_min)
    }

    /// Sufficient condition for the pairwise barrier constraint against a
    /// contact with box `other` and offset `other_gamma` to be feasible at every
    /// configuration with `h >= 0`: the slowest direction this vessel can push
    /// its control point is at least the contact's top control-point speed.
    pub fn dominates(&self, other: &ControlBounds<T>, other_gamma: T) -> bool {
        self.bounds.min_support(self.gamma) >= other.max_control_point_speed(other_gamma)
    }

    /// Rudder authority factor in [0, 1] for thrust command `u_thr`.
    pub fn rudder_gate(&self, u_thr: T) -> T {
        if self.rudder_gate_threshold <= T::zero() {
            return T::one();
        }
        let knee = self.rudder_gate_threshold * self.bounds.thr_max;
        T::one().min(u_thr.abs() / knee)
    }

    /// Input box with the rudder limits gated by thrust `u_thr`.
    pub fn gated_bounds(&self, u_thr: T) -> ControlBounds<T> {
        self.bounds.with_rudder_scale(self.rudder_gate(u_thr))
    }
}

/// Input matrix of `xdot = g(x) u`:
/// `[[cos θ, -γ sin θ], [sin θ, γ cos θ], [0, 1]]`.
pub fn g_matrix<T: Scalar>(state: &VehicleState<T>, gamma: T) -> [[T; 2]; 3] {
    let (s, c) = state.theta.sin_cos();
    [[c, -gamma * s], [s, gamma * c], [T::zero(), T::one()]]
}

/// Control-point velocity `[xdot, ydot]` produced by `u`.
pub fn control_point_velocity<T: Scalar>(state: &VehicleState<T>, u: &ControlInput<T>, gamma: T) -> [T; 2] {
    let g = g_matrix(state, gamma);
    [g[0][0] * u.u_thr + g[0][1] * u.u_rud, g[1][0] * u.u_thr + g[1][1] * u.u_rud]
}

/// Saturates `u` into the box, then limits the rudder by the thrust gate
/// evaluated at the saturated thrust.
pub fn clamp<T: Scalar>(u: &ControlInput<T>, spec: &VehicleSpec<T>) -> ControlInput<T> {
    let b = &spec.bounds;
    let u_thr = u.u_thr.max(-b.thr_min).min(b.thr_max);
    let gate = spec.rudder_gate(u_thr);
    let u_rud = u.u_rud.max(-b.rud_min * gate).min(b.rud_max * gate);
    ControlInput { u_thr, u_rud }
}

/// One forward-Euler tick of `xdot = g(x) u + [d_x, d_y, 0]`.
pub fn step<T: Scalar>(
    state: &VehicleState<T>,
    u: &ControlInput<T>,
    disturbance: [T; 2],
    dt: T,
    gamma: T,
) -> VehicleState<T> {
    debug_assert!(dt > T::zero());
    let [vx, vy] = control_point_velocity(state, u, gamma);
    VehicleState {
        x: state.x + dt * (vx + disturbance[0]),
        y: state.y + dt * (vy + disturbance[1]),
        theta: wrap_angle(state.theta + dt * u.u_rud),
    }
}
