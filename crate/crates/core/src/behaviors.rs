//! Nominal control: waypoint seeking, a simplified COLREGS avoidance utility,
//! and their weighted maximization over a (heading, speed) candidate grid.
//!
//! Behaviors propose, the safety filter disposes: nothing here guarantees
//! separation, it only shapes the nominal input handed to the filter.

use serde::{Deserialize, Serialize};

use crate::scalar::wrap_angle;
use crate::{ContactView, ControlBounds, ControlInput, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointGoal {
    pub target: [f64; 2],
    pub desired_speed: f64,
    pub capture_radius: f64,
}

impl WaypointGoal {
    pub fn distance_from(&self, state: &VehicleState) -> f64 {
        (self.target[0] - state.x).hypot(self.target[1] - state.y)
    }

    pub fn bearing_from(&self, state: &VehicleState) -> f64 {
        (self.target[1] - state.y).atan2(self.target[0] - state.x)
    }

    pub fn captured(&self, state: &VehicleState) -> bool {
        self.distance_from(state) <= self.capture_radius
    }

    /// Desired speed, ramped linearly to zero inside twice the capture radius.
    pub fn ramped_speed(&self, state: &VehicleState) -> f64 {
        let d = self.distance_from(state);
        let ramp = (d / (2.0 * self.capture_radius)).min(1.0);
        self.desired_speed * ramp
    }
}

/// Parameters of the avoidance utility and its priority weight (distances in
/// meters, horizon in seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColregsParams {
    pub pwt_outer_dist: f64,
    pub pwt_inner_dist: f64,
    pub min_util_cpa_dist: f64,
    pub max_util_cpa_dist: f64,
    pub time_horizon: f64,
}

impl Default for ColregsParams {
    fn default() -> Self {
        Self {
            pwt_outer_dist: 30.0,
            pwt_inner_dist: 20.0,
            min_util_cpa_dist: 10.0,
            max_util_cpa_dist: 20.0,
            time_horizon: 60.0,
        }
    }
}

impl ColregsParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.pwt_inner_dist < self.pwt_outer_dist) {
            return Err("pwt_inner_dist must be < pwt_outer_dist".into());
        }
        if !(self.min_util_cpa_dist < self.max_util_cpa_dist) {
            return Err("min_util_cpa_dist must be < max_util_cpa_dist".into());
        }
        if !(self.time_horizon > 0.0) {
            return Err("time_horizon must be > 0".into());
        }
        Ok(())
    }

    /// Avoidance weight: 0 at or beyond the outer distance, 1 at or inside
    /// the inner distance, linear between.
    pub fn priority_weight(&self, range: f64) -> f64 {
        ((self.pwt_outer_dist - range) / (self.pwt_outer_dist - self.pwt_inner_dist)).clamp(0.0, 1.0)
    }

    pub fn cpa_ramp(&self, d_cpa: f64) -> f64 {
        ((d_cpa - self.min_util_cpa_dist) / (self.max_util_cpa_dist - self.min_util_cpa_dist)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub headings: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl CandidateGrid {
    /// 72 headings at 5 degree spacing and 11 speeds from 0 to `thr_max`.
    pub fn standard(thr_max: f64) -> Self {
        Self::uniform(72, 11, thr_max)
    }

    pub fn uniform(n_headings: usize, n_speeds: usize, max_speed: f64) -> Self {
        assert!(n_headings > 0 && n_speeds > 1, "candidate grid must be nonempty");
        let headings =
            (0..n_headings).map(|k| wrap_angle(k as f64 * std::f64::consts::TAU / n_headings as f64)).collect();
        let speeds = (0..n_speeds).map(|k| max_speed * k as f64 / (n_speeds - 1) as f64).collect();
        Self { headings, speeds }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub heading: f64,
    pub speed: f64,
}

/// Observed contact plus its velocity estimate (finite-differenced positions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactTrack {
    pub view: ContactView,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncounterRole {
    HeadOn,
    GiveWay,
    StandOn,
    Overtaking,
}

/// Closest point of approach under constant-velocity extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cpa {
    pub distance: f64,
    pub time: f64,
}

/// Gains of the kinematic heading controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorGains {
    /// Yaw-rate command per radian of heading error (1/s).
    pub heading_gain: f64,
    /// Weight of the transit utility in the blended score.
    pub transit_weight: f64,
    /// Heading error (rad) at which the transit utility reaches zero.
    pub transit_heading_span: f64,
    /// Share of the transit utility lost when the speed error equals the
    /// desired speed.
    pub transit_speed_penalty: f64,
}

impl Default for BehaviorGains {
    fn default() -> Self {
        Self {
            heading_gain: 1.0,
            transit_weight: 0.75,
            transit_heading_span: std::f64::consts::PI,
            transit_speed_penalty: 1.0,
        }
    }
}

fn steer(ego: &VehicleState, heading: f64, speed: f64, gain: f64, bounds: &ControlBounds) -> ControlInput {
    let u_rud = (gain * wrap_angle(heading - ego.theta)).clamp(-bounds.rud_min, bounds.rud_max);
    ControlInput::new(speed.clamp(-bounds.thr_min, bounds.thr_max), u_rud)
}

/// Proportional heading control toward the goal at the (ramped) desired speed.
pub fn waypoint_control(
    ego: &VehicleState,
    goal: &WaypointGoal,
    heading_gain: f64,
    bounds: &ControlBounds,
) -> ControlInput {
    steer(ego, goal.bearing_from(ego), goal.ramped_speed(ego), heading_gain, bounds)
}

pub fn cpa(ego: [f64; 2], ego_vel: [f64; 2], contact: [f64; 2], contact_vel: [f64; 2], horizon: f64) -> Cpa {
    debug_assert!(horizon > 0.0);
    let r = [contact[0] - ego[0], contact[1] - ego[1]];
    let v = [contact_vel[0] - ego_vel[0], contact_vel[1] - ego_vel[1]];
    let vv = v[0] * v[0] + v[1] * v[1];
    let t = if vv <= f64::EPSILON { 0.0 } else { (-(r[0] * v[0] + r[1] * v[1]) / vv).clamp(0.0, horizon) };
    let (dx, dy) = (r[0] + v[0] * t, r[1] + v[1] * t);
    let d = (dx * dx + dy * dy).sqrt();
    Cpa { distance: d, time: t }
}

/// Relative bearing of `to` seen from `from` (positive to port).
fn relative_bearing(from: &VehicleState, to: &VehicleState) -> f64 {
    wrap_angle((to.y - from.y).atan2(to.x - from.x) - from.theta)
}

/// COLREGS role of the ego with respect to the contact.
pub fn classify_role(ego: &VehicleState, contact: &VehicleState) -> EncounterRole {
    let beta = relative_bearing(ego, contact);
    let reciprocal = wrap_angle(contact.theta - ego.theta - std::f64::consts::PI);
    if beta.abs() <= 15f64.to_radians() && reciprocal.abs() <= 22.5f64.to_radians() {
        return EncounterRole::HeadOn;
    }
    let ego_from_contact = relative_bearing(contact, ego);
    if ego_from_contact.abs() > 112.5f64.to_radians() && beta.abs() < 90f64.to_radians() {
        return EncounterRole::Overtaking;
    }
    if beta < 0.0 && beta >= -112.5f64.to_radians() {
        return EncounterRole::GiveWay;
    }
    EncounterRole::StandOn
}

/// True when the contact is on the ego's port side at the candidate's CPA.
fn passes_to_port(dir: [f64; 2], ev: [f64; 2], ego: &VehicleState, track: &ContactTrack, at: Cpa) -> bool {
    let rel = [
        track.view.state.x + track.velocity[0] * at.time - (ego.x + ev[0] * at.time),
        track.view.state.y + track.velocity[1] * at.time - (ego.y + ev[1] * at.time),
    ];
    dir[0] * rel[1] - dir[1] * rel[0] >= 0.0
}

/// Avoidance utility in [0, 1] of steering `candidate` with respect to one
/// contact: a CPA ramp, scaled down to 0.75 for give-way and head-on
/// candidates that leave the contact to starboard.
pub fn colregs_utility(candidate: Candidate, ego: &VehicleState, track: &ContactTrack, params: &ColregsParams) -> f64 {
    let role = classify_role(ego, &track.view.state);
    let (sin, cos) = candidate.heading.sin_cos();
    colregs_utility_for_role(candidate.speed, [cos, sin], ego, track, params, role)
}

fn colregs_utility_for_role(
    speed: f64,
    dir: [f64; 2],
    ego: &VehicleState,
    track: &ContactTrack,
    params: &ColregsParams,
    role: EncounterRole,
) -> f64 {
    let ev = [speed * dir[0], speed * dir[1]];
    let at = cpa(ego.position(), ev, track.view.state.position(), track.velocity, params.time_horizon);
    let base = params.cpa_ramp(at.distance);
    let bias = match role {
        EncounterRole::HeadOn | EncounterRole::GiveWay => {
            if passes_to_port(dir, ev, ego, track, at) {
                1.0
            } else {
                0.75
            }
        }
        EncounterRole::StandOn | EncounterRole::Overtaking => 1.0,
    };
    base * bias
}

/// Transit utility: heading deviation from the goal bearing (zero at
/// `gains.transit_heading_span` and beyond) times a linear penalty on the
/// speed deviation from the desired speed.
pub fn transit_utility(candidate: Candidate, goal_bearing: f64, desired_speed: f64, gains: &BehaviorGains) -> f64 {
    let heading = (1.0 - wrap_angle(candidate.heading - goal_bearing).abs() / gains.transit_heading_span).max(0.0);
    let error = if desired_speed > 0.0 {
        (candidate.speed - desired_speed).abs() / desired_speed
    } else {
        candidate.speed.min(1.0)
    };
    let speed = (1.0 - gains.transit_speed_penalty * error).max(0.0);
    heading * speed
}

/// Winning candidate and the two parts of its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub heading_index: usize,
    pub speed_index: usize,
    pub candidate: Candidate,
    pub transit_score: f64,
    pub avoidance_score: f64,
}

/// Maximizes `transit_weight * transit + sum_j weight_j * utility_j` over the
/// grid. Ties go to the lowest heading index, then the lowest speed index.
pub fn select_candidate(
    grid: &CandidateGrid,
    transit_weight: f64,
    transit: impl Fn(Candidate) -> f64,
    weighted: &[(f64, &dyn Fn(Candidate) -> f64)],
) -> Selection {
    select_indexed(grid, |_, c| {
        let t = transit_weight * transit(c);
        let a: f64 = weighted.iter().map(|(w, f)| if *w > 0.0 { w * f(c) } else { 0.0 }).sum();
        (t, a)
    })
}

/// Grid maximization of `transit + avoidance` as returned by `score`, which
/// also receives the heading index.
fn select_indexed(grid: &CandidateGrid, score: impl Fn(usize, Candidate) -> (f64, f64)) -> Selection {
    let mut best: Option<(f64, Selection)> = None;
    for (hi, &heading) in grid.headings.iter().enumerate() {
        for (si, &speed) in grid.speeds.iter().enumerate() {
            let c = Candidate { heading, speed };
            let (t, a) = score(hi, c);
            let total = t + a;
            if best.as_ref().is_none_or(|(s, _)| total > *s) {
                best = Some((
                    total,
                    Selection {
                        heading_index: hi,
                        speed_index: si,
                        candidate: c,
                        transit_score: t,
                        avoidance_score: a,
                    },
                ));
            }
        }
    }
    best.expect("candidate grid is nonempty").1
}

/// Weighted multi-objective choice of the nominal input.
pub fn blend(
    ego: &VehicleState,
    goal: &WaypointGoal,
    contacts: &[ContactTrack],
    params: &ColregsParams,
    grid: &CandidateGrid,
    gains: &BehaviorGains,
    bounds: &ControlBounds,
) -> ControlInput {
    blend_with_selection(ego, goal, contacts, params, grid, gains, bounds).0
}

/// [`blend`] plus the winning candidate (`None` when no contact carries
/// weight and plain waypoint control is returned).
pub fn blend_with_selection(
    ego: &VehicleState,
    goal: &WaypointGoal,
    contacts: &[ContactTrack],
    params: &ColregsParams,
    grid: &CandidateGrid,
    gains: &BehaviorGains,
    bounds: &ControlBounds,
) -> (ControlInput, Option<Selection>) {
    let weighted: Vec<(f64, &ContactTrack, EncounterRole)> = contacts
        .iter()
        .map(|c| (params.priority_weight(ego.distance_to(&c.view.state)), c, classify_role(ego, &c.view.state)))
        .filter(|(w, _, _)| *w > 0.0)
        .collect();
    if weighted.is_empty() {
        return (waypoint_control(ego, goal, gains.heading_gain, bounds), None);
    }
    let bearing = goal.bearing_from(ego);
    let speed = goal.ramped_speed(ego);
    let dirs: Vec<[f64; 2]> = grid
        .headings
        .iter()
        .map(|h| {
            let (sin, cos) = h.sin_cos();
            [cos, sin]
        })
        .collect();
    let sel = select_indexed(grid, |hi, c| {
        let t = gains.transit_weight * transit_utility(c, bearing, speed, gains);
        let a: f64 = weighted
            .iter()
            .map(|&(w, track, role)| w * colregs_utility_for_role(c.speed, dirs[hi], ego, track, params, role))
            .sum();
        (t, a)
    });
    let u = steer(ego, sel.candidate.heading, sel.candidate.speed, gains.heading_gain, bounds);
    (u, Some(sel))
}
