//! Seeded joust-mission simulator.
//!
//! Vehicles start evenly spaced on a circle and cross to the antipodal point.
//! Every tick all vehicles observe the same snapshot of the previous states,
//! pick a nominal input (per [`Mode`]), optionally pass it through the
//! barrier filter, saturate it, and advance one Euler step. Legs are
//! independent: each draws from its own RNG stream derived from
//! `(seed, leg_index)`, so campaigns parallelize without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviors::{self, BehaviorGains, CandidateGrid, ColregsParams, ContactTrack, WaypointGoal};
use crate::cbf::h_pair;
use crate::dynamics::{clamp, step};
use crate::error::{Error, Result};
use crate::metrics::{self, EncounterGrid, MetricsSummary, TraversalStats};
use crate::qp_filter::{filter_with_gate, GateConstraint};
use crate::{BarrierParams, ContactView, ControlBounds, ControlInput, QpWeights, VehicleSpec, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ColregsOnly,
    CbfOnly,
    ColregsPlusCbf,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::ColregsOnly, Mode::CbfOnly, Mode::ColregsPlusCbf];

    pub fn uses_colregs(self) -> bool {
        matches!(self, Mode::ColregsOnly | Mode::ColregsPlusCbf)
    }

    pub fn uses_cbf(self) -> bool {
        matches!(self, Mode::CbfOnly | Mode::ColregsPlusCbf)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ColregsOnly => "colregs_only",
            Mode::CbfOnly => "cbf_only",
            Mode::ColregsPlusCbf => "colregs_plus_cbf",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter { name: "mode", reason: format!("unknown mode `{s}`") })
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who decides a vehicle's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Behaviors and filter per the campaign mode.
    #[default]
    Autonomous,
    /// Heads for its goal ignoring everyone else.
    StraightLine,
    /// Driven by commands from the gateway; only saturation applies.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSetup {
    pub spec: VehicleSpec,
    pub policy: Policy,
}

impl Default for VehicleSetup {
    fn default() -> Self {
        let bounds = ControlBounds::new(0.0, 2.0, 1.0, 1.0).expect("valid default bounds");
        Self {
            spec: VehicleSpec::new(2.0, 15.0, bounds, 0.25).expect("valid default spec"),
            policy: Policy::Autonomous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JoustConfig {
    pub circle_diameter: f64,
    pub n_vehicles: usize,
    pub speed_range: [f64; 2],
    pub speed_reset_period: f64,
    pub disturbance_range: [f64; 2],
    /// Number of legs, or the cap on legs when `target_encounters` is set.
    pub n_legs: usize,
    /// Stop at the first leg where the cumulative encounter count reaches this.
    pub target_encounters: Option<usize>,
    pub dt: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Pair range below which a leg produces an encounter record (m).
    pub encounter_threshold: f64,
    pub capture_radius: f64,
    /// Leg timeout as a multiple of the slowest unobstructed crossing time.
    pub timeout_factor: f64,
}

impl Default for JoustConfig {
    fn default() -> Self {
        Self {
            circle_diameter: 64.0,
            n_vehicles: 4,
            speed_range: [1.0, 2.0],
            speed_reset_period: 100.0,
            disturbance_range: [0.01, 0.02],
            n_legs: 100_000,
            target_encounters: Some(5_000),
            dt: 0.1,
            seed: 0,
            mode: Mode::ColregsPlusCbf,
            encounter_threshold: 32.0,
            capture_radius: 3.0,
            timeout_factor: 4.0,
        }
    }
}

impl JoustConfig {
    pub fn timeout(&self) -> f64 {
        self.timeout_factor * self.circle_diameter / self.speed_range[0]
    }
}

/// Everything needed to run legs: mission layout, vehicles, and tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub joust: JoustConfig,
    /// Per-vehicle setups by id; missing entries use [`VehicleSetup::default`].
    pub vehicles: Vec<VehicleSetup>,
    pub alpha_gain: f64,
    pub colregs: ColregsParams,
    pub gains: BehaviorGains,
    /// Filter weights; `None` derives them from each vehicle's offset.
    pub weights: Option<QpWeights>,
    pub gate_constraint: GateConstraint,
    /// Keep per-tick logs for legs with index below this.
    pub trajectory_legs: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            joust: JoustConfig::default(),
            vehicles: Vec::new(),
            alpha_gain: 1.0,
            colregs: ColregsParams::default(),
            gains: BehaviorGains::default(),
            weights: None,
            gate_constraint: GateConstraint::default(),
            trajectory_legs: 0,
        }
    }
}

impl Scenario {
    pub fn vehicle(&self, id: usize) -> VehicleSetup {
        self.vehicles.get(id).copied().unwrap_or_default()
    }

    pub fn weights_for(&self, spec: &VehicleSpec) -> QpWeights {
        self.weights.unwrap_or_else(|| QpWeights::for_gamma(spec.gamma))
    }

    pub fn validate(&self) -> Result<()> {
        let j = &self.joust;
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if j.n_vehicles == 0 {
            return bad("n_vehicles", "need at least one vehicle");
        }
        if self.vehicles.len() > j.n_vehicles {
            return bad("vehicles", "more vehicle setups than n_vehicles");
        }
        if !(j.dt > 0.0 && j.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(j.circle_diameter > 0.0) {
            return bad("circle_diameter", "must be positive");
        }
        if !(j.speed_range[0] > 0.0 && j.speed_range[0] <= j.speed_range[1]) {
            return bad("speed_range", "need 0 < low <= high");
        }
        if !(j.disturbance_range[0] >= 0.0 && j.disturbance_range[0] <= j.disturbance_range[1]) {
            return bad("disturbance_range", "need 0 <= low <= high");
        }
        if !(j.speed_reset_period > 0.0) {
            return bad("speed_reset_period", "must be positive");
        }
        if !(j.capture_radius > 0.0) {
            return bad("capture_radius", "must be positive");
        }
        if !(j.timeout_factor >= 1.0) {
            return bad("timeout_factor", "must be at least 1");
        }
        if !(j.encounter_threshold > 0.0) {
            return bad("encounter_threshold", "must be positive");
        }
        if !(self.alpha_gain > 0.0) {
            return bad("alpha_gain", "must be positive");
        }
        let g = &self.gains;
        if !(g.heading_gain > 0.0 && g.transit_weight >= 0.0 && g.transit_speed_penalty >= 0.0) {
            return bad("gains", "heading_gain must be positive, transit weights nonnegative");
        }
        if !(g.transit_heading_span > 0.0 && g.transit_heading_span <= std::f64::consts::PI) {
            return bad("transit_heading_span", "must lie in (0, pi]");
        }
        self.colregs.validate().map_err(|reason| Error::InvalidParameter { name: "colregs", reason })?;
        for id in 0..j.n_vehicles {
            let v = self.vehicle(id);
            if j.speed_range[1] > v.spec.bounds.thr_max {
                return Err(Error::InvalidSpec(format!("vehicle {id}: speed_range exceeds thr_max")));
            }
            if j.circle_diameter <= 2.0 * v.spec.r_safe {
                log::warn!("circle diameter {} is within twice r_safe {}", j.circle_diameter, v.spec.r_safe);
            }
        }
        Ok(())
    }
}

/// Start pose, goal and randomized schedule of one vehicle for one leg.
#[derive(Debug, Clone, PartialEq)]
pub struct SpawnedVehicle {
    pub id: usize,
    pub start: VehicleState,
    pub goal: WaypointGoal,
    /// Nominal speed for each `speed_reset_period` window of the leg.
    pub speed_schedule: Vec<f64>,
    pub disturbance: [f64; 2],
}

impl SpawnedVehicle {
    pub fn speed_at(&self, t: f64, period: f64) -> f64 {
        let k = (t / period).floor().max(0.0) as usize;
        self.speed_schedule[k.min(self.speed_schedule.len() - 1)]
    }
}

pub fn leg_rng(seed: u64, leg_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(leg_index as u64);
    rng
}

/// Places vehicles at evenly spaced angles on the circle, facing their
/// antipodal goals, and draws speeds and disturbances.
pub fn spawn_leg(config: &JoustConfig, leg_index: usize) -> Vec<SpawnedVehicle> {
    let mut rng = leg_rng(config.seed, leg_index);
    let radius = 0.5 * config.circle_diameter;
    let windows = (config.timeout() / config.speed_reset_period).ceil() as usize + 1;
    (0..config.n_vehicles)
        .map(|id| {
            let phi = std::f64::consts::TAU * id as f64 / config.n_vehicles as f64;
            let (s, c) = phi.sin_cos();
            let start = VehicleState::new(radius * c, radius * s, phi + std::f64::consts::PI);
            let speed_schedule: Vec<f64> = (0..windows).map(|_| draw(&mut rng, config.speed_range)).collect();
            let mag = draw(&mut rng, config.disturbance_range);
            let dir = rng.gen_range(0.0..std::f64::consts::TAU);
            SpawnedVehicle {
                id,
                start,
                goal: WaypointGoal {
                    target: [-radius * c, -radius * s],
                    desired_speed: speed_schedule[0],
                    capture_radius: config.capture_radius,
                },
                speed_schedule,
                disturbance: [mag * dir.cos(), mag * dir.sin()],
            }
        })
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    pub range: f64,
    /// Bearing of the second vehicle from the first, and of the first from
    /// the second, each relative to the observer's heading.
    pub bearing: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub vehicle_pair: (usize, usize),
    pub leg_index: usize,
    pub min_range: f64,
    pub relative_track: Vec<TrackSample>,
    pub leg_time: [f64; 2],
    pub leg_distance: [f64; 2],
}

/// One vehicle's row of the per-tick log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub vehicle_id: usize,
    pub state: VehicleState,
    pub u_nom: ControlInput,
    pub u_safe: ControlInput,
    pub slack_total: f64,
    /// Smallest barrier value against any other vehicle (`None` when alone).
    pub min_h: Option<f64>,
}

/// Barrier value of one ordered pair after a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBarrier {
    pub ego: usize,
    pub contact: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Transit,
    /// Scripted full turn at the goal; holds the heading swept so far.
    Turning(f64),
    Holding,
}

#[derive(Debug, Clone)]
struct Runtime {
    setup: VehicleSetup,
    spawn: SpawnedVehicle,
    state: VehicleState,
    prev: VehicleState,
    phase: Phase,
    arrival: Option<f64>,
    distance: f64,
    external: ControlInput,
}

struct PairTrack {
    pair: (usize, usize),
    samples: Vec<TrackSample>,
}

/// Diagnostics and scores of one leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegOutcome {
    pub leg_index: usize,
    pub encounters: Vec<EncounterRecord>,
    /// Autonomous vehicles only.
    pub traversals: Vec<TraversalStats>,
    pub timed_out: bool,
    pub duration: f64,
    pub slacked_ticks: u64,
    pub min_range: Option<f64>,
    pub trajectory: Option<Vec<TickRecord>>,
}

/// A leg that can be advanced one tick at a time.
pub struct Leg<'a> {
    scenario: &'a Scenario,
    leg_index: usize,
    vehicles: Vec<Runtime>,
    grid: CandidateGrid,
    tick: u64,
    pairs: Vec<PairTrack>,
    min_range: Option<f64>,
    slacked_ticks: u64,
    log: Option<Vec<TickRecord>>,
    last_ticks: Vec<TickRecord>,
    barriers: Vec<PairBarrier>,
    timeout: f64,
}

impl<'a> Leg<'a> {
    pub fn new(scenario: &'a Scenario, leg_index: usize) -> Self {
        let spawned = spawn_leg(&scenario.joust, leg_index);
        Self::from_spawn(scenario, leg_index, spawned)
    }

    pub fn from_spawn(scenario: &'a Scenario, leg_index: usize, spawned: Vec<SpawnedVehicle>) -> Self {
        let vehicles: Vec<Runtime> = spawned
            .into_iter()
            .map(|s| Runtime {
                setup: scenario.vehicle(s.id),
                state: s.start,
                prev: s.start,
                spawn: s,
                phase: Phase::Transit,
                arrival: None,
                distance: 0.0,
                external: ControlInput::zero(),
            })
            .collect();
        let thr_max = vehicles.iter().map(|v| v.setup.spec.bounds.thr_max).fold(0.0, f64::max);
        let n = vehicles.len();
        let pairs =
            (0..n).flat_map(|i| (i + 1..n).map(move |j| PairTrack { pair: (i, j), samples: Vec::new() })).collect();
        Self {
            scenario,
            leg_index,
            vehicles,
            grid: CandidateGrid::standard(thr_max),
            tick: 0,
            pairs,
            min_range: None,
            slacked_ticks: 0,
            log: (leg_index < scenario.trajectory_legs).then(Vec::new),
            last_ticks: Vec::new(),
            barriers: Vec::new(),
            timeout: scenario.joust.timeout(),
        }
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.joust.dt
    }

    pub fn states(&self) -> Vec<VehicleState> {
        self.vehicles.iter().map(|v| v.state).collect()
    }

    pub fn last_ticks(&self) -> &[TickRecord] {
        &self.last_ticks
    }

    pub fn barriers(&self) -> &[PairBarrier] {
        &self.barriers
    }

    /// Sets the command of an `External` vehicle; it persists until replaced.
    pub fn command(&mut self, id: usize, u: ControlInput) -> Result<()> {
        let v = self.vehicles.get_mut(id).filter(|v| v.setup.policy == Policy::External).ok_or_else(|| {
            Error::InvalidParameter { name: "vehicle", reason: format!("vehicle {id} is not externally driven") }
        })?;
        v.external = u;
        Ok(())
    }

    pub fn timed_out(&self) -> bool {
        self.time() >= self.timeout - 0.5 * self.scenario.joust.dt
    }

    /// All non-external vehicles have reached their goals, or time ran out.
    pub fn done(&self) -> bool {
        self.timed_out()
            || self.vehicles.iter().filter(|v| v.setup.policy != Policy::External).all(|v| v.arrival.is_some())
    }

    fn observe(&self, ego: usize) -> (Vec<ContactView>, Vec<ContactTrack>) {
        let dt = self.scenario.joust.dt;
        let mut views = Vec::with_capacity(self.vehicles.len() - 1);
        let mut tracks = Vec::with_capacity(self.vehicles.len() - 1);
        for (id, v) in self.vehicles.iter().enumerate() {
            if id == ego {
                continue;
            }
            let view = ContactView::new(id, v.state, v.setup.spec.bounds, v.setup.spec.gamma);
            let velocity = [(v.state.x - v.prev.x) / dt, (v.state.y - v.prev.y) / dt];
            views.push(view);
            tracks.push(ContactTrack { view, velocity });
        }
        (views, tracks)
    }

    fn decide(&self, id: usize) -> Result<(ControlInput, ControlInput, f64)> {
        let sc = self.scenario;
        let v = &self.vehicles[id];
        let spec = &v.setup.spec;
        let mut goal = v.spawn.goal;
        goal.desired_speed = v.spawn.speed_at(self.time(), sc.joust.speed_reset_period);
        let gain = sc.gains.heading_gain;
        let nominal = match (v.phase, v.setup.policy) {
            (_, Policy::External) => v.external,
            (Phase::Transit, Policy::StraightLine) => behaviors::waypoint_control(&v.state, &goal, gain, &spec.bounds),
            (Phase::Transit, Policy::Autonomous) => {
                let (views, tracks) = self.observe(id);
                let u_nom = if sc.joust.mode.uses_colregs() {
                    behaviors::blend(&v.state, &goal, &tracks, &sc.colregs, &self.grid, &sc.gains, &spec.bounds)
                } else {
                    behaviors::waypoint_control(&v.state, &goal, gain, &spec.bounds)
                };
                if sc.joust.mode.uses_cbf() {
                    let params = BarrierParams::new(spec.r_safe, sc.alpha_gain);
                    let res = filter_with_gate(
                        &u_nom,
                        &v.state,
                        spec,
                        &views,
                        &params,
                        &sc.weights_for(spec),
                        sc.gate_constraint,
                    )?;
                    return Ok((u_nom, clamp(&res.u_safe, spec), res.slack_total()));
                }
                u_nom
            }
            (Phase::Turning(_), _) => {
                let knee = spec.rudder_gate_threshold * spec.bounds.thr_max;
                ControlInput::new(knee, spec.bounds.rud_max)
            }
            (Phase::Holding, _) => ControlInput::zero(),
        };
        Ok((nominal, clamp(&nominal, spec), 0.0))
    }

    /// Advances every vehicle by one tick from a common snapshot.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.scenario.joust.dt;
        let t = self.time();
        let n = self.vehicles.len();
        let mut ticks = Vec::with_capacity(n);
        for id in 0..n {
            let (u_nom, u_safe, slack) = self.decide(id)?;
            if slack > 0.0 {
                self.slacked_ticks += 1;
            }
            let v = &self.vehicles[id];
            let min_h = self
                .vehicles
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != id)
                .map(|(_, o)| h_pair(&v.state, &o.state, v.setup.spec.r_safe))
                .reduce(f64::min);
            ticks.push(TickRecord { t, vehicle_id: id, state: v.state, u_nom, u_safe, slack_total: slack, min_h });
        }
        let t_next = (self.tick + 1) as f64 * dt;
        for (v, rec) in self.vehicles.iter_mut().zip(&ticks) {
            let next = step(&v.state, &rec.u_safe, v.spawn.disturbance, dt, v.setup.spec.gamma);
            v.prev = v.state;
            v.state = next;
            match v.phase {
                Phase::Transit => {
                    v.distance += v.prev.distance_to(&v.state);
                    if v.setup.policy != Policy::External && v.spawn.goal.captured(&v.state) {
                        v.arrival = Some(t_next);
                        v.phase = Phase::Turning(0.0);
                    }
                }
                Phase::Turning(swept) => {
                    let swept = swept + (rec.u_safe.u_rud * dt).abs();
                    v.phase = if swept >= std::f64::consts::TAU { Phase::Holding } else { Phase::Turning(swept) };
                }
                Phase::Holding => {}
            }
        }
        self.tick += 1;
        self.track_pairs(t_next);
        self.barriers.clear();
        for (i, a) in self.vehicles.iter().enumerate() {
            for (j, b) in self.vehicles.iter().enumerate() {
                if i != j {
                    self.barriers.push(PairBarrier {
                        ego: i,
                        contact: j,
                        h: h_pair(&a.state, &b.state, a.setup.spec.r_safe),
                    });
                }
            }
        }
        if let Some(log) = self.log.as_mut() {
            log.extend_from_slice(&ticks);
        }
        self.last_ticks = ticks;
        Ok(())
    }

    fn track_pairs(&mut self, t: f64) {
        let threshold = self.scenario.joust.encounter_threshold;
        for p in &mut self.pairs {
            let (a, b) = (&self.vehicles[p.pair.0].state, &self.vehicles[p.pair.1].state);
            let range = a.distance_to(b);
            self.min_range = Some(self.min_range.map_or(range, |m: f64| m.min(range)));
            if range < threshold {
                let ab = crate::wrap_angle((b.y - a.y).atan2(b.x - a.x) - a.theta);
                let ba = crate::wrap_angle((a.y - b.y).atan2(a.x - b.x) - b.theta);
                p.samples.push(TrackSample { t, range, bearing: [ab, ba] });
            }
        }
    }

    /// Runs to completion and scores the leg.
    pub fn run(mut self) -> Result<LegOutcome> {
        while !self.done() {
            self.step()?;
        }
        self.finish()
    }

    fn finish(self) -> Result<LegOutcome> {
        let end = self.time();
        let sc = self.scenario;
        let leg_time = |v: &Runtime| v.arrival.unwrap_or(end);
        let mut traversals = Vec::new();
        for v in self.vehicles.iter().filter(|v| v.setup.policy == Policy::Autonomous) {
            let (bt, bd) = baseline_traversal(sc, &v.setup, &v.spawn);
            traversals.push(TraversalStats {
                vehicle_id: v.spawn.id,
                time: leg_time(v),
                distance: v.distance,
                baseline_time: bt,
                baseline_distance: bd,
            });
        }
        let encounters = self
            .pairs
            .into_iter()
            .filter(|p| !p.samples.is_empty())
            .map(|p| {
                let (a, b) = (&self.vehicles[p.pair.0], &self.vehicles[p.pair.1]);
                EncounterRecord {
                    vehicle_pair: p.pair,
                    leg_index: self.leg_index,
                    min_range: p.samples.iter().map(|s| s.range).fold(f64::INFINITY, f64::min),
                    leg_time: [leg_time(a), leg_time(b)],
                    leg_distance: [a.distance, b.distance],
                    relative_track: p.samples,
                }
            })
            .collect();
        let timed_out = self.vehicles.iter().any(|v| v.setup.policy != Policy::External && v.arrival.is_none());
        if timed_out {
            log::debug!("leg {} timed out after {end} s", self.leg_index);
        }
        Ok(LegOutcome {
            leg_index: self.leg_index,
            encounters,
            traversals,
            timed_out,
            duration: end,
            slacked_ticks: self.slacked_ticks,
            min_range: self.min_range,
            trajectory: self.log,
        })
    }
}

/// Unobstructed crossing of one vehicle with the same speed schedule and
/// disturbance: (time, distance). Timeouts report the elapsed time.
pub fn baseline_traversal(scenario: &Scenario, setup: &VehicleSetup, spawn: &SpawnedVehicle) -> (f64, f64) {
    let j = &scenario.joust;
    let spec = &setup.spec;
    let mut state = spawn.start;
    let mut goal = spawn.goal;
    let mut distance = 0.0;
    let mut tick = 0u64;
    let timeout = j.timeout();
    loop {
        let t = tick as f64 * j.dt;
        if t >= timeout - 0.5 * j.dt {
            return (t, distance);
        }
        goal.desired_speed = spawn.speed_at(t, j.speed_reset_period);
        let u = clamp(&behaviors::waypoint_control(&state, &goal, scenario.gains.heading_gain, &spec.bounds), spec);
        let next = step(&state, &u, spawn.disturbance, j.dt, spec.gamma);
        distance += state.distance_to(&next);
        state = next;
        tick += 1;
        if goal.captured(&state) {
            return ((tick as f64) * j.dt, distance);
        }
    }
}

pub fn run_leg(scenario: &Scenario, leg_index: usize) -> Result<LegOutcome> {
    Leg::new(scenario, leg_index).run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub mode: Mode,
    pub seed: u64,
    pub legs: Vec<LegOutcome>,
}

impl CampaignResult {
    pub fn encounters(&self) -> impl Iterator<Item = &EncounterRecord> {
        self.legs.iter().flat_map(|l| l.encounters.iter())
    }

    pub fn encounter_count(&self) -> usize {
        self.legs.iter().map(|l| l.encounters.len()).sum()
    }

    pub fn encounter_grid(&self, template: &EncounterGrid) -> EncounterGrid {
        let mut grid = template.empty_like();
        for leg in &self.legs {
            grid.merge(&metrics::bin_encounters(&leg.encounters, template)).expect("same shape");
        }
        grid
    }

    pub fn summary(&self, template: &EncounterGrid) -> MetricsSummary {
        let mut safety = metrics::SafetyCounts::default();
        for leg in &self.legs {
            let s = metrics::score_safety(&leg.encounters);
            safety.near_misses += s.near_misses;
            safety.collisions += s.collisions;
        }
        let traversals: Vec<TraversalStats> = self.legs.iter().flat_map(|l| l.traversals.iter().copied()).collect();
        let eff = metrics::score_efficiency(&traversals);
        let grid = self.encounter_grid(template);
        MetricsSummary {
            mode: self.mode.to_string(),
            seed: self.seed,
            legs: self.legs.len(),
            encounters: self.encounter_count(),
            near_misses: safety.near_misses,
            collisions: safety.collisions,
            min_range: self.legs.iter().filter_map(|l| l.min_range).reduce(f64::min),
            avg_extra_time_pct: eff.extra_time_pct,
            avg_extra_distance_pct: eff.extra_distance_pct,
            coverage_variance: metrics::coverage_variance(&grid).ok(),
            timeouts: self.legs.iter().filter(|l| l.timed_out).count(),
            slacked_ticks: self.legs.iter().map(|l| l.slacked_ticks).sum(),
        }
    }
}

/// Legs simulated concurrently per batch. Fixed so that the stopping point,
/// and hence the result, never depends on the worker count.
const BATCH: usize = 16;

/// Runs legs until the encounter target (or the leg count) is reached.
/// `threads` caps the worker pool; `None` uses rayon's default.
pub fn run_campaign(scenario: &Scenario, threads: Option<usize>) -> Result<CampaignResult> {
    scenario.validate()?;
    if scenario.vehicles.iter().any(|v| v.policy == Policy::External) {
        return Err(Error::InvalidSpec("externally driven vehicles need the gateway, not a batch campaign".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter { name: "threads", reason: e.to_string() })?;
    let j = &scenario.joust;
    let mut legs = Vec::new();
    let mut encounters = 0usize;
    let reached = |e: usize| j.target_encounters.is_some_and(|t| e >= t);
    'outer: while legs.len() < j.n_legs && !reached(encounters) {
        let start = legs.len();
        let end = (start + BATCH).min(j.n_legs);
        let batch: Vec<Result<LegOutcome>> =
            pool.install(|| (start..end).into_par_iter().map(|k| run_leg(scenario, k)).collect());
        for leg in batch {
            let leg = leg?;
            encounters += leg.encounters.len();
            legs.push(leg);
            if reached(encounters) {
                break 'outer;
            }
        }
    }
    Ok(CampaignResult { mode: j.mode, seed: j.seed, legs })
}
