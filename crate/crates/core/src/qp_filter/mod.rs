//! The safety filter: the admissible input closest to the nominal one (in a
//! weighted norm) that satisfies every pairwise barrier constraint.
//!
//! When the halfplanes and the input box have no common point, the rows that
//! are violated at the least-squares-violation point receive a nonnegative
//! slack with a large quadratic penalty, and the enlarged problem is solved
//! instead.

pub mod active_set;

use serde::{Deserialize, Serialize};

use crate::cbf::{assemble_constraints, BarrierParams, ContactView, PairwiseConstraint};
use crate::dynamics::{clamp, ControlBounds, ControlInput, VehicleSpec, VehicleState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use active_set::DiagQp;

/// Diagonal weights of `(u - u_nom)' Q (u - u_nom) + slack_penalty * sum s^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpWeights<T> {
    pub q_thr: T,
    pub q_rud: T,
    pub slack_penalty: T,
}

impl<T: Scalar> QpWeights<T> {
    pub fn new(q_thr: T, q_rud: T, slack_penalty: T) -> Result<Self> {
        for (name, v) in [("q_thr", q_thr), ("q_rud", q_rud), ("slack_penalty", slack_penalty)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
            }
        }
        Ok(Self { q_thr, q_rud, slack_penalty })
    }

    /// `q_thr = 1`, `q_rud = gamma^2` (both terms in control-point speed
    /// units), slack penalty `1e6 * max(q)`.
    pub fn for_gamma(gamma: T) -> Self {
        let q_thr = T::one();
        let q_rud = gamma * gamma;
        Self { q_thr, q_rud, slack_penalty: T::lit(1e6) * q_thr.max(q_rud) }
    }

    fn quad(&self, u: [T; 2], u_nom: [T; 2]) -> T {
        let d0 = u[0] - u_nom[0];
        let d1 = u[1] - u_nom[1];
        self.q_thr * d0 * d0 + self.q_rud * d1 * d1
    }
}

/// Slack assigned to one contact's row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack<T> {
    pub contact_id: usize,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult<T> {
    pub u_safe: ControlInput<T>,
    /// Nonempty only when the unslacked problem was infeasible.
    pub slacks: Vec<Slack<T>>,
    /// Contacts whose row holds with equality at `u_safe`.
    pub active_set: Vec<usize>,
    pub modified: bool,
    pub objective_value: T,
    /// Scaled KKT residual of the problem that produced `u_safe`.
    pub kkt_residual: T,
}

impl<T: Scalar> FilterResult<T> {
    pub fn slack_total(&self) -> T {
        self.slacks.iter().fold(T::zero(), |acc, s| acc + s.value)
    }

    pub fn slack_for(&self, contact_id: usize) -> T {
        self.slacks.iter().find(|s| s.contact_id == contact_id).map_or(T::zero(), |s| s.value)
    }
}

fn box_rows<T: Scalar>(bounds: &ControlBounds<T>, n_vars: usize) -> (Vec<Vec<T>>, Vec<T>) {
    let unit = |k: usize, sign: T| {
        let mut r = vec![T::zero(); n_vars];
        r[k] = sign;
        r
    };
    (
        vec![unit(0, T::one()), unit(0, -T::one()), unit(1, T::one()), unit(1, -T::one())],
        vec![bounds.thr_max, bounds.thr_min, bounds.rud_max, bounds.rud_min],
    )
}

fn clip<T: Scalar>(u: [T; 2], bounds: &ControlBounds<T>) -> [T; 2] {
    let lo = bounds.lower();
    let hi = bounds.upper();
    [u[0].max(lo[0]).min(hi[0]), u[1].max(lo[1]).min(hi[1])]
}

/// QP over `(u, s_k for k in slacked)` with the box and every barrier row.
/// `s_weight` multiplies `sum s^2`, `u_weight` scales the tracking term.
#[allow(clippy::too_many_arguments)]
fn build_problem<T: Scalar>(
    u_nom: [T; 2],
    constraints: &[PairwiseConstraint<T>],
    slacked: &[usize],
    bounds: &ControlBounds<T>,
    extra: &[([T; 2], T)],
    weights: &QpWeights<T>,
    u_weight: T,
    s_weight: T,
) -> DiagQp<T> {
    let n = 2 + slacked.len();
    let two = T::lit(2.0);
    let mut hess = vec![two * u_weight * weights.q_thr, two * u_weight * weights.q_rud];
    let mut lin = vec![-two * u_weight * weights.q_thr * u_nom[0], -two * u_weight * weights.q_rud * u_nom[1]];
    hess.extend(std::iter::repeat_n(two * s_weight, slacked.len()));
    lin.extend(std::iter::repeat_n(T::zero(), slacked.len()));

    let (mut rows, mut rhs) = box_rows(bounds, n);
    for (a, b) in extra {
        let mut r = vec![T::zero(); n];
        r[0] = a[0];
        r[1] = a[1];
        rows.push(r);
        rhs.push(*b);
    }
    for (k, c) in constraints.iter().enumerate() {
        let mut r = vec![T::zero(); n];
        r[0] = c.a[0];
        r[1] = c.a[1];
        if let Some(pos) = slacked.iter().position(|&s| s == k) {
            r[2 + pos] = -T::one();
        }
        rows.push(r);
        rhs.push(c.b);
    }
    for pos in 0..slacked.len() {
        let mut r = vec![T::zero(); n];
        r[2 + pos] = -T::one();
        rows.push(r);
        rhs.push(T::zero());
    }
    DiagQp { hess, lin, rows, rhs }
}

fn feasibility_tol<T: Scalar>(c: &PairwiseConstraint<T>) -> T {
    T::lit(1e-9) * (T::one() + c.b.abs() + c.a[0].abs() + c.a[1].abs())
}

/// Point of the box minimizing the sum of squared row violations, with a
/// vanishing pull toward `u_nom` to make it unique.
fn least_squares_point<T: Scalar>(
    u_nom: [T; 2],
    constraints: &[PairwiseConstraint<T>],
    bounds: &ControlBounds<T>,
    extra: &[([T; 2], T)],
    start: [T; 2],
    weights: &QpWeights<T>,
) -> Result<[T; 2]> {
    let all: Vec<usize> = (0..constraints.len()).collect();
    let reg = T::lit(1e-12) / weights.q_thr.max(weights.q_rud);
    let qp = build_problem(u_nom, constraints, &all, bounds, extra, weights, reg, T::one());
    let mut x0 = vec![start[0], start[1]];
    x0.extend(constraints.iter().map(|c| c.violation(start)));
    let sol = qp.solve_from(x0)?;
    Ok([sol.x[0], sol.x[1]])
}

/// Minimally modifies `u_nom` so that `a . u <= b` holds for every row and
/// `u` stays in `bounds`.
pub fn solve_qp<T: Scalar>(
    u_nom: &ControlInput<T>,
    constraints: &[PairwiseConstraint<T>],
    bounds: &ControlBounds<T>,
    weights: &QpWeights<T>,
) -> Result<FilterResult<T>> {
    solve_with_rows(u_nom, constraints, bounds, &[], |u| clip(u, bounds), weights)
}

/// How the thrust-gated rudder limit enters the QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateConstraint {
    /// Rudder box gated at the nominal thrust; the clamp applied afterwards
    /// re-gates at the filtered thrust.
    NominalLag,
    /// Rows `u_rud <= (rud_max / knee) u_thr` and
    /// `-u_rud <= (rud_min / knee) u_thr`, exact on the gate's ramp when
    /// reverse thrust is disabled. Falls back to `NominalLag` otherwise.
    #[default]
    Cone,
}

/// [`solve_qp`] with extra hard rows `a . u <= b` that are never slacked.
/// `project` maps `u_nom` to the starting point.
fn solve_with_rows<T: Scalar>(
    u_nom: &ControlInput<T>,
    constraints: &[PairwiseConstraint<T>],
    bounds: &ControlBounds<T>,
    extra: &[([T; 2], T)],
    project: impl Fn([T; 2]) -> [T; 2],
    weights: &QpWeights<T>,
) -> Result<FilterResult<T>> {
    let un = u_nom.as_array();
    let extra_ok = extra.iter().all(|(a, b)| a[0] * un[0] + a[1] * un[1] <= *b);
    if extra_ok && bounds.contains(u_nom) && constraints.iter().all(|c| c.is_satisfied(un)) {
        return Ok(FilterResult {
            u_safe: *u_nom,
            slacks: Vec::new(),
            active_set: constraints.iter().filter(|c| c.lhs(un) == c.b).map(|c| c.contact_id).collect(),
            modified: false,
            objective_value: T::zero(),
            kkt_residual: T::zero(),
        });
    }

    let (start, mut slacked) = if constraints.is_empty() {
        (project(un), Vec::new())
    } else {
        let u_ls = least_squares_point(un, constraints, bounds, extra, project(un), weights)?;
        let slacked: Vec<usize> = constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.violation(u_ls) > feasibility_tol(c))
            .map(|(k, _)| k)
            .collect();
        (u_ls, slacked)
    };

    // Each pass can only grow the slacked set, so this ends within m + 1 passes.
    for _ in 0..=constraints.len() {
        let qp = build_problem(un, constraints, &slacked, bounds, extra, weights, T::one(), weights.slack_penalty);
        let mut x0 = vec![start[0], start[1]];
        x0.extend(slacked.iter().map(|&k| constraints[k].violation(start)));
        let sol = qp.solve_from(x0)?;
        let u = [sol.x[0], sol.x[1]];

        let newly_violated: Vec<usize> = constraints
            .iter()
            .enumerate()
            .filter(|(k, c)| !slacked.contains(k) && c.violation(u) > feasibility_tol(c))
            .map(|(k, _)| k)
            .collect();
        if !newly_violated.is_empty() {
            slacked.extend(newly_violated);
            slacked.sort_unstable();
            continue;
        }

        let slack_vals: Vec<T> = (0..slacked.len()).map(|p| sol.x[2 + p].max(T::zero())).collect();
        let active_set = constraints
            .iter()
            .enumerate()
            .filter(|(k, c)| {
                let s = slacked.iter().position(|s| s == k).map_or(T::zero(), |p| slack_vals[p]);
                (c.lhs(u) - c.b - s).abs() <= feasibility_tol(c)
            })
            .map(|(_, c)| c.contact_id)
            .collect();
        let u_safe = ControlInput::from_array(u);
        let slack_sq = slack_vals.iter().fold(T::zero(), |acc, &s| acc + s * s);
        return Ok(FilterResult {
            u_safe,
            slacks: slacked
                .iter()
                .zip(&slack_vals)
                .map(|(&k, &value)| Slack { contact_id: constraints[k].contact_id, value })
                .collect(),
            active_set,
            modified: u_safe != *u_nom,
            objective_value: weights.quad(u, un) + weights.slack_penalty * slack_sq,
            kkt_residual: qp.kkt_residual(&sol.x, &sol.multipliers),
        });
    }
    Err(Error::Infeasible(format!("{} rows still violated with every row slacked", constraints.len())))
}

/// Assembles the barrier rows for `ego` and filters `u_nom` through them.
///
/// The rudder box is gated by the nominal thrust (the applied thrust is not
/// known until the QP returns).
pub fn filter<T: Scalar>(
    u_nom: &ControlInput<T>,
    ego: &VehicleState<T>,
    ego_spec: &VehicleSpec<T>,
    contacts: &[ContactView<T>],
    params: &BarrierParams<T>,
    weights: &QpWeights<T>,
) -> Result<FilterResult<T>> {
    filter_with_gate(u_nom, ego, ego_spec, contacts, params, weights, GateConstraint::NominalLag)
}

/// [`filter`] with a choice of how the rudder gate is imposed.
pub fn filter_with_gate<T: Scalar>(
    u_nom: &ControlInput<T>,
    ego: &VehicleState<T>,
    ego_spec: &VehicleSpec<T>,
    contacts: &[ContactView<T>],
    params: &BarrierParams<T>,
    weights: &QpWeights<T>,
    gate: GateConstraint,
) -> Result<FilterResult<T>> {
    let constraints = assemble_constraints(ego, ego_spec, contacts, params);
    let b = &ego_spec.bounds;
    let gated = ego_spec.rudder_gate_threshold > T::zero();
    if gate == GateConstraint::Cone && gated && b.thr_min == T::zero() {
        let knee = ego_spec.rudder_gate_threshold * b.thr_max;
        let rows = [([-b.rud_max / knee, T::one()], T::zero()), ([-b.rud_min / knee, -T::one()], T::zero())];
        let spec = *ego_spec;
        return solve_with_rows(
            u_nom,
            &constraints,
            b,
            &rows,
            move |u| clamp(&ControlInput::from_array(u), &spec).as_array(),
            weights,
        );
    }
    let bounds = ego_spec.gated_bounds(u_nom.u_thr);
    solve_qp(u_nom, &constraints, &bounds, weights)
}
