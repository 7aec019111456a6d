//! Pairwise collision barrier and the worst-case linear constraints it induces
//! on the ego input.
//!
//! For ego `i` and contact `j` the barrier is
//! `h = (x_i - x_j)^2 + (y_i - y_j)^2 - r_safe^2`. Its time derivative splits
//! into an ego term `L_g h^{x_i} u_i` and a contact term `L_g h^{x_j} u_j`. The
//! contact input is unknown, so it is replaced by its minimum over the
//! contact's input box (`zeta_min`), leaving one halfplane in the ego input:
//!
//! ```text
//! -L_g h^{x_i} u_i <= zeta_min + k * h
//! ```
//!
//! Only observed states and published input limits are used, so every
//! vessel can assemble its own constraint set without exchanging controls.

use serde::{Deserialize, Serialize};

use crate::dynamics::{g_matrix, ControlBounds, VehicleSpec, VehicleState};
use crate::scalar::Scalar;

/// Barrier tuning: safety radius and the gain of the linear class-K term
/// `alpha(h) = alpha_gain * h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams<T> {
    pub r_safe: T,
    pub alpha_gain: T,
    /// When a contact's heading is flagged unknown, take the worst case over
    /// all headings instead of trusting the last reported one.
    pub unknown_heading_fallback: bool,
}

impl<T: Scalar> BarrierParams<T> {
    pub fn new(r_safe: T, alpha_gain: T) -> Self {
        assert!(r_safe > T::zero() && alpha_gain > T::zero(), "r_safe and alpha_gain must be positive");
        Self { r_safe, alpha_gain, unknown_heading_fallback: false }
    }

    pub fn alpha(&self, h: T) -> T {
        self.alpha_gain * h
    }
}

/// What the ego knows about one neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactView<T> {
    pub id: usize,
    pub state: VehicleState<T>,
    /// Input box of the contact, or a conservative superset of it.
    pub bounds: ControlBounds<T>,
    pub gamma: T,
    pub heading_known: bool,
}

impl<T: Scalar> ContactView<T> {
    pub fn new(id: usize, state: VehicleState<T>, bounds: ControlBounds<T>, gamma: T) -> Self {
        Self { id, state, bounds, gamma, heading_known: true }
    }
}

/// One halfplane `a . u <= b` on the ego input `u = [u_thr, u_rud]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConstraint<T> {
    /// `-L_g h^{x_i}`.
    pub a: [T; 2],
    /// `zeta_min + alpha(h)`.
    pub b: T,
    /// Barrier value when the constraint was built.
    pub h_value: T,
    pub contact_id: usize,
}

impl<T: Scalar> PairwiseConstraint<T> {
    pub fn lhs(&self, u: [T; 2]) -> T {
        self.a[0] * u[0] + self.a[1] * u[1]
    }

    pub fn is_satisfied(&self, u: [T; 2]) -> bool {
        self.lhs(u) <= self.b
    }

    /// Positive part of `a . u - b`.
    pub fn violation(&self, u: [T; 2]) -> T {
        (self.lhs(u) - self.b).max(T::zero())
    }
}

/// Squared control-point separation minus `r_safe^2`.
pub fn h_pair<T: Scalar>(ego: &VehicleState<T>, contact: &VehicleState<T>, r_safe: T) -> T {
    let dx = ego.x - contact.x;
    let dy = ego.y - contact.y;
    dx * dx + dy * dy - r_safe * r_safe
}

/// `L_g h^{x_i}`: gradient of `h_pair` in the ego state times `g(x_i)`.
pub fn lie_derivative_ego<T: Scalar>(ego: &VehicleState<T>, contact: &VehicleState<T>, gamma: T) -> [T; 2] {
    let two = T::lit(2.0);
    let grad = [two * (ego.x - contact.x), two * (ego.y - contact.y), T::zero()];
    row_times_g(grad, &g_matrix(ego, gamma))
}

/// `L_g h^{x_j}`: gradient of `h_pair` in the contact state times `g(x_j)`.
/// The positional gradient is `[2(x_j - x_i), 2(y_j - y_i), 0]`.
pub fn lie_derivative_contact<T: Scalar>(contact: &VehicleState<T>, ego: &VehicleState<T>, contact_gamma: T) -> [T; 2] {
    let two = T::lit(2.0);
    let grad = [two * (contact.x - ego.x), two * (contact.y - ego.y), T::zero()];
    row_times_g(grad, &g_matrix(contact, contact_gamma))
}

fn row_times_g<T: Scalar>(row: [T; 3], g: &[[T; 2]; 3]) -> [T; 2] {
    [row[0] * g[0][0] + row[1] * g[1][0] + row[2] * g[2][0], row[0] * g[0][1] + row[1] * g[1][1] + row[2] * g[2][1]]
}

/// Minimum of `c . u` over the box. The LP optimum of a box is attained at a
/// vertex, coordinate by coordinate.
pub fn box_lp_min<T: Scalar>(c: [T; 2], bounds: &ControlBounds<T>) -> T {
    let lo = bounds.lower();
    let hi = bounds.upper();
    (0..2).map(|k| (c[k] * lo[k]).min(c[k] * hi[k])).fold(T::zero(), |acc, v| acc + v)
}

/// Worst-case contribution of the contact to `h_dot`.
pub fn zeta_min<T: Scalar>(contact: &ContactView<T>, ego: &VehicleState<T>) -> T {
    let c = lie_derivative_contact(&contact.state, ego, contact.gamma);
    box_lp_min(c, &contact.bounds)
}

/// `zeta_min` minimized over every contact heading on a 1 degree sweep.
pub fn zeta_min_any_heading<T: Scalar>(contact: &ContactView<T>, ego: &VehicleState<T>) -> T {
    let mut worst = T::infinity();
    for deg in -179..=180 {
        let mut probe = contact.state;
        probe.theta = T::lit(f64::from(deg).to_radians());
        let c = lie_derivative_contact(&probe, ego, contact.gamma);
        worst = worst.min(box_lp_min(c, &contact.bounds));
    }
    worst
}

/// Builds the halfplane induced by one contact.
pub fn build_constraint<T: Scalar>(
    ego: &VehicleState<T>,
    ego_spec: &VehicleSpec<T>,
    contact: &ContactView<T>,
    params: &BarrierParams<T>,
) -> PairwiseConstraint<T> {
    let lg = lie_derivative_ego(ego, &contact.state, ego_spec.gamma);
    let zeta = if !contact.heading_known && params.unknown_heading_fallback {
        zeta_min_any_heading(contact, ego)
    } else {
        zeta_min(contact, ego)
    };
    let h = h_pair(ego, &contact.state, params.r_safe);
    PairwiseConstraint { a: [-lg[0], -lg[1]], b: zeta + params.alpha(h), h_value: h, contact_id: contact.id }
}

/// One constraint per contact, ordered by contact id.
pub fn assemble_constraints<T: Scalar>(
    ego: &VehicleState<T>,
    ego_spec: &VehicleSpec<T>,
    contacts: &[ContactView<T>],
    params: &BarrierParams<T>,
) -> Vec<PairwiseConstraint<T>> {
    let mut rows: Vec<_> = contacts.iter().map(|c| build_constraint(ego, ego_spec, c, params)).collect();
    rows.sort_by_key(|r| r.contact_id);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlInput;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn st(x: f64, y: f64, th: f64) -> VehicleState<f64> {
        VehicleState::new(x, y, th)
    }

    fn ego_spec() -> VehicleSpec<f64> {
        VehicleSpec::new(2.0, 15.0, ControlBounds::new(0.0, 2.0, 1.0, 1.0).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn h_pair_examples() {
        assert_eq!(h_pair(&st(0.0, 0.0, 0.0), &st(15.0, 0.0, 1.0), 15.0), 0.0);
        assert_eq!(h_pair(&st(0.0, 0.0, 0.0), &st(30.0, 0.0, 0.0), 15.0), 675.0);
        let p = st(3.0, -2.0, 0.4);
        assert_eq!(h_pair(&p, &p, 15.0), -225.0);
    }

    #[test]
    fn lie_derivative_examples() {
        let l = lie_derivative_ego(&st(0.0, 0.0, 0.0), &st(10.0, 0.0, 0.0), 2.0);
        assert_eq!(l, [-20.0, 0.0]);
        let l = lie_derivative_ego(&st(0.0, 0.0, FRAC_PI_2), &st(10.0, 0.0, 0.0), 2.0);
        assert!(l[0].abs() < 1e-12 && (l[1] - 40.0).abs() < 1e-12);
        let l = lie_derivative_ego(&st(0.0, 0.0, 0.0), &st(-10.0, 0.0, 0.0), 2.0);
        assert_eq!(l, [20.0, 0.0]);
    }

    #[test]
    fn zeta_min_examples() {
        let b = ControlBounds::new(1.0, 2.0, 0.5, 0.5).unwrap();
        assert_eq!(box_lp_min([-20.0, 0.0], &b), -40.0);
        assert_eq!(box_lp_min([0.0, 0.0], &b), 0.0);
        // Contact heading at the ego from 10 m: L_g h^{x_j} = [-20, 0].
        let contact = ContactView::new(1, st(10.0, 0.0, PI), b, 2.0);
        let c = lie_derivative_contact(&contact.state, &st(0.0, 0.0, 0.0), 2.0);
        assert!((c[0] + 20.0).abs() < 1e-12 && c[1].abs() < 1e-12);
        assert!((zeta_min(&contact, &st(0.0, 0.0, 0.0)) + 40.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_min_degenerate_box_is_zero() {
        // A contact that can only sit still has thr_max, rud_max -> 0+.
        let b = ControlBounds { thr_min: 0.0, thr_max: 0.0, rud_min: 0.0, rud_max: 0.0 };
        let contact = ContactView::new(1, st(10.0, 3.0, 0.3), b, 2.0);
        assert_eq!(zeta_min(&contact, &st(0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn any_heading_is_no_less_conservative() {
        let b = ControlBounds::new(0.0, 2.0, 1.0, 1.0).unwrap();
        let ego = st(0.0, 0.0, 0.0);
        for th in [-2.0, -0.3, 0.0, 1.1, 3.0] {
            let contact = ContactView::new(1, st(12.0, 5.0, th), b, 2.0);
            assert!(zeta_min_any_heading(&contact, &ego) <= zeta_min(&contact, &ego) + 1e-9);
        }
        let mut params = BarrierParams::new(15.0, 1.0);
        params.unknown_heading_fallback = true;
        let mut contact = ContactView::new(1, st(12.0, 5.0, 0.0), b, 2.0);
        contact.heading_known = false;
        let row = build_constraint(&ego, &ego_spec(), &contact, &params);
        let h = h_pair(&ego, &contact.state, 15.0);
        assert!((row.b - (zeta_min_any_heading(&contact, &ego) + h)).abs() < 1e-9);
    }

    #[test]
    fn boundary_constraint_is_pure_zeta() {
        let b = ControlBounds::new(0.0, 2.0, 1.0, 1.0).unwrap();
        let contact = ContactView::new(4, st(15.0, 0.0, PI), b, 2.0);
        let ego = st(0.0, 0.0, 0.0);
        let row = build_constraint(&ego, &ego_spec(), &contact, &BarrierParams::new(15.0, 1.0));
        assert_eq!(row.h_value, 0.0);
        assert_eq!(row.b, zeta_min(&contact, &ego));
        assert_eq!(row.contact_id, 4);
    }

    #[test]
    fn far_contact_constraint_inactive_on_whole_box() {
        let spec = ego_spec();
        let contact = ContactView::new(1, st(60.0, 10.0, PI), spec.bounds, 2.0);
        let ego = st(0.0, 0.0, 0.0);
        let row = build_constraint(&ego, &spec, &contact, &BarrierParams::new(15.0, 1.0));
        assert!(row.b > 0.0);
        for v in spec.bounds.vertices() {
            assert!(row.is_satisfied(v.as_array()), "vertex {v:?} violates far constraint");
        }
    }

    #[test]
    fn dead_ahead_contact_excludes_full_thrust() {
        let spec = ego_spec();
        let contact = ContactView::new(1, st(10.0, 0.0, PI), spec.bounds, 2.0);
        let ego = st(0.0, 0.0, 0.0);
        let row = build_constraint(&ego, &spec, &contact, &BarrierParams::new(15.0, 1.0));
        assert!(!row.is_satisfied([spec.bounds.thr_max, 0.0]));
    }

    #[test]
    fn assemble_is_ordered_and_complete() {
        let spec = ego_spec();
        let p = BarrierParams::new(15.0, 1.0);
        let ego = st(0.0, 0.0, 0.0);
        assert!(assemble_constraints(&ego, &spec, &[], &p).is_empty());
        let contacts = [
            ContactView::new(7, st(30.0, 0.0, PI), spec.bounds, 2.0),
            ContactView::new(2, st(0.0, 25.0, -FRAC_PI_2), spec.bounds, 2.0),
            ContactView::new(5, st(-20.0, -20.0, 0.5), spec.bounds, 2.0),
        ];
        let rows = assemble_constraints(&ego, &spec, &contacts, &p);
        assert_eq!(rows.iter().map(|r| r.contact_id).collect::<Vec<_>>(), vec![2, 5, 7]);
        let dup = [contacts[0], contacts[0]];
        let rows = assemble_constraints(&ego, &spec, &dup, &p);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn alpha_scaling_doubles_margin() {
        let spec = ego_spec();
        let ego = st(1.0, 2.0, 0.3);
        let contact = ContactView::new(1, st(20.0, -4.0, 2.0), spec.bounds, 2.0);
        let r1 = build_constraint(&ego, &spec, &contact, &BarrierParams::new(15.0, 1.0));
        let r2 = build_constraint(&ego, &spec, &contact, &BarrierParams::new(15.0, 2.0));
        let z = zeta_min(&contact, &ego);
        assert!(((r2.b - z) - 2.0 * (r1.b - z)).abs() < 1e-9);
    }

    #[test]
    fn f32_instantiation() {
        let ego = VehicleState::new(0.0f32, 0.0, 0.0);
        let other = VehicleState::new(10.0f32, 0.0, 0.0);
        assert_eq!(lie_derivative_ego(&ego, &other, 2.0f32), [-20.0, 0.0]);
    }

    fn arb_state() -> impl Strategy<Value = VehicleState<f64>> {
        (-50.0f64..50.0, -50.0f64..50.0, -PI..PI).prop_map(|(x, y, t)| st(x, y, t))
    }

    proptest! {
        #[test]
        fn h_pair_symmetric(a in arb_state(), b in arb_state(), r in 0.1f64..30.0) {
            prop_assert_eq!(h_pair(&a, &b, r), h_pair(&b, &a, r));
        }

        #[test]
        fn ego_lie_derivative_nonzero_for_distinct_points(a in arb_state(), b in arb_state(), gamma in 0.1f64..5.0) {
            prop_assume!(a.distance_to(&b) > 1e-6);
            let l = lie_derivative_ego(&a, &b, gamma);
            prop_assert!(l[0] != 0.0 || l[1] != 0.0);
        }

        #[test]
        fn zeta_is_a_lower_bound(a in arb_state(), b in arb_state(), t in 0.0f64..1.0, r in 0.0f64..1.0) {
            let bounds = ControlBounds::new(0.5, 2.0, 0.8, 1.0).unwrap();
            let contact = ContactView::new(1, b, bounds, 2.0);
            let c = lie_derivative_contact(&b, &a, 2.0);
            let u = ControlInput::new(-0.5 + 2.5 * t, -0.8 + 1.8 * r);
            prop_assert!(zeta_min(&contact, &a) <= c[0] * u.u_thr + c[1] * u.u_rud + 1e-9);
        }
    }
}
