//! Distributed worst-case control barrier function collision avoidance for
//! surface vessels, plus the joust-mission simulator and metrics used to
//! evaluate it.
//!
//! The vehicle model, barrier constraints, and QP filter are generic over the
//! scalar type ([`Scalar`], implemented for `f32` and `f64`); the aliases
//! below fix them to `f64`, which is what the simulator and metrics use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod behaviors;
pub mod cbf;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod qp_filter;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{wrap_angle, Scalar};

pub type VehicleState = dynamics::VehicleState<f64>;
pub type ControlInput = dynamics::ControlInput<f64>;
pub type ControlBounds = dynamics::ControlBounds<f64>;
pub type VehicleSpec = dynamics::VehicleSpec<f64>;
pub type BarrierParams = cbf::BarrierParams<f64>;
pub type ContactView = cbf::ContactView<f64>;
pub type PairwiseConstraint = cbf::PairwiseConstraint<f64>;
pub type QpWeights = qp_filter::QpWeights<f64>;
pub type FilterResult = qp_filter::FilterResult<f64>;

pub type VehicleStateF32 = dynamics::VehicleState<f32>;
pub type ControlInputF32 = dynamics::ControlInput<f32>;
pub type FilterResultF32 = qp_filter::FilterResult<f32>;
