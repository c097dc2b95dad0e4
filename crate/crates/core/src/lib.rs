//! Software stack for a single-IMU vibrotactile balance vest.
//!
//! Raw 6-axis samples flow through a complementary filter ([`fusion`]),
//! discrete gait and fall detectors ([`detection`]), a logistic fall-risk
//! predictor ([`riskmodel`]) and three stimulation strategies
//! ([`feedback`]). [`telemetry`] carries samples off the vest over UDP and
//! stores sessions; [`simulator`] produces synthetic streams with known
//! ground truth. [`pipeline`] wires the stages together for both live and
//! offline use.

// NaN must fail validation, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod feedback;
pub mod fusion;
pub mod pipeline;
pub mod riskmodel;
pub mod simulator;
pub mod telemetry;
pub mod types;

pub use error::{Error, ErrorClass, Result};
pub use fusion::FilterConfig;
pub use types::{
    wrap_angle, GaitEvent, GaitEventKind, ImuSample, MotorCommand, OrientationState, SessionMetadata, SessionRecording,
    TimedCommand, Vec3,
};
