//! Extrinsic calibration of cameras mounted on a planar mobile robot.
//!
//! Robot odometry and camera-to-pattern poses are combined in an `AX = XB`
//! least-squares problem. Because planar motion leaves the camera height
//! unobservable, a camera height measured from a detected and validated
//! ground plane is added as an extra residual. Cameras that see the pattern
//! at the same time can additionally be tied together by pairwise
//! constraints on their relative pose.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod cli;
pub mod dataset;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod plane;
pub mod sim;
