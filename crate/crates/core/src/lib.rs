//! Badminton stroke analysis from pose keypoints, shuttle tracks and wrist IMU data.
//!
//! The numeric core is generic over [`Real`]; the aliases below fix it to `f64`
//! (and `f32` where a lighter footprint is useful).

pub mod config;
pub mod court;
pub mod ingest;
pub mod kinematics;
pub mod reference;
pub mod report;
pub mod pipeline;
mod scalar;
pub mod shuttlesim;
pub mod strokes;

pub use scalar::Real;

pub type SkeletonFrame = kinematics::SkeletonFrame<f64>;
pub type SkeletonFrameF32 = kinematics::SkeletonFrame<f32>;
pub type JointAngleSeries = kinematics::JointAngleSeries<f64>;
pub type JointAngleSeriesF32 = kinematics::JointAngleSeries<f32>;
pub type StrokeFeatures = strokes::StrokeFeatures<f64>;
pub type EnvelopeModel = reference::EnvelopeModel<f64>;
pub type LandingHeatmap = court::LandingHeatmap<f64>;
pub type LandingHeatmapF32 = court::LandingHeatmap<f32>;
