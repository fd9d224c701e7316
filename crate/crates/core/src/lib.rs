//! Wireframe parsing downstream of a convolutional backbone.
//!
//! The crate turns keypoint, offset and shift maps into line-segment
//! quadruplets, assembles them into a sparse line graph, re-scores each line
//! with a residual graph convolutional network, and evaluates the result with
//! structural average precision. A second half fuses scored 2D lines with
//! depth-derived planes into a labeled 3D wireframe.
//!
//! Everything here is pure computation on in-memory values and builds under
//! `#![no_std]` with `alloc`. File formats are exposed as byte encoders and
//! decoders; reading and writing files lives in the companion `wkit` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod annotation;
pub mod assemble;
pub mod camera;
pub mod decode;
mod error;
pub mod geom;
pub mod gnn;
pub mod grid;
pub mod linalg;
pub mod loipool;
pub(crate) mod math;
pub mod metrics;
pub mod pipeline;
pub mod supervision;
pub mod synth;
pub mod wireframe3d;

pub use annotation::Annotation;
pub use assemble::{AssembleConfig, CandidateGraph, Quadruplet};
pub use camera::{CameraFrame, Intrinsics, Pose};
pub use decode::{DecodeConfig, Keypoint, KeypointKind};
pub use error::{Error, Result};
pub use geom::{Point2, Vec3};
pub use gnn::GnnModel;
pub use grid::{Dtype, Grid, GridData, Role};
pub use loipool::{LineFeatures, PoolConfig};
pub use metrics::{SapConfig, ScoredSegment};
