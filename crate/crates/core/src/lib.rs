//! 3D multi-object tracking over per-window pointmaps.
//!
//! Detections (boxes, masks, labels) are lifted into 3D through pointmaps, each
//! produced by a reconstruction window with its own coordinate gauge. Windows
//! are chained into one global frame with a least-squares 4x4 alignment, and
//! objects are associated frame to frame by 3D proximity with a Hungarian
//! assignment and a bounded identity memory.
//!
//! Module map:
//!
//! * [`interchange`]: shared data model and the on-disk sequence format.
//! * [`geometry`]: 4x4 transform algebra and alignment estimators.
//! * [`assoc`]: KD-tree, mutual nearest neighbours, object costs, Hungarian.
//! * [`tracker`]: window planning, lifting, alignment and identity propagation.
//! * [`simulator`]: deterministic synthetic scenes with ground truth.
//! * [`metrics`]: HOTA, IDF1 and MT/ML/Frag, plus the MOTChallenge text format.

pub mod assoc;
pub mod geometry;
pub mod interchange;
pub mod metrics;
pub mod simulator;
pub mod tracker;

mod error;

pub use error::{Error, Result};

/// 3D point in scene units.
pub type Point3 = nalgebra::Point3<f64>;

pub use assoc::{Assignment, CostMode, MatchPair, SpatialIndex};
pub use geometry::{AlignConfig, AlignmentResult, Transform4, TransformFamily};
pub use interchange::{
    BBox2D, Detection, FrameId, FrameSource, ImageDims, Pixel, PointMap, SegMask, Sequence,
    SequenceDir, SequenceManifest,
};
pub use metrics::{EvalConfig, EvalReport, Similarity};
pub use simulator::{GroundTruth, SceneConfig};
pub use tracker::{
    ObjectObservation, TrackBuffer, TrackId, TrackRow, TrackTable, TrackerConfig, WindowSpec,
};
