//! Electrode-array localization in cochlear CT volumes and DVF-based
//! electrode configuration selection.

pub mod array;
pub mod centerline;
pub mod cli;
pub mod cochlea;
pub mod config;
pub mod dvf;
pub mod error;
pub mod filters;
pub mod geom;
pub mod graph;
pub mod medial_axis;
pub mod metrics;
pub mod params;
pub mod phantom;
pub mod result;
pub mod snake;
pub mod volume;

pub use error::{Error, Result, Stage};
pub use geom::{vec3, Vec3};
pub use volume::{BoundingBox, MixtureFit, Volume3};
