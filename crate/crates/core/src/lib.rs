//! Cross-modal road-intersection descriptors for global localization against
//! OpenStreetMap.
//!
//! Map intersections and intersections observed in accumulated, semantically
//! labeled point clouds are both reduced to binary top-view imprints, refined
//! to suppress the differences between the two modalities, and encoded as
//! compact binary strings matched by Hamming distance.

pub mod config;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod localizer;
pub mod matchdb;
pub mod osm;
pub mod raster;
pub mod render;
pub mod scan;

pub use config::{Config, Fingerprint};
pub use error::{Error, Result};
