//! Binary top-view rasters, SE(2) algebra and the image primitives shared by
//! the map and point-cloud sides.

pub mod draw;
pub mod grid;
pub mod harris;
pub mod morph;
pub mod pgm;
pub mod pose;
pub mod raycast;
pub mod skeleton;

pub use draw::{draw_polygon, draw_polyline, draw_segment};
pub use grid::{side_for_extent, GridImage, PixelPoint};
pub use harris::{harris_corners, HarrisParams};
pub use morph::morph_close_open;
pub use pose::{compose, invert, normalize_angle, Point2, Pose2};
pub use raycast::ray_cast_visibility;
pub use skeleton::{prune_spurs, skeletonize};
