//! Railway track alignment reconstruction from classified LiDAR point clouds.
//!
//! The pipeline rasterizes the trackbed, extracts a centreline skeleton,
//! fits lines, circular arcs and clothoid transitions to it and exports the
//! result as GeoJSON and IFC alignment entities.

pub mod alignment;
pub mod evaluation;
pub mod fitting;
pub mod geom;
pub mod pcd_io;
pub mod pipeline;
pub mod raster;
pub mod skeleton;
pub mod synthetic;
