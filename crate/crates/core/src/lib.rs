//! Semantic mesh refinement: multiview photo-consistency and class-aware
//! smoothness priors for labeled triangle meshes, alternated with MRF-based
//! relabeling of the faces.

pub mod autodiff;
pub mod camera;
pub mod energy;
pub mod error;
pub mod image;
pub mod mesh;
pub mod raster;
pub mod relabel;
pub mod reproject;
pub mod synth;

pub use error::{Error, Result};

/// Class ids used by the synthetic scenes and the default geometric prior.
pub mod classes {
    use crate::mesh::Label;

    pub const GROUND: Label = 1;
    pub const FACADE: Label = 2;
    pub const ROOF: Label = 3;
    pub const VEGETATION: Label = 4;
    pub const NUM_CLASSES: usize = 4;
}
