//! Multi depth panorama (MDP) reconstruction and novel view synthesis.
//!
//! The pipeline turns a calibrated ring of perspective images into a stack of
//! cylindrical RGBDα shells around the rig and renders new views from it by
//! forward splatting with a soft z-buffer.

pub mod compositing;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod mdp;
pub mod mpi;
pub mod pose;
pub mod psv;
pub mod raster;
pub mod render;
pub mod rig_file;
pub mod service;

pub use error::{Error, ErrorKind, Result};
