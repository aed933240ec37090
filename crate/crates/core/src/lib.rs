//! Elastic matching of open and closed curves in the square-root-velocity
//! framework, extended with inexact feature-point terms, and its application
//! to time alignment and interpolation of skeletal animations.

pub mod animation;
pub mod cli;
pub mod curve;
pub mod dp;
pub mod error;
pub mod features;
pub mod geometry;
pub mod grad;
pub mod interp;
pub mod io;
pub mod matcher;
pub mod warp;

pub use curve::{DiscreteCurve, SrvCurve, Topology};
pub use error::{Error, Result};
pub use interp::Interpolation;
pub use warp::Warp;
