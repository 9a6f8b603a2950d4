#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Edge-cone Kähler reference metrics: closed-form geometry, symbolic and
//! numeric curvature, Hölder norms and a regularized Monge-Ampère solver.

pub mod banded;
pub mod config;
pub mod io;
pub mod svg;
pub mod error;
pub mod grid;
pub mod holder;
pub mod jet;
pub mod curvature;
pub mod model_geometry;
pub mod parallel;
pub mod runner;
pub mod solver;
pub mod symbolic;

pub use error::{ConeError, Result};
