//! Subgrid-scale stabilized finite elements for a Brinkman flow that
//! advects a scalar through a variable-coefficient advection-diffusion-
//! reaction equation, on the unit square.
//!
//! The flow uses P2 velocity and P1 pressure, the transport P2. Both can be
//! discretized with plain Galerkin or with algebraic subgrid-scale (SGS)
//! stabilization; [`harness`] runs manufactured-solution convergence
//! studies comparing the two.

pub mod adr;
pub mod assembly;
pub mod error;
pub mod fe;
pub mod fields;
pub mod flow;
pub mod harness;
pub mod mesh;
pub mod mms;
pub mod sparse;
pub mod vtk;

use std::fmt;
use std::str::FromStr;

pub use error::{Error, Iterate, Result};

/// A point of the plane.
pub type Point = [f64; 2];

/// Discretization variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Galerkin,
    Sgs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Galerkin => "galerkin",
            Method::Sgs => "sgs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Method::Galerkin),
            "sgs" => Ok(Method::Sgs),
            other => Err(format!("unknown method '{other}' (expected galerkin or sgs)")),
        }
    }
}
