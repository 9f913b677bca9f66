//! Numerical tools for rational maps of the Riemann sphere: orbits and their
//! empirical measures, exact Wasserstein distances, periodic-orbit solving and
//! closing, and parameter solvers for one-parameter families.

pub mod bifurcation;
pub mod error;
pub mod jet;
pub mod measures;
pub mod orbitstat;
pub mod periodic;
pub mod poly;
pub mod ratmap;
pub mod serde_util;
pub mod sphere;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, MetaMeasure, ReferenceSampler};
pub use periodic::PeriodicOrbit;
pub use ratmap::RationalMap;
pub use sphere::{chordal_distance, MobiusMap, SpherePoint};
