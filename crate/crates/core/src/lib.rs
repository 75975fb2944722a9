//! Low-rank dynamical networks (LRDNs): models, simulation, causal Wiener
//! filters and directed topology recovery from sampled output processes.

pub mod error;
pub mod experiment;
pub mod model;
pub mod polymat;
pub mod regress;
pub mod sim;
pub mod spectral;
pub mod topology;
pub mod wiener;

pub use error::{LrdnError, Result};
pub use model::{DirectedGraph, GeneratorConfig, LrdnModel, SupportSpec};
pub use polymat::PolynomialMatrix;
pub use sim::TimeSeries;
