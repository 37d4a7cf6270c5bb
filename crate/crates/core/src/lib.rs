//! Belief-network analysis of attitude surveys: ingestion, redundancy
//! reduction, Gaussian graphical models, network thermodynamics, node
//! influence, synthetic data and external indicator correlation.

pub mod error;
pub mod external;
pub mod ggm;
pub mod influence;
pub mod ingest;
pub mod numeric;
pub mod stats;
pub mod synth;
pub mod thermo;
pub mod uva;

pub use error::{Error, Result};
