pub mod algebra;
pub mod boundary;
pub mod channel;
pub mod error;
pub mod extremality;
pub mod recon;
pub mod recursion;
pub mod thresholds;

pub use algebra::Coupling;
pub use boundary::{BoundaryLaw, Branch, Regime, SolutionCatalog};
pub use error::{Error, Result};
