//! Mixed-variable global sensitivity analysis built on latent-variable
//! Gaussian process surrogates, and sensitivity-aware multi-objective
//! Bayesian optimization over combinatorial design spaces.

pub mod benchfns;
pub mod error;
pub mod gsa;
pub mod lvgp;
pub mod mobo;
pub mod optim;
pub mod sampling;
pub mod seed;
pub mod space;

pub use error::{Error, Result};
pub use space::{Dataset, MixedDesignSpace, MixedPoint};
