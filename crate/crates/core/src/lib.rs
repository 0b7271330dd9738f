//! Certified Lipschitz upper bounds for feedforward networks.
//!
//! The crate provides dense symmetric kernels ([`matrix`]), the network model
//! and its file formats ([`network`]), a family of closed-form bounds built
//! on a layerwise Schur-complement recursion ([`bounds`]), and independent
//! checks of any produced bound ([`certify`]).

pub mod bounds;
pub mod certify;
pub mod error;
pub mod matrix;
pub mod network;
pub mod rng;

pub use bounds::{
    best_of, product_bound, run_recursion, sweep_c, BestOfConfig, BoundReport, Grid,
    LayerDiagnostic, Method, MultiplierSequence, StrategyConfig,
};
pub use certify::{
    assemble_lipsdp, empirical_lower_bound, validate, verify_feasibility, LmiCertificate,
    ValidationReport,
};
pub use error::{Error, Result};
pub use matrix::{DenseMatrix, DiagonalMatrix, LowerFactor};
pub use network::{generate_random, load_network, save_network, Activation, Layer, Network};
