//! Star products and Toeplitz quantization on the torus `R^{2n} / Z^{2n}`.
//!
//! - [`trig_poly`]: trigonometric polynomials, the function space everything acts on.
//! - [`func_expr`]: a small expression language and band-limited projection onto [`TrigPoly`].
//! - [`star_products`]: the three bidifferential star products, heat flows and equivalence maps.
//! - [`quantization`]: Toeplitz operators on the Bohr–Sommerfeld bases at level `k`.
//! - [`analysis`]: operator norms, error operators and convergence sweeps.
//! - [`config`], [`cli`], [`check`]: experiment configs, reports and the verification suite.

pub mod analysis;
pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod func_expr;
pub mod quantization;
pub mod star_products;
pub mod trig_poly;

pub use analysis::{
    error_intertwine, error_product, fit_slope, operator_norm, riemann_sum_error, run_experiment, trace_error,
    ConvergenceReport, NormKind, Profile, SlopeFit,
};
pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use func_expr::{parse, project, Expr, ProjectionSpec};
pub use quantization::{
    assemble_toeplitz, intertwine_fgq, operator_trace, quantum_torus_generators, HilbertSpec, Polarization,
    QuantumOperator, QuantumState,
};
pub use star_products::{
    berezin_transform, bidiff, equivalence_map, star_exact, star_truncated, trace_dq, FormalSeries, HbarValue,
    Orientation, SymmetricTensor,
};
pub use trig_poly::{FreqVector, TrigPoly};
