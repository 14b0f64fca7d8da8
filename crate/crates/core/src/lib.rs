//! Finite element pricing of European calls under the RAPM nonlinear
//! Black–Scholes model with transaction costs.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: parameters, the log-moneyness transform and closed forms.
//! * [`mesh`]: P1/P2 meshes of the truncated domain and shape functions.
//! * [`elements`]: element matrices and the two treatments of `v^{4/3}`.
//! * [`assembly`]: global band matrices and Dirichlet lifting vectors.
//! * [`solver`]: the linearized θ-scheme with Rannacher startup.
//! * [`reference_fdm`]: an independent finite difference solver.
//! * [`report`]: CSV tables with metadata headers.
//!
//! ```
//! use rapm_fem::prelude::*;
//!
//! let params = RapmParams::reference();
//! let mesh = uniform_mesh(3.0, 0.02, ElementOrder::P1).unwrap();
//! let cfg = SolverConfig::default();
//! let prices = price_option(&params, &mesh, &cfg, &[75.0]).unwrap();
//! let bs = bs_call_price(75.0, 0.0, &params);
//! assert!(prices[0].1 > bs);
//! ```

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Band and triangular-solve loops read best with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod banded;
pub mod elements;
pub mod error;
pub mod mesh;
pub mod model;
pub mod reference_fdm;
pub mod report;
pub mod solver;

pub use error::{Error, ExistenceCondition, NonFiniteFailure, Result};

pub mod prelude {
    pub use crate::assembly::{assemble, lifting_vectors, BoundaryState, GlobalSystem, LiftingVectors};
    pub use crate::elements::{NonlinearVariant, PowerMode};
    pub use crate::error::{Error, Result};
    pub use crate::mesh::{uniform_mesh, uniform_mesh_with_elements, ElementOrder, Mesh1D};
    pub use crate::model::{bs_call_price, RapmParams, TruncatedDomain};
    pub use crate::reference_fdm::{fdm_solve, FdmConfig};
    pub use crate::solver::{
        price_option, solve_nonlinear_phase, BoundaryExtrapolation, BoundaryWeighting, MassMode, SolutionSurface,
        SolverConfig,
    };
}
