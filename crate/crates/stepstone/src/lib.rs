//! Simulation and verification suite for a one-dimensional stepping-stone
//! population model with quenched random colony sizes.
//!
//! The crate integrates the forward interacting-diffusion system, runs its
//! dual coalescing random walks, computes closed-form effective parameters
//! (`sigma2`, `gamma`) for enumerable size distributions, and cross-checks
//! forward and dual behaviour against exact finite-state kernels and a
//! Brownian-flow reference with delayed coalescence.
//!
//! The primary interface is the `examples/` directory; each example is a
//! runnable demonstration of one capability:
//!
//! ```text
//! cargo run --example environment        # sampling, serialization, reversible weights
//! cargo run --example effective_params   # closed-form sigma2/gamma and their inequalities
//! cargo run --example scale_function     # harmonic coordinates and the walk martingale
//! cargo run --example forward_simulation # Euler-Maruyama integration and pairings
//! cargo run --example dual_walks         # event-driven walks, MSD, CLT variance
//! cargo run --example coalescence        # pair simulation and gamma from meeting times
//! cargo run --example heat_kernel        # exact kernels, local CLT error table
//! cargo run --example kernel_bounds      # Dirichlet form and on-diagonal bounds
//! cargo run --example meeting_chain      # environment viewed from two walks
//! cargo run --example duality            # moment duality, k = 1 and k = 2
//! cargo run --example brownian_flow      # delayed-coalescence reference and its oracle
//! cargo run --example universality       # dual coalescence vs Brownian flow across environments
//! ```
//!
//! A thin command-line binary (`stepstone`) exposes the same drivers as
//! subcommands for batch runs; see the crate README.

pub mod config;
pub mod duality;
pub mod env;
pub mod error;
pub mod forward;
pub mod kernel;
pub mod report;
pub mod runner;
pub mod seeds;
pub mod stats;
pub mod suite;
pub mod walks;

pub use error::{Error, Result};
