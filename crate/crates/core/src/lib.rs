//! Random dyadic homeomorphisms of [0,1], Dirichlet-kernel partial sums of
//! composed functions, Monte Carlo checks of the homeomorphism's laws, and a
//! grid explorer for the averaging equation `p(x,y) = avg_t p(x,t) p(t,y)`.

// `!(x > y)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fourier;
pub mod homeo;
pub mod output;
pub mod rng;
pub mod testfn;
pub mod verify;
pub mod zeroone;

pub use error::{Error, Result};
pub use homeo::{DyadicChain, DyadicHomeomorphism, HolderEnvelope, SplitSource};
pub use rng::RandomSource;
