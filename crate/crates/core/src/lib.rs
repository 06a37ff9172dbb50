//! Exact distributions, Markov kernels, couplings and moment identities
//! for the number of fixed points of a uniform random permutation.
//!
//! Most algorithms are generic over [`Scalar`], implemented for exact
//! rationals and for `f64`/`f32`.

pub mod altcouplings;
pub mod combin;
pub mod coupling;
pub mod error;
pub mod exactdist;
pub mod interval;
pub mod io;
pub mod kernels;
pub mod lumping;
pub mod moments;
pub mod perm;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use exactdist::{Dist, TvConvention};
pub use interval::Interval;
pub use kernels::{PFunction, StochasticKernel};
pub use perm::{CycleType, Guard, Permutation};
pub use scalar::Scalar;

pub type Rational = num_rational::BigRational;
pub type ExactDist = Dist<Rational>;
pub type FloatDist = Dist<f64>;
pub type ExactKernel = StochasticKernel<Rational>;
pub type FloatKernel = StochasticKernel<f64>;
