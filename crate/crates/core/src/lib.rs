//! Quantization dimension of self-similar measures under the geometric-mean error.
//!
//! The crate covers finite and countably infinite iterated function systems:
//! model construction and separation checks ([`ifs`]), the invariant measure
//! ([`measure`]), finite maximal antichains and their codebooks
//! ([`antichain`]), error evaluation and Lloyd-type improvement
//! ([`quantizer`]), one-dimensional minimal metrics ([`metrics`]) and
//! dimension estimation and stability experiments ([`dimension`]).

pub mod antichain;
pub mod dimension;
pub mod dist;
pub mod error;
pub mod ifs;
pub mod measure;
pub mod metrics;
pub mod quadrature;
pub mod quantizer;
pub mod rng;

pub use antichain::{Antichain, Codebook};
pub use dist::{Discrete, Distribution1d, Shifted, Uniform};
pub use error::{Error, Result};
pub use ifs::{make_finite_ifs, make_geometric_family, IfsModel, Interval, SimilarityMap, Word};
pub use measure::{SampleBatch, SelfSimilarMeasure};
