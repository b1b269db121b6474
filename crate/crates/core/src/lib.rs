//! Densities of subordinators, of their first-passage (inverse) processes,
//! and of the associated potential measures.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod compare;
pub mod conditions;
pub mod config;
pub mod contour;
pub mod error;
pub mod mc;
pub mod quad;
pub mod query;
pub mod saddle;
pub mod series;
pub mod special;

pub use bernstein::{BernsteinDescriptor, JumpPart, LevyMeasure, Sector, C64};
pub use contour::{ContourKind, ContourSpec};
pub use error::{Error, Result};
pub use query::{DensityQuery, Method, MethodResult, Target};
