//! H1 finite element spaces of order 1 and 2, grid functions and assembly of form terms.

pub mod basis;
pub mod quadrature;

mod assemble;
mod space;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::symbolic::ExprError;

pub use assemble::{assemble_bilinear, assemble_linear, integrate, project, Bindings};
pub use space::{FESpace, GridFunction};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("no quadrature rule of degree {0}")]
    QuadratureDegree(usize),
    #[error("unknown region marker '{0}'")]
    UnknownMarker(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
