//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong outside of plain programmer errors (which panic).
#[derive(Debug)]
pub enum Error {
    /// A mesh file or cell list contained no cells.
    EmptyMesh,
    /// Two cells overlap or meet in something other than a full face or a vertex.
    Conformity {
        cell_a: usize,
        cell_b: usize,
        detail: String,
    },
    /// The union of the cells is not connected.
    Disconnected,
    /// A mesh file line could not be parsed.
    MeshFormat { line: usize, detail: String },
    /// Degree or size ratios across a face exceed the configured grading bound.
    Grading { faces: Vec<usize> },
    /// The operation needs a larger polynomial degree than was given.
    DegreeTooSmall { p: u32 },
    /// Newton iteration for a Lobatto node failed to converge.
    NonConvergence { index: usize },
    /// A Cholesky pivot was not positive; the matrix is not positive definite.
    CholeskyFailure { row: usize },
    /// The Jacobi eigensolver did not reach its off-diagonal tolerance.
    EigenNonConvergence { off_diagonal: f64 },
    /// PCG met a nonpositive preconditioned inner product.
    Breakdown { iteration: usize, value: f64 },
    /// PCG hit the iteration cap; carries the final iterate and its stats.
    MaxIterReached {
        solution: Vec<f64>,
        report: crate::krylov::SolveReport,
    },
    /// An operator was applied to a vector of the wrong length.
    DimensionMismatch { expected: usize, got: usize },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyMesh => write!(f, "mesh contains no cells"),
            Error::Conformity {
                cell_a,
                cell_b,
                detail,
            } => write!(f, "cells {cell_a} and {cell_b} are not conforming: {detail}"),
            Error::Disconnected => write!(f, "mesh is not connected"),
            Error::MeshFormat { line, detail } => {
                write!(f, "mesh file line {line}: {detail}")
            }
            Error::Grading { faces } => write!(
                f,
                "grading bound exceeded across {} face(s): {:?}",
                faces.len(),
                faces
            ),
            Error::DegreeTooSmall { p } => write!(f, "degree {p} is too small here"),
            Error::NonConvergence { index } => {
                write!(f, "Newton iteration for Lobatto node {index} did not converge")
            }
            Error::CholeskyFailure { row } => {
                write!(f, "nonpositive Cholesky pivot in row {row}")
            }
            Error::EigenNonConvergence { off_diagonal } => write!(
                f,
                "Jacobi sweeps stalled with off-diagonal norm {off_diagonal:e}"
            ),
            Error::Breakdown { iteration, value } => write!(
                f,
                "PCG breakdown at iteration {iteration}: <r, Cr> = {value:e}"
            ),
            Error::MaxIterReached { report, .. } => write!(
                f,
                "PCG stopped at the iteration cap with relative residual {:e}",
                report.relative_residual
            ),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
