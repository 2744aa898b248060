use core::fmt;

/// Errors produced by the model, estimation, and design layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix entries violate conjugate symmetry beyond tolerance.
    NotHermitian,
    /// A matrix required to be positive semi-definite has an eigenvalue
    /// below the numerical tolerance.
    NotPsd { min_eigenvalue: f64, tolerance: f64 },
    /// Factorization of a matrix required to be positive definite failed.
    SingularMatrix,
    /// Operand dimensions are inconsistent.
    DimensionMismatch { expected: usize, found: usize },
    /// Grid AP placement requested with an AP count that is not a
    /// perfect square.
    NotPerfectSquare { ap_count: usize },
    /// A configuration field is out of its valid range.
    InvalidConfig(&'static str),
    /// The eigenvalue iteration did not converge.
    EigenNoConvergence,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotHermitian => write!(f, "matrix is not Hermitian within tolerance"),
            Error::NotPsd {
                min_eigenvalue,
                tolerance,
            } => write!(
                f,
                "matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e} < -{tolerance:e})"
            ),
            Error::SingularMatrix => write!(f, "matrix is singular or not positive definite"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotPerfectSquare { ap_count } => {
                write!(f, "grid placement requires a perfect-square AP count, got {ap_count}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::EigenNoConvergence => write!(f, "eigenvalue iteration did not converge"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
