use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode index {index} (basis has {len} modes)")]
    InvalidMode { index: usize, len: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Fock space dimension {dim} exceeds budget {budget}")]
    BudgetExceeded { dim: usize, budget: usize },
    #[error("truncation tail {tail:.3e} exceeds tolerance {tol:.3e}")]
    TruncationTail { tail: f64, tol: f64 },
    #[error("backend does not support {0}")]
    Unsupported(String),
    #[error("monomial degree {degree} exceeds admissible bound {bound} for this energy class")]
    DegreeTooHigh { degree: usize, bound: usize },
    #[error("invalid Lorentz index: {0}")]
    LorentzIndex(String),
    #[error("degenerate denominator in ratio report")]
    DegenerateDenominator,
    #[error("coupling grade mismatch: {0}")]
    CouplingGrade(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("potential is not real: max imaginary part {0:.3e}")]
    NonReal(f64),
    #[error("magnetic field inconsistent with curl of vector potential: residual {0:.3e}")]
    CurlMismatch(f64),
    #[error("no admissible KLMN pair in the scanned ladder (best a = {best_a:.4})")]
    NoKlmnPair { best_a: f64 },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("shift {shift} is not admissible (lower bound estimate {lower})")]
    IndefiniteShift { shift: f64, lower: f64 },
    #[error("form is not nonnegative (min value {0:.3e}); shift required")]
    NegativeForm(f64),
    #[error("cutoff {cutoff} exceeds the grid's resolved wavenumber {kmax}")]
    UnresolvedCutoff { cutoff: f64, kmax: f64 },
    #[error("family has no declared Wigner limit")]
    MissingLimit,
    #[error("measure has no atoms")]
    EmptyMeasure,
}

pub type Result<T> = std::result::Result<T, Error>;
