use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Contract violations reported by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A field or mask failed one of its structural invariants.
    InvalidField(String),
    /// Two inputs were expected to live on the same grid.
    GridMismatch,
    /// The field takes a single value everywhere.
    ConstantField,
    /// `TV(f) = 0`, nothing to extract.
    NullFunction,
    /// A region operation needed a single 4-connected component.
    NotIndecomposable { components: usize },
    /// A superlevel family is not nested: `masks[index + 1] ⊄ masks[index]`.
    NotNested { index: usize },
    /// The seed passed to an extraction is not a component of a superlevel set.
    InvalidSeed(String),
    /// A field that should have indecomposable superlevels does not.
    NotMonotone,
    /// The requested level coincides with a sample value.
    NonRegularLevel(f64),
    /// Segments whose gradient magnitude is below the floor.
    GradientFloor { segments: Vec<usize> },
    /// The right-hand side of a closed-curve problem does not sum to zero.
    NoSteadySolution { total_mass: f64 },
    /// The cumulative weight on the circle is not strictly increasing.
    NonIncreasingWeight,
    /// The histogram carries no mass.
    EmptyPushforward,
    /// The grid does not cover the region a generator needs.
    InsufficientCoverage(String),
    /// Generic bad argument.
    InvalidArgument(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidField(msg) => write!(f, "invalid field: {msg}"),
            Error::GridMismatch => write!(f, "grid mismatch"),
            Error::ConstantField => write!(f, "constant field"),
            Error::NullFunction => write!(f, "null function"),
            Error::NotIndecomposable { components } => {
                write!(f, "expected indecomposable region (found {components} components)")
            }
            Error::NotNested { index } => {
                write!(f, "superlevel family not nested between masks {index} and {}", index + 1)
            }
            Error::InvalidSeed(msg) => write!(f, "invalid seed: {msg}"),
            Error::NotMonotone => write!(f, "expected monotone field; decompose it first"),
            Error::NonRegularLevel(t) => write!(f, "non-regular level {t}"),
            Error::GradientFloor { segments } => {
                write!(f, "gradient below floor on {} segments: {:?}", segments.len(), segments)
            }
            Error::NoSteadySolution { total_mass } => {
                write!(f, "no steady solution on closed curve (total mass {total_mass})")
            }
            Error::NonIncreasingWeight => write!(f, "cumulative weight is not strictly increasing"),
            Error::EmptyPushforward => write!(f, "empty pushforward"),
            Error::InsufficientCoverage(msg) => write!(f, "insufficient grid coverage: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
