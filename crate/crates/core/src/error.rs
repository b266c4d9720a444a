use crate::grid::Cube;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cube {cube} does not belong to a grid of depth {depth}")]
    CubeOutsideGrid { cube: Cube, depth: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("singular matrix: eigenvalue {eigenvalue:e} is below the floor{}", cell_suffix(*.cell))]
    Singular { eigenvalue: f64, cell: Option<usize> },

    #[error("body is not absorbing: support value {value:e} in direction {direction}")]
    NotAbsorbing { direction: usize, value: f64 },

    #[error("degenerate norm in direction {direction:?}{}", cell_suffix(*.cell))]
    DegenerateNorm { direction: Vec<f64>, cell: Option<usize> },

    #[error("John ellipsoid solver stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("cell {cell}: {msg}")]
    InvalidCell { cell: usize, msg: String },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn cell_suffix(cell: Option<usize>) -> String {
    match cell {
        Some(c) => format!(" at cell {c}"),
        None => String::new(),
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
