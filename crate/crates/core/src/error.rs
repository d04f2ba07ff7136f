use thiserror::Error;

/// Errors raised across the mapping, planning and simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// The rotation is too close to a half turn for the principal logarithm.
    #[error("rotation angle {angle:.9} rad is outside the principal log branch")]
    BranchAmbiguity { angle: f64 },

    #[error("position ({x:.3}, {y:.3}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("pose lies inside an occupied cell")]
    PoseInCollision,

    /// No viewpoint lies within the interpolation radius of the pose.
    #[error("empty viewpoint neighborhood at ({x:.3}, {y:.3})")]
    DegenerateNeighborhood { x: f64, y: f64 },

    /// Every neighboring viewpoint sits outside the ML free space.
    #[error("all neighboring viewpoints have zero free distance")]
    NeighborhoodInCollision,

    #[error("no frontiers left: exploration complete")]
    ExplorationComplete,

    #[error("none of the {clusters} frontier clusters is reachable")]
    UnreachableFrontier { clusters: usize },

    #[error("brute-force oracle refused: {cells} cells exceeds the limit of {limit}")]
    OracleTooLarge { cells: usize, limit: usize },

    #[error("trajectory has {got} poses, expected {expected}")]
    TrajectoryLength { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("environment generation failed: {0}")]
    Environment(String),

    #[error("grid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
