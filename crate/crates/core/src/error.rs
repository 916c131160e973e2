use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },
    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("variance level {level} is not above the minimum attainable variance {min_variance}")]
    DegenerateLevel { level: f64, min_variance: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("weights sum to {0}, not 1")]
    OffSimplexAffineHull(f64),
    #[error("simplex is degenerate: {0}")]
    DegenerateSimplex(String),
    #[error("the sphere does not intersect the simplex")]
    EmptyIntersection,
    #[error("point lies within tolerance of the simplex boundary")]
    NumericallyOnBoundary,
    #[error("segment from vertex {0} to the interior center does not cross the sphere")]
    NoCrossing(usize),
    #[error("anchor point lies outside the simplex")]
    AnchorOutsideSimplex,
    #[error("facet normal is parallel to the boundary point")]
    TangentFacet,
    #[error("relative component volumes have not been computed")]
    VolumesNotCached,
    #[error("sample mean direction is degenerate")]
    DegenerateMean,
    #[error("annealing schedule stalled at alpha = {0}")]
    ScheduleStall(f64),
    #[error("ratio estimate did not converge after {0} samples")]
    NonConvergence(usize),
    #[error("chains have zero within-chain variance on coordinate {0}")]
    ZeroVariance(usize),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("dates are not strictly increasing at row {0}")]
    NonMonotoneDates(usize),
    #[error("too few observations: need {need}, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("too few assets: need {need}, got {got}")]
    TooFewAssets { need: usize, got: usize },
    #[error("series too short: need {need}, got {got}")]
    TooShortSeries { need: usize, got: usize },
    #[error("degenerate variance in series")]
    DegenerateVariance,
    #[error("missing data for asset {asset} in holding window starting {start}")]
    CoverageGap { asset: String, start: String },
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::EmptyIntersection
                | Error::NumericallyOnBoundary
                | Error::NoCrossing(_)
                | Error::AnchorOutsideSimplex
                | Error::TangentFacet
                | Error::DegenerateMean
                | Error::ScheduleStall(_)
                | Error::NonConvergence(_)
                | Error::ZeroVariance(_)
                | Error::DegenerateVariance
                | Error::DegenerateLevel { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedCsv(e.to_string())
    }
}
