//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column '{column}' not found in CSV header")]
    MissingColumn { column: String },

    #[error("row {row}: column '{column}' has unparseable numeric value '{value}'")]
    BadNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: column '{column}' is empty; missing values are rejected, not imputed")]
    MissingValue { row: usize, column: String },

    #[error(
        "row {row}: coordinate ({lat_deg}, {lon_deg}) out of range; \
         latitude must lie in [-90, 90] and longitude in [-180, 180] degrees"
    )]
    CoordinateOutOfRange {
        row: usize,
        lat_deg: f64,
        lon_deg: f64,
    },

    #[error("coordinate ({lat_deg}, {lon_deg}) out of range")]
    InvalidCoordinate { lat_deg: f64, lon_deg: f64 },

    #[error(
        "row {row}: column '{column}' value {value} must be positive under log min-max normalization"
    )]
    NonPositiveLogValue {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("input contains no usable data rows")]
    EmptyInput,

    #[error("at least {needed} records are required, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error(
        "attributes must be ordered numerical first, then categorical, then at most one spatial: {0}"
    )]
    SchemaOrder(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported schema_version {found} (this build reads version {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("attribute '{name}' is not in the schema")]
    UnknownAttribute { name: String },

    #[error("stratification attribute '{name}' is not categorical")]
    NonCategoricalStratum { name: String },

    #[error("sample fraction must lie in (0, 1], got {0}")]
    BadSampleFraction(f64),

    #[error("categorical index vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("record does not match the model's schema: {0}")]
    SchemaMismatch(String),

    #[error("k = {k} exceeds the number of records ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("k must be at least 1")]
    KZero,

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error(
        "average categorical Gini impurity is zero (every categorical attribute is constant); \
         supply lambda1 explicitly"
    )]
    DegenerateGini,

    #[error(
        "geodetic distances to the spatial center have zero variance (all coordinates coincide); \
         supply lambda2 explicitly"
    )]
    DegenerateSpatialVariance,

    #[error("schema has no numerical attributes, so balance weights cannot be estimated")]
    NoNumericalAttributes,

    #[error("schema has no categorical attributes, so lambda1 is undefined")]
    NoCategoricalAttributes,

    #[error("schema has no spatial attribute, so lambda2 is undefined")]
    NoSpatialAttribute,

    #[error("{scope}: total expected claims are zero, the actual-to-expected ratio is undefined")]
    UndefinedRatio { scope: String },

    #[error("experience record {row}: {reason}")]
    BadExperienceRecord { row: usize, reason: String },

    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    BadConfidenceLevel(f64),

    #[error("probability must lie strictly between 0 and 1, got {0}")]
    BadProbability(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
