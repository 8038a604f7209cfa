use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("invalid quarter `{0}` (expected YYYYQn)")]
    QuarterFormat(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown series `{0}`")]
    MissingSeries(String),

    #[error("singular design: columns {} are linearly dependent on earlier columns", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("insufficient sample: {rows} usable rows for {columns} columns (need at least {required})")]
    InsufficientSample {
        rows: usize,
        columns: usize,
        required: usize,
    },

    #[error("numerically singular system: {0}")]
    Singular(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("horizon {horizon}: {source}")]
    AtHorizon {
        horizon: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("identification failed: {accepted_sign} of {draws} draws passed the sign restriction, {accepted_narrative} passed the narrative restrictions")]
    Identification {
        draws: usize,
        accepted_sign: usize,
        accepted_narrative: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_horizon(self, horizon: usize) -> Self {
        Error::AtHorizon {
            horizon,
            source: Box::new(self),
        }
    }
}
