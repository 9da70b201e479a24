use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("unknown link {0}")]
    UnknownLink(String),

    #[error("unknown scheme {0:?} (expected STNC-OHAF, STNC-AF or TDMA-OH)")]
    UnknownScheme(String),

    #[error("closed-form outage needs at least one relay; use exact_direct_outage for K = 0")]
    NoRelays,

    #[error("diversity fit needs at least 3 usable points, got {0}")]
    TooFewPoints(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
