use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("OSM parse error at byte {offset}: {message}")]
    OsmParse { offset: u64, message: String },

    #[error("degenerate intersection: {branches} branch(es) found, need at least 2")]
    DegenerateIntersection { branches: usize },

    #[error("sampling pattern of radius {radius_px:.1} px around ({u:.1}, {v:.1}) exceeds the {side}x{side} image")]
    PatternOutOfBounds {
        u: f64,
        v: f64,
        radius_px: f64,
        side: usize,
    },

    #[error("descriptor length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("database config fingerprint does not match the query config: {0}")]
    FingerprintMismatch(String),

    #[error("invalid database file: {0}")]
    Database(String),

    #[error("invalid image file: {0}")]
    Image(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("scenario generation failed: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
