//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polygon must have at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),

    #[error("polygon is self-intersecting near vertex {0}")]
    SelfIntersecting(usize),

    #[error("need at least {needed} sites, got {got}")]
    TooFewSites { needed: usize, got: usize },

    #[error("duplicate sites: {first} and {second} share a location")]
    DuplicateSites { first: String, second: String },

    #[error("site {0} lies outside the boundary polygon")]
    SiteOutsideBoundary(String),

    #[error("commune {id}: electrified households ({electrified}) exceed total ({total})")]
    BadHouseholdCounts {
        id: String,
        electrified: u64,
        total: u64,
    },

    #[error("commune {0} has no households")]
    NoHouseholds(String),

    #[error("cell {0} intersects no commune and cannot be labeled")]
    UnlabeledCell(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("could not place {placed} of {requested} towers with {min_separation_km} km separation; boundary too small")]
    TowerPlacement {
        requested: usize,
        placed: usize,
        min_separation_km: f64,
    },

    #[error("record {index}: unknown tower id {id}")]
    UnknownTower { index: usize, id: String },

    #[error("interaction matrices do not share a tower registry")]
    RegistryMismatch,

    #[error("centrality needs at least 2 towers, got {0}")]
    TooFewTowers(usize),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("training set contains a single class ({0}); need at least 2")]
    SingleClass(usize),

    #[error("model is not a tree ensemble; use the surrogate explainer instead")]
    NotTreeEnsemble,

    #[error("exhaustive Shapley enumeration is gated to 12 features, got {0}")]
    TooManyFeaturesForExact(usize),

    #[error("background set for the surrogate explainer is empty")]
    EmptyBackground,

    #[error("per-class aggregation is only defined for Shapley explanations")]
    AllClassesUnsupported,

    #[error("explanations mix methods or feature schemas")]
    MixedExplanations,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("required input does not exist: {0}")]
    MissingPath(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
