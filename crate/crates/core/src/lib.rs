//! Multidimensional context-aware recommendation.
//!
//! Ratings live in a cube indexed by (user, context situation, item). Each
//! user's context situations are clustered by usage pattern with a
//! self-organizing map, the user is split into one virtual user per context
//! cluster, and collaborative filtering runs over the resulting 2-D space.
//! A context-free baseline that flattens the cube is provided for comparison,
//! together with a top-N precision/recall/F1 evaluation harness and a
//! synthetic data generator.

pub mod baseline;
pub mod cf;
pub mod cube;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod json;
pub mod pipeline;
pub mod rng;
pub mod schema;
pub mod som;
pub mod space;

pub use baseline::{flatten_cube, BaselineModel, FlatSpace};
pub use cf::UserClusterModel;
pub use cube::{load_ratings, PatternVector, RatingCube, RatingRecord};
pub use datagen::{generate, GenConfig, GeneratedData};
pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalReport, SplitConfig};
pub use pipeline::{ContextClustering, PipelineConfig, PipelineModel, VirtualUser, VirtualUserSpace};
pub use schema::{ContextDimension, ContextSchema, ContextSituation, Rating};
pub use som::{SomConfig, SomNetwork};
pub use space::RatingMatrix;
