//! Poincare-ball feature compression: spectral clustering over pair
//! embeddings yields centroids, and the hyperbolic distance to each
//! centroid becomes one feature.

mod affinity;
mod ball;
mod compressor;
mod kmeans;
mod spectral;

pub use affinity::rbf_affinity;
pub use ball::{fit_ball_scaler, poincare_distance, BallScaler, MAX_RADIUS};
pub use compressor::{
    compress, compress_backward, fit_compressor, FeatureVector, PoincareCompressor,
};
pub use kmeans::kmeans;
pub use spectral::spectral_embed;
