//! Metrics, rendering and the evaluation experiments.

pub mod harness;
pub mod metrics;
pub mod render;
pub mod shapes;

pub use harness::{
    compare_methods, load_trained_models, sweep_center_frequency, sweep_snr, unseen_shape_eval, Method,
    MetricsReport, Reconstructor, TrainedModels,
};
pub use metrics::{mse, ssim};
pub use render::render_image;
