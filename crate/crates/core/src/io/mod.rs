//! Run configuration and versioned model and dataset files.

mod config;
mod persist;

pub use config::{parse_config, parse_config_str, GradcheckConfig, RunConfig};
pub use persist::{
    load_dataset, load_model, save_dataset, save_model, DATASET_VERSION, MODEL_VERSION,
};
