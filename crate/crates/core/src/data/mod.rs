//! Dataset model, synthetic generation, label-noise injection and noise-ratio estimation.

mod dataset;
mod estimate;
mod io;
mod noise;
mod synthetic;

pub use dataset::{Dataset, SampleId};
pub use noise::{
    check_noise_ratio, corrupt_labels, corruption_count, inject_noise, max_noise_ratio, NoiseKind,
    NoiseSpec,
};
pub use synthetic::{class_separation, make_gaussian_dataset, MAX_SEPARATION};
pub use estimate::{
    estimate_noise_ratio, rho_from_agreement, EstimatorConfig, NoiseEstimate,
    MIN_ESTIMATION_SAMPLES,
};
pub use io::{
    decode_binary, decode_csv, encode_binary, encode_csv, load_dataset, save_dataset,
    DatasetFormat, BINARY_MAGIC,
};
