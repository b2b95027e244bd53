pub mod audio;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod labels;
pub mod latency;
pub mod model;
pub mod postprocess;
pub mod synth;
pub mod tensor;
pub mod train;

pub use audio::Recording;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FrameGrid, Spectrogram};
pub use labels::{LabelEvent, SoundKind};
pub use model::{build_model, Model, ModelSpec, Variant};
pub use synth::{synth_corpus, CorpusConfig};
pub use tensor::Tensor;
pub use train::{prepare_dataset, train_cv, PreparedSample, TrainConfig};
