//! Event-level feature extraction: metadata vectors and audio descriptors.

pub mod audio;
pub mod metadata;
pub mod scale;

pub use audio::{
    extract_event_audio_features, frame_signal, AudioConfig, AudioExtractor, AudioTrack,
    FrameFeatures, SampleSource, AUDIO_DIMS, AUDIO_FEATURE_NAMES,
};
pub use metadata::{geometry_to_goal, FieldConfig, MetadataEncoder, QualifierCodebook};
pub use scale::Standardizer;
