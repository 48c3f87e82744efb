//! On-disk feature stacks, dataset manifests and the synthetic generator.

mod feature_file;
mod manifest;
mod synth;

pub use feature_file::{
    decode_features, encode_features, read_feature_file, write_feature_file, FEATURE_MAGIC,
    FEATURE_VERSION, HEADER_LEN,
};
pub use manifest::{
    load_dataset, read_manifest, write_manifest, Dataset, Manifest, ManifestRecord, Split,
    SubjectRecord,
};
pub use synth::{generate_synth, synth_dataset, SynthSpec, SynthSubject};
