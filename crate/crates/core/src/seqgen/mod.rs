//! Synthetic activation/deactivation sequences, their on-disk container, and
//! window sampling.

mod dataset;
mod envelope;
mod io;
mod scene;
mod sequence;

pub use dataset::{check_disjoint, shared_ids, DatasetSpec, Split, SplitEntry};
pub use envelope::{EnvelopeKind, EnvelopeSpec};
pub use io::{load_sequence, save_sequence, SequenceManifest, SEQUENCE_FORMAT_VERSION};
pub use scene::Scene;
pub use sequence::{
    generate_sequence, sample_window, FrameShape, LabelKind, Sequence, SequenceSpec, Window,
};
