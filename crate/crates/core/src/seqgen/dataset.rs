use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::envelope::{EnvelopeKind, EnvelopeSpec};
use super::sequence::{generate_sequence, FrameShape, LabelKind, Sequence, SequenceSpec};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Disjoint partitions of a dataset. A sequence id belongs to exactly one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// Used only to train dynamic-representation networks.
    Pretrain,
    DownstreamTrain,
    DownstreamTest,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Pretrain, Split::DownstreamTrain, Split::DownstreamTest];

    pub fn name(self) -> &'static str {
        match self {
            Split::Pretrain => "pretrain",
            Split::DownstreamTrain => "downstream-train",
            Split::DownstreamTest => "downstream-test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub seed: u64,
    pub n_pretrain: usize,
    pub n_downstream_train: usize,
    pub n_downstream_test: usize,
    pub shape: FrameShape,
    pub fps: f64,
    /// Envelope kinds drawn uniformly per sequence.
    pub kinds: Vec<EnvelopeKind>,
    pub labels: Vec<LabelKind>,
    #[serde(default)]
    pub label_noise: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            seed: 2019,
            n_pretrain: 200,
            n_downstream_train: 50,
            n_downstream_test: 50,
            shape: FrameShape::default(),
            fps: 25.0,
            kinds: vec![
                EnvelopeKind::RaisedCosine,
                EnvelopeKind::Asymmetric,
                EnvelopeKind::LinearRamp,
            ],
            labels: vec![LabelKind::Intensity],
            label_noise: 0.0,
        }
    }
}

/// A generation recipe tagged with its split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split: Split,
    pub spec: SequenceSpec,
}

impl DatasetSpec {
    pub fn total(&self) -> usize {
        self.n_pretrain + self.n_downstream_train + self.n_downstream_test
    }

    fn count(&self, split: Split) -> usize {
        match split {
            Split::Pretrain => self.n_pretrain,
            Split::DownstreamTrain => self.n_downstream_train,
            Split::DownstreamTest => self.n_downstream_test,
        }
    }

    /// Deterministic recipes for every sequence, in split order.
    pub fn entries(&self) -> Result<Vec<SplitEntry>> {
        if self.kinds.is_empty() {
            return Err(Error::Config {
                field: "dataset.kinds".into(),
                reason: "at least one envelope kind is required".into(),
            });
        }
        if self.shape.length < 20 {
            return Err(Error::Config {
                field: "dataset.shape.length".into(),
                reason: format!("need at least 20 frames, got {}", self.shape.length),
            });
        }
        let mut out = Vec::with_capacity(self.total());
        let mut global = 0u64;
        for split in Split::ALL {
            for i in 0..self.count(split) {
                let mut rng = Rng::substream(self.seed, global);
                let envelope = sample_envelope(&mut rng, &self.kinds, self.shape.length);
                out.push(SplitEntry {
                    split,
                    spec: SequenceSpec {
                        id: format!("{}-{:04}", split.name(), i),
                        envelope,
                        seed: rng.next_u64(),
                        shape: self.shape,
                        fps: self.fps,
                        labels: self.labels.clone(),
                        label_noise: self.label_noise,
                    },
                });
                global += 1;
            }
        }
        Ok(out)
    }

    /// Generates (in memory) every sequence of one split.
    pub fn generate_split(&self, split: Split) -> Result<Vec<Sequence>> {
        self.entries()?
            .iter()
            .filter(|e| e.split == split)
            .map(|e| generate_sequence(&e.spec))
            .collect()
    }
}

/// Draws an envelope that keeps moving until the last frame, so no window
/// past the first frame or two contains identical neighbors.
fn sample_envelope(rng: &mut Rng, kinds: &[EnvelopeKind], len: usize) -> EnvelopeSpec {
    let kind = kinds[rng.index(0, kinds.len())];
    let amplitude = rng.uniform_in(0.6, 1.0);
    let lf = len as f64;
    let start = rng.index(0, 2);
    let room = len - 1 - start;
    match kind {
        EnvelopeKind::Constant => EnvelopeSpec::constant(amplitude),
        EnvelopeKind::RaisedCosine => EnvelopeSpec::raised_cosine(start, room / 2, amplitude),
        EnvelopeKind::Asymmetric => {
            let onset = rng.index((0.25 * lf) as usize, (0.6 * lf) as usize + 1).min(room - 1);
            EnvelopeSpec::asymmetric(start, onset, room - onset, amplitude)
        }
        EnvelopeKind::LinearRamp => EnvelopeSpec::linear_ramp(start, room, amplitude),
    }
}

/// Ids present in both `a` and `b`, sorted.
pub fn shared_ids<'a>(
    a: impl IntoIterator<Item = &'a str>,
    b: impl IntoIterator<Item = &'a str>,
) -> Vec<String> {
    let left: BTreeSet<&str> = a.into_iter().collect();
    let right: BTreeSet<&str> = b.into_iter().collect();
    left.intersection(&right).map(|s| s.to_string()).collect()
}

/// Errors if any id appears on both sides.
pub fn check_disjoint<'a>(
    train: impl IntoIterator<Item = &'a str>,
    eval: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let shared = shared_ids(train, eval);
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::SplitLeakage(shared))
    }
}
