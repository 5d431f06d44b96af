use serde::{Deserialize, Serialize};

use super::envelope::EnvelopeSpec;
use super::scene::Scene;
use crate::error::{Error, Result};
use crate::numerics::{Real, Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameShape {
    pub length: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl FrameShape {
    pub fn frame_dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

impl Default for FrameShape {
    fn default() -> Self {
        FrameShape {
            length: 120,
            channels: 3,
            height: 64,
            width: 64,
        }
    }
}

/// Per-frame scalar targets derived from the envelope value `e ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    /// `5·e`, an action-unit intensity analogue in `[0, 5]`.
    Intensity,
    /// `2·e − 1`, an affect analogue in `[−1, 1]`.
    Affect,
}

impl LabelKind {
    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Intensity => "intensity",
            LabelKind::Affect => "affect",
        }
    }

    fn from_envelope(self, e: f64) -> f64 {
        match self {
            LabelKind::Intensity => 5.0 * e,
            LabelKind::Affect => 2.0 * e - 1.0,
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            LabelKind::Intensity => (0.0, 5.0),
            LabelKind::Affect => (-1.0, 1.0),
        }
    }
}

/// Everything needed to regenerate one sequence bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub id: String,
    pub envelope: EnvelopeSpec,
    pub seed: u64,
    pub shape: FrameShape,
    pub fps: f64,
    pub labels: Vec<LabelKind>,
    /// Standard deviation of additive Gaussian label noise; zero for clean labels.
    #[serde(default)]
    pub label_noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub fps: f64,
    pub frames: Vec<Tensor<f32>>,
    pub label_names: Vec<String>,
    /// `labels[frame][label]`.
    pub labels: Vec<Vec<f32>>,
    pub envelope: Option<EnvelopeSpec>,
    pub seed: u64,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dims(&self) -> Option<[usize; 3]> {
        self.frames.first().map(|f| {
            let s = f.shape();
            [s[0], s[1], s[2]]
        })
    }

    /// Centers `t` for which a `(half_width, stride)` window fits.
    pub fn valid_centers(&self, half_width: usize, stride: usize) -> std::ops::Range<usize> {
        let reach = half_width * stride;
        if self.len() < 2 * reach + 1 {
            return 0..0;
        }
        reach..self.len() - reach
    }
}

/// Renders the sequence described by `spec`.
pub fn generate_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    let s = spec.shape;
    if s.length < 3 {
        return Err(Error::invalid(format!("sequence length must be ≥ 3, got {}", s.length)));
    }
    if s.height < 16 || s.width < 16 {
        return Err(Error::invalid(format!(
            "frames must be at least 16x16, got {}x{}",
            s.height, s.width
        )));
    }
    if s.channels == 0 {
        return Err(Error::invalid("frames need at least one channel"));
    }
    spec.envelope.validate(s.length)?;

    let scene = Scene::new(spec.seed, s.channels, s.height, s.width);
    let mut noise = Rng::substream(spec.seed, 0x1abe1);
    let mut frames = Vec::with_capacity(s.length);
    let mut labels = Vec::with_capacity(s.length);
    for t in 0..s.length as i64 {
        let e = spec.envelope.value(t);
        frames.push(scene.render(e, spec.envelope.speed(t)));
        labels.push(
            spec.labels
                .iter()
                .map(|k| {
                    let mut v = k.from_envelope(e);
                    if spec.label_noise > 0.0 {
                        v += spec.label_noise * noise.normal();
                    }
                    let (lo, hi) = k.range();
                    v.clamp(lo, hi) as f32
                })
                .collect(),
        );
    }
    Ok(Sequence {
        id: spec.id.clone(),
        fps: spec.fps,
        frames,
        label_names: spec.labels.iter().map(|k| k.name().to_string()).collect(),
        labels,
        envelope: Some(spec.envelope.clone()),
        seed: spec.seed,
    })
}

/// `2T+1` frames sampled at stride `S` around a center frame; frame `k` of
/// `frames` is the source frame `center + (k − T)·S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<T: Real = f32> {
    pub center: usize,
    pub half_width: usize,
    pub stride: usize,
    pub frames: Vec<Tensor<T>>,
}

impl<T: Real> Window<T> {
    /// Builds a window directly from `2T+1` frames (center at index `T`).
    pub fn from_frames(frames: Vec<Tensor<T>>, stride: usize) -> Result<Self> {
        if frames.len() % 2 == 0 {
            return Err(Error::invalid(format!(
                "a window needs an odd number of frames, got {}",
                frames.len()
            )));
        }
        for f in &frames[1..] {
            f.check_same_shape(&frames[0], "window frames")?;
        }
        let half_width = frames.len() / 2;
        Ok(Window {
            center: half_width * stride,
            half_width,
            stride,
            frames,
        })
    }

    /// Number of frames, `N = 2T + 1`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Source frames spanned, `2TS + 1`.
    pub fn span(&self) -> usize {
        2 * self.half_width * self.stride + 1
    }

    /// Frame at signed offset `k ∈ [−T, T]` from the center.
    pub fn at(&self, k: i64) -> &Tensor<T> {
        &self.frames[(k + self.half_width as i64) as usize]
    }

    pub fn center_frame(&self) -> &Tensor<T> {
        &self.frames[self.half_width]
    }

    pub fn frame_shape(&self) -> &[usize] {
        self.frames[0].shape()
    }

    pub fn cast<U: Real>(&self) -> Window<U> {
        Window {
            center: self.center,
            half_width: self.half_width,
            stride: self.stride,
            frames: self.frames.iter().map(|f| f.cast()).collect(),
        }
    }

    /// The same window with its time axis flipped (`V_{t−k} ↔ V_{t+k}`).
    pub fn reversed(&self) -> Self {
        let mut w = self.clone();
        w.frames.reverse();
        w
    }
}

/// Samples the window of half-width `half_width` and stride `stride` centered at `t`.
pub fn sample_window(seq: &Sequence, t: usize, half_width: usize, stride: usize) -> Result<Window<f32>> {
    if stride == 0 {
        return Err(Error::invalid("stride must be ≥ 1"));
    }
    let reach = half_width * stride;
    if t < reach {
        return Err(Error::OutOfRange(format!(
            "window start t − T·S = {} − {} < 0",
            t, reach
        )));
    }
    if t + reach >= seq.len() {
        return Err(Error::OutOfRange(format!(
            "window end t + T·S = {} must be < L = {}",
            t + reach,
            seq.len()
        )));
    }
    let frames = (0..=2 * half_width)
        .map(|k| seq.frames[t - reach + k * stride].clone())
        .collect();
    Ok(Window {
        center: t,
        half_width,
        stride,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::EnvelopeSpec;

    fn spec(envelope: EnvelopeSpec, length: usize) -> SequenceSpec {
        SequenceSpec {
            id: "t".into(),
            envelope,
            seed: 17,
            shape: FrameShape {
                length,
                channels: 3,
                height: 16,
                width: 16,
            },
            fps: 25.0,
            labels: vec![LabelKind::Intensity],
            label_noise: 0.0,
        }
    }

    #[test]
    fn constant_envelope_gives_identical_frames() {
        let seq = generate_sequence(&spec(EnvelopeSpec::constant(0.7), 12)).unwrap();
        for f in &seq.frames[1..] {
            assert_eq!(f, &seq.frames[0]);
        }
    }

    #[test]
    fn ramp_mean_is_strictly_increasing() {
        let seq = generate_sequence(&spec(EnvelopeSpec::linear_ramp(0, 29, 1.0), 30)).unwrap();
        let means: Vec<f64> = seq.frames.iter().map(|f| f.cast::<f64>().mean()).collect();
        for w in means.windows(2) {
            assert!(w[1] > w[0], "{means:?}");
        }
    }

    #[test]
    fn symmetric_envelope_mirrors_frames() {
        let seq = generate_sequence(&spec(EnvelopeSpec::raised_cosine(2, 12, 0.9), 30)).unwrap();
        let p = 14;
        for k in 0..=p.min(29 - p) {
            assert_eq!(seq.frames[p + k], seq.frames[p - k], "k = {k}");
        }
    }

    #[test]
    fn frames_stay_in_unit_range() {
        let seq = generate_sequence(&spec(EnvelopeSpec::asymmetric(1, 5, 9, 1.0), 20)).unwrap();
        for f in &seq.frames {
            assert!(f.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(seq.labels[6][0], 5.0);
    }

    #[test]
    fn envelope_longer_than_sequence_is_error() {
        assert!(generate_sequence(&spec(EnvelopeSpec::linear_ramp(5, 20, 1.0), 20)).is_err());
    }

    #[test]
    fn too_small_frames_are_rejected() {
        let mut s = spec(EnvelopeSpec::constant(0.5), 5);
        s.shape.height = 8;
        assert!(generate_sequence(&s).is_err());
    }

    #[test]
    fn window_geometry() {
        let seq = generate_sequence(&spec(EnvelopeSpec::linear_ramp(0, 99, 1.0), 100)).unwrap();
        let w = sample_window(&seq, 40, 0, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.center_frame(), &seq.frames[40]);

        let w = sample_window(&seq, 40, 9, 4).unwrap();
        assert_eq!((w.len(), w.span()), (19, 73));
        assert_eq!(w.at(-9), &seq.frames[4]);
        assert_eq!(w.at(9), &seq.frames[76]);

        let w = sample_window(&seq, 10, 3, 2).unwrap();
        assert_eq!((w.len(), w.span()), (7, 13));
        assert_eq!(w.center_frame(), &seq.frames[10]);
    }

    #[test]
    fn out_of_range_window_names_bound() {
        let seq = generate_sequence(&spec(EnvelopeSpec::constant(0.5), 10)).unwrap();
        let lo = sample_window(&seq, 2, 3, 1).unwrap_err().to_string();
        assert!(lo.contains("< 0"), "{lo}");
        let hi = sample_window(&seq, 8, 2, 1).unwrap_err().to_string();
        assert!(hi.contains("L = 10"), "{hi}");
    }

    #[test]
    fn label_noise_is_deterministic() {
        let mut s = spec(EnvelopeSpec::raised_cosine(0, 9, 0.5), 20);
        s.label_noise = 0.1;
        let a = generate_sequence(&s).unwrap();
        let b = generate_sequence(&s).unwrap();
        assert_eq!(a.labels, b.labels);
        let clean = generate_sequence(&spec(EnvelopeSpec::raised_cosine(0, 9, 0.5), 20)).unwrap();
        assert_ne!(a.labels, clean.labels);
        assert_eq!(a.frames, clean.frames);
    }
}
