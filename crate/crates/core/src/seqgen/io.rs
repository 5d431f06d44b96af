//! Sequence container: a directory with `manifest.json`, `frames.f32` and an
//! optional `labels.f32`, all floats little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::envelope::EnvelopeSpec;
use super::sequence::Sequence;
use crate::binio::{bytes_to_f32s, f32s_to_bytes, read_file, read_json, write_file, write_json};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const SEQUENCE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub format_version: u32,
    pub id: String,
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(rename = "C")]
    pub channels: usize,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub fps: f64,
    pub label_names: Vec<String>,
    pub envelope: Option<EnvelopeSpec>,
    pub seed: u64,
}

pub fn save_sequence(seq: &Sequence, dir: &Path) -> Result<()> {
    let [c, h, w] = seq
        .frame_dims()
        .ok_or_else(|| Error::invalid("cannot save an empty sequence"))?;
    let manifest = SequenceManifest {
        format_version: SEQUENCE_FORMAT_VERSION,
        id: seq.id.clone(),
        length: seq.len(),
        channels: c,
        height: h,
        width: w,
        fps: seq.fps,
        label_names: seq.label_names.clone(),
        envelope: seq.envelope.clone(),
        seed: seq.seed,
    };
    let mut payload = Vec::with_capacity(seq.len() * c * h * w * 4);
    for f in &seq.frames {
        f.check_same_shape(&seq.frames[0], "save_sequence")?;
        payload.extend_from_slice(&f32s_to_bytes(f.data()));
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_file(&dir.join("frames.f32"), &payload)?;
    if !seq.label_names.is_empty() {
        let flat: Vec<f32> = seq.labels.iter().flatten().copied().collect();
        write_file(&dir.join("labels.f32"), &f32s_to_bytes(&flat))?;
    }
    Ok(())
}

pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let manifest_path = dir.join("manifest.json");
    let m: SequenceManifest = read_json(&manifest_path)?;
    if m.format_version != SEQUENCE_FORMAT_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!(
                "format_version {} is not supported (expected {})",
                m.format_version, SEQUENCE_FORMAT_VERSION
            ),
        ));
    }
    let frame_len = m.channels * m.height * m.width;
    let frames_path = dir.join("frames.f32");
    let values = bytes_to_f32s(&read_file(&frames_path)?, m.length * frame_len, &frames_path)?;
    let frames = values
        .chunks_exact(frame_len.max(1))
        .map(|c| Tensor::from_vec(vec![m.channels, m.height, m.width], c.to_vec()))
        .collect::<Result<Vec<_>>>()?;

    let labels = if m.label_names.is_empty() {
        vec![Vec::new(); m.length]
    } else {
        let labels_path = dir.join("labels.f32");
        let n = m.label_names.len();
        bytes_to_f32s(&read_file(&labels_path)?, m.length * n, &labels_path)?
            .chunks_exact(n)
            .map(|c| c.to_vec())
            .collect()
    };
    Ok(Sequence {
        id: m.id,
        fps: m.fps,
        frames,
        label_names: m.label_names,
        labels,
        envelope: m.envelope,
        seed: m.seed,
    })
}
