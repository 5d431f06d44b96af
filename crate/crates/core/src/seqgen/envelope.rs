use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", try_from = "String")]
pub enum EnvelopeKind {
    /// Raised-cosine rise and fall of equal duration, mirror-symmetric about the peak.
    RaisedCosine,
    /// Raised-cosine rise and fall with independent durations.
    Asymmetric,
    /// Linear rise from `start` over `onset` frames, then held.
    LinearRamp,
    /// Held at `amplitude` for the whole sequence.
    Constant,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 4] = [
        EnvelopeKind::RaisedCosine,
        EnvelopeKind::Asymmetric,
        EnvelopeKind::LinearRamp,
        EnvelopeKind::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::RaisedCosine => "raised-cosine",
            EnvelopeKind::Asymmetric => "asymmetric",
            EnvelopeKind::LinearRamp => "linear-ramp",
            EnvelopeKind::Constant => "constant",
        }
    }
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvelopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvelopeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config {
                field: "envelope.kind".into(),
                reason: format!(
                    "unknown envelope kind `{s}` (expected one of raised-cosine, asymmetric, linear-ramp, constant)"
                ),
            })
    }
}

/// Activation profile driving a sequence. Values lie in `[0, amplitude]`.
impl TryFrom<String> for EnvelopeKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    /// First frame of the rise.
    pub start: usize,
    /// Rise duration in frames.
    pub onset: usize,
    /// Fall duration in frames (zero for ramps and constants).
    pub offset: usize,
    pub amplitude: f64,
}

impl EnvelopeSpec {
    pub fn constant(amplitude: f64) -> Self {
        EnvelopeSpec {
            kind: EnvelopeKind::Constant,
            start: 0,
            onset: 0,
            offset: 0,
            amplitude,
        }
    }

    pub fn raised_cosine(start: usize, half_duration: usize, amplitude: f64) -> Self {
        EnvelopeSpec {
            kind: EnvelopeKind::RaisedCosine,
            start,
            onset: half_duration,
            offset: half_duration,
            amplitude,
        }
    }

    pub fn asymmetric(start: usize, onset: usize, offset: usize, amplitude: f64) -> Self {
        EnvelopeSpec {
            kind: EnvelopeKind::Asymmetric,
            start,
            onset,
            offset,
            amplitude,
        }
    }

    pub fn linear_ramp(start: usize, onset: usize, amplitude: f64) -> Self {
        EnvelopeSpec {
            kind: EnvelopeKind::LinearRamp,
            start,
            onset,
            offset: 0,
            amplitude,
        }
    }

    /// Frame of maximal activation, for the rise-and-fall kinds.
    pub fn peak(&self) -> Option<usize> {
        match self.kind {
            EnvelopeKind::RaisedCosine | EnvelopeKind::Asymmetric => Some(self.start + self.onset),
            _ => None,
        }
    }

    /// Last frame at which the envelope still changes.
    pub fn end(&self) -> usize {
        match self.kind {
            EnvelopeKind::Constant => 0,
            EnvelopeKind::LinearRamp => self.start + self.onset,
            _ => self.start + self.onset + self.offset,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::Config {
            field: "envelope".into(),
            reason,
        });
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return bad(format!("amplitude must lie in (0, 1], got {}", self.amplitude));
        }
        match self.kind {
            EnvelopeKind::Constant => return Ok(()),
            EnvelopeKind::RaisedCosine if self.onset != self.offset => {
                return bad(format!(
                    "raised-cosine needs onset == offset, got {} and {}",
                    self.onset, self.offset
                ))
            }
            EnvelopeKind::LinearRamp if self.offset != 0 => {
                return bad("linear-ramp takes no offset".into())
            }
            EnvelopeKind::Asymmetric | EnvelopeKind::RaisedCosine
                if self.onset == 0 || self.offset == 0 =>
            {
                return bad("rise and fall durations must be positive".into())
            }
            EnvelopeKind::LinearRamp if self.onset == 0 => {
                return bad("ramp duration must be positive".into())
            }
            _ => {}
        }
        if self.end() >= len {
            return bad(format!(
                "envelope ends at frame {} but the sequence has only {} frames",
                self.end(),
                len
            ));
        }
        Ok(())
    }

    /// Envelope value at integer frame `t` (defined for every integer).
    pub fn value(&self, t: i64) -> f64 {
        let a = self.amplitude;
        let start = self.start as i64;
        match self.kind {
            EnvelopeKind::Constant => a,
            EnvelopeKind::LinearRamp => {
                if t <= start {
                    0.0
                } else if t >= start + self.onset as i64 {
                    a
                } else {
                    a * (t - start) as f64 / self.onset as f64
                }
            }
            EnvelopeKind::RaisedCosine | EnvelopeKind::Asymmetric => {
                let peak = start + self.onset as i64;
                let end = peak + self.offset as i64;
                if t <= start || t >= end {
                    0.0
                } else if t == peak {
                    a
                } else if t < peak {
                    a * 0.5 * (1.0 - (PI * (t - start) as f64 / self.onset as f64).cos())
                } else {
                    a * 0.5 * (1.0 - (PI * (end - t) as f64 / self.offset as f64).cos())
                }
            }
        }
    }

    /// Local rate of change `|e(t+1) - e(t-1)| / 2`, symmetric under time reversal.
    pub fn speed(&self, t: i64) -> f64 {
        (self.value(t + 1) - self.value(t - 1)).abs() * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raised_cosine_is_symmetric_about_peak() {
        let e = EnvelopeSpec::raised_cosine(3, 20, 0.8);
        let p = e.peak().unwrap() as i64;
        assert_eq!(e.value(p), 0.8);
        for k in 0..30 {
            assert_eq!(e.value(p + k), e.value(p - k));
            assert_eq!(e.speed(p + k), e.speed(p - k));
        }
    }

    #[test]
    fn ramp_is_monotone_then_held() {
        let e = EnvelopeSpec::linear_ramp(2, 10, 1.0);
        for t in 2..12 {
            assert!(e.value(t + 1) > e.value(t));
        }
        assert_eq!(e.value(12), 1.0);
        assert_eq!(e.value(40), 1.0);
    }

    #[test]
    fn validation() {
        assert!(EnvelopeSpec::raised_cosine(0, 60, 1.0).validate(120).is_err());
        assert!(EnvelopeSpec::raised_cosine(0, 59, 1.0).validate(120).is_ok());
        assert!(EnvelopeSpec::asymmetric(0, 10, 0, 1.0).validate(120).is_err());
        assert!(EnvelopeSpec::constant(1.5).validate(10).is_err());
        let mut e = EnvelopeSpec::raised_cosine(0, 5, 1.0);
        e.offset = 6;
        assert!(e.validate(100).is_err());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in EnvelopeKind::ALL {
            assert_eq!(k.name().parse::<EnvelopeKind>().unwrap(), k);
        }
        let err = "zigzag".parse::<EnvelopeKind>().unwrap_err().to_string();
        assert!(err.contains("envelope.kind"));
    }
}
