//! Procedural "facial action" stand-in: a smooth blob sliding along a fixed
//! anatomical axis over a static per-sequence texture.

use std::f64::consts::PI;

use crate::numerics::{Rng, Tensor};

/// Where the blob rests at zero activation, as a fraction of (rows, cols).
const REST_POSITION: (f64, f64) = (0.32, 0.30);
/// Unit direction of travel (row, col). Shared by every sequence.
const TRAVEL_DIR: (f64, f64) = (0.6, 0.8);
/// Path length at full activation, as a fraction of the smaller extent.
const TRAVEL_FRACTION: f64 = 0.5;
const SIGMA_FRACTION: f64 = 0.07;

/// Static, per-sequence appearance drawn from the texture seed.
#[derive(Clone, Debug)]
pub struct Scene {
    channels: usize,
    height: usize,
    width: usize,
    background: Vec<f64>,
    color: Vec<f64>,
    gain: f64,
    rest: (f64, f64),
    sigma: f64,
    travel: f64,
}

impl Scene {
    pub fn new(seed: u64, channels: usize, height: usize, width: usize) -> Self {
        let mut rng = Rng::substream(seed, 0x5ce9e);
        let plane = height * width;
        let mut background = vec![0.0; channels * plane];
        for c in 0..channels {
            let base = rng.uniform_in(0.2, 0.35);
            let waves: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.uniform_in(-2.0, 2.0),
                        rng.uniform_in(-2.0, 2.0),
                        rng.uniform_in(0.0, 2.0 * PI),
                        rng.uniform_in(0.02, 0.05),
                    )
                })
                .collect();
            for y in 0..height {
                for x in 0..width {
                    let (fy, fx) = (y as f64 / height as f64, x as f64 / width as f64);
                    let mut v = base;
                    for &(ky, kx, phase, amp) in &waves {
                        v += amp * (2.0 * PI * (ky * fy + kx * fx) + phase).cos();
                    }
                    v += 0.01 * rng.normal();
                    background[c * plane + y * width + x] = v.clamp(0.0, 1.0);
                }
            }
        }
        let color = (0..channels).map(|_| rng.uniform_in(0.5, 1.0)).collect();
        let gain = rng.uniform_in(0.3, 0.4);
        let size = height.min(width) as f64;
        let rest = (
            REST_POSITION.0 * height as f64 + rng.uniform_in(-0.03, 0.03) * size,
            REST_POSITION.1 * width as f64 + rng.uniform_in(-0.03, 0.03) * size,
        );
        let sigma = SIGMA_FRACTION * size * rng.uniform_in(0.9, 1.1);
        Scene {
            channels,
            height,
            width,
            background,
            color,
            gain,
            rest,
            sigma,
            travel: TRAVEL_FRACTION * size,
        }
    }

    /// Frame for activation `e` moving at `speed` (envelope units per frame).
    ///
    /// The blob stretches along its path in proportion to speed, keeping its
    /// integrated mass fixed, so a still frame carries a cue about the local
    /// rate of motion but not its sign.
    pub fn render(&self, e: f64, speed: f64) -> Tensor<f32> {
        let (dy, dx) = TRAVEL_DIR;
        let cy = self.rest.0 + e * self.travel * dy;
        let cx = self.rest.1 + e * self.travel * dx;
        let along = self.sigma * (1.0 + 1.5 * speed * self.travel / self.sigma);
        let across = self.sigma;
        let amp = self.gain * (0.6 + 0.4 * e) * across / along;
        let plane = self.height * self.width;
        let mut blob = vec![0.0f64; plane];
        for y in 0..self.height {
            for x in 0..self.width {
                let (ry, rx) = (y as f64 - cy, x as f64 - cx);
                let u = ry * dy + rx * dx;
                let v = -ry * dx + rx * dy;
                blob[y * self.width + x] =
                    amp * (-(u * u) / (2.0 * along * along) - (v * v) / (2.0 * across * across)).exp();
            }
        }
        Tensor::from_fn(&[self.channels, self.height, self.width], |i| {
            let c = i / plane;
            (self.background[i] + self.color[c] * blob[i % plane]).clamp(0.0, 1.0) as f32
        })
    }
}
