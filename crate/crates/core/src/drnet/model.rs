use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    add_channel_bias, avg_pool2_backward, avg_pool2_forward, channel_sums, conv2d_backward, conv2d_forward,
    conv_transpose2d_backward, conv_transpose2d_forward, leaky_relu_backward, leaky_relu_forward, Real, Rng,
    Tensor,
};
use crate::rankcore::{DynRep, Origin};

/// Encoder-decoder geometry. Level `l` of the encoder runs at
/// `H/2^l × W/2^l` with `widths[l]` channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub widths: Vec<usize>,
    pub skip: bool,
    pub leaky_slope: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            channels: 3,
            height: 64,
            width: 64,
            widths: vec![8, 16, 32],
            skip: true,
            leaky_slope: 0.1,
        }
    }
}

impl ModelSpec {
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn io_shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Error::Config {
            field: format!("model.{field}"),
            reason,
        };
        if self.widths.is_empty() {
            return Err(bad("widths", "depth must be ≥ 1".into()));
        }
        if self.channels == 0 || self.widths.contains(&0) {
            return Err(bad("widths", "channel counts must be positive".into()));
        }
        let f = 1usize << (self.depth() - 1);
        if self.height % f != 0 || self.width % f != 0 || self.height < f || self.width < f {
            return Err(bad(
                "height",
                format!(
                    "{}x{} is not divisible by 2^(depth-1) = {f}",
                    self.height, self.width
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(bad("leaky_slope", format!("must lie in [0, 1), got {}", self.leaky_slope)));
        }
        Ok(())
    }

    /// Parameter blocks `(name, shape)` in payload order.
    pub fn blocks(&self) -> Vec<(String, Vec<usize>)> {
        let w = &self.widths;
        let mut out = Vec::new();
        let mut push = |name: String, wshape: Vec<usize>, bias: usize| {
            out.push((format!("{name}.weight"), wshape));
            out.push((format!("{name}.bias"), vec![bias]));
        };
        for l in 0..w.len() {
            let cin = if l == 0 { self.channels } else { w[l - 1] };
            push(format!("enc{l}"), vec![w[l], cin, 3, 3], w[l]);
        }
        for l in (1..w.len()).rev() {
            push(format!("up{l}"), vec![w[l], w[l - 1], 2, 2], w[l - 1]);
            let cin = if self.skip { 2 * w[l - 1] } else { w[l - 1] };
            push(format!("dec{l}"), vec![w[l - 1], cin, 3, 3], w[l - 1]);
        }
        push("out".into(), vec![self.channels, w[0], 1, 1], self.channels);
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    /// First field that differs from `other`, as `(name, mine, theirs)`.
    pub fn first_difference(&self, other: &ModelSpec) -> Option<(&'static str, String, String)> {
        macro_rules! cmp {
            ($f:ident) => {
                if self.$f != other.$f {
                    return Some((stringify!($f), format!("{:?}", self.$f), format!("{:?}", other.$f)));
                }
            };
        }
        cmp!(channels);
        cmp!(height);
        cmp!(width);
        cmp!(widths);
        cmp!(skip);
        cmp!(leaky_slope);
        None
    }
}

/// Network parameters, one tensor per block of [`ModelSpec::blocks`].
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Real = f32> {
    pub spec: ModelSpec,
    pub params: Vec<Tensor<T>>,
}

/// Intermediate values kept by [`Model::forward_cached`] for backprop.
#[derive(Clone, Debug)]
pub struct Cache<T: Real> {
    enc_in: Vec<Tensor<T>>,
    enc_pre: Vec<Tensor<T>>,
    up_in: Vec<Tensor<T>>,
    up_pre: Vec<Tensor<T>>,
    dec_in: Vec<Tensor<T>>,
    dec_pre: Vec<Tensor<T>>,
    out_in: Tensor<T>,
}

// Block indices inside `params`.
fn enc_idx(l: usize) -> usize {
    2 * l
}
fn up_idx(depth: usize, l: usize) -> usize {
    2 * depth + 4 * (depth - 1 - l)
}
fn dec_idx(depth: usize, l: usize) -> usize {
    up_idx(depth, l) + 2
}
fn out_idx(depth: usize) -> usize {
    2 * depth + 4 * (depth - 1)
}

impl<T: Real> Model<T> {
    /// Variance-scaled normal init for hidden layers; the output layer starts
    /// at zero so an untrained model maps every frame to `d = 0`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::substream(seed, 0xd1e7);
        let slope = spec.leaky_slope;
        let blocks = spec.blocks();
        let last = blocks.len() - 2;
        let params = blocks
            .iter()
            .enumerate()
            .map(|(i, (_, shape))| {
                if shape.len() == 1 || i >= last {
                    return Tensor::zeros(shape);
                }
                let fan_in = if i >= 2 * spec.depth() && (i - 2 * spec.depth()) % 4 == 0 {
                    // transposed conv: each output sees in-channels × 1 tap
                    shape[0]
                } else {
                    shape[1] * shape[2] * shape[3]
                };
                let std = (2.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt();
                rng.normal_tensor(shape, std)
            })
            .collect();
        Ok(Model {
            spec: spec.clone(),
            params,
        })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        spec.validate()?;
        let blocks = spec.blocks();
        if blocks.len() != params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter blocks, got {}",
                blocks.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in blocks.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::invalid(format!(
                    "block {name}: expected shape {shape:?}, got {:?}",
                    p.shape()
                )));
            }
        }
        Ok(Model {
            spec: spec.clone(),
            params,
        })
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
        }
    }

    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.data().iter().copied()).collect()
    }

    fn slope(&self) -> T {
        T::of(self.spec.leaky_slope)
    }

    fn conv(&self, x: &Tensor<T>, i: usize, pad: usize) -> Result<Tensor<T>> {
        let mut y = conv2d_forward(x, &self.params[i], 1, pad)?;
        add_channel_bias(&mut y, self.params[i + 1].data())?;
        Ok(y)
    }

    /// `d = f(I)`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<DynRep<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<(DynRep<T>, Cache<T>)> {
        if input.shape() != self.spec.io_shape() {
            return Err(Error::ShapeMismatch {
                op: "drnet forward",
                left: self.spec.io_shape().to_vec(),
                right: input.shape().to_vec(),
            });
        }
        let depth = self.spec.depth();
        let slope = self.slope();
        let mut c = Cache {
            enc_in: Vec::with_capacity(depth),
            enc_pre: Vec::with_capacity(depth),
            up_in: vec![Tensor::zeros(&[0]); depth],
            up_pre: vec![Tensor::zeros(&[0]); depth],
            dec_in: vec![Tensor::zeros(&[0]); depth],
            dec_pre: vec![Tensor::zeros(&[0]); depth],
            out_in: Tensor::zeros(&[0]),
        };
        let mut enc_out: Vec<Tensor<T>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let x = if l == 0 {
                input.clone()
            } else {
                avg_pool2_forward(&enc_out[l - 1])?
            };
            let pre = self.conv(&x, enc_idx(l), 1)?;
            enc_out.push(leaky_relu_forward(&pre, slope));
            c.enc_in.push(x);
            c.enc_pre.push(pre);
        }
        let mut h = enc_out[depth - 1].clone();
        for l in (1..depth).rev() {
            let ui = up_idx(depth, l);
            let mut up = conv_transpose2d_forward(&h, &self.params[ui], 2)?;
            add_channel_bias(&mut up, self.params[ui + 1].data())?;
            let u = leaky_relu_forward(&up, slope);
            let cat = if self.spec.skip {
                Tensor::concat_channels(&[&u, &enc_out[l - 1]])?
            } else {
                u
            };
            let pre = self.conv(&cat, dec_idx(depth, l), 1)?;
            c.up_in[l] = std::mem::replace(&mut h, leaky_relu_forward(&pre, slope));
            c.up_pre[l] = up;
            c.dec_in[l] = cat;
            c.dec_pre[l] = pre;
        }
        let out = self.conv(&h, out_idx(depth), 0)?;
        c.out_in = h;
        Ok((DynRep::new(out, Origin::Network, 0), c))
    }

    /// Parameter gradients given `∂L/∂d`.
    pub fn backward(&self, cache: &Cache<T>, grad_d: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let depth = self.spec.depth();
        let slope = self.slope();
        let mut grads = self.zeros_like();
        let mut set = |i: usize, gw: Tensor<T>, g_pre: &Tensor<T>| -> Result<()> {
            grads[i + 1] = Tensor::from_vec(vec![g_pre.shape()[0]], channel_sums(g_pre)?)?;
            grads[i] = gw;
            Ok(())
        };

        let oi = out_idx(depth);
        let (mut g_h, gw) = conv2d_backward(&cache.out_in, &self.params[oi], grad_d, 1, 0)?;
        set(oi, gw, grad_d)?;

        let mut g_enc: Vec<Option<Tensor<T>>> = vec![None; depth];
        for l in 1..depth {
            let di = dec_idx(depth, l);
            let g_pre = leaky_relu_backward(&cache.dec_pre[l], &g_h, slope);
            let (g_cat, gw) = conv2d_backward(&cache.dec_in[l], &self.params[di], &g_pre, 1, 1)?;
            set(di, gw, &g_pre)?;
            let w = self.spec.widths[l - 1];
            let g_u = if self.spec.skip {
                g_enc[l - 1] = Some(g_cat.channel_slice(w, w)?);
                g_cat.channel_slice(0, w)?
            } else {
                g_cat
            };
            let ui = up_idx(depth, l);
            let g_up = leaky_relu_backward(&cache.up_pre[l], &g_u, slope);
            let (g_in, gw) = conv_transpose2d_backward(&cache.up_in[l], &self.params[ui], &g_up, 2)?;
            set(ui, gw, &g_up)?;
            g_h = g_in;
        }

        let mut g_e = g_h;
        for l in (0..depth).rev() {
            if let Some(extra) = g_enc[l].take() {
                g_e.axpy(T::one(), &extra)?;
            }
            let ei = enc_idx(l);
            let g_pre = leaky_relu_backward(&cache.enc_pre[l], &g_e, slope);
            let (g_in, gw) = conv2d_backward(&cache.enc_in[l], &self.params[ei], &g_pre, 1, 1)?;
            set(ei, gw, &g_pre)?;
            if l > 0 {
                g_e = avg_pool2_backward(&g_in)?;
            }
        }
        Ok(grads)
    }
}
