//! Pooling and pointwise nonlinearities used by the networks.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// 2×2 average pooling with stride 2. Rows and cols must be even.
pub fn avg_pool2_forward<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!("avg_pool2 needs even extents, got {h}x{w}")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let d = x.data();
    Ok(Tensor::from_fn(&[c, ho, wo], |i| {
        let (ch, oy, ox) = (i / (ho * wo), (i / wo) % ho, i % wo);
        let base = (ch * h + 2 * oy) * w + 2 * ox;
        (d[base] + d[base + 1] + d[base + w] + d[base + w + 1]) * quarter
    }))
}

pub fn avg_pool2_backward<T: Real>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, ho, wo) = grad_out.dims3()?;
    let (h, w) = (ho * 2, wo * 2);
    let quarter = T::of(0.25);
    let g = grad_out.data();
    Ok(Tensor::from_fn(&[c, h, w], |i| {
        let (ch, y, x) = (i / (h * w), (i / w) % h, i % w);
        g[(ch * ho + y / 2) * wo + x / 2] * quarter
    }))
}

/// Mean over rows and cols: `[C, H, W]` → `[C]`.
pub fn global_avg_pool_forward<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = x.dims3()?;
    let n = T::of((h * w) as f64);
    let data = x
        .data()
        .chunks(h * w)
        .map(|p| p.iter().fold(T::zero(), |a, &v| a + v) / n)
        .collect();
    Tensor::from_vec(vec![c], data)
}

pub fn global_avg_pool_backward<T: Real>(grad_out: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let c = grad_out.len();
    let n = T::of((h * w) as f64);
    let g = grad_out.data();
    Tensor::from_fn(&[c, h, w], |i| g[i / (h * w)] / n)
}

/// Leaky rectifier: `x` for `x > 0`, `slope·x` otherwise.
pub fn leaky_relu_forward<T: Real>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v * slope })
}

/// Backward pass of [`leaky_relu_forward`], keyed on the pre-activation.
pub fn leaky_relu_backward<T: Real>(pre: &Tensor<T>, grad_out: &Tensor<T>, slope: T) -> Tensor<T> {
    let p = pre.data();
    let g = grad_out.data();
    Tensor::from_fn(pre.shape(), |i| if p[i] > T::zero() { g[i] } else { g[i] * slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, frobenius_inner, Rng};

    #[test]
    fn avg_pool_hand_values() {
        let x = Tensor::<f64>::from_vec(vec![1, 2, 4], vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        let y = avg_pool2_forward(&x).unwrap();
        assert_eq!(y.data(), &[3.5, 5.5]);
    }

    #[test]
    fn avg_pool_rejects_odd() {
        assert!(avg_pool2_forward(&Tensor::<f32>::ones(&[1, 3, 4])).is_err());
    }

    #[test]
    fn pooling_gradients() {
        let mut rng = Rng::new(2);
        let x = rng.normal_tensor::<f64>(&[2, 4, 6], 1.0);
        let probe = rng.normal_tensor::<f64>(&[2, 2, 3], 1.0);
        let g = avg_pool2_backward(&probe).unwrap();
        let f = |t: &Tensor<f64>| frobenius_inner(&avg_pool2_forward(t).unwrap(), &probe).unwrap();
        assert!(finite_diff_check(f, &x, &g, 1e-5).unwrap() < 1e-8);

        let probe = rng.normal_tensor::<f64>(&[2], 1.0);
        let g = global_avg_pool_backward(&probe, 4, 6);
        let f = |t: &Tensor<f64>| frobenius_inner(&global_avg_pool_forward(t).unwrap(), &probe).unwrap();
        assert!(finite_diff_check(f, &x, &g, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn leaky_relu_gradient() {
        let mut rng = Rng::new(4);
        let x = rng.normal_tensor::<f64>(&[1, 5, 5], 1.0);
        let probe = rng.normal_tensor::<f64>(&[1, 5, 5], 1.0);
        let g = leaky_relu_backward(&x, &probe, 0.1);
        let f = |t: &Tensor<f64>| frobenius_inner(&leaky_relu_forward(t, 0.1), &probe).unwrap();
        assert!(finite_diff_check(f, &x, &g, 1e-5).unwrap() < 1e-7);
    }
}
