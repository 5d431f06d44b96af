use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `x`, for the listed coordinates.
pub fn numerical_gradient<F>(mut f: F, x: &Tensor<f64>, h: f64, coords: &[usize]) -> Result<Vec<f64>>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(coords.len());
    for &i in coords {
        if i >= x.len() {
            return Err(Error::OutOfRange(format!("coordinate {i} of {}", x.len())));
        }
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at coordinate {i}: f(x+h)={plus}, f(x-h)={minus}"
            )));
        }
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Worst elementwise relative error between `analytic` and the central
/// difference of `f`, with denominator `max(|analytic|, |numeric|, 1e-12)`.
pub fn finite_diff_check<F, T>(f: F, x: &Tensor<f64>, analytic: &Tensor<T>, h: f64) -> Result<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
    T: Real,
{
    let coords: Vec<usize> = (0..x.len()).collect();
    finite_diff_check_at(f, x, analytic, h, &coords)
}

/// [`finite_diff_check`] restricted to a subset of coordinates.
pub fn finite_diff_check_at<F, T>(
    f: F,
    x: &Tensor<f64>,
    analytic: &Tensor<T>,
    h: f64,
    coords: &[usize],
) -> Result<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
    T: Real,
{
    if analytic.len() != x.len() {
        return Err(Error::ShapeMismatch {
            op: "finite_diff_check",
            left: x.shape().to_vec(),
            right: analytic.shape().to_vec(),
        });
    }
    let numeric = numerical_gradient(f, x, h, coords)?;
    let mut worst = 0.0f64;
    for (&i, &n) in coords.iter().zip(&numeric) {
        let a = analytic.data()[i].as_f64();
        let denom = a.abs().max(n.abs()).max(1e-12);
        worst = worst.max((a - n).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn sum_of_squares() {
        let x = Rng::new(9).normal_tensor::<f64>(&[3, 4], 1.0);
        let grad = x.scale(2.0);
        let err = finite_diff_check(|t| t.norm_sq(), &x, &grad, 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Rng::new(9).normal_tensor::<f64>(&[5], 1.0);
        let grad = Tensor::<f64>::zeros(&[5]);
        assert_eq!(finite_diff_check(|_| 3.0, &x, &grad, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_objective_is_error() {
        let x = Tensor::<f64>::ones(&[2]);
        let grad = Tensor::<f64>::zeros(&[2]);
        assert!(finite_diff_check(|_| f64::NAN, &x, &grad, 1e-4).is_err());
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = Tensor::<f64>::ones(&[3]);
        let grad = Tensor::<f64>::filled(&[3], 1.0);
        assert!(finite_diff_check(|t| t.norm_sq(), &x, &grad, 1e-5).unwrap() > 0.4);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let x = Tensor::<f64>::ones(&[1]);
        assert!(finite_diff_check(|t| t.sum(), &x, &x, 0.0).is_err());
    }
}
