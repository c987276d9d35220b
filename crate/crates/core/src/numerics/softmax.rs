use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// `(outer, axis_len, inner)` decomposition of a shape around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Max-subtracted softmax along `axis`.
pub fn softmax<T: Real>(input: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= input.ndim() {
        return Err(Error::invalid(
            "softmax",
            format!("axis {axis} out of range for {:?}", input.shape()),
        ));
    }
    let (outer, n, inner) = split_axis(input.shape(), axis);
    let mut out = input.clone();
    let d = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * n + k) * inner + i;
            let m = (0..n).map(|k| d[idx(k)]).fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for k in 0..n {
                let e = (d[idx(k)] - m).exp();
                d[idx(k)] = e;
                total = total + e;
            }
            for k in 0..n {
                d[idx(k)] = d[idx(k)] / total;
            }
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of softmax given its output `y`: `y ⊙ (g − Σ g·y)`.
pub(crate) fn softmax_backward<T: Real>(y: &Tensor<T>, grad: &Tensor<T>, axis: usize) -> Tensor<T> {
    let (outer, n, inner) = split_axis(y.shape(), axis);
    let mut out = Tensor::zeros_like(y);
    let (yd, gd) = (y.data(), grad.data());
    let od = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * n + k) * inner + i;
            let dot: T = (0..n).map(|k| yd[idx(k)] * gd[idx(k)]).sum();
            for k in 0..n {
                od[idx(k)] = yd[idx(k)] * (gd[idx(k)] - dot);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_input() {
        let x = Tensor::<f64>::full(&[1, 5], 0.3);
        let y = softmax(&x, 1).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn closed_form_pair() {
        let x = Tensor::<f64>::new(&[2], vec![0.0, 3f64.ln()]).unwrap();
        let y = softmax(&x, 0).unwrap();
        assert!((y.data()[0] - 0.25).abs() < 1e-15);
        assert!((y.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn bad_axis() {
        assert!(softmax(&Tensor::<f64>::zeros(&[2, 2]), 2).is_err());
    }

    proptest! {
        #[test]
        fn sums_to_one_and_shift_invariant(
            vals in prop::collection::vec(-30.0f64..30.0, 12),
            shift in -50.0f64..50.0,
        ) {
            let x = Tensor::new(&[2, 3, 2], vals).unwrap();
            let y = softmax(&x, 1).unwrap();
            for o in 0..2 {
                for i in 0..2 {
                    let s: f64 = (0..3).map(|k| y.get(&[o, k, i])).sum();
                    prop_assert!((s - 1.0).abs() <= 1e-12);
                }
            }
            prop_assert!(y.data().iter().all(|&v| v > 0.0));
            let z = softmax(&x.map(|v| v + shift), 1).unwrap();
            prop_assert!(y.max_abs_diff(&z) <= 1e-12);
        }
    }
}
