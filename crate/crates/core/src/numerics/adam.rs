use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    /// Moments sized after `params`; β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        Self::with_betas(params, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn with_betas<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>, beta1: T, beta2: T, eps: T) -> Self {
        let first: Vec<Tensor<T>> = params.into_iter().map(Tensor::zeros_like).collect();
        let second = first.clone();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first,
            second,
        }
    }

    pub fn moments(&self) -> (&[Tensor<T>], &[Tensor<T>]) {
        (&self.first, &self.second)
    }

    pub(crate) fn restore(&mut self, step: u64, first: Vec<Tensor<T>>, second: Vec<Tensor<T>>) -> Result<()> {
        if first.len() != self.first.len() || second.len() != self.second.len() {
            return Err(Error::invalid("adam", "moment count mismatch on restore"));
        }
        for ((a, b), c) in first.iter().zip(&second).zip(&self.first) {
            if a.shape() != c.shape() || b.shape() != c.shape() {
                return Err(Error::shape("adam", c.shape(), a.shape()));
            }
        }
        self.step = step;
        self.first = first;
        self.second = second;
        Ok(())
    }

    /// One update of every parameter in place.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor<T>>,
        grads: &[Tensor<T>],
        lr: T,
    ) -> Result<()> {
        let params: Vec<&mut Tensor<T>> = params.into_iter().collect();
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::invalid(
                "adam",
                format!(
                    "{} params, {} grads, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            ));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam", p.shape(), g.shape()));
            }
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = self.beta1 * *mv + (one - self.beta1) * gv;
                *vv = self.beta2 * *vv + (one - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv = *pv - lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![Tensor::<f64>::new(&[3], vec![1.0, -2.0, 3.0]).unwrap()];
        let before = p.clone();
        let mut adam = AdamState::new(&p);
        for _ in 0..5 {
            adam.step(p.iter_mut(), &[Tensor::zeros(&[3])], 0.1).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = 1 and v̂ = 1 at step 1, so Δ = −lr / (1 + ε)
        let mut p = vec![Tensor::<f64>::scalar(0.0)];
        let mut adam = AdamState::new(&p);
        adam.step(p.iter_mut(), &[Tensor::scalar(1.0)], 0.1).unwrap();
        let want = -0.1 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut p = vec![Tensor::<f64>::scalar(0.5), Tensor::scalar(0.5)];
        let mut adam = AdamState::new(&p);
        for k in 0..50 {
            let g = (k as f64 * 0.37).sin();
            adam.step(p.iter_mut(), &[Tensor::scalar(g), Tensor::scalar(g)], 0.01)
                .unwrap();
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::<f64>::zeros(&[2])];
        let mut adam = AdamState::new(&p);
        assert!(adam.step(p.iter_mut(), &[Tensor::zeros(&[3])], 0.1).is_err());
    }
}
