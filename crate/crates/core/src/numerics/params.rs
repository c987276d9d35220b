//! Named parameter storage and the layer building blocks that draw from it.

use indexmap::IndexMap;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::scalar::Real;

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, named collection of learnable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    entries: IndexMap<String, Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::invalid("params", format!("duplicate parameter {name}")));
        }
        let (idx, _) = self.entries.insert_full(name, value);
        Ok(ParamId(idx))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).map(|(k, _)| k.as_str()).unwrap_or("")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.entries.values()
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.values_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn zero_all(&mut self) {
        for t in self.entries.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Replaces every tensor with a same-named, same-shaped tensor from `other`.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        for (name, t) in self.entries.iter_mut() {
            let src = other
                .entries
                .get(name)
                .ok_or_else(|| Error::invalid("params", format!("missing parameter {name}")))?;
            if src.shape() != t.shape() {
                return Err(Error::shape("params", t.shape(), src.shape()));
            }
            *t = src.clone();
        }
        if other.len() != self.len() {
            return Err(Error::invalid(
                "params",
                format!("expected {} tensors, got {}", self.len(), other.len()),
            ));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

/// Tape variables for every tensor of a store, indexed by [`ParamId`].
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Registers every parameter as a gradient-collecting leaf.
    pub fn trainable<T: Real>(tape: &mut Tape<T>, store: &ParamStore<T>) -> Self {
        Self {
            vars: store.tensors().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Registers every parameter as a constant (inference).
    pub fn frozen<T: Real>(tape: &mut Tape<T>, store: &ParamStore<T>) -> Self {
        Self {
            vars: store.tensors().map(|t| tape.constant(t.clone())).collect(),
        }
    }

    /// Binds already-recorded tape variables, in store order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Symmetric uniform fan-in initialization: `U(−1/√fan_in, 1/√fan_in)`.
pub fn fan_in_uniform<T: Real, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::lit(rng.random_range(-bound..=bound)))
}

/// Stride-1 convolution with "same" zero padding.
#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub dilation: usize,
}

impl Conv {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::invalid("conv", format!("{name}: kernel {kernel} must be odd")));
        }
        let fan_in = cin * kernel * kernel;
        let weight = store.insert(
            format!("{name}.weight"),
            fan_in_uniform(&[cout, cin, kernel, kernel], fan_in, rng),
        )?;
        let bias = store.insert(format!("{name}.bias"), fan_in_uniform(&[cout], fan_in, rng))?;
        Ok(Self {
            weight,
            bias,
            kernel,
            dilation,
        })
    }

    pub fn padding(&self) -> usize {
        self.dilation * (self.kernel - 1) / 2
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        tape.conv2d(
            x,
            params.var(self.weight),
            Some(params.var(self.bias)),
            self.padding(),
            self.dilation,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f64>::new();
        s.insert("a", Tensor::zeros(&[1])).unwrap();
        assert!(s.insert("a", Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a: Tensor<f64> = fan_in_uniform(&[4, 4, 3, 3], 36, &mut r1);
        let b: Tensor<f64> = fan_in_uniform(&[4, 4, 3, 3], 36, &mut r2);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| v.abs() <= 1.0 / 6.0));
    }
}
