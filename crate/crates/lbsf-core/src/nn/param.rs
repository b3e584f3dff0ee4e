//! Named trainable parameters and their gradient buffers.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Handle to a parameter inside a [`ParamSet`]. Stable for the set's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    /// Position in the owning set's registration order.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub trainable: bool,
}

/// All parameters of a model, in registration order.
///
/// Registration order is fixed by the model builder, which makes checkpoint
/// bytes and optimizer traversal deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<S> {
    entries: Vec<Parameter<S>>,
    by_name: BTreeMap<String, ParamId>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new(), by_name: BTreeMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<S>) -> ParamId {
        self.register_with(name, value, true)
    }

    pub fn register_with(&mut self, name: impl Into<String>, value: Tensor<S>, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Parameter { name, value, trainable });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.entries[id.0].value
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    /// Parameters in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<S>)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar coordinates in trainable parameters.
    pub fn trainable_numel(&self) -> usize {
        self.entries.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum()
    }

    /// Set every parameter to zero. Test helper for residual-identity checks.
    pub fn zero_all(&mut self) {
        for p in self.entries.iter_mut() {
            p.value = Tensor::zeros(p.value.shape().to_vec());
        }
    }

    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        let mut out = ParamSet::new();
        for p in &self.entries {
            out.register_with(p.name.clone(), p.value.cast::<T>(), p.trainable);
        }
        out
    }
}

/// Gradient buffers parallel to a [`ParamSet`]. Slots stay `None` until the
/// first accumulation so untouched parameters are cheap to skip.
#[derive(Debug, Clone)]
pub struct Grads<S> {
    slots: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Grads<S> {
    pub fn zeros_like(params: &ParamSet<S>) -> Self {
        Grads { slots: vec![None; params.len()] }
    }

    pub fn accumulate(&mut self, id: ParamId, delta: &Tensor<S>) {
        match &mut self.slots[id.0] {
            Some(g) => g.add_assign(delta),
            slot => *slot = Some(delta.clone()),
        }
    }

    /// Mutable dense gradient for `id`, materializing zeros on first touch.
    pub fn entry(&mut self, id: ParamId, shape: &[usize]) -> &mut Tensor<S> {
        self.slots[id.0].get_or_insert_with(|| Tensor::zeros(shape.to_vec()))
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<S>> {
        self.slots[id.0].as_ref()
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut Tensor<S>> {
        self.slots[id.0].as_mut()
    }

    pub fn clear(&mut self) {
        for s in self.slots.iter_mut() {
            *s = None;
        }
    }

    pub fn scale_all(&mut self, c: S) {
        for s in self.slots.iter_mut().flatten() {
            s.scale_assign(c);
        }
    }

    /// Merge another gradient buffer into this one (slot-wise sum).
    pub fn merge(&mut self, other: &Grads<S>) {
        assert_eq!(self.slots.len(), other.slots.len());
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                match &mut self.slots[i] {
                    Some(mine) => mine.add_assign(g),
                    slot => *slot = Some(g.clone()),
                }
            }
        }
    }
}

/// Initialization rules used by the model builder.
pub mod init {
    use super::*;

    /// Xavier-uniform weight matrix: `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
    pub fn linear_weight<S: Scalar, R: Rng>(rng: &mut R, fan_out: usize, fan_in: usize) -> Tensor<S> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..fan_out * fan_in).map(|_| S::from_f64(dist.sample(rng))).collect();
        Tensor::matrix(fan_out, fan_in, data)
    }

    pub fn zeros_vector<S: Scalar>(n: usize) -> Tensor<S> {
        Tensor::zeros(vec![n])
    }

    pub fn ones_vector<S: Scalar>(n: usize) -> Tensor<S> {
        Tensor::vector(vec![S::one(); n])
    }

    /// `N(0, 0.02)` rows, used for token tables and the CLS token.
    pub fn embedding_table<S: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor<S> {
        let dist = Normal::new(0.0, 0.02).expect("valid normal");
        let data = (0..rows * cols).map(|_| S::from_f64(dist.sample(rng))).collect();
        Tensor::new(vec![rows, cols], data)
    }

    pub fn normal_vector<S: Scalar, R: Rng>(rng: &mut R, n: usize) -> Tensor<S> {
        let dist = Normal::new(0.0, 0.02).expect("valid normal");
        Tensor::vector((0..n).map(|_| S::from_f64(dist.sample(rng))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registration_order_is_stable() {
        let mut ps = ParamSet::<f32>::new();
        let a = ps.register("b_second", Tensor::vector(vec![1.0]));
        let b = ps.register("a_first", Tensor::vector(vec![2.0]));
        let names: Vec<&str> = ps.iter().map(|(_, p)| p.name.as_str()).collect();
        assert_eq!(names, ["b_second", "a_first"]);
        assert_eq!(ps.id_of("b_second"), Some(a));
        assert_eq!(ps.id_of("a_first"), Some(b));
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::<f32>::new();
        ps.register("w", Tensor::vector(vec![0.0]));
        ps.register("w", Tensor::vector(vec![0.0]));
    }

    #[test]
    fn grads_merge_sums_slotwise() {
        let mut ps = ParamSet::<f64>::new();
        let w = ps.register("w", Tensor::vector(vec![0.0, 0.0]));
        let mut g1 = Grads::zeros_like(&ps);
        let mut g2 = Grads::zeros_like(&ps);
        g1.accumulate(w, &Tensor::vector(vec![1.0, 2.0]));
        g2.accumulate(w, &Tensor::vector(vec![10.0, 20.0]));
        g1.merge(&g2);
        assert_eq!(g1.get(w).unwrap().data(), &[11.0, 22.0]);
    }
}
