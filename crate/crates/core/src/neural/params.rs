use indexmap::IndexMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub trainable: bool,
}

/// Named parameters in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
    names: IndexMap<String, ParamId>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            names: IndexMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<S>) -> Result<ParamId> {
        if self.names.contains_key(name) {
            return Err(Error::InvalidConfig(format!("duplicate parameter name {name:?}")));
        }
        let id = ParamId(self.params.len());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            trainable: true,
        });
        self.names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<S>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    trainable: p.trainable,
                })
                .collect(),
            names: self.names.clone(),
        }
    }
}

/// Gradient buffers aligned with a [`ParamStore`], allocated on first touch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn new(params: &ParamStore<S>) -> Self {
        Gradients {
            grads: vec![None; params.len()],
        }
    }

    pub(crate) fn buffer(&mut self, id: ParamId, len: usize) -> &mut [S] {
        self.grads[id.0].get_or_insert_with(|| vec![S::zero(); len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[S]> {
        self.grads[id.0].as_deref()
    }

    /// Gradient of one coordinate (zero if untouched).
    pub fn at(&self, id: ParamId, i: usize) -> S {
        self.get(id).map_or(S::zero(), |g| g[i])
    }

    pub fn scale(&mut self, factor: S) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add(&mut self, other: &Gradients<S>) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(src) = g {
                let dst = self.grads[i].get_or_insert_with(|| vec![S::zero(); src.len()]);
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += *s);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
    }
}
