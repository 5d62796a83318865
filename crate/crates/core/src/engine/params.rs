use indexmap::IndexMap;

use crate::engine::real::Real;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// How the optimizer treats a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Weight matrices, embedding tables and linear weights; subject to weight decay.
    Weight,
    /// Additive offsets; never decayed.
    Bias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub kind: ParamKind,
}

/// Every learnable tensor of a model, keyed by a unique name, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T> {
    params: IndexMap<String, Parameter<T>>,
}

impl<T: Real> Default for ParameterStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            params: IndexMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, value: Tensor<T>, kind: ParamKind) -> Result<usize> {
        if self.params.contains_key(name) {
            return Err(Error::Model(format!("parameter {name:?} registered twice")));
        }
        let (idx, _) = self
            .params
            .insert_full(name.to_string(), Parameter { value, kind });
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.get_index_of(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn by_index(&self, idx: usize) -> &Tensor<T> {
        &self.params[idx].value
    }

    pub fn by_index_mut(&mut self, idx: usize) -> &mut Tensor<T> {
        &mut self.params[idx].value
    }

    pub fn name(&self, idx: usize) -> &str {
        self.params
            .get_index(idx)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    pub fn kind(&self, idx: usize) -> ParamKind {
        self.params[idx].kind
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// Replaces a tensor keeping its name and kind; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let slot = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::Model(format!("unknown parameter {name:?}")))?;
        if slot.value.shape() != value.shape() {
            return Err(Error::shape("set", slot.value.shape(), value.shape()));
        }
        slot.value = value;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParameterStore<U> {
        ParameterStore {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Parameter {
                            value: p.value.cast(),
                            kind: p.kind,
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Gradients of a scalar loss, shape-congruent with a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStore<T> {
    names: Vec<String>,
    grads: Vec<Tensor<T>>,
}

impl<T: Real> GradientStore<T> {
    pub fn zeros_like(params: &ParameterStore<T>) -> Self {
        let (names, grads) = params
            .iter()
            .map(|(n, p)| (n.to_string(), Tensor::zeros(p.value.shape())))
            .unzip();
        Self { names, grads }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.grads[i])
    }

    pub fn by_index(&self, idx: usize) -> &Tensor<T> {
        &self.grads[idx]
    }

    pub(crate) fn by_index_mut(&mut self, idx: usize) -> &mut Tensor<T> {
        &mut self.grads[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.grads)
    }

    pub fn zero(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(T::zero()));
    }
}
