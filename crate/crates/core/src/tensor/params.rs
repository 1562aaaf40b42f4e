use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::array::{Array, Float};
use super::graph::{Gradients, Graph, Var};
use crate::error::{Error, Result};

/// Ordered registry of named parameters.
///
/// Insertion order is the construction order of the network, which makes the
/// registry (and anything serialized from it) stable for a given config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    params: IndexMap<String, Array<T>>,
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array<T>) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Array<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array<T>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Number of named tensors.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar parameter count.
    pub fn num_elements(&self) -> usize {
        self.params.values().map(Array::len).sum()
    }

    pub fn cast<U: Float>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Registers every parameter as a gradient-tracked leaf of `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph<T>) -> Bound<'g, T> {
        let vars = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), graph.param(v.clone())))
            .collect();
        Bound { graph, vars }
    }

    /// Registers every parameter as a constant (inference only).
    pub fn bind_constant<'g>(&self, graph: &'g Graph<T>) -> Bound<'g, T> {
        let vars = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), graph.constant(v.clone())))
            .collect();
        Bound { graph, vars }
    }
}

/// Parameters registered on one graph.
pub struct Bound<'g, T: Float> {
    graph: &'g Graph<T>,
    vars: IndexMap<String, Var>,
}

impl<'g, T: Float> Bound<'g, T> {
    /// Binds already-registered graph variables under parameter names.
    pub fn from_vars(graph: &'g Graph<T>, vars: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self {
            graph,
            vars: vars.into_iter().collect(),
        }
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))
    }

    /// Gradients keyed by parameter name, in registry order.
    pub fn collect(&self, grads: &mut Gradients<T>) -> IndexMap<String, Array<T>> {
        self.vars
            .iter()
            .map(|(k, &v)| {
                let g = grads.take(v).unwrap_or_else(|| Array::zeros(&self.graph.shape(v)));
                (k.clone(), g)
            })
            .collect()
    }
}

/// Seeded parameter initializer. Values are drawn in f64 and cast, so f32 and
/// f64 networks built from the same seed agree up to rounding.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    pub fn uniform<T: Float>(&mut self, shape: &[usize], bound: f64) -> Array<T> {
        let rng = &mut self.rng;
        Array::from_fn(shape, |_| T::from_f(rng.random_range(-bound..=bound)))
    }

    /// `uniform(±1/√fan_in)`.
    pub fn fan_in<T: Float>(&mut self, shape: &[usize], fan_in: usize) -> Array<T> {
        self.uniform(shape, 1.0 / (fan_in as f64).sqrt())
    }
}
