use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Index of a parameter inside its [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a new parameter is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    Zeros,
}

/// A named tensor with its Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    name: String,
    value: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// Owns every trainable tensor of a model.
///
/// Creation order and seed fully determine initial values.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
    step: u64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for ParameterStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.step == other.step && self.seed == other.seed
    }
}

impl ParameterStore {
    pub fn new(seed: u64) -> Self {
        ParameterStore {
            params: Vec::new(),
            by_name: BTreeMap::new(),
            step: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of Adam updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn create(&mut self, name: &str, shape: &[usize], init: Init) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("parameter {name} has shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Xavier => {
                let (fan_out, fan_in) = match *shape {
                    [n] => (1, n),
                    [r, c] => (r, c),
                    _ => (shape[0], shape[1..].iter().product()),
                };
                let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                (0..n).map(|_| self.rng.gen_range(-bound..=bound)).collect()
            }
        };
        let id = ParamId(self.params.len());
        self.params.push(Parameter {
            name: name.into(),
            value: Tensor::new(shape.to_vec(), data)?,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        self.by_name.insert(name.into(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.params[id.0].value.data_mut()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Value plus both moment buffers, for the optimizer.
    pub(crate) fn slots_mut(&mut self, id: ParamId) -> (&mut [f64], &mut [f64], &mut [f64]) {
        let p = &mut self.params[id.0];
        (p.value.data_mut(), &mut p.m, &mut p.v)
    }

    /// Overwrites a parameter from saved state. The shape must be unchanged.
    pub fn restore(&mut self, name: &str, value: Vec<f64>, m: Vec<f64>, v: Vec<f64>) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name}")))?;
        let p = &mut self.params[id.0];
        let n = p.value.len();
        if value.len() != n || m.len() != n || v.len() != n {
            return Err(Error::Shape(format!(
                "parameter {name} expects {n} values, got {}/{}/{}",
                value.len(),
                m.len(),
                v.len()
            )));
        }
        p.value.data_mut().copy_from_slice(&value);
        p.m = m;
        p.v = v;
        Ok(())
    }

    /// Copies values of parameters that exist in `other` with the same name and
    /// shape; returns how many were copied. Moments are reset.
    pub fn copy_matching(&mut self, other: &ParameterStore) -> usize {
        let mut copied = 0;
        for p in &mut self.params {
            if let Some(id) = other.id(&p.name) {
                let src = other.get(id);
                if src.shape() == p.shape() {
                    p.value.data_mut().copy_from_slice(src.value.data());
                    p.m.iter_mut().for_each(|x| *x = 0.0);
                    p.v.iter_mut().for_each(|x| *x = 0.0);
                    copied += 1;
                }
            }
        }
        copied
    }

    /// Sum of squares of every parameter entry.
    pub fn l2(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.value.data())
            .map(|x| x * x)
            .sum()
    }
}
