//! Named parameter storage shared by the blocks and the weight file.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{Conv2d, ConvSpec, LayerNorm, ParamTensor};

/// One learned parameter group inside a block, before path expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    /// `name.weight` and `name.bias`.
    Conv(String, ConvSpec),
    /// `name.gamma` and `name.beta`, each of the given length.
    Norm(String, usize),
    /// A bare vector at `name`.
    Vector(String, usize),
}

impl Slot {
    pub fn conv(name: impl Into<String>, spec: ConvSpec) -> Self {
        Slot::Conv(name.into(), spec)
    }

    pub fn norm(name: impl Into<String>, channels: usize) -> Self {
        Slot::Norm(name.into(), channels)
    }

    pub fn vector(name: impl Into<String>, len: usize) -> Self {
        Slot::Vector(name.into(), len)
    }

    /// Expands into `(path, dims)` pairs under `prefix`.
    pub fn expand(&self, prefix: &str, out: &mut Vec<(String, Vec<usize>)>) {
        match self {
            Slot::Conv(name, spec) => {
                out.push((format!("{prefix}{name}.weight"), spec.weight_dims()));
                if spec.has_bias {
                    out.push((format!("{prefix}{name}.bias"), vec![spec.out_channels]));
                }
            }
            Slot::Norm(name, c) => {
                out.push((format!("{prefix}{name}.gamma"), vec![*c]));
                out.push((format!("{prefix}{name}.beta"), vec![*c]));
            }
            Slot::Vector(name, c) => out.push((format!("{prefix}{name}"), vec![*c])),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Slot::Conv(_, spec) => spec.param_count(),
            Slot::Norm(_, c) => 2 * c,
            Slot::Vector(_, c) => *c,
        }
    }
}

/// Map from canonical parameter path (e.g. `blocks.3.chimb.pw_expand1.weight`)
/// to its tensor, ordered by path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    tensors: BTreeMap<String, ParamTensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: ParamTensor) -> Option<ParamTensor> {
        self.tensors.insert(path.into(), tensor)
    }

    pub fn remove(&mut self, path: &str) -> Option<ParamTensor> {
        self.tensors.remove(path)
    }

    pub fn get(&self, path: &str) -> Option<&ParamTensor> {
        self.tensors.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut ParamTensor> {
        self.tensors.get_mut(path)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamTensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalars across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(ParamTensor::len).sum()
    }

    /// Checks the store holds exactly `layout`: every path present with the
    /// right dims and nothing else. Reports the first offending path in
    /// layout order, then the first extraneous one.
    pub fn validate(&self, layout: &[(String, Vec<usize>)]) -> Result<()> {
        for (path, dims) in layout {
            let tensor = self
                .tensors
                .get(path)
                .ok_or_else(|| Error::MissingParameter(path.clone()))?;
            if tensor.dims() != dims.as_slice() {
                return Err(Error::ParameterShape {
                    path: path.clone(),
                    expected: dims.clone(),
                    found: tensor.dims().to_vec(),
                });
            }
        }
        if self.tensors.len() != layout.len() {
            let known: std::collections::HashSet<&str> =
                layout.iter().map(|(p, _)| p.as_str()).collect();
            if let Some(extra) = self.tensors.keys().find(|k| !known.contains(k.as_str())) {
                return Err(Error::UnexpectedParameter(extra.clone()));
            }
        }
        Ok(())
    }

    fn require(&self, path: &str, dims: &[usize]) -> Result<&ParamTensor> {
        let t = self
            .tensors
            .get(path)
            .ok_or_else(|| Error::MissingParameter(path.to_string()))?;
        if t.dims() != dims {
            return Err(Error::ParameterShape {
                path: path.to_string(),
                expected: dims.to_vec(),
                found: t.dims().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn conv(&self, prefix: &str, spec: ConvSpec) -> Result<Conv2d> {
        let weight = self.require(&format!("{prefix}.weight"), &spec.weight_dims())?;
        let bias = if spec.has_bias {
            Some(
                self.require(&format!("{prefix}.bias"), &[spec.out_channels])?
                    .data()
                    .to_vec(),
            )
        } else {
            None
        };
        Conv2d::new(spec, weight.clone(), bias)
    }

    pub fn norm(&self, prefix: &str, channels: usize) -> Result<LayerNorm> {
        Ok(LayerNorm {
            gamma: self.vector(&format!("{prefix}.gamma"), channels)?,
            beta: self.vector(&format!("{prefix}.beta"), channels)?,
        })
    }

    pub fn vector(&self, path: &str, len: usize) -> Result<Vec<f32>> {
        Ok(self.require(path, &[len])?.data().to_vec())
    }
}
