//! Dense `(stage, state, action)` tensors shared by costs, flows and Q-values.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Shape of a stage-state-action tensor. `stages` is `T + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub stages: usize,
    pub states: usize,
    pub actions: usize,
}

impl Shape {
    pub fn new(stages: usize, states: usize, actions: usize) -> Self {
        Self {
            stages,
            states,
            actions,
        }
    }

    pub fn len(&self) -> usize {
        self.stages * self.states * self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, t: usize, s: usize, a: usize) -> usize {
        debug_assert!(t < self.stages && s < self.states && a < self.actions);
        (t * self.states + s) * self.actions + a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTensor {
    shape: Shape,
    data: Vec<f64>,
}

/// Cost tensors `C^i` and congestion costs `ℓ^i` use the same layout.
pub type CostTensor = StageTensor;

impl StageTensor {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "tensor of shape {}x{}x{} needs {} entries, got {}",
                shape.stages,
                shape.states,
                shape.actions,
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for t in 0..shape.stages {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    data.push(f(t, s, a));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> f64 {
        self.data[self.shape.index(t, s, a)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, a: usize, value: f64) {
        let i = self.shape.index(t, s, a);
        self.data[i] = value;
    }

    /// The action slice at `(t, s)`.
    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let start = self.shape.index(t, s, 0);
        &self.data[start..start + self.shape.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize, s: usize) -> &mut [f64] {
        let start = self.shape.index(t, s, 0);
        let a = self.shape.actions;
        &mut self.data[start..start + a]
    }

    pub fn dot(&self, other: &StageTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum())
    }

    pub fn check_same_shape(&self, other: &StageTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Sum over actions of the entries at stage `t`, one value per state.
    pub fn state_marginal(&self, t: usize) -> Vec<f64> {
        (0..self.shape.states)
            .map(|s| self.row(t, s).iter().sum())
            .collect()
    }

    /// `self + gamma * (other - self)`, in place.
    pub fn move_toward(&mut self, other: &StageTensor, gamma: f64) -> Result<()> {
        self.check_same_shape(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += gamma * (y - *x);
        }
        Ok(())
    }
}

/// Sparse on-disk form: only nonzero entries are written as `[t, s, a, value]`.
#[derive(Serialize, Deserialize)]
struct SparseRepr {
    shape: Shape,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl Serialize for StageTensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let sh = self.shape;
        let mut entries = Vec::new();
        for t in 0..sh.stages {
            for s in 0..sh.states {
                for (a, &v) in self.row(t, s).iter().enumerate() {
                    if v != 0.0 {
                        entries.push((t, s, a, v));
                    }
                }
            }
        }
        SparseRepr { shape: sh, entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StageTensor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SparseRepr::deserialize(deserializer)?;
        let sh = repr.shape;
        let mut out = StageTensor::zeros(sh);
        for (t, s, a, v) in repr.entries {
            if t >= sh.stages || s >= sh.states || a >= sh.actions {
                return Err(D::Error::custom(format!(
                    "entry ({t}, {s}, {a}) outside shape {sh:?}"
                )));
            }
            out.set(t, s, a, v);
        }
        Ok(out)
    }
}
