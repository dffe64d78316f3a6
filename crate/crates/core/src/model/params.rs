use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// One named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: ArrayD<f64>,
    pub trainable: bool,
}

/// Ordered collection of parameter arrays. Order is part of the model
/// definition: layers address their weights by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: ArrayD<f64>, trainable: bool) -> usize {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn get(&self, i: usize) -> &ArrayD<f64> {
        &self.params[i].value
    }

    pub fn get_mut(&mut self, i: usize) -> &mut ArrayD<f64> {
        &mut self.params[i].value
    }

    pub fn param(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn total_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Zero gradients congruent with this set.
    pub fn zeros_like(&self) -> Grads {
        Grads(
            self.params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect(),
        )
    }

    /// Replaces values from `other`, which must match names and shapes.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::format(
                0,
                format!("expected {} parameter arrays, got {}", self.len(), other.len()),
            ));
        }
        for (mine, theirs) in self.params.iter_mut().zip(other.iter()) {
            if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() {
                return Err(Error::format(
                    0,
                    format!(
                        "shape mismatch: {} {:?} vs {} {:?}",
                        mine.name,
                        mine.value.shape(),
                        theirs.name,
                        theirs.value.shape()
                    ),
                ));
            }
            mine.value.assign(&theirs.value);
        }
        Ok(())
    }
}

/// Gradients, one array per parameter of the owning [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<ArrayD<f64>>);

impl Grads {
    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.0 {
            a.mapv_inplace(|v| v * s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// He-normal initialized array with the given fan-in.
pub(crate) fn he_normal<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> ArrayD<f64> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std dev");
    ArrayD::from_shape_simple_fn(IxDyn(shape), || normal.sample(rng))
}

/// `ln(1 + e^r)`, overflow-safe.
#[inline]
pub fn softplus(r: f64) -> f64 {
    r.max(0.0) + (-r.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `v > 0`.
#[inline]
pub fn softplus_inv(v: f64) -> f64 {
    v + (-(-v).exp_m1()).ln()
}

/// Derivative of [`softplus`].
#[inline]
pub fn sigmoid(r: f64) -> f64 {
    if r >= 0.0 {
        1.0 / (1.0 + (-r).exp())
    } else {
        let e = r.exp();
        e / (1.0 + e)
    }
}
