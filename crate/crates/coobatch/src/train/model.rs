//! Embedding tables and one-sided SGNS gradient updates.
//!
//! Parameters are stored as 32-bit floats; gradient accumulation runs in
//! 64-bit. Updates within a minibatch are computed against the pre-update
//! parameter snapshot, accumulated per entity in ascending entity order,
//! and applied once at the end, which makes the result independent of the
//! order the examples were listed in.

use std::collections::BTreeMap;

use rand::Rng;

use crate::arrange::{Designation, Minibatch};
use crate::error::{Error, Result};
use crate::rng;

/// A flat row-major table of `len` vectors of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_data(len: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != len * dim {
            return Err(Error::DimensionMismatch {
                expected: len * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, id: u32) -> &[f32] {
        let k = id as usize * self.dim;
        &self.data[k..k + self.dim]
    }

    pub fn vector_mut(&mut self, id: u32) -> &mut [f32] {
        let k = id as usize * self.dim;
        &mut self.data[k..k + self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Focus and context embedding tables plus the optional per-context bias.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub focus: EmbeddingTable,
    pub context: EmbeddingTable,
    /// Present iff the bias parameter is enabled.
    pub context_bias: Option<Vec<f32>>,
}

impl EmbeddingModel {
    /// Random initialization: every coordinate i.i.d. uniform on
    /// `[-0.5/d, 0.5/d]`, biases zero. Deterministic per seed.
    pub fn init(n_focus: usize, n_context: usize, dim: usize, seed: u64, bias: bool) -> Self {
        assert!(n_focus >= 1 && n_context >= 1 && dim >= 1);
        let mut rng = rng::stream(seed, "model-init");
        let half = 0.5 / dim as f64;
        let mut fill = |n: usize| -> Vec<f32> {
            (0..n * dim)
                .map(|_| (rng.gen::<f64>() * 2.0 * half - half) as f32)
                .collect()
        };
        let focus = EmbeddingTable {
            dim,
            data: fill(n_focus),
        };
        let context = EmbeddingTable {
            dim,
            data: fill(n_context),
        };
        EmbeddingModel {
            focus,
            context,
            context_bias: bias.then(|| vec![0.0; n_context]),
        }
    }

    pub fn dim(&self) -> usize {
        self.focus.dim()
    }

    pub fn bias(&self, j: u32) -> f64 {
        self.context_bias
            .as_ref()
            .map_or(0.0, |b| f64::from(b[j as usize]))
    }
}

/// The training logit for a pair: `f . c + bias` (sigma is applied by the
/// loss, not here).
pub fn score(f: &[f32], c: &[f32], bias: f64) -> f64 {
    dot(f, c) + bias
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Whether a loss term treats its pair as an observed association or a
/// sampled negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    Positive,
    Negative,
}

/// Numerically stable sigmoid.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// The loss value and its derivative with respect to the score.
///
/// Positive: `(-ln sigma(s), -sigma(-s))`. Negative: `(-ln sigma(-s), sigma(s))`.
/// Stable for |s| well past 500.
pub fn loss_terms(s: f64, kind: ExampleKind) -> (f64, f64) {
    match kind {
        ExampleKind::Positive => (softplus(-s), -sigmoid(-s)),
        ExampleKind::Negative => (softplus(s), sigmoid(s)),
    }
}

/// Full SGNS gradients in 64-bit, for gradient checking and the update
/// kernels: returns (dL/df, dL/dc, dL/dbias).
pub fn sgns_gradients64(
    f: &[f64],
    c: &[f64],
    bias: f64,
    kind: ExampleKind,
) -> (Vec<f64>, Vec<f64>, f64) {
    let s: f64 = f.iter().zip(c).map(|(&x, &y)| x * y).sum::<f64>() + bias;
    let (_, dl_ds) = loss_terms(s, kind);
    let df: Vec<f64> = c.iter().map(|&y| dl_ds * y).collect();
    let dc: Vec<f64> = f.iter().map(|&x| dl_ds * x).collect();
    (df, dc, dl_ds)
}

/// 64-bit SGNS loss value, the oracle side for gradient checks.
pub fn sgns_loss64(f: &[f64], c: &[f64], bias: f64, kind: ExampleKind) -> f64 {
    let s: f64 = f.iter().zip(c).map(|(&x, &y)| x * y).sum::<f64>() + bias;
    loss_terms(s, kind).0
}

/// Counts reported by one minibatch application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateSummary {
    /// Gradient updates performed: one per evaluated example loss term.
    pub gradient_updates: u64,
    /// Positive examples in the minibatch.
    pub positives: u64,
}

/// Apply one minibatch of one-sided updates.
///
/// A focus-designated minibatch mutates only focus vectors; a
/// context-designated one mutates only context vectors and biases. The
/// bias enters every logit but is updated only on the context side.
pub fn apply_minibatch(
    model: &mut EmbeddingModel,
    mb: &Minibatch,
    learning_rate: f64,
) -> Result<UpdateSummary> {
    let d = model.dim();
    for &(i, j) in &mb.positives {
        if i as usize >= model.focus.len() || j as usize >= model.context.len() {
            return Err(Error::DimensionMismatch {
                expected: model.focus.len().max(model.context.len()),
                actual: i.max(j) as usize,
            });
        }
    }
    for &e in &mb.negative_entities {
        let bound = match mb.designation {
            Designation::Focus => model.context.len(),
            Designation::Context => model.focus.len(),
        };
        if e as usize >= bound {
            return Err(Error::DimensionMismatch {
                expected: bound,
                actual: e as usize,
            });
        }
    }

    // Group the positives of each updated entity; sorting the partner list
    // makes the accumulation order canonical under input permutation.
    let mut grouped: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &pair in &mb.positives {
        let (entity, partner) = match mb.designation {
            Designation::Focus => (pair.0, pair.1),
            Designation::Context => (pair.1, pair.0),
        };
        grouped.entry(entity).or_default().push(partner);
    }

    let mut staged: Vec<(u32, Vec<f64>, f64)> = Vec::with_capacity(grouped.len());
    for (entity, mut partners) in grouped {
        partners.sort_unstable();
        let own = match mb.designation {
            Designation::Focus => model.focus.vector(entity),
            Designation::Context => model.context.vector(entity),
        };
        let own_bias = match mb.designation {
            Designation::Focus => 0.0, // bias belongs to the context side
            Designation::Context => model.bias(entity),
        };
        let mut delta = vec![0.0f64; d];
        let mut delta_bias = 0.0f64;
        for &p in &partners {
            let (other, pair_bias) = match mb.designation {
                Designation::Focus => (model.context.vector(p), model.bias(p)),
                Designation::Context => (model.focus.vector(p), own_bias),
            };
            let s = dot(own, other) + pair_bias;
            let (_, g) = loss_terms(s, ExampleKind::Positive);
            axpy(&mut delta, -learning_rate * g, other);
            delta_bias += -learning_rate * g;
        }
        // Each of this entity's positives pairs with the whole shared
        // negative set, and the per-pair term only depends on the entity
        // and the negative, so one evaluation scaled by multiplicity is
        // exact.
        let multiplicity = partners.len() as f64;
        for &neg in &mb.negative_entities {
            let (other, pair_bias) = match mb.designation {
                Designation::Focus => (model.context.vector(neg), model.bias(neg)),
                Designation::Context => (model.focus.vector(neg), own_bias),
            };
            let s = dot(own, other) + pair_bias;
            let (_, g) = loss_terms(s, ExampleKind::Negative);
            axpy(&mut delta, -learning_rate * multiplicity * g, other);
            delta_bias += -learning_rate * multiplicity * g;
        }
        staged.push((entity, delta, delta_bias));
    }

    for (entity, delta, delta_bias) in staged {
        let own = match mb.designation {
            Designation::Focus => model.focus.vector_mut(entity),
            Designation::Context => model.context.vector_mut(entity),
        };
        for (x, dx) in own.iter_mut().zip(&delta) {
            *x = (f64::from(*x) + dx) as f32;
        }
        if mb.designation == Designation::Context {
            if let Some(biases) = model.context_bias.as_mut() {
                let b = &mut biases[entity as usize];
                *b = (f64::from(*b) + delta_bias) as f32;
            }
        }
    }

    let positives = mb.positives.len() as u64;
    Ok(UpdateSummary {
        gradient_updates: positives * (1 + mb.negative_entities.len() as u64),
        positives,
    })
}

fn axpy(acc: &mut [f64], a: f64, x: &[f32]) {
    for (s, &v) in acc.iter_mut().zip(x) {
        *s += a * f64::from(v);
    }
}
