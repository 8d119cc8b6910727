//! Microbatches, minibatches, and designations.

/// Which side of the model a microbatch or minibatch updates. Also names
/// the entity axis an LSH map or a refinement operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Designation {
    Focus,
    Context,
}

impl Designation {
    pub fn flip(self) -> Self {
        match self {
            Designation::Focus => Designation::Context,
            Designation::Context => Designation::Focus,
        }
    }

    /// The entity of a positive pair that this designation updates.
    pub fn entity_of(self, pair: (u32, u32)) -> u32 {
        match self {
            Designation::Focus => pair.0,
            Designation::Context => pair.1,
        }
    }
}

/// An atomic randomized set of positive examples. Draws are independent
/// across microbatches; all structure lives inside one microbatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microbatch {
    pub designation: Designation,
    /// Positive `(focus, context)` pairs.
    pub positives: Vec<(u32, u32)>,
}

impl Microbatch {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// A gradient-application unit: accumulated whole microbatches with at
/// least `b` positives, plus a shared set of negative entities.
///
/// For a focus-designated minibatch the negative entities are contexts
/// `C'`; the negative pairs are exactly the product of the positives'
/// focus entities with `C'`. Symmetrically for context designation.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub designation: Designation,
    pub positives: Vec<(u32, u32)>,
    /// The shared negative entity set (`C'` or `F'`), with multiplicity.
    pub negative_entities: Vec<u32>,
}

impl Minibatch {
    /// The negative pairs `P x C'` (or `F' x P`), one per positive per
    /// negative entity.
    pub fn negatives(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.positives.iter().flat_map(move |&(i, j)| {
            self.negative_entities
                .iter()
                .map(move |&e| match self.designation {
                    Designation::Focus => (i, e),
                    Designation::Context => (e, j),
                })
        })
    }

    pub fn negative_count(&self) -> usize {
        self.positives.len() * self.negative_entities.len()
    }
}
