//! Locality-sensitive key maps and microbatch refinement.
//!
//! A map assigns one randomized key to every entity on one axis so that
//! similar entities collide:
//!
//! * **Jaccard maps** run one consistent-weighted-sampling draw over an
//!   entity's association vector; the collision probability of two
//!   entities equals the weighted Jaccard similarity of their rows (or
//!   columns), exactly, for arbitrary nonnegative weights. (A plain
//!   exponential race `argmin u_j / w_j` matches that law only for
//!   equal-weight vectors; on general weights its collision rate is the
//!   probability-Jaccard instead, which can differ by several percent.)
//! * **Angular maps** take the sign of a projection of a coarse embedding
//!   vector onto a random direction; the collision probability is
//!   `1 - theta/pi` for angle `theta` between the coarse vectors.
//!
//! Refinement partitions a coordinated microbatch by key so that parts are
//! smaller while similar entities preferentially stay together. With `r`
//! independent maps the co-placement probability is the single-map
//! collision probability raised to `r`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::arrange::types::{Designation, Microbatch};
use crate::data::AssociationMatrix;
use crate::error::{Error, Result};
use crate::train::EmbeddingTable;

/// One randomized key per entity on one axis.
#[derive(Debug, Clone)]
pub struct LshMap {
    pub axis: Designation,
    pub keys: Vec<u64>,
}

impl LshMap {
    pub fn key(&self, entity: u32) -> u64 {
        self.keys[entity as usize]
    }
}

/// Jaccard LSH map over association vectors via consistent weighted
/// sampling: one shared randomness triple `(r_j, c_j, beta_j)` per
/// cross-axis coordinate per map; each entity keys on the winning
/// `(coordinate, quantized log-weight level)` pair of its support.
/// `Pr[key_a = key_b]` equals the weighted Jaccard similarity of the two
/// association vectors. Argmin ties break toward the smaller coordinate.
///
/// Every entity on the axis must have at least one positive entry.
pub fn jaccard_lsh_map<R: Rng + ?Sized>(
    matrix: &AssociationMatrix,
    axis: Designation,
    rng: &mut R,
) -> Result<LshMap> {
    let (n_axis, n_cross) = match axis {
        Designation::Focus => (matrix.n_focus(), matrix.n_context()),
        Designation::Context => (matrix.n_context(), matrix.n_focus()),
    };
    // Gamma(2,1) draws; (0,1) uniforms keep the logs finite.
    let gamma2 = |rng: &mut R| -> f64 {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let g = -((1.0 - u1).ln() + (1.0 - u2).ln());
        g.max(f64::MIN_POSITIVE)
    };
    let mut shared: Vec<(f64, f64, f64)> = Vec::with_capacity(n_cross);
    for _ in 0..n_cross {
        let r = gamma2(rng);
        let c = gamma2(rng);
        let beta: f64 = rng.gen();
        shared.push((r, c, beta));
    }

    let mut keys = vec![0u64; n_axis];
    for id in 0..n_axis as u32 {
        let mut best: Option<(f64, u32, i32)> = None;
        let mut consider = |cross: u32, w: f64| {
            let (r, c, beta) = shared[cross as usize];
            let t = (w.ln() / r + beta).floor();
            let level = t.clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32;
            // a = c / (y * e^r) with y = e^{r (t - beta)}
            let a = c / (r * (t - beta) + r).exp();
            match best {
                Some((bv, bc, _)) if (bv, bc) <= (a, cross) => {}
                _ => best = Some((a, cross, level)),
            }
        };
        match axis {
            Designation::Focus => {
                for e in matrix.row(id) {
                    consider(e.context, e.weight);
                }
            }
            Designation::Context => {
                for e in matrix.col_desc(id) {
                    consider(e.focus, e.weight);
                }
            }
        }
        let (_, winner, level) = best.ok_or(Error::UndefinedKey {
            axis,
            id,
            reason: "empty association vector",
        })?;
        keys[id as usize] = (u64::from(winner) << 32) | u64::from(level as u32);
    }
    Ok(LshMap { axis, keys })
}

/// Angular LSH map over a coarse embedding: one random direction per map,
/// key = sign of the projection.
pub fn angular_lsh_map<R: Rng + ?Sized>(
    table: &EmbeddingTable,
    axis: Designation,
    rng: &mut R,
) -> Result<LshMap> {
    let d = table.dim();
    let direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut keys = vec![0u64; table.len()];
    for id in 0..table.len() as u32 {
        let v = table.vector(id);
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::UndefinedKey {
                axis,
                id,
                reason: "zero coarse vector",
            });
        }
        let dot: f64 = v
            .iter()
            .zip(&direction)
            .map(|(&x, &r)| f64::from(x) * r)
            .sum();
        keys[id as usize] = u64::from(dot >= 0.0);
    }
    Ok(LshMap { axis, keys })
}

/// Partition a microbatch by the tuple of keys its designation-axis
/// entities take across `maps`. Parts preserve the designation, are
/// disjoint, and union back to the input.
pub fn refine(mb: &Microbatch, maps: &[&LshMap]) -> Vec<Microbatch> {
    for map in maps {
        assert_eq!(
            map.axis, mb.designation,
            "map axis must match the microbatch designation"
        );
    }
    if maps.is_empty() {
        return vec![mb.clone()];
    }
    let mut parts: BTreeMap<Vec<u64>, Vec<(u32, u32)>> = BTreeMap::new();
    for &pair in &mb.positives {
        let entity = mb.designation.entity_of(pair);
        let key: Vec<u64> = maps.iter().map(|m| m.key(entity)).collect();
        parts.entry(key).or_default().push(pair);
    }
    parts
        .into_values()
        .map(|positives| Microbatch {
            designation: mb.designation,
            positives,
        })
        .collect()
}

/// Refine with maps drawn without replacement from a pool until every part
/// has at most `cap` positives or the pool is exhausted. Returns the parts
/// and the number of parts left oversize by pool exhaustion.
pub fn adaptive_refine<R: Rng + ?Sized>(
    mb: &Microbatch,
    pool: &[LshMap],
    cap: usize,
    rng: &mut R,
) -> (Vec<Microbatch>, usize) {
    assert!(cap >= 1, "cap must be at least 1");
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);

    let mut done = Vec::new();
    let mut oversize = 0usize;
    let mut stack = vec![(mb.clone(), 0usize)];
    while let Some((part, depth)) = stack.pop() {
        if part.len() <= cap {
            done.push(part);
        } else if depth == order.len() {
            oversize += 1;
            done.push(part);
        } else {
            let map = &pool[order[depth]];
            for child in refine(&part, &[map]) {
                stack.push((child, depth + 1));
            }
        }
    }
    (done, oversize)
}

/// Partition by ground-truth block label (the reference upper bound for
/// any LSH refinement). Labels must cover every entity on the axis.
pub fn oracle_refine(mb: &Microbatch, labels: &[u32]) -> Result<Vec<Microbatch>> {
    let mut parts: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for &pair in &mb.positives {
        let entity = mb.designation.entity_of(pair);
        let label = labels
            .get(entity as usize)
            .copied()
            .ok_or(Error::MissingLabel { id: entity })?;
        parts.entry(label).or_default().push(pair);
    }
    Ok(parts
        .into_values()
        .map(|positives| Microbatch {
            designation: mb.designation,
            positives,
        })
        .collect())
}

/// A precomputed set of maps for one axis, drawn from at arrangement time.
#[derive(Debug, Clone)]
pub struct LshPool {
    pub axis: Designation,
    pub maps: Vec<LshMap>,
}

impl LshPool {
    pub fn build_jaccard<R: Rng + ?Sized>(
        matrix: &AssociationMatrix,
        axis: Designation,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let maps = (0..count)
            .map(|_| jaccard_lsh_map(matrix, axis, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { axis, maps })
    }

    pub fn build_angular<R: Rng + ?Sized>(
        table: &EmbeddingTable,
        axis: Designation,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let maps = (0..count)
            .map(|_| angular_lsh_map(table, axis, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { axis, maps })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Persist as key triples: header `n_entities n_maps n_keys`, then one
    /// `entity map key` line per key, for exact replay.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let n_entities = self.maps.first().map_or(0, |m| m.keys.len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            n_entities,
            self.maps.len(),
            n_entities * self.maps.len()
        );
        for (k, map) in self.maps.iter().enumerate() {
            for (entity, &key) in map.keys.iter().enumerate() {
                let _ = writeln!(out, "{entity} {k} {key}");
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>, axis: Designation) -> Result<Self> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            path: name.clone(),
            line: 1,
            message: "empty pool file".into(),
        })?;
        let mut it = header.split_whitespace();
        let mut next_num = |what: &str| -> Result<usize> {
            it.next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: name.clone(),
                    line: 1,
                    message: format!("bad header field {what}"),
                })
        };
        let n_entities = next_num("n_entities")?;
        let n_maps = next_num("n_maps")?;
        let _n_keys = next_num("n_keys")?;
        let mut maps = vec![
            LshMap {
                axis,
                keys: vec![0u64; n_entities],
            };
            n_maps
        ];
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse {
                path: name.clone(),
                line: idx + 1,
                message,
            };
            if fields.len() != 3 {
                return Err(parse_err("expected 'entity map key'".into()));
            }
            let entity: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad entity '{}'", fields[0])))?;
            let map_id: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad map id '{}'", fields[1])))?;
            let key: u64 = fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad key '{}'", fields[2])))?;
            if map_id >= n_maps || entity >= n_entities {
                return Err(parse_err("entity or map id outside header bounds".into()));
            }
            maps[map_id].keys[entity] = key;
        }
        Ok(Self { axis, maps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn figure_pair_matrix() -> AssociationMatrix {
        // Two rows with 5 shared positives out of 10 total positive columns.
        let mut triples = Vec::new();
        for j in 0..5u32 {
            triples.push((0, j, 1.0));
            triples.push((1, j, 1.0));
        }
        for j in 5..8u32 {
            triples.push((0, j, 1.0));
        }
        for j in 8..10u32 {
            triples.push((1, j, 1.0));
        }
        // A filler row so every context column stays nonempty for both axes.
        for j in 0..10u32 {
            triples.push((2, j, 0.5));
        }
        AssociationMatrix::from_triples(3, 10, triples).unwrap()
    }

    #[test]
    fn identical_rows_always_collide() {
        let m = AssociationMatrix::from_triples(
            2,
            4,
            vec![(0, 0, 2.0), (0, 3, 1.0), (1, 0, 2.0), (1, 3, 1.0)],
        )
        .unwrap();
        let mut rng = rng::stream(1, "lsh-identical");
        for _ in 0..200 {
            let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
            assert_eq!(map.key(0), map.key(1));
        }
    }

    #[test]
    fn disjoint_rows_never_collide() {
        let m = AssociationMatrix::from_triples(
            2,
            4,
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 2, 1.0), (1, 3, 2.0)],
        )
        .unwrap();
        let mut rng = rng::stream(2, "lsh-disjoint");
        for _ in 0..200 {
            let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
            assert_ne!(map.key(0), map.key(1));
        }
    }

    #[test]
    fn figure_pair_collision_rate_is_one_half() {
        let m = figure_pair_matrix();
        let expected = m.row_jaccard(0, 1).unwrap();
        assert_eq!(expected, 0.5);
        let mut rng = rng::stream(3, "lsh-figure");
        let n = 100_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
            if map.key(0) == map.key(1) {
                hits += 1;
            }
        }
        let rate = f64::from(hits) / f64::from(n);
        assert!((rate - 0.5).abs() < 0.01, "collision rate {rate}");
    }

    #[test]
    fn weighted_collision_rate_matches_weighted_jaccard() {
        // Rows (2, 1) and (1, 2): weighted Jaccard 0.5. A plain
        // exponential race would collide with probability 2/3 here.
        let m = AssociationMatrix::from_triples(
            2,
            2,
            vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        )
        .unwrap();
        assert_eq!(m.row_jaccard(0, 1).unwrap(), 0.5);
        let mut rng = rng::stream(12, "lsh-weighted");
        let n = 100_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
            if map.key(0) == map.key(1) {
                hits += 1;
            }
        }
        let rate = f64::from(hits) / f64::from(n);
        assert!((rate - 0.5).abs() < 0.01, "collision rate {rate}");
    }

    #[test]
    fn scaled_vectors_keep_their_self_similarity() {
        // J(2v, v) = 1/2; keys must reflect the magnitude, not only the
        // winning coordinate.
        let m = AssociationMatrix::from_triples(
            2,
            3,
            vec![
                (0, 0, 2.0),
                (0, 1, 4.0),
                (0, 2, 2.0),
                (1, 0, 1.0),
                (1, 1, 2.0),
                (1, 2, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(m.row_jaccard(0, 1).unwrap(), 0.5);
        let mut rng = rng::stream(13, "lsh-scaled");
        let n = 100_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
            if map.key(0) == map.key(1) {
                hits += 1;
            }
        }
        let rate = f64::from(hits) / f64::from(n);
        assert!((rate - 0.5).abs() < 0.01, "collision rate {rate}");
    }

    #[test]
    fn empty_row_has_no_key() {
        let m = AssociationMatrix::from_triples(3, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let mut rng = rng::stream(4, "lsh-empty");
        assert!(matches!(
            jaccard_lsh_map(&m, Designation::Focus, &mut rng),
            Err(Error::UndefinedKey { id: 2, .. })
        ));
    }

    #[test]
    fn angular_extremes() {
        let mut table = EmbeddingTable::zeros(3, 4);
        table.vector_mut(0).copy_from_slice(&[1.0, 0.0, 0.5, 0.0]);
        table.vector_mut(1).copy_from_slice(&[1.0, 0.0, 0.5, 0.0]);
        table.vector_mut(2).copy_from_slice(&[-1.0, 0.0, -0.5, 0.0]);
        let mut rng = rng::stream(5, "angular-extremes");
        for _ in 0..200 {
            let map = angular_lsh_map(&table, Designation::Focus, &mut rng).unwrap();
            assert_eq!(map.key(0), map.key(1), "identical vectors must collide");
            assert_ne!(map.key(0), map.key(2), "antipodal vectors must split");
        }
    }

    #[test]
    fn angular_orthogonal_rate_is_one_half() {
        let mut table = EmbeddingTable::zeros(2, 2);
        table.vector_mut(0).copy_from_slice(&[1.0, 0.0]);
        table.vector_mut(1).copy_from_slice(&[0.0, 1.0]);
        let mut rng = rng::stream(6, "angular-orthogonal");
        let n = 100_000u32;
        let mut hits = 0u32;
        for _ in 0..n {
            let map = angular_lsh_map(&table, Designation::Focus, &mut rng).unwrap();
            if map.key(0) == map.key(1) {
                hits += 1;
            }
        }
        let rate = f64::from(hits) / f64::from(n);
        assert!((rate - 0.5).abs() < 0.01, "collision rate {rate}");
    }

    #[test]
    fn angular_zero_vector_is_an_error() {
        let table = EmbeddingTable::zeros(1, 3);
        let mut rng = rng::stream(7, "angular-zero");
        assert!(matches!(
            angular_lsh_map(&table, Designation::Focus, &mut rng),
            Err(Error::UndefinedKey { .. })
        ));
    }

    fn mb(designation: Designation, pairs: &[(u32, u32)]) -> Microbatch {
        Microbatch {
            designation,
            positives: pairs.to_vec(),
        }
    }

    #[test]
    fn refine_with_no_maps_is_identity() {
        let input = mb(Designation::Focus, &[(0, 1), (1, 1)]);
        assert_eq!(refine(&input, &[]), vec![input]);
    }

    #[test]
    fn refine_with_uniform_keys_is_identity() {
        let input = mb(Designation::Focus, &[(0, 1), (1, 1), (2, 1)]);
        let map = LshMap {
            axis: Designation::Focus,
            keys: vec![9, 9, 9],
        };
        assert_eq!(refine(&input, &[&map]), vec![input]);
    }

    #[test]
    fn refine_splits_by_key() {
        let input = mb(Designation::Focus, &[(0, 7), (1, 7), (2, 7), (3, 7)]);
        let map = LshMap {
            axis: Designation::Focus,
            keys: vec![0, 0, 1, 1],
        };
        let parts = refine(&input, &[&map]);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].positives, vec![(0, 7), (1, 7)]);
        assert_eq!(parts[1].positives, vec![(2, 7), (3, 7)]);
    }

    #[test]
    fn adaptive_refine_caps_or_exhausts() {
        let positives: Vec<(u32, u32)> = (0..64u32).map(|i| (i, 0)).collect();
        let input = mb(Designation::Focus, &positives);
        let m = {
            let triples: Vec<(u32, u32, f64)> = (0..64u32)
                .flat_map(|i| (0..8u32).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let mut h = crate::rng::derive_seed(u64::from(i * 8 + j), "w");
                    h %= 97;
                    (i, j, 1.0 + h as f64 / 10.0)
                })
                .collect();
            AssociationMatrix::from_triples(64, 8, triples).unwrap()
        };
        let mut rng = rng::stream(8, "adaptive");
        let pool = LshPool::build_jaccard(&m, Designation::Focus, 8, &mut rng).unwrap();
        let (parts, oversize) = adaptive_refine(&input, &pool.maps, 16, &mut rng);
        let mut union: Vec<(u32, u32)> = parts.iter().flat_map(|p| p.positives.clone()).collect();
        union.sort_unstable();
        assert_eq!(union, positives);
        if oversize == 0 {
            assert!(parts.iter().all(|p| p.len() <= 16));
        }
    }

    #[test]
    fn adaptive_refine_small_input_is_identity() {
        let input = mb(Designation::Focus, &[(0, 0), (1, 0)]);
        let mut rng = rng::stream(9, "adaptive-small");
        let (parts, oversize) = adaptive_refine(&input, &[], 2, &mut rng);
        assert_eq!(parts, vec![input]);
        assert_eq!(oversize, 0);
    }

    #[test]
    fn oracle_refine_partitions_by_label() {
        let input = mb(Designation::Focus, &[(0, 3), (1, 3), (2, 3), (3, 3)]);
        let labels = vec![0, 1, 0, 1];
        let parts = oracle_refine(&input, &labels).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].positives, vec![(0, 3), (2, 3)]);
        assert_eq!(parts[1].positives, vec![(1, 3), (3, 3)]);

        let same = oracle_refine(&input, &[5, 5, 5, 5]).unwrap();
        assert_eq!(same, vec![input.clone()]);

        assert!(matches!(
            oracle_refine(&input, &[0, 0]),
            Err(Error::MissingLabel { id: 2 }) | Err(Error::MissingLabel { id: 3 })
        ));
    }

    #[test]
    fn oracle_refine_with_cap_one_labels_splits_blocks() {
        let input = mb(Designation::Focus, &[(0, 1), (1, 1)]);
        let parts = oracle_refine(&input, &[0, 1]).unwrap();
        assert_eq!(parts.len(), 2);
    }

    #[test]
    fn pool_roundtrip() {
        let m = figure_pair_matrix();
        let mut rng = rng::stream(10, "pool-roundtrip");
        let pool = LshPool::build_jaccard(&m, Designation::Focus, 4, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.txt");
        pool.write_to(&path).unwrap();
        let back = LshPool::read_from(&path, Designation::Focus).unwrap();
        assert_eq!(pool.maps.len(), back.maps.len());
        for (a, b) in pool.maps.iter().zip(&back.maps) {
            assert_eq!(a.keys, b.keys);
        }
    }
}
