//! Statistical verification suites behind `coobatch verify`.
//!
//! Each suite runs with fixed seeds, prints the measured values next to
//! their bounds, and reports pass/fail. Exit code 1 signals a failed
//! suite.

use std::collections::HashMap;

use anyhow::{bail, Result};
use rand::Rng;

use coobatch::arrange::{angular_lsh_map, jaccard_lsh_map, CooSource, Designation};
use coobatch::data::AssociationMatrix;
use coobatch::metrics::{cosine_move_mean_precise, SubEpochCounts};
use coobatch::train::{sgns_gradients64, sgns_loss64, EmbeddingTable, ExampleKind};

pub struct Report {
    pub suite: String,
    pub lines: Vec<String>,
    pub passed: bool,
}

impl Report {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            lines: Vec::new(),
            passed: true,
        }
    }

    fn line(&mut self, text: String) {
        self.lines.push(text);
    }

    fn check(&mut self, ok: bool, text: String) {
        self.passed &= ok;
        self.lines
            .push(format!("{} {text}", if ok { "ok  " } else { "FAIL" }));
    }

    pub fn print(&self) {
        for line in &self.lines {
            println!("  {line}");
        }
        println!(
            "{}: {}",
            self.suite,
            if self.passed { "PASS" } else { "FAIL" }
        );
    }
}

pub const SUITES: &[&str] = &[
    "marginals",
    "coplacement",
    "jaccard-preservation",
    "lsh-collisions",
    "gradients",
    "cosine-move",
];

pub fn run_suite(name: &str, seed: u64) -> Result<Report> {
    match name {
        "marginals" => Ok(marginals(seed)),
        "coplacement" => Ok(coplacement(seed)),
        "jaccard-preservation" => Ok(jaccard_preservation(seed)),
        "lsh-collisions" => Ok(lsh_collisions(seed)),
        "gradients" => Ok(gradients(seed)),
        "cosine-move" => Ok(cosine_move(seed)),
        other => bail!("unknown suite '{other}' (expected one of {SUITES:?})"),
    }
}

/// Fixed 20x20 verification matrix with weights in {1, 2, 4}.
fn verification_matrix(seed: u64) -> AssociationMatrix {
    let mut rng = coobatch::rng::stream(seed, "verify-matrix");
    let mut triples = Vec::new();
    for i in 0..20u32 {
        for j in 0..20u32 {
            if rng.gen_bool(0.5) {
                let w = [1.0, 2.0, 4.0][rng.gen_range(0..3)];
                triples.push((i, j, w));
            }
        }
    }
    AssociationMatrix::from_triples(20, 20, triples).unwrap()
}

fn marginals(seed: u64) -> Report {
    let mut report = Report::new("marginals");
    let m = verification_matrix(seed);
    let source = CooSource::new(&m).unwrap();
    let draws = 1_000_000u64;
    for designation in [Designation::Focus, Designation::Context] {
        let mut rng = coobatch::rng::stream(seed, "verify-marginals");
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for _ in 0..draws {
            for &pair in &source.draw(designation, &mut rng).positives {
                *counts.entry(pair).or_default() += 1;
            }
        }
        let denom: f64 = match designation {
            Designation::Focus => m.col_maxima().iter().sum(),
            Designation::Context => m.row_maxima().iter().sum(),
        };
        let mut within = 0usize;
        for e in m.entries() {
            let p = e.weight / denom;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let got = *counts.get(&(e.focus, e.context)).unwrap_or(&0) as f64 / draws as f64;
            if (got - p).abs() <= 3.0 * se {
                within += 1;
            }
        }
        let required = (m.nnz() as f64 * 0.99).ceil() as usize;
        report.check(
            within >= required,
            format!(
                "{designation:?}: {within}/{} pairs within 3 stderr of weight/sum-of-maxima (need >= {required})",
                m.nnz()
            ),
        );
    }
    report
}

fn coplacement(seed: u64) -> Report {
    let mut report = Report::new("coplacement");
    let m = verification_matrix(seed);
    let source = CooSource::new(&m).unwrap();
    // Brute-force axis listings, independent of the matrix indexes.
    let mut columns: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m.n_context()];
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m.n_focus()];
    for e in m.entries() {
        columns[e.context as usize].push((e.focus, e.weight));
        rows[e.focus as usize].push((e.context, e.weight));
    }
    let mut rng = coobatch::rng::stream(seed, "verify-coplacement");
    let mut violations = 0u64;
    let per_designation = 500_000u64;
    for designation in [Designation::Focus, Designation::Context] {
        for _ in 0..per_designation {
            let mb = source.draw(designation, &mut rng);
            let (shared, members): (u32, Vec<u32>) = match designation {
                Designation::Focus => (
                    mb.positives[0].1,
                    mb.positives.iter().map(|&(i, _)| i).collect(),
                ),
                Designation::Context => (
                    mb.positives[0].0,
                    mb.positives.iter().map(|&(_, j)| j).collect(),
                ),
            };
            let axis = match designation {
                Designation::Focus => &columns[shared as usize],
                Designation::Context => &rows[shared as usize],
            };
            let min_w = members
                .iter()
                .map(|&id| {
                    axis.iter()
                        .find(|&&(e, _)| e == id)
                        .map(|&(_, w)| w)
                        .unwrap_or(f64::NAN)
                })
                .fold(f64::INFINITY, f64::min);
            for &(entity, w) in axis {
                if w >= min_w && !members.contains(&entity) {
                    violations += 1;
                }
            }
        }
    }
    report.check(
        violations == 0,
        format!(
            "{} microbatches exhaustively checked, {violations} violations (need 0)",
            2 * per_designation
        ),
    );
    report
}

fn jaccard_preservation(seed: u64) -> Report {
    let mut report = Report::new("jaccard-preservation");
    let m = verification_matrix(seed);
    let source = CooSource::new(&m).unwrap();
    let mut pair_rng = coobatch::rng::stream(seed, "verify-jp-pairs");
    let pairs: Vec<(u32, u32)> = (0..20)
        .map(|_| {
            let a = pair_rng.gen_range(0..20u32);
            let mut b = pair_rng.gen_range(0..20u32);
            while b == a {
                b = pair_rng.gen_range(0..20u32);
            }
            (a, b)
        })
        .collect();

    let collections = 10_000usize;
    let per_collection = 100usize;
    let mut rng = coobatch::rng::stream(seed, "verify-jp-draws");
    let mut sums = vec![0.0f64; pairs.len()];
    let mut defined = vec![0u64; pairs.len()];
    for _ in 0..collections {
        let mut counts = SubEpochCounts::new(Designation::Focus);
        for _ in 0..per_collection {
            counts.add(&source.draw(Designation::Focus, &mut rng));
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if let Some(j) = counts.empirical_jaccard(a, b) {
                sums[k] += j;
                defined[k] += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let expected = m.row_jaccard(a, b).unwrap_or(0.0);
        let mean = sums[k] / defined[k].max(1) as f64;
        let err = (mean - expected).abs();
        worst = worst.max(err);
        report.check(
            err <= 0.02,
            format!("rows ({a},{b}): conditional mean {mean:.4} vs J {expected:.4} (tol 0.02)"),
        );
    }
    report.line(format!("worst deviation {worst:.4}"));
    report
}

fn lsh_collisions(seed: u64) -> Report {
    let mut report = Report::new("lsh-collisions");
    let m = verification_matrix(seed);
    let maps = 100_000u32;
    let mut pair_rng = coobatch::rng::stream(seed, "verify-lsh-pairs");
    let pairs: Vec<(u32, u32)> = (0..20)
        .map(|_| {
            let a = pair_rng.gen_range(0..20u32);
            let mut b = pair_rng.gen_range(0..20u32);
            while b == a {
                b = pair_rng.gen_range(0..20u32);
            }
            (a, b)
        })
        .collect();

    let mut rng = coobatch::rng::stream(seed, "verify-lsh-jaccard");
    let mut hits = vec![0u32; pairs.len()];
    for _ in 0..maps {
        let map = jaccard_lsh_map(&m, Designation::Focus, &mut rng).unwrap();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if map.key(a) == map.key(b) {
                hits[k] += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let expected = m.row_jaccard(a, b).unwrap();
        let rate = f64::from(hits[k]) / f64::from(maps);
        worst = worst.max((rate - expected).abs());
    }
    report.check(
        worst <= 0.02,
        format!("jaccard: worst |rate - J| = {worst:.4} over 20 pairs x {maps} maps (tol 0.02)"),
    );

    // Angular maps over random coarse vectors.
    let d = 10usize;
    let mut table = EmbeddingTable::zeros(40, d);
    let mut vec_rng = coobatch::rng::stream(seed, "verify-lsh-vectors");
    for id in 0..40u32 {
        for x in table.vector_mut(id) {
            *x = vec_rng.gen_range(-1.0..1.0f32);
        }
    }
    let mut rng = coobatch::rng::stream(seed, "verify-lsh-angular");
    let mut hits = [0u32; 20];
    for _ in 0..maps {
        let map = angular_lsh_map(&table, Designation::Focus, &mut rng).unwrap();
        for k in 0..20u32 {
            if map.key(2 * k) == map.key(2 * k + 1) {
                hits[k as usize] += 1;
            }
        }
    }
    let mut worst = 0.0f64;
    for k in 0..20u32 {
        let (a, b) = (table.vector(2 * k), table.vector(2 * k + 1));
        let dot: f64 = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum();
        let na: f64 = a
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        let nb: f64 = b
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        let theta = (dot / (na * nb)).clamp(-1.0, 1.0).acos();
        let expected = 1.0 - theta / std::f64::consts::PI;
        let rate = f64::from(hits[k as usize]) / f64::from(maps);
        worst = worst.max((rate - expected).abs());
    }
    report.check(
        worst <= 0.02,
        format!("angular: worst |rate - (1 - theta/pi)| = {worst:.4} over 20 pairs x {maps} maps (tol 0.02)"),
    );
    report
}

fn gradients(seed: u64) -> Report {
    // Gradient-vector relative error against central finite differences;
    // the vector norm is the scale a difference quotient can resolve.
    let mut report = Report::new("gradients");
    let mut rng = coobatch::rng::stream(seed, "verify-gradients");
    let mut worst = 0.0f64;
    let points = 1000;
    for t in 0..points {
        let d = [1usize, 5, 50][t % 3];
        let with_bias = t % 2 == 0;
        let kind = if t % 4 < 2 {
            ExampleKind::Positive
        } else {
            ExampleKind::Negative
        };
        let f: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bias = if with_bias {
            rng.gen_range(-1.0..1.0)
        } else {
            0.0
        };
        let (df, dc, dbias) = sgns_gradients64(&f, &c, bias, kind);
        let h = 1e-6;
        let mut analytic: Vec<f64> = df.iter().chain(&dc).copied().collect();
        let mut numeric: Vec<f64> = Vec::with_capacity(2 * d + 1);
        for k in 0..d {
            let mut fp = f.clone();
            fp[k] += h;
            let mut fm = f.clone();
            fm[k] -= h;
            numeric.push(
                (sgns_loss64(&fp, &c, bias, kind) - sgns_loss64(&fm, &c, bias, kind)) / (2.0 * h),
            );
        }
        for k in 0..d {
            let mut cp = c.clone();
            cp[k] += h;
            let mut cm = c.clone();
            cm[k] -= h;
            numeric.push(
                (sgns_loss64(&f, &cp, bias, kind) - sgns_loss64(&f, &cm, bias, kind)) / (2.0 * h),
            );
        }
        if with_bias {
            analytic.push(dbias);
            numeric.push(
                (sgns_loss64(&f, &c, bias + h, kind) - sgns_loss64(&f, &c, bias - h, kind))
                    / (2.0 * h),
            );
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    report.check(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over {points} random points (bound 1e-5)"),
    );
    report
}

fn cosine_move(seed: u64) -> Report {
    let mut report = Report::new("cosine-move");
    let trials = 10_000usize;
    let mut means = HashMap::new();
    for eta in [0.02f64, 0.05] {
        for d in [10usize, 50, 100] {
            let mut rng = coobatch::rng::stream(seed, "verify-cosine-move");
            let (mean, se) = cosine_move_mean_precise(d, eta, trials, &mut rng);
            means.insert((d, (eta * 100.0) as u32), mean);
            report.check(
                mean > 0.0,
                format!("eta={eta} d={d}: mean delta-cossim {mean:.3e} +- {se:.1e} (need > 0)"),
            );
        }
    }
    for eta in [2u32, 5] {
        let at_10 = means[&(10, eta)];
        let at_100 = means[&(100, eta)];
        report.line(format!(
            "eta=0.0{eta}: mean(d=10) = {at_10:.4e}, mean(d=100) = {at_100:.4e} (measured trend: {})",
            if at_100 < at_10 { "decreasing" } else { "increasing" }
        ));
    }
    report
}
