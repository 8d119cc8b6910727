//! Review-file ingestion for recommendation data.
//!
//! Input is UTF-8 delimited text with one record per line and columns
//! `user, item, score` (extra trailing columns are ignored). Records are
//! deduplicated per (user, item) keeping the maximum score, binarized at
//! the score threshold, and optionally reweighted so frequent entities do
//! not dominate: each retained entry becomes
//! `1 / (row_sum * col_sum)^exponent`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::data::AssociationMatrix;
use crate::error::{Error, Result};

/// Parsing and preprocessing options for [`load_reviews`].
#[derive(Debug, Clone)]
pub struct ReviewsConfig {
    pub delimiter: char,
    /// Scores below this are dropped; at or above, the entry is kept as 1.
    pub score_threshold: f64,
    /// Divide each retained entry by `(row_sum * col_sum)^exponent`.
    pub reweight: bool,
    pub reweight_exponent: f64,
    /// Use raw retained scores instead of binarized counts for the
    /// row/column totals that feed reweighting.
    pub raw_sums: bool,
}

impl Default for ReviewsConfig {
    fn default() -> Self {
        Self {
            delimiter: ',',
            score_threshold: 3.0,
            reweight: false,
            reweight_exponent: 0.75,
            raw_sums: false,
        }
    }
}

/// A loaded review matrix plus the original string ids per dense index.
#[derive(Debug)]
pub struct ReviewData {
    pub matrix: AssociationMatrix,
    pub focus_names: Vec<String>,
    pub context_names: Vec<String>,
}

impl ReviewData {
    /// Write the dense-id/original-id sidecar mapping: one
    /// `axis<TAB>index<TAB>original` line per entity.
    pub fn write_id_map(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for (idx, name) in self.focus_names.iter().enumerate() {
            out.push_str(&format!("focus\t{idx}\t{name}\n"));
        }
        for (idx, name) in self.context_names.iter().enumerate() {
            out.push_str(&format!("context\t{idx}\t{name}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Load a delimited review file into an association matrix.
///
/// Dense ids are assigned in order of first appearance among retained
/// records. Malformed records fail with the offending line number; an
/// input that retains no record at all is a data error.
pub fn load_reviews(path: impl AsRef<Path>, cfg: &ReviewsConfig) -> Result<ReviewData> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;

    // First pass: parse and dedupe on (user, item), keeping the max score
    // and the first line each pair was seen on.
    let mut best: HashMap<(String, String), (f64, usize)> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(cfg.delimiter);
        let user = fields.next().map(str::trim).unwrap_or_default();
        let item = fields.next().map(str::trim).unwrap_or_default();
        let score_str = fields.next().map(str::trim);
        let (user, item, score_str) = match (user.is_empty(), item.is_empty(), score_str) {
            (false, false, Some(s)) if !s.is_empty() => (user, item, s),
            _ => {
                return Err(Error::Parse {
                    path: name,
                    line: idx + 1,
                    message: "expected user, item, score".into(),
                })
            }
        };
        let score: f64 = score_str.parse().map_err(|_| Error::Parse {
            path: name.clone(),
            line: idx + 1,
            message: format!("cannot parse score '{score_str}'"),
        })?;
        best.entry((user.to_string(), item.to_string()))
            .and_modify(|(s, _)| *s = s.max(score))
            .or_insert((score, idx));
    }

    // Threshold, then assign dense ids by first appearance in file order.
    let mut retained: Vec<(&(String, String), f64, usize)> = best
        .iter()
        .filter(|(_, &(score, _))| score >= cfg.score_threshold)
        .map(|(pair, &(score, first_line))| (pair, score, first_line))
        .collect();
    if retained.is_empty() {
        return Err(Error::Data(format!(
            "{name}: no record meets the score threshold {}",
            cfg.score_threshold
        )));
    }
    retained.sort_by_key(|&(_, _, first_line)| first_line);

    let mut focus_ids: HashMap<&str, u32> = HashMap::new();
    let mut context_ids: HashMap<&str, u32> = HashMap::new();
    let mut focus_names = Vec::new();
    let mut context_names = Vec::new();
    let mut records: Vec<(u32, u32, f64)> = Vec::with_capacity(retained.len());
    for ((user, item), score, _) in retained {
        let fi = *focus_ids.entry(user).or_insert_with(|| {
            focus_names.push(user.clone());
            (focus_names.len() - 1) as u32
        });
        let ci = *context_ids.entry(item).or_insert_with(|| {
            context_names.push(item.clone());
            (context_names.len() - 1) as u32
        });
        records.push((fi, ci, score));
    }

    let n_focus = focus_names.len();
    let n_context = context_names.len();

    let mut row_tot = vec![0.0f64; n_focus];
    let mut col_tot = vec![0.0f64; n_context];
    for &(i, j, score) in &records {
        let unit = if cfg.raw_sums { score } else { 1.0 };
        row_tot[i as usize] += unit;
        col_tot[j as usize] += unit;
    }

    let triples: Vec<(u32, u32, f64)> = records
        .into_iter()
        .map(|(i, j, _)| {
            let w = if cfg.reweight {
                1.0 / (row_tot[i as usize] * col_tot[j as usize]).powf(cfg.reweight_exponent)
            } else {
                1.0
            };
            (i, j, w)
        })
        .collect();

    Ok(ReviewData {
        matrix: AssociationMatrix::from_triples(n_focus, n_context, triples)?,
        focus_names,
        context_names,
    })
}
