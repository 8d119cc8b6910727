//! Sparse nonnegative association matrix with the derived statistics and
//! indexes that the microbatch generators query.
//!
//! The matrix is immutable after construction. Row and column sums, row and
//! column maxima, and per-row/per-column descending-weight indexes are
//! precomputed once so that a threshold query ("all entries of column `j`
//! with weight at least `t` times the column maximum") costs one binary
//! search plus the output size.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One positive association between a focus entity (row) and a context
/// entity (column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub focus: u32,
    pub context: u32,
    pub weight: f64,
}

/// Sparse nonnegative matrix of association strengths.
#[derive(Debug, Clone)]
pub struct AssociationMatrix {
    n_focus: usize,
    n_context: usize,
    /// Entries sorted by (focus, context); all weights strictly positive.
    entries: Vec<Entry>,
    /// CSR offsets into `entries`.
    row_ptr: Vec<usize>,
    /// Entry ids grouped by row, weight descending (ties: context ascending).
    row_desc: Vec<u32>,
    /// Entry ids grouped by column, weight descending (ties: focus ascending).
    col_desc: Vec<u32>,
    /// Offsets into `col_desc`.
    col_ptr: Vec<usize>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    row_max: Vec<f64>,
    col_max: Vec<f64>,
    total: f64,
}

impl AssociationMatrix {
    /// Build a matrix from raw triples. Duplicate `(focus, context)` pairs
    /// are combined by summing their weights. Weights must be positive and
    /// finite; ids must be within bounds.
    pub fn from_triples(
        n_focus: usize,
        n_context: usize,
        triples: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Result<Self> {
        if n_focus == 0 || n_context == 0 {
            return Err(Error::Config(
                "matrix must have at least one row and one column".into(),
            ));
        }
        let mut entries: Vec<Entry> = Vec::new();
        for (focus, context, weight) in triples {
            if (focus as usize) >= n_focus || (context as usize) >= n_context {
                return Err(Error::Data(format!(
                    "entry ({focus}, {context}) outside a {n_focus}x{n_context} matrix"
                )));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::Data(format!(
                    "entry ({focus}, {context}) has non-positive weight {weight}"
                )));
            }
            entries.push(Entry {
                focus,
                context,
                weight,
            });
        }
        entries.sort_unstable_by_key(|e| (e.focus, e.context));
        // Merge duplicates.
        let mut merged: Vec<Entry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.focus == e.focus && last.context == e.context => {
                    last.weight += e.weight;
                }
                _ => merged.push(e),
            }
        }
        Ok(Self::from_sorted_unique(n_focus, n_context, merged))
    }

    fn from_sorted_unique(n_focus: usize, n_context: usize, entries: Vec<Entry>) -> Self {
        let nnz = entries.len();
        let mut row_ptr = vec![0usize; n_focus + 1];
        for e in &entries {
            row_ptr[e.focus as usize + 1] += 1;
        }
        for i in 0..n_focus {
            row_ptr[i + 1] += row_ptr[i];
        }

        let mut row_sums = vec![0.0; n_focus];
        let mut col_sums = vec![0.0; n_context];
        let mut row_max = vec![0.0; n_focus];
        let mut col_max = vec![0.0; n_context];
        for i in 0..n_focus {
            let row = &entries[row_ptr[i]..row_ptr[i + 1]];
            row_sums[i] = pairwise_sum_by(row, |e| e.weight);
            row_max[i] = row.iter().map(|e| e.weight).fold(0.0, f64::max);
        }

        // Column grouping.
        let mut col_ptr = vec![0usize; n_context + 1];
        for e in &entries {
            col_ptr[e.context as usize + 1] += 1;
        }
        for j in 0..n_context {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut col_desc = vec![0u32; nnz];
        let mut cursor = col_ptr.clone();
        for (id, e) in entries.iter().enumerate() {
            let j = e.context as usize;
            col_desc[cursor[j]] = id as u32;
            cursor[j] += 1;
        }
        for j in 0..n_context {
            let seg = &mut col_desc[col_ptr[j]..col_ptr[j + 1]];
            seg.sort_unstable_by(|&a, &b| {
                let (ea, eb) = (&entries[a as usize], &entries[b as usize]);
                eb.weight
                    .partial_cmp(&ea.weight)
                    .unwrap()
                    .then(ea.focus.cmp(&eb.focus))
            });
            let col: Vec<f64> = seg.iter().map(|&id| entries[id as usize].weight).collect();
            col_sums[j] = pairwise_sum(&col);
            col_max[j] = col.first().copied().unwrap_or(0.0);
        }

        let mut row_desc = vec![0u32; nnz];
        for i in 0..n_focus {
            let span = row_ptr[i]..row_ptr[i + 1];
            let seg = &mut row_desc[span.clone()];
            for (k, id) in span.clone().enumerate() {
                seg[k] = id as u32;
            }
            seg.sort_unstable_by(|&a, &b| {
                let (ea, eb) = (&entries[a as usize], &entries[b as usize]);
                eb.weight
                    .partial_cmp(&ea.weight)
                    .unwrap()
                    .then(ea.context.cmp(&eb.context))
            });
        }

        let total = pairwise_sum(&row_sums);

        Self {
            n_focus,
            n_context,
            entries,
            row_ptr,
            row_desc,
            col_desc,
            col_ptr,
            row_sums,
            col_sums,
            row_max,
            col_max,
            total,
        }
    }

    pub fn n_focus(&self) -> usize {
        self.n_focus
    }

    pub fn n_context(&self) -> usize {
        self.n_context
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, id: u32) -> &Entry {
        &self.entries[id as usize]
    }

    /// Total weight `Σ κ_ij`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn row_sum(&self, i: u32) -> f64 {
        self.row_sums[i as usize]
    }

    pub fn col_sum(&self, j: u32) -> f64 {
        self.col_sums[j as usize]
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// Maximum weight in row `i`, or 0 for an empty row.
    pub fn row_max(&self, i: u32) -> f64 {
        self.row_max[i as usize]
    }

    /// Maximum weight in column `j`, or 0 for an empty column.
    pub fn col_max(&self, j: u32) -> f64 {
        self.col_max[j as usize]
    }

    pub fn row_maxima(&self) -> &[f64] {
        &self.row_max
    }

    pub fn col_maxima(&self) -> &[f64] {
        &self.col_max
    }

    /// Entries of row `i` in context order.
    pub fn row(&self, i: u32) -> &[Entry] {
        let i = i as usize;
        &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Entries of column `j`, weight descending.
    pub fn col_desc(&self, j: u32) -> impl Iterator<Item = &Entry> + '_ {
        let j = j as usize;
        self.col_desc[self.col_ptr[j]..self.col_ptr[j + 1]]
            .iter()
            .map(move |&id| &self.entries[id as usize])
    }

    /// Entries of row `i`, weight descending.
    pub fn row_desc(&self, i: u32) -> impl Iterator<Item = &Entry> + '_ {
        let i = i as usize;
        self.row_desc[self.row_ptr[i]..self.row_ptr[i + 1]]
            .iter()
            .map(move |&id| &self.entries[id as usize])
    }

    pub fn row_degree(&self, i: u32) -> usize {
        self.row(i).len()
    }

    pub fn col_degree(&self, j: u32) -> usize {
        let j = j as usize;
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Weight at `(i, j)`, or `None` for a zero entry.
    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        let row = self.row(i);
        row.binary_search_by_key(&j, |e| e.context)
            .ok()
            .map(|k| row[k].weight)
    }

    /// All entries of column `j` with weight at least `t` times the column
    /// maximum, for `t` in `(0, 1]`. Ties at the threshold are included.
    pub fn column_threshold_set(&self, j: u32, t: f64) -> impl Iterator<Item = &Entry> + '_ {
        let jj = j as usize;
        let seg = &self.col_desc[self.col_ptr[jj]..self.col_ptr[jj + 1]];
        let cut = t * self.col_max[jj];
        let len = seg.partition_point(|&id| self.entries[id as usize].weight >= cut);
        seg[..len].iter().map(move |&id| &self.entries[id as usize])
    }

    /// All entries of row `i` with weight at least `t` times the row maximum.
    pub fn row_threshold_set(&self, i: u32, t: f64) -> impl Iterator<Item = &Entry> + '_ {
        let ii = i as usize;
        let seg = &self.row_desc[self.row_ptr[ii]..self.row_ptr[ii + 1]];
        let cut = t * self.row_max[ii];
        let len = seg.partition_point(|&id| self.entries[id as usize].weight >= cut);
        seg[..len].iter().map(move |&id| &self.entries[id as usize])
    }

    /// Weighted Jaccard similarity of rows `a` and `b` (sparse merge).
    pub fn row_jaccard(&self, a: u32, b: u32) -> Result<f64> {
        sparse_jaccard(
            self.row(a).iter().map(|e| (e.context, e.weight)),
            self.row(b).iter().map(|e| (e.context, e.weight)),
        )
    }

    /// Weighted Jaccard similarity of columns `a` and `b`.
    pub fn col_jaccard(&self, a: u32, b: u32) -> Result<f64> {
        let collect = |j: u32| {
            let mut v: Vec<(u32, f64)> = self.col_desc(j).map(|e| (e.focus, e.weight)).collect();
            v.sort_unstable_by_key(|&(i, _)| i);
            v
        };
        let (ca, cb) = (collect(a), collect(b));
        sparse_jaccard(ca.into_iter(), cb.into_iter())
    }

    /// Dense copy of row `i` (length `n_context`).
    pub fn row_dense(&self, i: u32) -> Vec<f64> {
        let mut v = vec![0.0; self.n_context];
        for e in self.row(i) {
            v[e.context as usize] = e.weight;
        }
        v
    }

    /// Write the matrix in the textual sparse triple format:
    /// a header line `n_focus n_context nnz` followed by one `i j value`
    /// line per entry. The decimal weight representation round-trips
    /// bit-exactly.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n_focus, self.n_context, self.nnz());
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {}", e.focus, e.context, e.weight);
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Read a matrix written by [`write_to`](Self::write_to).
    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let name = path.display().to_string();
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            path: name.clone(),
            line: 1,
            message: "empty file".into(),
        })?;
        let dims = parse_header(header, &name, 1)?;
        let (n_focus, n_context, nnz) = dims;
        let mut triples = Vec::with_capacity(nnz);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: name.clone(),
                    line: idx + 1,
                    message: "expected 'i j value'".into(),
                });
            }
            let i: u32 = parse_field(fields[0], &name, idx + 1)?;
            let j: u32 = parse_field(fields[1], &name, idx + 1)?;
            let w: f64 = parse_field(fields[2], &name, idx + 1)?;
            triples.push((i, j, w));
        }
        if triples.len() != nnz {
            return Err(Error::Data(format!(
                "{name}: header promises {nnz} entries, found {}",
                triples.len()
            )));
        }
        Self::from_triples(n_focus, n_context, triples)
    }
}

fn parse_header(line: &str, path: &str, lineno: usize) -> Result<(usize, usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse {
                path: path.to_string(),
                line: lineno,
                message: format!("missing {what} in header"),
            })
            .and_then(|s| parse_field(s, path, lineno))
    };
    Ok((next("n_focus")?, next("n_context")?, next("nnz")?))
}

fn parse_field<T: std::str::FromStr>(s: &str, path: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        message: format!("cannot parse '{s}'"),
    })
}

/// Pairwise (cascade) summation; bounds the error growth to O(log n) ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs, |&x| x)
}

pub(crate) fn pairwise_sum_by<T>(xs: &[T], f: impl Fn(&T) -> f64 + Copy) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().map(f).sum(),
        n => pairwise_sum_by(&xs[..n / 2], f) + pairwise_sum_by(&xs[n / 2..], f),
    }
}

fn sparse_jaccard(
    a: impl Iterator<Item = (u32, f64)>,
    b: impl Iterator<Item = (u32, f64)>,
) -> Result<f64> {
    let mut a = a.peekable();
    let mut b = b.peekable();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    loop {
        match (a.peek().copied(), b.peek().copied()) {
            (Some((ia, wa)), Some((ib, wb))) => {
                if ia == ib {
                    num += wa.min(wb);
                    den += wa.max(wb);
                    a.next();
                    b.next();
                } else if ia < ib {
                    den += wa;
                    a.next();
                } else {
                    den += wb;
                    b.next();
                }
            }
            (Some((_, wa)), None) => {
                den += wa;
                a.next();
            }
            (None, Some((_, wb))) => {
                den += wb;
                b.next();
            }
            (None, None) => break,
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(num / den)
}
