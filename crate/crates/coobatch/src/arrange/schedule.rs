//! Arrangement schedules: which microbatch distribution is active as a
//! function of training progress, and which designation the next
//! minibatch takes.
//!
//! Config syntax is a comma-separated list of `distribution@update-count`
//! segments, e.g. `coo@0, ind@250000`. Distribution tokens:
//!
//! * `ind` — independent singletons
//! * `coo` — coordinated microbatches
//! * `coo+optlsh` — coordinated, partitioned by ground-truth block label
//! * `coo+lsh:<jaccard|angular>[:static:<r> | :adaptive[:<cap>]]` —
//!   coordinated with LSH refinement; default policy is adaptive with the
//!   minibatch size as the cap.

use std::fmt;

use crate::arrange::types::Designation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LshFamily {
    Jaccard,
    Angular,
}

/// How many maps a refined draw applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapPolicy {
    /// Apply a fixed number of maps drawn from the pool.
    Static(usize),
    /// Apply maps until all parts are at most the cap (`None` = the
    /// minibatch size parameter `b`).
    Adaptive(Option<usize>),
}

/// A microbatch distribution id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    Ind,
    Coo,
    CooLsh {
        family: LshFamily,
        policy: MapPolicy,
    },
    CooOptLsh,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Ind => write!(f, "ind"),
            Distribution::Coo => write!(f, "coo"),
            Distribution::CooOptLsh => write!(f, "coo+optlsh"),
            Distribution::CooLsh { family, policy } => {
                let fam = match family {
                    LshFamily::Jaccard => "jaccard",
                    LshFamily::Angular => "angular",
                };
                match policy {
                    MapPolicy::Static(r) => write!(f, "coo+lsh:{fam}:static:{r}"),
                    MapPolicy::Adaptive(None) => write!(f, "coo+lsh:{fam}:adaptive"),
                    MapPolicy::Adaptive(Some(cap)) => {
                        write!(f, "coo+lsh:{fam}:adaptive:{cap}")
                    }
                }
            }
        }
    }
}

fn parse_distribution(token: &str) -> Result<Distribution> {
    let token = token.trim().to_ascii_lowercase();
    if token == "ind" {
        return Ok(Distribution::Ind);
    }
    if token == "coo" {
        return Ok(Distribution::Coo);
    }
    if token == "coo+optlsh" {
        return Ok(Distribution::CooOptLsh);
    }
    if let Some(rest) = token.strip_prefix("coo+lsh:") {
        let mut parts = rest.split(':');
        let family = match parts.next() {
            Some("jaccard") => LshFamily::Jaccard,
            Some("angular") => LshFamily::Angular,
            other => {
                return Err(Error::Config(format!(
                    "unknown LSH family '{}'",
                    other.unwrap_or("")
                )))
            }
        };
        let policy = match parts.next() {
            None => MapPolicy::Adaptive(None),
            Some("adaptive") => match parts.next() {
                None => MapPolicy::Adaptive(None),
                Some(cap) => MapPolicy::Adaptive(Some(
                    cap.parse()
                        .map_err(|_| Error::Config(format!("bad adaptive cap '{cap}'")))?,
                )),
            },
            Some("static") => {
                let r = parts
                    .next()
                    .ok_or_else(|| Error::Config("static policy needs a map count".into()))?;
                MapPolicy::Static(
                    r.parse()
                        .map_err(|_| Error::Config(format!("bad map count '{r}'")))?,
                )
            }
            Some(other) => return Err(Error::Config(format!("unknown map policy '{other}'"))),
        };
        if let Some(extra) = parts.next() {
            return Err(Error::Config(format!("trailing schedule token '{extra}'")));
        }
        return Ok(Distribution::CooLsh { family, policy });
    }
    Err(Error::Config(format!("unknown distribution '{token}'")))
}

/// Ordered `(start_update_count, distribution)` segments. The first
/// segment starts at update 0 and thresholds increase strictly.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementSchedule {
    segments: Vec<(u64, Distribution)>,
}

impl ArrangementSchedule {
    pub fn new(segments: Vec<(u64, Distribution)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("schedule has no segments".into()));
        }
        if segments[0].0 != 0 {
            return Err(Error::Config(
                "first schedule segment must start at 0".into(),
            ));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(
                    "schedule thresholds must increase strictly".into(),
                ));
            }
        }
        Ok(Self { segments })
    }

    pub fn single(distribution: Distribution) -> Self {
        Self {
            segments: vec![(0, distribution)],
        }
    }

    /// Parse `dist@count, dist@count, ...`; a bare `dist` means `dist@0`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for raw in text.split(',') {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let (dist, start) = match raw.rsplit_once('@') {
                Some((d, at)) => (
                    parse_distribution(d)?,
                    at.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad update count '{at}'")))?,
                ),
                None => (parse_distribution(raw)?, 0),
            };
            segments.push((start, dist));
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[(u64, Distribution)] {
        &self.segments
    }

    /// Index of the segment active at the given update count.
    pub fn active_segment(&self, updates: u64) -> usize {
        self.segments
            .partition_point(|&(start, _)| start <= updates)
            - 1
    }

    pub fn distribution_at(&self, updates: u64) -> Distribution {
        self.segments[self.active_segment(updates)].1
    }
}

impl fmt::Display for ArrangementSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (start, dist) in &self.segments {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{dist}@{start}")?;
            first = false;
        }
        Ok(())
    }
}

/// Cumulative training progress the schedule consults.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScheduleState {
    /// Total gradient updates performed (one per evaluated example loss
    /// term, positive or negative).
    pub updates: u64,
    /// Positive examples processed in focus-designated minibatches.
    pub focus_positives: u64,
    /// Positive examples processed in context-designated minibatches.
    pub context_positives: u64,
}

impl ScheduleState {
    pub fn record(&mut self, designation: Designation, positives: u64, updates: u64) {
        self.updates += updates;
        match designation {
            Designation::Focus => self.focus_positives += positives,
            Designation::Context => self.context_positives += positives,
        }
    }
}

/// The distribution for the current update count and the designation that
/// keeps per-designation example totals balanced (ties go to focus).
pub fn schedule_next(
    schedule: &ArrangementSchedule,
    state: &ScheduleState,
) -> (Distribution, Designation) {
    let designation = if state.focus_positives <= state.context_positives {
        Designation::Focus
    } else {
        Designation::Context
    };
    (schedule.distribution_at(state.updates), designation)
}
