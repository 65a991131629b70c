//! Locating flaw-line token subsequences inside function token streams.
//!
//! Tokenizers blur line boundaries at the first and last token, so a flaw
//! line's tokens may not occur verbatim in the function. The locator first
//! searches for the full sequence; on failure it drops one token from the
//! front AND one from the back of the query and retries, until a match is
//! found or the query is exhausted. The leftmost occurrence always wins,
//! and a one-token query is still attempted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::container::{rewrite_metadata, Container};
use crate::error::{Error, Result};
use crate::sample::{FlawSpan, Label};

/// Outcome of locating one flaw line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateResult {
    /// The full line matched; the span's trim counts are zero.
    Exact(FlawSpan),
    /// A trimmed query matched; the span records how much was dropped.
    Trimmed(FlawSpan),
    /// No query level matched.
    Unlocatable,
}

impl LocateResult {
    pub fn span(&self) -> Option<FlawSpan> {
        match self {
            LocateResult::Exact(s) | LocateResult::Trimmed(s) => Some(*s),
            LocateResult::Unlocatable => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, LocateResult::Exact(_))
    }
}

fn find_subsequence(haystack: &[u32], needle: &[u32]) -> Option<usize> {
    if needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Finds the token span of `line_tokens` within `function_tokens`.
///
/// An empty query is an input error, distinct from a query that exhausts
/// all trim levels without matching.
pub fn locate_flaw_span(function_tokens: &[u32], line_tokens: &[u32]) -> Result<LocateResult> {
    if line_tokens.is_empty() {
        return Err(Error::Input("flaw line has no tokens".to_string()));
    }
    let len = line_tokens.len();
    let mut trim = 0usize;
    // Query at trim level t is line_tokens[t..len-t]; stop before it empties.
    while 2 * trim < len {
        let query = &line_tokens[trim..len - trim];
        if let Some(offset) = find_subsequence(function_tokens, query) {
            let span = FlawSpan {
                start: offset,
                end: offset + query.len(),
                trimmed_front: trim,
                trimmed_back: trim,
            };
            return Ok(if trim == 0 {
                LocateResult::Exact(span)
            } else {
                LocateResult::Trimmed(span)
            });
        }
        trim += 1;
    }
    Ok(LocateResult::Unlocatable)
}

/// Unions located spans into a sorted, pairwise-disjoint set.
///
/// Overlapping intervals merge; touching intervals stay separate. Trim
/// counts do not survive a merge.
pub fn merge_spans(mut spans: Vec<FlawSpan>) -> Vec<FlawSpan> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut merged: Vec<FlawSpan> = Vec::with_capacity(spans.len());
    for s in spans {
        match merged.last_mut() {
            Some(last) if s.start < last.end => {
                if s.end > last.end {
                    last.end = s.end;
                }
                last.trimmed_front = 0;
                last.trimmed_back = 0;
            }
            _ => merged.push(s),
        }
    }
    merged
}

/// Line-level and sample-level tallies from [`annotate_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotateReport {
    /// Lines that matched verbatim.
    pub located: u64,
    /// Lines that matched only after trimming.
    pub trimmed: u64,
    /// Lines with no match at any trim level.
    pub unlocatable: u64,
    /// Samples that received at least one span.
    pub samples_annotated: u64,
    /// Samples whose every line was unlocatable.
    pub samples_unlocatable: u64,
}

/// Locates each `(sample id, line tokens)` pair and stores the merged spans
/// in the container's metadata. Samples whose lines all fail keep empty
/// flaw spans and are tallied in the report.
pub fn annotate_dataset<P: AsRef<Path>>(
    dir: P,
    flaw_lines: &[(u64, Vec<u32>)],
) -> Result<AnnotateReport> {
    let container = Container::open(&dir)?;
    for (id, line) in flaw_lines {
        if !container.contains(*id) {
            return Err(Error::UnknownId(*id));
        }
        if line.is_empty() {
            return Err(Error::Input(format!("sample {id}: flaw line has no tokens")));
        }
    }

    let mut per_sample: BTreeMap<u64, Vec<&Vec<u32>>> = BTreeMap::new();
    for (id, line) in flaw_lines {
        per_sample.entry(*id).or_default().push(line);
    }

    let mut report = AnnotateReport::default();
    let mut records = container.records().to_vec();
    let index: BTreeMap<u64, usize> = records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();

    for (id, lines) in &per_sample {
        let record = &mut records[index[id]];
        let mut found = Vec::new();
        for line in lines {
            match locate_flaw_span(&record.token_ids, line)? {
                LocateResult::Exact(span) => {
                    report.located += 1;
                    found.push(span);
                }
                LocateResult::Trimmed(span) => {
                    report.trimmed += 1;
                    found.push(span);
                }
                LocateResult::Unlocatable => report.unlocatable += 1,
            }
        }
        if found.is_empty() {
            record.flaw_spans = Vec::new();
            report.samples_unlocatable += 1;
        } else {
            record.flaw_spans = merge_spans(found);
            report.samples_annotated += 1;
        }
    }

    let mut manifest = container.manifest().clone();
    manifest.num_with_flaw_spans = records
        .iter()
        .filter(|r| r.label == Label::Vulnerable && !r.flaw_spans.is_empty())
        .count() as u64;
    rewrite_metadata(dir.as_ref(), &manifest, &records)?;
    Ok(report)
}
