use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::assignment::BipartiteInstance;
use crate::error::{Error, Result};

/// A reviewer's stated interest in a paper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BidLabel {
    Yes,
    Maybe,
    NoResponse,
    No,
}

impl BidLabel {
    /// Case-insensitive; `no_response`, `no response` and `no-response` are
    /// all accepted.
    pub fn parse(text: &str) -> Option<Self> {
        let norm: String = text
            .trim()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
            .collect();
        match norm.as_str() {
            "yes" => Some(BidLabel::Yes),
            "maybe" => Some(BidLabel::Maybe),
            "no_response" => Some(BidLabel::NoResponse),
            "no" => Some(BidLabel::No),
            _ => None,
        }
    }

    /// Edge weight: 1 for yes, 1/2 for maybe, 0 otherwise.
    pub fn weight(self) -> f64 {
        match self {
            BidLabel::Yes => 1.0,
            BidLabel::Maybe => 0.5,
            BidLabel::NoResponse | BidLabel::No => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BidLabel::Yes => "yes",
            BidLabel::Maybe => "maybe",
            BidLabel::NoResponse => "no_response",
            BidLabel::No => "no",
        }
    }
}

impl fmt::Display for BidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reviewers, papers and their labelled bids. Ids keep first-appearance
/// order; unlisted pairs read as [`BidLabel::NoResponse`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BidCorpus {
    reviewers: Vec<String>,
    papers: Vec<String>,
    labels: BTreeMap<(usize, usize), BidLabel>,
}

impl BidCorpus {
    pub fn reviewers(&self) -> &[String] {
        &self.reviewers
    }

    pub fn papers(&self) -> &[String] {
        &self.papers
    }

    pub fn label(&self, reviewer: usize, paper: usize) -> BidLabel {
        self.labels.get(&(reviewer, paper)).copied().unwrap_or(BidLabel::NoResponse)
    }

    /// Explicitly listed bids in `(reviewer, paper)` index order.
    pub fn bids(&self) -> impl Iterator<Item = (&str, &str, BidLabel)> + '_ {
        self.labels.iter().map(|(&(r, p), l)| (self.reviewers[r].as_str(), self.papers[p].as_str(), *l))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn parse_bids(path: impl AsRef<Path>) -> Result<BidCorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_bids_str(&text, path)
}

/// Parses `reviewer_id,paper_id,label` lines. A first line whose label field
/// reads `label` is taken as a header.
pub fn parse_bids_str(text: &str, origin: impl AsRef<Path>) -> Result<BidCorpus> {
    let origin: PathBuf = origin.as_ref().to_path_buf();
    let err = |line: usize, message: String| Error::Parse { path: origin.clone(), line, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut corpus = BidCorpus::default();
    let mut reviewer_ids: HashMap<String, usize> = HashMap::new();
    let mut paper_ids: HashMap<String, usize> = HashMap::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 3 {
            return Err(err(line, format!("expected 3 fields, found {}", record.len())));
        }
        if std::mem::take(&mut first) && record[2].eq_ignore_ascii_case("label") {
            continue;
        }
        let (reviewer, paper, raw) = (&record[0], &record[1], &record[2]);
        if reviewer.is_empty() || paper.is_empty() {
            return Err(err(line, "empty reviewer or paper id".into()));
        }
        let label = BidLabel::parse(raw).ok_or_else(|| err(line, format!("unknown label {raw:?}")))?;
        let r = *reviewer_ids.entry(reviewer.to_string()).or_insert_with(|| {
            corpus.reviewers.push(reviewer.to_string());
            corpus.reviewers.len() - 1
        });
        let p = *paper_ids.entry(paper.to_string()).or_insert_with(|| {
            corpus.papers.push(paper.to_string());
            corpus.papers.len() - 1
        });
        if corpus.labels.insert((r, p), label).is_some() {
            return Err(err(line, format!("duplicate bid for ({reviewer}, {paper})")));
        }
    }
    if corpus.labels.is_empty() {
        return Err(err(0, "no bids found".into()));
    }
    Ok(corpus)
}

/// Serializes with a header line; parses back to an equal corpus.
pub fn write_bids(corpus: &BidCorpus) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["reviewer_id", "paper_id", "label"]).expect("in-memory write");
    for (r, p, l) in corpus.bids() {
        writer.write_record([r, p, l.as_str()]).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Complete bipartite graph with reviewers on the left and papers on the
/// right, weighted by label.
pub fn bids_to_instance(corpus: &BidCorpus, demand: usize, load_cap: usize) -> Result<BipartiteInstance> {
    let (nl, nr) = (corpus.reviewers.len(), corpus.papers.len());
    let mut weights = vec![0.0; nl * nr];
    for (&(r, p), label) in &corpus.labels {
        weights[r * nr + p] = label.weight();
    }
    BipartiteInstance::new(nl, nr, weights, demand, load_cap)
}
