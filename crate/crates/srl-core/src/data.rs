//! Sentence and corpus representation: the column file format, the BIO
//! span codec, label spaces (including the joint POS:PREDICATE space) and
//! word-embedding vocabularies.
//!
//! File format, UTF-8, one token per line, blank line between sentences,
//! columns tab-separated:
//!
//! ```text
//! index  word  pos  head  deprel  pred(Y|N)  frame_1 ... frame_F
//! ```
//!
//! `F` is constant within a sentence and equals the number of `Y` tokens;
//! frame columns hold BIO tags, one frame per predicate in left-to-right
//! order. The root token stores its own index in the head column. An
//! optional first line `#format=conll-heads` switches the index and head
//! columns to the 1-based convention with 0 marking the root; files are
//! always written back in the canonical 0-based form.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Array;

pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const PREDICATE_SUFFIX: &str = ":PREDICATE";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("sentence {sentence}: {message}")]
    Sentence { sentence: usize, message: String },
    #[error("invalid BIO sequence: {0}")]
    InvalidBio(String),
    #[error("overlapping spans: {0}")]
    OverlappingSpans(String),
    #[error("embedding file: {0}")]
    Embedding(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

// ── Sentence ─────────────────────────────────────────────────────────

/// Tokens plus annotations. All parallel sequences have length `T`;
/// `frames` holds one BIO row per flagged predicate, in token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    /// Head index per token; the root stores its own index.
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
    pub predicate_flags: Vec<bool>,
    pub frames: Vec<Vec<String>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn predicate_positions(&self) -> Vec<usize> {
        self.predicate_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// Check every structural invariant. `require_single_root` is relaxed
    /// for model predictions, which are not constrained to form a tree.
    pub fn validate(&self, require_single_root: bool) -> Result<(), String> {
        let t = self.len();
        if t == 0 {
            return Err("empty sentence".into());
        }
        for (name, len) in [
            ("pos", self.pos.len()),
            ("heads", self.heads.len()),
            ("deprels", self.deprels.len()),
            ("predicate flags", self.predicate_flags.len()),
        ] {
            if len != t {
                return Err(format!("{name} column has length {len}, expected {t}"));
            }
        }
        if let Some(&bad) = self.heads.iter().find(|&&h| h >= t) {
            return Err(format!("head index {bad} out of range for length {t}"));
        }
        if require_single_root {
            let roots = self
                .heads
                .iter()
                .enumerate()
                .filter(|(i, &h)| *i == h)
                .count();
            if roots != 1 {
                return Err(format!("expected exactly one root self-loop, found {roots}"));
            }
        }
        let predicates = self.predicate_positions().len();
        if self.frames.len() != predicates {
            return Err(format!(
                "{} frames for {predicates} flagged predicates",
                self.frames.len()
            ));
        }
        for (f, frame) in self.frames.iter().enumerate() {
            if frame.len() != t {
                return Err(format!("frame {f} has length {}, expected {t}", frame.len()));
            }
            validate_bio(frame).map_err(|e| format!("frame {f}: {e}"))?;
        }
        Ok(())
    }
}

/// A BIO row is valid when every `I-X` continues a `B-X` or `I-X`.
pub fn validate_bio(tags: &[String]) -> Result<(), String> {
    let mut open: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        if tag == "O" {
            open = None;
        } else if let Some(label) = tag.strip_prefix("B-") {
            open = Some(label);
        } else if let Some(label) = tag.strip_prefix("I-") {
            match open {
                Some(current) if current == label => {}
                _ => return Err(format!("{tag} at position {i} does not continue a span")),
            }
        } else {
            return Err(format!("unrecognized tag {tag:?} at position {i}"));
        }
    }
    Ok(())
}

// ── Spans and the BIO codec ──────────────────────────────────────────

/// Labeled token segment, inclusive bounds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }
}

/// Encode non-overlapping spans as BIO tags over `t` positions.
pub fn bio_encode(spans: &[Span], t: usize) -> Result<Vec<String>, DataError> {
    let mut tags = vec!["O".to_string(); t];
    let mut sorted: Vec<&Span> = spans.iter().collect();
    // positional order; the derived Ord sorts by label first
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut last_end: Option<usize> = None;
    for span in sorted {
        if span.start > span.end || span.end >= t {
            return Err(DataError::OverlappingSpans(format!(
                "span {:?} [{}, {}] out of range for length {t}",
                span.label, span.start, span.end
            )));
        }
        if let Some(prev) = last_end {
            if span.start <= prev {
                return Err(DataError::OverlappingSpans(format!(
                    "span {:?} starts at {} inside a previous span",
                    span.label, span.start
                )));
            }
        }
        last_end = Some(span.end);
        tags[span.start] = format!("B-{}", span.label);
        for tag in tags.iter_mut().take(span.end + 1).skip(span.start + 1) {
            *tag = format!("I-{}", span.label);
        }
    }
    Ok(tags)
}

/// Decode a valid BIO row back into spans, sorted by start.
pub fn bio_decode(tags: &[String]) -> Result<Vec<Span>, DataError> {
    validate_bio(tags).map_err(DataError::InvalidBio)?;
    let mut spans = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        if let Some(label) = tag.strip_prefix("B-") {
            if let Some((l, s)) = open.take() {
                spans.push(Span::new(l, s, i - 1));
            }
            open = Some((label.to_string(), i));
        } else if tag == "O" {
            if let Some((l, s)) = open.take() {
                spans.push(Span::new(l, s, i - 1));
            }
        }
        // I-X extends the open span; validity was checked above.
    }
    if let Some((l, s)) = open {
        spans.push(Span::new(l, s, tags.len() - 1));
    }
    Ok(spans)
}

// ── Corpus I/O ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadConvention {
    /// Head column stores the parent's 0-based index; root is a self-loop.
    #[default]
    SelfLoop,
    /// CoNLL style: 1-based indices with 0 marking the root.
    ConllZeroRoot,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Predictions are not constrained to emit exactly one root.
    pub allow_any_roots: bool,
}

pub fn parse_corpus(text: &str) -> Result<Vec<Sentence>, DataError> {
    parse_corpus_with(text, ParseOptions::default())
}

pub fn parse_corpus_with(text: &str, opts: ParseOptions) -> Result<Vec<Sentence>, DataError> {
    let mut convention = HeadConvention::SelfLoop;
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut saw_content = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches(['\r', ' ']);
        if !saw_content && line.starts_with('#') {
            if let Some(value) = line.strip_prefix("#format=") {
                convention = match value.trim() {
                    "conll-heads" => HeadConvention::ConllZeroRoot,
                    "self-loop" => HeadConvention::SelfLoop,
                    other => {
                        return Err(DataError::Format {
                            line: lineno + 1,
                            message: format!("unknown format header {other:?}"),
                        })
                    }
                };
            }
            continue;
        }
        if line.is_empty() {
            if !block.is_empty() {
                sentences.push(parse_block(&block, convention, opts)?);
                block.clear();
            }
            continue;
        }
        saw_content = true;
        block.push((lineno + 1, line));
    }
    if !block.is_empty() {
        sentences.push(parse_block(&block, convention, opts)?);
    }
    Ok(sentences)
}

fn parse_block(
    lines: &[(usize, &str)],
    convention: HeadConvention,
    opts: ParseOptions,
) -> Result<Sentence, DataError> {
    let t = lines.len();
    let first_line = lines[0].0;
    let err = |line: usize, message: String| DataError::Format { line, message };

    let mut tokens = Vec::with_capacity(t);
    let mut pos = Vec::with_capacity(t);
    let mut heads = Vec::with_capacity(t);
    let mut deprels = Vec::with_capacity(t);
    let mut flags = Vec::with_capacity(t);
    let mut frame_cols: Option<usize> = None;
    let mut frame_rows: Vec<Vec<String>> = Vec::new();

    for (row, &(lineno, line)) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 6 {
            return Err(err(
                lineno,
                format!("expected at least 6 tab-separated columns, got {}", fields.len()),
            ));
        }
        let f = fields.len() - 6;
        match frame_cols {
            None => {
                frame_cols = Some(f);
                frame_rows = vec![vec![String::new(); t]; f];
            }
            Some(expected) if expected != f => {
                return Err(err(
                    lineno,
                    format!("frame column count {f} differs from {expected} earlier in sentence"),
                ));
            }
            _ => {}
        }

        let index: usize = fields[0]
            .parse()
            .map_err(|_| err(lineno, format!("bad index {:?}", fields[0])))?;
        let expected_index = match convention {
            HeadConvention::SelfLoop => row,
            HeadConvention::ConllZeroRoot => row + 1,
        };
        if index != expected_index {
            return Err(err(
                lineno,
                format!("index {index} out of order, expected {expected_index}"),
            ));
        }

        let head_raw: usize = fields[3]
            .parse()
            .map_err(|_| err(lineno, format!("bad head index {:?}", fields[3])))?;
        let head = match convention {
            HeadConvention::SelfLoop => {
                if head_raw >= t {
                    return Err(err(
                        lineno,
                        format!("head index {head_raw} out of range for length {t}"),
                    ));
                }
                head_raw
            }
            HeadConvention::ConllZeroRoot => {
                if head_raw > t {
                    return Err(err(
                        lineno,
                        format!("head index {head_raw} out of range for length {t}"),
                    ));
                }
                if head_raw == 0 {
                    row
                } else {
                    head_raw - 1
                }
            }
        };

        let flag = match fields[5] {
            "Y" => true,
            "N" => false,
            other => {
                return Err(err(lineno, format!("predicate flag must be Y or N, got {other:?}")))
            }
        };

        tokens.push(fields[1].to_string());
        pos.push(fields[2].to_string());
        heads.push(head);
        deprels.push(fields[4].to_string());
        flags.push(flag);
        for (col, row_store) in frame_rows.iter_mut().enumerate() {
            row_store[row] = fields[6 + col].to_string();
        }
    }

    let sentence = Sentence {
        tokens,
        pos,
        heads,
        deprels,
        predicate_flags: flags,
        frames: frame_rows,
    };
    sentence
        .validate(!opts.allow_any_roots)
        .map_err(|message| DataError::Format {
            line: first_line,
            message,
        })?;
    Ok(sentence)
}

/// Canonical serialization: inverse of [`parse_corpus`] for canonical files.
pub fn serialize_corpus(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (s, sentence) in sentences.iter().enumerate() {
        if s > 0 {
            out.push('\n');
        }
        write_sentence(&mut out, sentence);
    }
    out
}

fn write_sentence(out: &mut String, sentence: &Sentence) {
    for i in 0..sentence.len() {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            i,
            sentence.tokens[i],
            sentence.pos[i],
            sentence.heads[i],
            sentence.deprels[i],
            if sentence.predicate_flags[i] { "Y" } else { "N" },
        );
        for frame in &sentence.frames {
            let _ = write!(out, "\t{}", frame[i]);
        }
        out.push('\n');
    }
}

// ── Label spaces ─────────────────────────────────────────────────────

/// Closed label inventories derived from a training corpus. Orderings are
/// deterministic: POS, dependency and joint labels sort lexicographically;
/// role labels order O first, then B-*, then I-*, so that ties in decoding
/// resolve toward O.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpaces {
    pub pos_labels: Vec<String>,
    pub deprel_labels: Vec<String>,
    pub role_bio_labels: Vec<String>,
    pub joint_labels: Vec<String>,
}

impl LabelSpaces {
    pub fn build(train: &[Sentence]) -> Self {
        let mut pos: BTreeSet<String> = BTreeSet::new();
        let mut deprel: BTreeSet<String> = BTreeSet::new();
        let mut role_cores: BTreeSet<String> = BTreeSet::new();
        let mut predicate_pos: BTreeSet<String> = BTreeSet::new();

        for sentence in train {
            for i in 0..sentence.len() {
                pos.insert(sentence.pos[i].clone());
                deprel.insert(sentence.deprels[i].clone());
                if sentence.predicate_flags[i] {
                    predicate_pos.insert(sentence.pos[i].clone());
                }
            }
            for frame in &sentence.frames {
                for tag in frame {
                    if let Some(core) = tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-")) {
                        role_cores.insert(core.to_string());
                    }
                }
            }
        }

        let mut joint: Vec<String> = pos.iter().cloned().collect();
        joint.extend(predicate_pos.iter().map(|p| format!("{p}{PREDICATE_SUFFIX}")));
        joint.sort();

        let mut role_bio = vec!["O".to_string()];
        role_bio.extend(role_cores.iter().map(|c| format!("B-{c}")));
        role_bio.extend(role_cores.iter().map(|c| format!("I-{c}")));

        Self {
            pos_labels: pos.into_iter().collect(),
            deprel_labels: deprel.into_iter().collect(),
            role_bio_labels: role_bio,
            joint_labels: joint,
        }
    }

    pub fn joint_label(pos: &str, is_predicate: bool) -> String {
        if is_predicate {
            format!("{pos}{PREDICATE_SUFFIX}")
        } else {
            pos.to_string()
        }
    }

    pub fn split_joint(label: &str) -> (&str, bool) {
        match label.strip_suffix(PREDICATE_SUFFIX) {
            Some(pos) => (pos, true),
            None => (label, false),
        }
    }

    pub fn joint_index(&self, pos: &str, is_predicate: bool) -> Result<usize, DataError> {
        let label = Self::joint_label(pos, is_predicate);
        self.joint_labels
            .iter()
            .position(|l| l == &label)
            .ok_or(DataError::UnknownLabel(label))
    }

    pub fn deprel_index(&self, label: &str) -> Result<usize, DataError> {
        self.deprel_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| DataError::UnknownLabel(label.to_string()))
    }

    pub fn role_index(&self, tag: &str) -> Result<usize, DataError> {
        self.role_bio_labels
            .iter()
            .position(|l| l == tag)
            .ok_or_else(|| DataError::UnknownLabel(tag.to_string()))
    }
}

// ── Vocabulary ───────────────────────────────────────────────────────

/// Token-to-id map with an embedding row per id. Id 0 is the unknown
/// token, whose vector is zero; lookups lowercase the query, matching
/// common pretrained-vector releases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub embeddings: Array,
}

impl Vocabulary {
    fn build_index(tokens: &[String]) -> HashMap<String, usize> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect()
    }

    pub fn from_tokens(tokens: Vec<String>, embeddings: Array) -> Self {
        let index = Self::build_index(&tokens);
        Self {
            tokens,
            index,
            embeddings,
        }
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = Self::build_index(&self.tokens);
    }

    /// Collect the lowercased training vocabulary and draw small random
    /// initial vectors; the unknown vector stays zero.
    pub fn init_random<R: rand::Rng>(
        corpus: &[Sentence],
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for sentence in corpus {
            for token in &sentence.tokens {
                seen.insert(token.to_lowercase());
            }
        }
        let mut tokens = vec![UNKNOWN_TOKEN.to_string()];
        tokens.extend(seen);
        let v = tokens.len();
        let mut embeddings = Array::randn_truncated(&[v, dim], 0.1, rng);
        embeddings.data_mut()[..dim].fill(0.0);
        Self::from_tokens(tokens, embeddings)
    }

    /// Load pretrained vectors: whitespace-separated rows `word v1 .. vd`.
    pub fn load_embeddings(text: &str) -> Result<Self, DataError> {
        let mut tokens = vec![UNKNOWN_TOKEN.to_string()];
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut dim: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse().map_err(|_| {
                        DataError::Embedding(format!("line {}: bad number {p:?}", lineno + 1))
                    })
                })
                .collect::<Result<_, _>>()?;
            match dim {
                None => {
                    if values.is_empty() {
                        return Err(DataError::Embedding(format!(
                            "line {}: no vector values",
                            lineno + 1
                        )));
                    }
                    dim = Some(values.len());
                }
                Some(d) if d != values.len() => {
                    return Err(DataError::Embedding(format!(
                        "line {}: dimension {} differs from {d}",
                        lineno + 1,
                        values.len()
                    )));
                }
                _ => {}
            }
            tokens.push(word.to_lowercase());
            rows.push(values);
        }
        let d = dim.ok_or_else(|| DataError::Embedding("empty embedding file".into()))?;
        let mut data = vec![0.0; d]; // unknown vector
        for row in rows {
            data.extend(row);
        }
        let embeddings = Array::new(vec![tokens.len(), d], data)
            .map_err(|e| DataError::Embedding(e.to_string()))?;
        Ok(Self::from_tokens(tokens, embeddings))
    }

    pub fn dim(&self) -> usize {
        self.embeddings.shape()[1]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Id of a token, falling back to the unknown id. Lookup is
    /// case-insensitive; ids past the embedding table cannot occur.
    pub fn lookup(&self, token: &str) -> usize {
        self.index
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }
}

// ── Frame/span helpers shared by eval and decoding ───────────────────

/// Map of predicate position to decoded spans for one sentence.
pub fn frames_as_spans(sentence: &Sentence) -> Result<BTreeMap<usize, Vec<Span>>, DataError> {
    let positions = sentence.predicate_positions();
    let mut map = BTreeMap::new();
    for (pos, frame) in positions.iter().zip(&sentence.frames) {
        map.insert(*pos, bio_decode(frame)?);
    }
    Ok(map)
}
