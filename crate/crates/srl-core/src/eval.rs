//! Evaluation: segment-level SRL precision/recall/F1, predicate detection,
//! POS accuracy and attachment scores (punctuation excluded), plus the
//! error-analysis procedures (correction ladder, parse-correctness
//! quadrants, F1 by sentence length and by predicate-argument distance).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{frames_as_spans, DataError, Sentence, Span};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and gold files disagree at sentence {index}: {detail}")]
    Misaligned { index: usize, detail: String },
    #[error("no sentences to evaluate")]
    Empty,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Micro-average counts; undefined ratios (zero denominators) report 0
/// while the raw counts stay visible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl PrfCounts {
    pub fn add(&mut self, other: &PrfCounts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.matched as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            self.matched as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Count the predicate's own V span in segment scoring.
    pub include_v_spans: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            include_v_spans: true,
        }
    }
}

/// POS tags treated as punctuation for attachment and POS accuracy.
pub fn default_punctuation() -> BTreeSet<String> {
    [".", ",", ":", "''", "``", "-LRB-", "-RRB-"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// One frame's predictions next to its gold spans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub predicate: usize,
    pub predicted: Vec<Span>,
    pub gold: Vec<Span>,
}

/// Per-sentence evaluation state kept for the analysis procedures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub index: usize,
    pub length: usize,
    pub srl: PrfCounts,
    /// Every non-punctuation head and label correct (sentence LAS 100%).
    pub parse_correct: bool,
    pub frames: Vec<FrameRecord>,
}

impl SentenceRecord {
    pub fn f1(&self) -> f64 {
        self.srl.f1()
    }

    pub fn has_spans(&self) -> bool {
        self.srl.gold > 0 || self.srl.predicted > 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub srl: PrfCounts,
    pub predicates: PrfCounts,
    pub pos_correct: usize,
    pub pos_total: usize,
    pub uas_correct: usize,
    pub las_correct: usize,
    pub attach_total: usize,
    pub sentences: Vec<SentenceRecord>,
}

impl EvalReport {
    pub fn pos_accuracy(&self) -> f64 {
        ratio(self.pos_correct, self.pos_total)
    }

    pub fn uas(&self) -> f64 {
        ratio(self.uas_correct, self.attach_total)
    }

    pub fn las(&self) -> f64 {
        ratio(self.las_correct, self.attach_total)
    }

    /// Fixed-format headline block printed by the CLI.
    pub fn headline(&self) -> String {
        format!(
            "SRL          P {:.4}  R {:.4}  F1 {:.4}  (matched {} / predicted {} / gold {})\n\
             Predicates   P {:.4}  R {:.4}  F1 {:.4}  (matched {} / predicted {} / gold {})\n\
             POS accuracy {:.4}  ({}/{} non-punctuation tokens)\n\
             UAS          {:.4}\n\
             LAS          {:.4}\n",
            self.srl.precision(),
            self.srl.recall(),
            self.srl.f1(),
            self.srl.matched,
            self.srl.predicted,
            self.srl.gold,
            self.predicates.precision(),
            self.predicates.recall(),
            self.predicates.f1(),
            self.predicates.matched,
            self.predicates.predicted,
            self.predicates.gold,
            self.pos_accuracy(),
            self.pos_correct,
            self.pos_total,
            self.uas(),
            self.las(),
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn filter_v(spans: Vec<Span>, include_v: bool) -> Vec<Span> {
    if include_v {
        spans
    } else {
        spans.into_iter().filter(|s| s.label != "V").collect()
    }
}

fn span_counts(pred: &[Span], gold: &[Span]) -> PrfCounts {
    let pred_set: BTreeSet<&Span> = pred.iter().collect();
    let gold_set: BTreeSet<&Span> = gold.iter().collect();
    PrfCounts {
        matched: pred_set.intersection(&gold_set).count(),
        predicted: pred_set.len(),
        gold: gold_set.len(),
    }
}

/// Evaluate aligned prediction/gold corpora. Frames align by predicate
/// position: a gold frame whose predicate was not predicted contributes
/// its spans as misses, and vice versa for spurious predicted predicates.
pub fn evaluate_corpus(
    pred: &[Sentence],
    gold: &[Sentence],
    options: EvalOptions,
    punctuation: &BTreeSet<String>,
) -> Result<EvalReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    if pred.len() != gold.len() {
        return Err(EvalError::Misaligned {
            index: pred.len().min(gold.len()),
            detail: format!("{} predicted vs {} gold sentences", pred.len(), gold.len()),
        });
    }

    let mut report = EvalReport {
        srl: PrfCounts::default(),
        predicates: PrfCounts::default(),
        pos_correct: 0,
        pos_total: 0,
        uas_correct: 0,
        las_correct: 0,
        attach_total: 0,
        sentences: Vec::with_capacity(gold.len()),
    };

    for (index, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.tokens != g.tokens {
            return Err(EvalError::Misaligned {
                index,
                detail: "token sequences differ".into(),
            });
        }
        let t = g.len();

        // predicate detection (token-level binary)
        for i in 0..t {
            let (pf, gf) = (p.predicate_flags[i], g.predicate_flags[i]);
            report.predicates.predicted += pf as usize;
            report.predicates.gold += gf as usize;
            report.predicates.matched += (pf && gf) as usize;
        }

        // POS / attachment over non-punctuation tokens (by gold POS)
        let mut parse_correct = true;
        for i in 0..t {
            if punctuation.contains(&g.pos[i]) {
                continue;
            }
            report.pos_total += 1;
            report.pos_correct += (p.pos[i] == g.pos[i]) as usize;
            report.attach_total += 1;
            let head_ok = p.heads[i] == g.heads[i];
            let label_ok = head_ok && p.deprels[i] == g.deprels[i];
            report.uas_correct += head_ok as usize;
            report.las_correct += label_ok as usize;
            parse_correct &= label_ok;
        }

        // segment-level SRL, frames aligned by predicate position
        let pred_frames = frames_as_spans(p)?;
        let gold_frames = frames_as_spans(g)?;
        let positions: BTreeSet<usize> = pred_frames
            .keys()
            .chain(gold_frames.keys())
            .copied()
            .collect();
        let mut sentence_srl = PrfCounts::default();
        let mut frames = Vec::new();
        for pos in positions {
            let ps = filter_v(
                pred_frames.get(&pos).cloned().unwrap_or_default(),
                options.include_v_spans,
            );
            let gs = filter_v(
                gold_frames.get(&pos).cloned().unwrap_or_default(),
                options.include_v_spans,
            );
            sentence_srl.add(&span_counts(&ps, &gs));
            frames.push(FrameRecord {
                predicate: pos,
                predicted: ps,
                gold: gs,
            });
        }
        report.srl.add(&sentence_srl);
        report.sentences.push(SentenceRecord {
            index,
            length: t,
            srl: sentence_srl,
            parse_correct,
            frames,
        });
    }
    Ok(report)
}

// ── Correction ladder ────────────────────────────────────────────────

/// Correction kinds, applied cumulatively in this order. Rules, one per
/// kind, each touching only unmatched predicted spans and unmatched gold
/// spans:
///
/// - `FixLabels`: relabel a predicted span whose boundaries exactly match
///   a gold span.
/// - `MoveCoreArg`: core arguments (A0..A5) only; when label X has exactly
///   one unmatched predicted span and exactly one unmatched gold span,
///   move the prediction onto the gold boundaries.
/// - `MergeSpans`: a run of two or more predicted spans, each gap at most
///   one token, whose combined extent equals a gold span, becomes that
///   gold span.
/// - `SplitSpans`: a predicted span containing two or more gold spans is
///   replaced by those gold spans.
/// - `FixSpanBoundary`: a predicted span overlapping exactly one same-label
///   gold span takes its boundaries.
/// - `DropArg`: every remaining unmatched predicted span is removed.
/// - `AddArg`: every remaining unmatched gold span is added, after which
///   prediction and gold coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionKind {
    FixLabels,
    MoveCoreArg,
    MergeSpans,
    SplitSpans,
    FixSpanBoundary,
    DropArg,
    AddArg,
}

pub const CORRECTION_ORDER: [CorrectionKind; 7] = [
    CorrectionKind::FixLabels,
    CorrectionKind::MoveCoreArg,
    CorrectionKind::MergeSpans,
    CorrectionKind::SplitSpans,
    CorrectionKind::FixSpanBoundary,
    CorrectionKind::DropArg,
    CorrectionKind::AddArg,
];

fn is_core_label(label: &str) -> bool {
    matches!(label, "A0" | "A1" | "A2" | "A3" | "A4" | "A5")
}

fn unmatched<'a>(pred: &'a BTreeSet<Span>, gold: &'a BTreeSet<Span>) -> Vec<&'a Span> {
    pred.iter().filter(|s| !gold.contains(*s)).collect()
}

fn apply_one(kind: CorrectionKind, pred: &mut BTreeSet<Span>, gold: &BTreeSet<Span>) {
    match kind {
        CorrectionKind::FixLabels => {
            let moves: Vec<(Span, Span)> = unmatched(pred, gold)
                .into_iter()
                .filter_map(|p| {
                    gold.iter()
                        .find(|g| !pred.contains(*g) && g.start == p.start && g.end == p.end)
                        .map(|g| (p.clone(), g.clone()))
                })
                .collect();
            for (from, to) in moves {
                pred.remove(&from);
                pred.insert(to);
            }
        }
        CorrectionKind::MoveCoreArg => {
            let labels: BTreeSet<String> = unmatched(pred, gold)
                .iter()
                .map(|s| s.label.clone())
                .filter(|l| is_core_label(l))
                .collect();
            for label in labels {
                let pred_with: Vec<Span> = unmatched(pred, gold)
                    .into_iter()
                    .filter(|s| s.label == label)
                    .cloned()
                    .collect();
                let gold_with: Vec<Span> = gold
                    .iter()
                    .filter(|s| s.label == label && !pred.contains(*s))
                    .cloned()
                    .collect();
                if let ([p], [g]) = (&pred_with[..], &gold_with[..]) {
                    pred.remove(p);
                    pred.insert(g.clone());
                }
            }
        }
        CorrectionKind::MergeSpans => {
            let spans: Vec<Span> = unmatched(pred, gold).into_iter().cloned().collect();
            let targets: Vec<Span> = gold.iter().filter(|g| !pred.contains(*g)).cloned().collect();
            // maximal runs with gaps of at most one token
            let mut run: Vec<Span> = Vec::new();
            let mut runs: Vec<Vec<Span>> = Vec::new();
            for s in spans {
                if run.last().map_or(false, |p: &Span| s.start <= p.end + 2) {
                    run.push(s);
                } else {
                    if run.len() >= 2 {
                        runs.push(std::mem::take(&mut run));
                    }
                    run = vec![s];
                }
            }
            if run.len() >= 2 {
                runs.push(run);
            }
            for run in runs {
                let (start, end) = (run[0].start, run.last().expect("non-empty").end);
                if let Some(g) = targets.iter().find(|g| g.start == start && g.end == end) {
                    for s in &run {
                        pred.remove(s);
                    }
                    pred.insert(g.clone());
                }
            }
        }
        CorrectionKind::SplitSpans => {
            let candidates: Vec<Span> = unmatched(pred, gold).into_iter().cloned().collect();
            for p in candidates {
                let inside: Vec<Span> = gold
                    .iter()
                    .filter(|g| !pred.contains(*g) && g.start >= p.start && g.end <= p.end)
                    .cloned()
                    .collect();
                if inside.len() >= 2 {
                    pred.remove(&p);
                    pred.extend(inside);
                }
            }
        }
        CorrectionKind::FixSpanBoundary => {
            let candidates: Vec<Span> = unmatched(pred, gold).into_iter().cloned().collect();
            for p in candidates {
                let overlapping: Vec<Span> = gold
                    .iter()
                    .filter(|g| {
                        !pred.contains(*g)
                            && g.label == p.label
                            && g.start.max(p.start) <= g.end.min(p.end)
                    })
                    .cloned()
                    .collect();
                if let [g] = &overlapping[..] {
                    pred.remove(&p);
                    pred.insert(g.clone());
                }
            }
        }
        CorrectionKind::DropArg => {
            let drop: Vec<Span> = unmatched(pred, gold).into_iter().cloned().collect();
            for s in drop {
                pred.remove(&s);
            }
        }
        CorrectionKind::AddArg => {
            for g in gold {
                pred.insert(g.clone());
            }
        }
    }
}

/// Apply the ladder to one frame, reporting the span set after each step.
pub fn apply_corrections(pred: &[Span], gold: &[Span]) -> Vec<(CorrectionKind, Vec<Span>)> {
    let gold: BTreeSet<Span> = gold.iter().cloned().collect();
    let mut current: BTreeSet<Span> = pred.iter().cloned().collect();
    CORRECTION_ORDER
        .iter()
        .map(|&kind| {
            apply_one(kind, &mut current, &gold);
            (kind, current.iter().cloned().collect())
        })
        .collect()
}

/// Cumulative micro-F1 across many frames after each correction step.
/// Starts with the uncorrected F1, then one entry per correction kind.
pub fn correction_ladder(frames: &[(Vec<Span>, Vec<Span>)]) -> Vec<(Option<CorrectionKind>, f64)> {
    let mut states: Vec<(BTreeSet<Span>, BTreeSet<Span>)> = frames
        .iter()
        .map(|(p, g)| {
            (
                p.iter().cloned().collect::<BTreeSet<_>>(),
                g.iter().cloned().collect::<BTreeSet<_>>(),
            )
        })
        .collect();

    let micro = |states: &[(BTreeSet<Span>, BTreeSet<Span>)]| {
        let mut counts = PrfCounts::default();
        for (p, g) in states {
            counts.matched += p.intersection(g).count();
            counts.predicted += p.len();
            counts.gold += g.len();
        }
        counts.f1()
    };

    let mut ladder = vec![(None, micro(&states))];
    for &kind in &CORRECTION_ORDER {
        for (pred, gold) in states.iter_mut() {
            apply_one(kind, pred, gold);
        }
        ladder.push((Some(kind), micro(&states)));
    }
    ladder
}

// ── Analysis tables ──────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct QuadrantRow {
    /// "L+/D+", "L-/D+", "L+/D-", "L-/D-"
    pub quadrant: String,
    pub sentences: usize,
    pub proportion: f64,
    /// Mean per-sentence F1 over sentences with any spans; 0 if none.
    pub mean_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketRow {
    pub bucket: String,
    pub counts: PrfCounts,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisTables {
    /// Skipped when no second parse source was supplied.
    pub quadrants: Option<Vec<QuadrantRow>>,
    pub by_length: Vec<BucketRow>,
    pub by_distance: Vec<BucketRow>,
}

const LENGTH_BUCKETS: [(usize, usize, &str); 5] = [
    (1, 10, "1-10"),
    (11, 20, "11-20"),
    (21, 30, "21-30"),
    (31, 40, "31-40"),
    (41, usize::MAX, ">40"),
];

const DISTANCE_BUCKETS: [(usize, usize, &str); 4] = [
    (0, 0, "0"),
    (1, 2, "1-2"),
    (3, 7, "3-7"),
    (8, usize::MAX, ">7"),
];

fn span_distance(span: &Span, predicate: usize) -> usize {
    if predicate >= span.start && predicate <= span.end {
        0
    } else if predicate < span.start {
        span.start - predicate
    } else {
        predicate - span.end
    }
}

/// Build all analysis tables from per-sentence records. `alt_parse_correct`
/// is the per-sentence correctness of a second parse source, aligned by
/// sentence index; without it the quadrant table is skipped.
pub fn analysis_suite(
    records: &[SentenceRecord],
    alt_parse_correct: Option<&[bool]>,
) -> AnalysisTables {
    let quadrants = alt_parse_correct.map(|alt| {
        let combos = [(true, true), (false, true), (true, false), (false, false)];
        let names = ["L+/D+", "L-/D+", "L+/D-", "L-/D-"];
        combos
            .iter()
            .zip(names)
            .map(|(&(l, d), name)| {
                let members: Vec<&SentenceRecord> = records
                    .iter()
                    .filter(|r| r.parse_correct == l && alt.get(r.index).copied() == Some(d))
                    .collect();
                let scored: Vec<f64> = members
                    .iter()
                    .filter(|r| r.has_spans())
                    .map(|r| r.f1())
                    .collect();
                QuadrantRow {
                    quadrant: name.to_string(),
                    sentences: members.len(),
                    proportion: ratio(members.len(), records.len()),
                    mean_f1: if scored.is_empty() {
                        0.0
                    } else {
                        scored.iter().sum::<f64>() / scored.len() as f64
                    },
                }
            })
            .collect()
    });

    let by_length = LENGTH_BUCKETS
        .iter()
        .map(|&(lo, hi, name)| {
            let mut counts = PrfCounts::default();
            for r in records {
                if r.length >= lo && r.length <= hi {
                    counts.add(&r.srl);
                }
            }
            BucketRow {
                bucket: name.to_string(),
                counts,
                f1: counts.f1(),
            }
        })
        .collect();

    let by_distance = DISTANCE_BUCKETS
        .iter()
        .map(|&(lo, hi, name)| {
            let mut counts = PrfCounts::default();
            for r in records {
                for frame in &r.frames {
                    let in_bucket = |s: &Span| {
                        let d = span_distance(s, frame.predicate);
                        d >= lo && d <= hi
                    };
                    let pred: BTreeSet<&Span> =
                        frame.predicted.iter().filter(|s| in_bucket(s)).collect();
                    let gold: BTreeSet<&Span> =
                        frame.gold.iter().filter(|s| in_bucket(s)).collect();
                    counts.matched += pred.intersection(&gold).count();
                    counts.predicted += pred.len();
                    counts.gold += gold.len();
                }
            }
            BucketRow {
                bucket: name.to_string(),
                counts,
                f1: counts.f1(),
            }
        })
        .collect();

    AnalysisTables {
        quadrants,
        by_length,
        by_distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sentence(
        tokens: &[&str],
        pos: &[&str],
        heads: &[usize],
        deprels: &[&str],
        flags: &[bool],
        frames: &[&[&str]],
    ) -> Sentence {
        Sentence {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            pos: pos.iter().map(|s| s.to_string()).collect(),
            heads: heads.to_vec(),
            deprels: deprels.iter().map(|s| s.to_string()).collect(),
            predicate_flags: flags.to_vec(),
            frames: frames
                .iter()
                .map(|f| f.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    fn gold_pair() -> (Sentence, Sentence) {
        let gold = sentence(
            &["the", "cat", "sat", "."],
            &["DT", "NN", "VB", "."],
            &[1, 2, 2, 2],
            &["det", "nsubj", "root", "punct"],
            &[false, false, true, false],
            &[&["O", "B-A0", "B-V", "O"]],
        );
        (gold.clone(), gold)
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let (pred, gold) = gold_pair();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.srl.f1(), 1.0);
        assert_eq!(report.predicates.f1(), 1.0);
        assert_eq!(report.pos_accuracy(), 1.0);
        assert_eq!(report.uas(), 1.0);
        assert_eq!(report.las(), 1.0);
        // the punctuation token is excluded from the denominators
        assert_eq!(report.attach_total, 3);
        assert!(report.sentences[0].parse_correct);
    }

    #[test]
    fn segment_prf_counts_partial_match() {
        let (mut pred, gold) = gold_pair();
        pred.frames[0] = vec!["O".into(), "O".into(), "B-V".into(), "O".into()];
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.srl.matched, 1);
        assert_eq!(report.srl.predicted, 1);
        assert_eq!(report.srl.gold, 2);
        assert_eq!(report.srl.precision(), 1.0);
        assert_eq!(report.srl.recall(), 0.5);
        assert!((report.srl.f1() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_frames_report_zero_by_convention() {
        let (mut pred, mut gold) = gold_pair();
        pred.predicate_flags = vec![false; 4];
        pred.frames.clear();
        gold.predicate_flags = vec![false; 4];
        gold.frames.clear();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.srl.f1(), 0.0);
        assert_eq!(report.srl.predicted, 0);
        assert_eq!(report.srl.gold, 0);
    }

    #[test]
    fn missed_predicate_counts_gold_spans_as_misses() {
        let (mut pred, gold) = gold_pair();
        pred.predicate_flags = vec![false; 4];
        pred.frames.clear();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.srl.gold, 2);
        assert_eq!(report.srl.matched, 0);
        assert_eq!(report.predicates.recall(), 0.0);
        assert_eq!(report.predicates.precision(), 0.0); // undefined -> 0
    }

    #[test]
    fn predicate_detection_partial() {
        let (mut pred, mut gold) = gold_pair();
        pred.predicate_flags = vec![false, false, true, false];
        gold.predicate_flags = vec![false, true, true, false];
        gold.frames = vec![
            vec!["O".into(), "B-V".into(), "O".into(), "O".into()],
            vec!["O".into(), "B-A0".into(), "B-V".into(), "O".into()],
        ];
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.predicates.precision(), 1.0);
        assert_eq!(report.predicates.recall(), 0.5);
    }

    #[test]
    fn attachment_scores_track_head_and_label() {
        let (mut pred, gold) = gold_pair();
        pred.heads = vec![1, 2, 2, 2]; // all correct
        pred.deprels[1] = "dobj".into(); // one label wrong
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        assert_eq!(report.uas(), 1.0);
        assert!((report.las() - 2.0 / 3.0).abs() < 1e-12);
        assert!(report.las() < report.uas());
        assert!(!report.sentences[0].parse_correct);
    }

    #[test]
    fn all_punctuation_sentence_contributes_nothing() {
        let pred = sentence(
            &[",", "."],
            &[",", "."],
            &[1, 1],
            &["punct", "root"],
            &[false, false],
            &[],
        );
        let report = evaluate_corpus(
            &[pred.clone()],
            &[pred],
            EvalOptions::default(),
            &default_punctuation(),
        )
        .unwrap();
        assert_eq!(report.attach_total, 0);
        assert_eq!(report.uas(), 0.0);
    }

    #[test]
    fn v_span_flag_removes_only_v() {
        let (mut pred, gold) = gold_pair();
        pred.frames[0] = vec!["O".into(), "B-A0".into(), "B-V".into(), "O".into()];
        let without_v = evaluate_corpus(
            &[pred.clone()],
            &[gold.clone()],
            EvalOptions {
                include_v_spans: false,
            },
            &default_punctuation(),
        )
        .unwrap();
        assert_eq!(without_v.srl.gold, 1);
        assert_eq!(without_v.srl.f1(), 1.0);
        let with_v = evaluate_corpus(
            &[pred],
            &[gold],
            EvalOptions::default(),
            &default_punctuation(),
        )
        .unwrap();
        assert_eq!(with_v.srl.gold, 2);
    }

    #[test]
    fn misalignment_is_rejected_with_index() {
        let (pred, gold) = gold_pair();
        let mut other = pred.clone();
        other.tokens[0] = "a".into();
        let err = evaluate_corpus(
            &[pred, other],
            &[gold.clone(), gold],
            EvalOptions::default(),
            &default_punctuation(),
        )
        .unwrap_err();
        match err {
            EvalError::Misaligned { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other}"),
        }
    }

    // ── corrections ──────────────────────────────────────────────────

    #[test]
    fn fix_labels_step_repairs_boundary_match() {
        let pred = vec![Span::new("A1", 1, 2)];
        let gold = vec![Span::new("A0", 1, 2)];
        let steps = apply_corrections(&pred, &gold);
        let (kind, after) = &steps[0];
        assert_eq!(*kind, CorrectionKind::FixLabels);
        assert_eq!(after, &gold);
    }

    #[test]
    fn merge_spans_step_joins_adjacent() {
        let pred = vec![Span::new("A0", 1, 1), Span::new("A0", 2, 3)];
        let gold = vec![Span::new("A0", 1, 3)];
        let steps = apply_corrections(&pred, &gold);
        let after_merge = &steps[2].1;
        assert_eq!(after_merge, &gold);
    }

    #[test]
    fn split_spans_step_divides_covering_span() {
        // non-core labels keep MoveCoreArg out of the way
        let pred = vec![Span::new("AM-TMP", 0, 4)];
        let gold = vec![Span::new("AM-TMP", 0, 1), Span::new("AM-LOC", 3, 4)];
        let steps = apply_corrections(&pred, &gold);
        let after_split: BTreeSet<_> = steps[3].1.iter().cloned().collect();
        assert_eq!(after_split, gold.iter().cloned().collect());
    }

    #[test]
    fn ladder_is_monotone_and_ends_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels = ["A0", "A1", "A2", "AM-TMP", "V"];
        for _ in 0..500 {
            let t = rng.gen_range(3..15);
            let mut random_spans = |max: usize| -> Vec<Span> {
                let mut spans = Vec::new();
                let mut cursor = 0;
                while cursor < t && spans.len() < max {
                    let start = cursor + rng.gen_range(0..3);
                    if start >= t {
                        break;
                    }
                    let end = (start + rng.gen_range(0..3)).min(t - 1);
                    spans.push(Span::new(labels[rng.gen_range(0..labels.len())], start, end));
                    cursor = end + 1 + rng.gen_range(0..2);
                }
                spans
            };
            let pred = random_spans(4);
            let gold = random_spans(4);
            if gold.is_empty() && pred.is_empty() {
                continue;
            }
            let ladder = correction_ladder(&[(pred, gold.clone())]);
            for pair in ladder.windows(2) {
                assert!(
                    pair[1].1 >= pair[0].1 - 1e-12,
                    "ladder decreased: {:?}",
                    ladder
                );
            }
            if !gold.is_empty() {
                assert!((ladder.last().expect("non-empty").1 - 1.0).abs() < 1e-12);
            }
        }
    }

    // ── analysis ─────────────────────────────────────────────────────

    #[test]
    fn quadrants_all_correct() {
        let (pred, gold) = gold_pair();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        let alt = vec![true];
        let tables = analysis_suite(&report.sentences, Some(&alt));
        let quads = tables.quadrants.unwrap();
        assert_eq!(quads[0].quadrant, "L+/D+");
        assert_eq!(quads[0].proportion, 1.0);
        assert_eq!(quads[0].mean_f1, 1.0);
        for q in &quads[1..] {
            assert_eq!(q.sentences, 0);
        }
    }

    #[test]
    fn quadrant_table_skipped_without_second_source() {
        let (pred, gold) = gold_pair();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        let tables = analysis_suite(&report.sentences, None);
        assert!(tables.quadrants.is_none());
        assert_eq!(tables.by_length.len(), 5);
        assert_eq!(tables.by_distance.len(), 4);
    }

    #[test]
    fn distance_buckets_partition_spans() {
        let (pred, gold) = gold_pair();
        let report =
            evaluate_corpus(&[pred], &[gold], EvalOptions::default(), &default_punctuation())
                .unwrap();
        let tables = analysis_suite(&report.sentences, None);
        let total: usize = tables.by_distance.iter().map(|b| b.counts.gold).sum();
        assert_eq!(total, report.srl.gold);
        // B-V sits at distance 0; B-A0 at distance 1
        assert_eq!(tables.by_distance[0].counts.gold, 1);
        assert_eq!(tables.by_distance[1].counts.gold, 1);
    }
}
