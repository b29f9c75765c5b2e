use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use srl_core::data::Span;
use srl_core::eval::{
    analysis_suite, correction_ladder, evaluate_corpus, EvalOptions, EvalReport,
};

use super::{read_corpus, require_non_empty, write_file};
use crate::{CliError, CliResult};

pub fn run(
    pred_path: &Path,
    gold_path: &Path,
    alt_parse: Option<&Path>,
    greedy_pred: Option<&Path>,
    out_dir: &Path,
    exclude_v_spans: bool,
) -> CliResult {
    let gold = read_corpus(gold_path, false)?;
    require_non_empty(&gold, gold_path)?;
    let options = EvalOptions {
        include_v_spans: !exclude_v_spans,
    };
    let punct = srl_core::eval::default_punctuation();

    let score = |path: &Path| -> Result<EvalReport, CliError> {
        let pred = read_corpus(path, true)?;
        evaluate_corpus(&pred, &gold, options, &punct).map_err(|e| CliError::usage(anyhow!(e)))
    };
    let report = score(pred_path)?;

    let alt_correct: Option<Vec<bool>> = match alt_parse {
        None => None,
        Some(path) => {
            let alt = score(path)?;
            Some(alt.sentences.iter().map(|r| r.parse_correct).collect())
        }
    };

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(CliError::usage)?;

    let tables = analysis_suite(&report.sentences, alt_correct.as_deref());

    if let Some(quadrants) = &tables.quadrants {
        let mut csv = String::from("quadrant,sentences,proportion,mean_f1\n");
        for q in quadrants {
            let _ = writeln!(
                csv,
                "{},{},{:.6},{:.6}",
                q.quadrant, q.sentences, q.proportion, q.mean_f1
            );
        }
        write_file(&out_dir.join("quadrants.csv"), &csv)?;
    }

    for (name, rows) in [
        ("f1_by_length.csv", &tables.by_length),
        ("f1_by_distance.csv", &tables.by_distance),
    ] {
        let mut csv = String::from("bucket,matched,predicted,gold,precision,recall,f1\n");
        for row in rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                row.bucket,
                row.counts.matched,
                row.counts.predicted,
                row.counts.gold,
                row.counts.precision(),
                row.counts.recall(),
                row.f1
            );
        }
        write_file(&out_dir.join(name), &csv)?;
    }

    // correction ladder over every frame of the evaluated run
    let frames: Vec<(Vec<Span>, Vec<Span>)> = report
        .sentences
        .iter()
        .flat_map(|s| {
            s.frames
                .iter()
                .map(|f| (f.predicted.clone(), f.gold.clone()))
        })
        .collect();
    let ladder = correction_ladder(&frames);
    let mut csv = String::from("step,f1\n");
    for (kind, f1) in &ladder {
        let name = kind.map_or("Original".to_string(), |k| format!("{k:?}"));
        let _ = writeln!(csv, "{name},{f1:.6}");
    }
    write_file(&out_dir.join("corrections.csv"), &csv)?;

    if let Some(path) = greedy_pred {
        let greedy = score(path)?;
        let mut csv = String::from("decode,precision,recall,f1\n");
        let _ = writeln!(
            csv,
            "viterbi,{:.6},{:.6},{:.6}",
            report.srl.precision(),
            report.srl.recall(),
            report.srl.f1()
        );
        let _ = writeln!(
            csv,
            "greedy,{:.6},{:.6},{:.6}",
            greedy.srl.precision(),
            greedy.srl.recall(),
            greedy.srl.f1()
        );
        let _ = writeln!(csv, "delta,,,{:.6}", report.srl.f1() - greedy.srl.f1());
        write_file(&out_dir.join("viterbi_vs_greedy.csv"), &csv)?;
    }

    println!(
        "analysis tables written to {} (srl F1 {:.4} over {} sentences)",
        out_dir.display(),
        report.srl.f1(),
        report.sentences.len()
    );
    Ok(())
}
