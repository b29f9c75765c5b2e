//! Syntax-aware task heads: the biaffine parse-attention head with oracle
//! clamping, per-class biaffine dependency-label scoring, the joint
//! POS/predicate classifier and the bilinear semantic-role scorer.

use crate::encoder::linear;
use crate::params::Bound;
use crate::tensor::{Array, Tape, TensorError, Var};

/// Everything the parse head produces from one layer input.
pub struct ParseHeadOutput {
    /// Row-stochastic attention: row t is the head distribution of token t.
    pub a_parse: Var,
    /// Pre-softmax biaffine scores `Q_parse · U_heads · K_parse^T`.
    pub head_logits: Var,
    /// Dependent representations, `T x d_parse_q`.
    pub q_parse: Var,
    /// Parent representations, `T x d_parse_k`.
    pub k_parse: Var,
    /// Value rows aggregated by the attention, `T x d_v`.
    pub v_parse: Var,
}

/// Biaffine head-selection attention over the parse layer's input.
/// Unlike the ordinary heads there is no `d_k^-0.5` scaling: compatibility
/// is scored by the bilinear form alone.
pub fn parse_attention(
    tape: &mut Tape,
    s_pm1: Var,
    bound: &Bound,
) -> Result<ParseHeadOutput, TensorError> {
    let q_parse = linear(tape, s_pm1, bound.var("parse.wq"), bound.var("parse.bq"))?;
    let k_parse = linear(tape, s_pm1, bound.var("parse.wk"), bound.var("parse.bk"))?;
    let v_parse = linear(tape, s_pm1, bound.var("parse.wv"), bound.var("parse.bv"))?;
    let qu = tape.matmul(q_parse, bound.var("parse.u_heads"))?;
    let kt = tape.transpose(k_parse)?;
    let head_logits = tape.matmul(qu, kt)?;
    let a_parse = tape.softmax_rows(head_logits)?;
    Ok(ParseHeadOutput {
        a_parse,
        head_logits,
        q_parse,
        k_parse,
        v_parse,
    })
}

/// Replace each attention row with a one-hot vector at the oracle head.
/// The result is a constant: downstream consumers see exactly the oracle
/// parse and no gradient flows into the head-selection parameters.
pub fn clamp_attention(
    tape: &mut Tape,
    heads: &[usize],
) -> Result<Var, TensorError> {
    let t = heads.len();
    if let Some(&bad) = heads.iter().find(|&&h| h >= t) {
        return Err(TensorError::IndexOutOfRange {
            op: "clamp_attention",
            index: bad,
            size: t,
        });
    }
    let mut data = vec![0.0; t * t];
    for (row, &h) in heads.iter().enumerate() {
        data[row * t + h] = 1.0;
    }
    Ok(tape.leaf(Array::new(vec![t, t], data)?))
}

/// Per-class biaffine dependency-label scores conditioned on a head
/// assignment: for token t with head h(t),
/// `score(l) = Q[t]·U_l·K[h(t)] + Q[t]·wq_l + K[h(t)]·wk_l + b_l`.
pub fn dependency_labels(
    tape: &mut Tape,
    q_parse: Var,
    k_parse: Var,
    head_assignment: &[usize],
    n_labels: usize,
    bound: &Bound,
) -> Result<Var, TensorError> {
    let t = tape.value(q_parse).shape()[0];
    if head_assignment.len() != t {
        return Err(TensorError::ShapeMismatch {
            op: "dependency_labels",
            detail: format!("{} heads for {t} tokens", head_assignment.len()),
        });
    }
    let k_sel = tape.gather_rows(k_parse, head_assignment)?;

    let mut cols = Vec::with_capacity(n_labels);
    for label in 0..n_labels {
        let u = bound.var(&format!("deplabel.u{label}"));
        let qu = tape.matmul(q_parse, u)?; // T x d_parse_k
        let prod = tape.mul(qu, k_sel)?;
        cols.push(tape.row_sums(prod)?); // T x 1
    }
    let bilinear = tape.concat_cols(&cols)?;
    let q_term = tape.matmul(q_parse, bound.var("deplabel.wq"))?;
    let k_term = tape.matmul(k_sel, bound.var("deplabel.wk"))?;
    let partial = tape.add(bilinear, q_term)?;
    let with_k = tape.add(partial, k_term)?;
    tape.add_row(with_k, bound.var("deplabel.b"))
}

/// Linear classifier over the joint POS/predicate label space, applied to
/// the tap representation `S^(r)`.
pub fn joint_pos_predicate(
    tape: &mut Tape,
    s_r: Var,
    bound: &Bound,
) -> Result<Var, TensorError> {
    linear(tape, s_r, bound.var("joint.w"), bound.var("joint.b"))
}

/// Per-frame role-label logits, `T x n_labels` for each predicate.
pub struct FrameScores {
    pub predicate_positions: Vec<usize>,
    pub role_logits: Vec<Var>,
}

/// Bilinear role scoring over the final tap: project to predicate and role
/// representations, then score every (frame, token) pair per label with
/// `s_pred[f]·U_l·s_role[t] + b_l`. All frames share one pass over the
/// label blocks, so the work is batched across frames.
pub fn srl_scores(
    tape: &mut Tape,
    s_final: Var,
    predicate_positions: &[usize],
    n_labels: usize,
    bound: &Bound,
) -> Result<FrameScores, TensorError> {
    if predicate_positions.is_empty() {
        return Ok(FrameScores {
            predicate_positions: Vec::new(),
            role_logits: Vec::new(),
        });
    }
    let s_pred = linear(tape, s_final, bound.var("srl.pred_w"), bound.var("srl.pred_b"))?;
    let s_role = linear(tape, s_final, bound.var("srl.role_w"), bound.var("srl.role_b"))?;
    let pred_rows = tape.gather_rows(s_pred, predicate_positions)?; // F x d_role
    let role_t = tape.transpose(s_role)?; // d_role x T

    // One [F x T] score matrix per label, shared across frames.
    let mut per_label = Vec::with_capacity(n_labels);
    for label in 0..n_labels {
        let u = bound.var(&format!("srl.u{label}"));
        let pu = tape.matmul(pred_rows, u)?; // F x d_role
        per_label.push(tape.matmul(pu, role_t)?); // F x T
    }

    let mut role_logits = Vec::with_capacity(predicate_positions.len());
    for f in 0..predicate_positions.len() {
        let mut cols = Vec::with_capacity(n_labels);
        for scores in &per_label {
            let row = tape.gather_rows(*scores, &[f])?; // 1 x T
            cols.push(tape.transpose(row)?); // T x 1
        }
        let stacked = tape.concat_cols(&cols)?; // T x n_labels
        role_logits.push(tape.add_row(stacked, bound.var("srl.b"))?);
    }
    Ok(FrameScores {
        predicate_positions: predicate_positions.to_vec(),
        role_logits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamSet;

    fn bound_with(entries: &[(&str, Array)], tape: &mut Tape) -> Bound {
        let mut ps = ParamSet::new();
        for (name, a) in entries {
            ps.insert(*name, a.clone());
        }
        ps.bind(tape)
    }

    fn parse_params(d_in: usize, d_q: usize, d_k: usize, d_v: usize) -> Vec<(&'static str, Array)> {
        vec![
            ("parse.wq", Array::full(&[d_in, d_q], 0.0)),
            ("parse.bq", Array::zeros(&[d_q])),
            ("parse.wk", Array::full(&[d_in, d_k], 0.0)),
            ("parse.bk", Array::zeros(&[d_k])),
            ("parse.wv", Array::full(&[d_in, d_v], 0.5)),
            ("parse.bv", Array::zeros(&[d_v])),
            ("parse.u_heads", Array::zeros(&[d_q, d_k])),
        ]
    }

    #[test]
    fn zero_bilinear_gives_uniform_attention() {
        let mut tape = Tape::new();
        let bound = bound_with(&parse_params(2, 3, 2, 2), &mut tape);
        let s = tape.leaf(Array::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.0], vec![3.0, 1.0]]).unwrap());
        let out = parse_attention(&mut tape, s, &bound).unwrap();
        for &v in tape.value(out.a_parse).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_token_root_self_loop() {
        let mut tape = Tape::new();
        let bound = bound_with(&parse_params(2, 3, 2, 2), &mut tape);
        let s = tape.leaf(Array::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let out = parse_attention(&mut tape, s, &bound).unwrap();
        assert_eq!(tape.value(out.a_parse).data(), &[1.0]);
    }

    #[test]
    fn hand_computed_biaffine_logits() {
        // Q = [[1],[2]], K = [[1],[0]], U = [[1]]: logits [[1,0],[2,0]]
        let mut tape = Tape::new();
        let mut entries = parse_params(2, 1, 1, 1);
        entries[0].1 = Array::from_rows(&[vec![1.0], vec![0.0]]).unwrap(); // wq
        entries[2].1 = Array::from_rows(&[vec![0.0], vec![1.0]]).unwrap(); // wk
        entries[6].1 = Array::from_rows(&[vec![1.0]]).unwrap(); // u_heads
        let bound = bound_with(&entries, &mut tape);
        let s = tape.leaf(Array::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap());
        let out = parse_attention(&mut tape, s, &bound).unwrap();
        let logits = tape.value(out.head_logits);
        assert_eq!(logits.data(), &[1.0, 0.0, 2.0, 0.0]);
        let a = tape.value(out.a_parse);
        let e2 = 2f64.exp();
        assert!((a.at2(1, 0) - e2 / (e2 + 1.0)).abs() < 1e-12);
        assert!((a.at2(1, 1) - 1.0 / (e2 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn clamping_produces_one_hot_rows() {
        let mut tape = Tape::new();
        let a = clamp_attention(&mut tape, &[1, 1, 1]).unwrap();
        let v = tape.value(a);
        for row in 0..3 {
            for col in 0..3 {
                let expected = if col == 1 { 1.0 } else { 0.0 };
                assert_eq!(v.at2(row, col), expected);
            }
        }
        assert!(clamp_attention(&mut tape, &[3, 0, 0]).is_err());
    }

    #[test]
    fn clamped_aggregation_is_a_gather() {
        // one-hot rows make A·V an exact row gather of V
        let mut tape = Tape::new();
        let v = tape.leaf(Array::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let a = clamp_attention(&mut tape, &[2, 0, 1]).unwrap();
        let m = tape.matmul(a, v).unwrap();
        assert_eq!(tape.value(m).data(), &[5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_label_weights_give_uniform_distribution() {
        let mut tape = Tape::new();
        let n_labels = 3;
        let mut entries = vec![
            ("deplabel.wq", Array::zeros(&[2, n_labels])),
            ("deplabel.wk", Array::zeros(&[2, n_labels])),
            ("deplabel.b", Array::zeros(&[n_labels])),
        ];
        for l in 0..n_labels {
            entries.push((
                match l {
                    0 => "deplabel.u0",
                    1 => "deplabel.u1",
                    _ => "deplabel.u2",
                },
                Array::zeros(&[2, 2]),
            ));
        }
        let bound = bound_with(&entries, &mut tape);
        let q = tape.leaf(Array::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap());
        let k = tape.leaf(Array::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let scores = dependency_labels(&mut tape, q, k, &[1, 1], n_labels, &bound).unwrap();
        let probs = tape.softmax_rows(scores).unwrap();
        for &p in tape.value(probs).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_scores_depend_only_on_own_head() {
        let mut tape = Tape::new();
        let n_labels = 2;
        let entries = vec![
            ("deplabel.wq", Array::zeros(&[1, n_labels])),
            ("deplabel.wk", Array::from_rows(&[vec![1.0, -1.0]]).unwrap()),
            ("deplabel.b", Array::zeros(&[n_labels])),
            ("deplabel.u0", Array::from_rows(&[vec![0.5]]).unwrap()),
            ("deplabel.u1", Array::from_rows(&[vec![-0.5]]).unwrap()),
        ];
        let bound = bound_with(&entries, &mut tape);
        let q = tape.leaf(Array::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap());
        let k = tape.leaf(Array::from_rows(&[vec![1.0], vec![5.0], vec![-2.0]]).unwrap());
        let s1 = dependency_labels(&mut tape, q, k, &[0, 0, 0], n_labels, &bound).unwrap();
        let s2 = dependency_labels(&mut tape, q, k, &[0, 2, 0], n_labels, &bound).unwrap();
        let (v1, v2) = (tape.value(s1).clone(), tape.value(s2).clone());
        assert_eq!(v1.row(0), v2.row(0));
        assert_ne!(v1.row(1), v2.row(1));
        assert_eq!(v1.row(2), v2.row(2));
    }

    #[test]
    fn dependency_labels_reject_bad_head() {
        let mut tape = Tape::new();
        let entries = vec![
            ("deplabel.wq", Array::zeros(&[1, 1])),
            ("deplabel.wk", Array::zeros(&[1, 1])),
            ("deplabel.b", Array::zeros(&[1])),
            ("deplabel.u0", Array::zeros(&[1, 1])),
        ];
        let bound = bound_with(&entries, &mut tape);
        let q = tape.leaf(Array::from_rows(&[vec![1.0]]).unwrap());
        let k = tape.leaf(Array::from_rows(&[vec![1.0]]).unwrap());
        assert!(dependency_labels(&mut tape, q, k, &[1], 1, &bound).is_err());
    }

    #[test]
    fn empty_predicate_set_yields_no_frames() {
        let mut tape = Tape::new();
        let entries = vec![
            ("srl.pred_w", Array::zeros(&[2, 2])),
            ("srl.pred_b", Array::zeros(&[2])),
            ("srl.role_w", Array::zeros(&[2, 2])),
            ("srl.role_b", Array::zeros(&[2])),
            ("srl.u0", Array::zeros(&[2, 2])),
            ("srl.b", Array::zeros(&[1])),
        ];
        let bound = bound_with(&entries, &mut tape);
        let s = tape.leaf(Array::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let frames = srl_scores(&mut tape, s, &[], 1, &bound).unwrap();
        assert!(frames.role_logits.is_empty());
    }

    #[test]
    fn zero_bilinear_yields_uniform_roles() {
        let mut tape = Tape::new();
        let n_labels = 4;
        let mut entries = vec![
            ("srl.pred_w", Array::full(&[3, 2], 0.3)),
            ("srl.pred_b", Array::zeros(&[2])),
            ("srl.role_w", Array::full(&[3, 2], -0.2)),
            ("srl.role_b", Array::zeros(&[2])),
            ("srl.b", Array::zeros(&[n_labels])),
        ];
        entries.push(("srl.u0", Array::zeros(&[2, 2])));
        entries.push(("srl.u1", Array::zeros(&[2, 2])));
        entries.push(("srl.u2", Array::zeros(&[2, 2])));
        entries.push(("srl.u3", Array::zeros(&[2, 2])));
        let bound = bound_with(&entries, &mut tape);
        let s = tape.leaf(
            Array::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0]]).unwrap(),
        );
        let frames = srl_scores(&mut tape, s, &[1], n_labels, &bound).unwrap();
        let probs = tape.softmax_rows(frames.role_logits[0]).unwrap();
        for &p in tape.value(probs).data() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }
}
