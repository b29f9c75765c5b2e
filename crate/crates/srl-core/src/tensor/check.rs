use super::array::Array;
use super::tape::{Tape, Var};
use super::TensorError;

/// Outcome of comparing reverse-mode gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Input name and flat element index of the worst disagreement.
    pub worst: Option<(String, usize)>,
    pub elements_checked: usize,
    pub finite: bool,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.finite && self.max_rel_err <= self.tol
    }
}

/// Check the tape gradient of a scalar function against central finite
/// differences at step `h`, element by element over every named input.
///
/// The relative error is `|ad - fd| / max(1, |ad|, |fd|)`: floored at unit
/// scale so that near-zero gradients are compared absolutely, where the
/// difference quotient itself is dominated by rounding noise.
pub fn grad_check<F, E>(
    f: &F,
    inputs: &[(String, Array)],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<TensorError>,
{
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        elements_checked: 0,
        finite: true,
        tol,
    };

    // Reverse-mode pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|(_, a)| tape.param(a.clone()))
        .collect();
    let loss = f(&mut tape, &vars)?;
    if !tape.value(loss).is_finite() {
        report.finite = false;
        return Ok(report);
    }
    tape.backward(loss)?;
    let analytic: Vec<Array> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, (_, a))| {
            tape.grad(v)
                .unwrap_or_else(|| Array::zeros(a.shape()))
        })
        .collect();

    // Finite-difference probe, one element at a time.
    let eval = |probe: usize, elem: usize, delta: f64| -> Result<f64, E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .enumerate()
            .map(|(i, (_, a))| {
                let mut a = a.clone();
                if i == probe {
                    a.data_mut()[elem] += delta;
                }
                tape.leaf(a)
            })
            .collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };

    for (i, (name, a)) in inputs.iter().enumerate() {
        for e in 0..a.numel() {
            let fp = eval(i, e, h)?;
            let fm = eval(i, e, -h)?;
            if !fp.is_finite() || !fm.is_finite() {
                report.finite = false;
                return Ok(report);
            }
            let fd = (fp - fm) / (2.0 * h);
            let ad = analytic[i].data()[e];
            let denom = 1.0_f64.max(ad.abs()).max(fd.abs());
            let rel = (ad - fd).abs() / denom;
            report.elements_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), e));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_exact() {
        let inputs = vec![(
            "x".to_string(),
            Array::vector(vec![0.3, -1.2, 2.5]),
        )];
        // f is linear, so a large step has no truncation error and the
        // difference quotient is exact to rounding.
        let report = grad_check(
            &|t: &mut Tape, vs: &[Var]| t.sum(vs[0]),
            &inputs,
            1e-3,
            1e-12,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn composite_function_matches_finite_differences() {
        // f(x, w) = sum(leaky(softmax(x·w)))
        let inputs = vec![
            (
                "x".to_string(),
                Array::from_rows(&[vec![0.5, -0.3], vec![1.1, 0.2]]).unwrap(),
            ),
            (
                "w".to_string(),
                Array::from_rows(&[vec![0.7, -0.4], vec![0.1, 0.9]]).unwrap(),
            ),
        ];
        let f = |t: &mut Tape, vs: &[Var]| {
            let p = t.matmul(vs[0], vs[1])?;
            let s = t.softmax_rows(p)?;
            let l = t.leaky_relu(s, 0.1)?;
            t.sum(l)
        };
        let report = grad_check(&f, &inputs, 1e-5, 1e-7).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn layer_norm_gradient_matches() {
        let inputs = vec![
            (
                "x".to_string(),
                Array::from_rows(&[vec![0.5, -0.3, 0.9], vec![1.1, 0.2, -0.6]]).unwrap(),
            ),
            ("g".to_string(), Array::vector(vec![1.2, 0.8, -0.5])),
            ("b".to_string(), Array::vector(vec![0.1, -0.2, 0.3])),
        ];
        let f = |t: &mut Tape, vs: &[Var]| {
            let y = t.layer_norm(vs[0], vs[1], vs[2], 1e-12)?;
            let sq = t.mul(y, y)?;
            t.sum(sq)
        };
        let report = grad_check(&f, &inputs, 1e-5, 1e-7).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn cross_entropy_gradient_matches() {
        let inputs = vec![(
            "logits".to_string(),
            Array::from_rows(&[vec![0.5, -0.3, 0.9], vec![1.1, 0.2, -0.6]]).unwrap(),
        )];
        let f = |t: &mut Tape, vs: &[Var]| t.cross_entropy_sum(vs[0], &[2, 0]);
        let report = grad_check(&f, &inputs, 1e-5, 1e-8).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let inputs = vec![("x".to_string(), Array::vector(vec![1.0]))];
        let f = |t: &mut Tape, vs: &[Var]| {
            let s = t.scale(vs[0], f64::INFINITY)?;
            t.sum(s)
        };
        let report = grad_check(&f, &inputs, 1e-5, 1e-4).unwrap();
        assert!(!report.finite);
        assert!(!report.passed());
    }
}
