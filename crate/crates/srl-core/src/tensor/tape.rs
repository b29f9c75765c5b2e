use super::array::{matmul_nt_raw, matmul_raw, matmul_tn_raw, Array};
use super::TensorError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

struct Node {
    value: Array,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Matmul(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    LeakyRelu(Var, f64),
    Sum(Var),
    Mean(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    RowSums(Var),
    CrossEntropySum {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
}

/// Define-by-run record of one forward pass.
///
/// Nodes are appended in execution order, so reverse creation order is a
/// reverse topological order and [`Tape::backward`] visits each node once.
/// A tape and its variables belong to a single thread; separate passes on
/// separate tapes may run concurrently.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input: no gradient is tracked through it.
    pub fn leaf(&mut self, value: Array) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// Trainable input: receives a gradient from [`Tape::backward`].
    pub fn param(&mut self, value: Array) -> Var {
        self.push(value, true, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` call, if this node was reached.
    pub fn grad(&self, v: Var) -> Option<Array> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| {
            Array::new(node.value.shape().to_vec(), g.clone()).expect("grad shape tracks value")
        })
    }

    fn push(&mut self, value: Array, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Array, parents: &[Var], op: Op) -> Var {
        let requires = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(value, requires, op)
    }

    fn shape_err(op: &'static str, detail: String) -> TensorError {
        TensorError::ShapeMismatch { op, detail }
    }

    // ── elementwise ──────────────────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn zip_elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() != vb.shape() {
            return Err(Self::shape_err(
                name,
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Array::new(va.shape().to_vec(), data)?;
        Ok(self.push_op(value, &[a, b], op))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let data = vx.data().iter().map(|&v| v * c).collect();
        let value = Array::new(vx.shape().to_vec(), data)?;
        Ok(self.push_op(value, &[x], Op::Scale(x, c)))
    }

    /// `x[m,n] + row[n]`, broadcast over rows (bias addition).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let (vx, vr) = (&self.nodes[x.0].value, &self.nodes[row.0].value);
        let (m, n) = vx.dims2();
        if vr.shape() != [n] {
            return Err(Self::shape_err(
                "add_row",
                format!("{:?} + row {:?}", vx.shape(), vr.shape()),
            ));
        }
        let mut data = vx.data().to_vec();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += vr.data()[j];
            }
        }
        let value = Array::new(vx.shape().to_vec(), data)?;
        Ok(self.push_op(value, &[x, row], Op::AddRow(x, row)))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&slope) || slope == 0.0 {
            return Err(TensorError::BadArgument {
                op: "leaky_relu",
                detail: format!("slope must lie in (0,1), got {slope}"),
            });
        }
        let vx = &self.nodes[x.0].value;
        let data = vx
            .data()
            .iter()
            .map(|&v| if v >= 0.0 { v } else { slope * v })
            .collect();
        let value = Array::new(vx.shape().to_vec(), data)?;
        Ok(self.push_op(value, &[x], Op::LeakyRelu(x, slope)))
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape().len() != 2 || vb.shape().len() != 2 {
            return Err(Self::shape_err(
                "matmul",
                format!("requires rank-2 operands, got {:?} · {:?}", va.shape(), vb.shape()),
            ));
        }
        let (m, k) = va.dims2();
        let (k2, n) = vb.dims2();
        if k != k2 {
            return Err(Self::shape_err(
                "matmul",
                format!("inner dimensions disagree: [{m}x{k}] · [{k2}x{n}]"),
            ));
        }
        let data = matmul_raw(va.data(), vb.data(), m, k, n);
        let value = Array::new(vec![m, n], data)?;
        Ok(self.push_op(value, &[a, b], Op::Matmul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        if vx.shape().len() != 2 {
            return Err(Self::shape_err(
                "transpose",
                format!("requires rank 2, got {:?}", vx.shape()),
            ));
        }
        let (m, n) = vx.dims2();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = vx.data()[i * n + j];
            }
        }
        let value = Array::new(vec![n, m], data)?;
        Ok(self.push_op(value, &[x], Op::Transpose(x)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let numel: usize = shape.iter().product();
        if numel != vx.numel() {
            return Err(Self::shape_err(
                "reshape",
                format!("{:?} -> {:?}", vx.shape(), shape),
            ));
        }
        let value = Array::new(shape.to_vec(), vx.data().to_vec())?;
        Ok(self.push_op(value, &[x], Op::Reshape(x)))
    }

    /// Select rows of `x` by index; repeated indices are allowed and the
    /// gradient scatter-adds back into the source rows.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let (m, n) = vx.dims2();
        if idx.is_empty() {
            return Err(TensorError::BadArgument {
                op: "gather_rows",
                detail: "empty index set".into(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(TensorError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                size: m,
            });
        }
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend_from_slice(&vx.data()[i * n..(i + 1) * n]);
        }
        let value = Array::new(vec![idx.len(), n], data)?;
        Ok(self.push_op(value, &[x], Op::GatherRows(x, idx.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::BadArgument {
                op: "concat_cols",
                detail: "no parts".into(),
            });
        }
        let m = self.nodes[parts[0].0].value.dims2().0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (pm, pn) = self.nodes[p.0].value.dims2();
            if pm != m {
                return Err(Self::shape_err(
                    "concat_cols",
                    format!("row counts disagree: {pm} vs {m}"),
                ));
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; m * total];
        let mut offset = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            let vp = &self.nodes[p.0].value;
            for i in 0..m {
                data[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&vp.data()[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let value = Array::new(vec![m, total], data)?;
        Ok(self.push_op(value, &parts.to_vec(), Op::ConcatCols(parts.to_vec())))
    }

    // ── reductions ───────────────────────────────────────────────────

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        Ok(self.push_op(Array::scalar(s), &[x], Op::Sum(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let s: f64 = vx.data().iter().sum();
        let n = vx.numel() as f64;
        Ok(self.push_op(Array::scalar(s / n), &[x], Op::Mean(x)))
    }

    /// `[m,n] -> [m,1]`: sum over the last axis.
    pub fn row_sums(&mut self, x: Var) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let (m, n) = vx.dims2();
        let data = (0..m)
            .map(|i| vx.data()[i * n..(i + 1) * n].iter().sum())
            .collect();
        let value = Array::new(vec![m, 1], data)?;
        Ok(self.push_op(value, &[x], Op::RowSums(x)))
    }

    // ── normalizations ───────────────────────────────────────────────

    /// Softmax over the last axis; each output row is a distribution.
    /// Stabilized by max subtraction, so arbitrarily large inputs are fine.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let (m, n) = vx.dims2();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &vx.data()[i * n..(i + 1) * n];
            softmax_into(row, &mut data[i * n..(i + 1) * n]);
        }
        let value = Array::new(vx.shape().to_vec(), data)?;
        Ok(self.push_op(value, &[x], Op::SoftmaxRows(x)))
    }

    /// Softmax along `axis` of a rank-2 input (0 = down columns, 1 = across rows).
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        match axis {
            1 => self.softmax_rows(x),
            0 => {
                let xt = self.transpose(x)?;
                let st = self.softmax_rows(xt)?;
                self.transpose(st)
            }
            _ => Err(TensorError::BadArgument {
                op: "softmax",
                detail: format!("axis {axis} out of range"),
            }),
        }
    }

    /// Per-row standardization over the last axis followed by gain/bias.
    /// Variance uses the 1/d population convention with floor `eps`.
    pub fn layer_norm(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<Var, TensorError> {
        let vx = &self.nodes[x.0].value;
        let (m, d) = vx.dims2();
        if d < 2 {
            return Err(TensorError::DegenerateNorm);
        }
        let (vg, vb) = (&self.nodes[gain.0].value, &self.nodes[bias.0].value);
        if vg.shape() != [d] || vb.shape() != [d] {
            return Err(Self::shape_err(
                "layer_norm",
                format!("gain/bias must be [{d}], got {:?}/{:?}", vg.shape(), vb.shape()),
            ));
        }
        let mut xhat = vec![0.0; m * d];
        let mut inv_std = vec![0.0; m];
        let mut data = vec![0.0; m * d];
        for i in 0..m {
            let row = &vx.data()[i * d..(i + 1) * d];
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[i] = is;
            for j in 0..d {
                let h = (row[j] - mu) * is;
                xhat[i * d + j] = h;
                data[i * d + j] = vg.data()[j] * h + vb.data()[j];
            }
        }
        let value = Array::new(vx.shape().to_vec(), data)?;
        Ok(self.push_op(
            value,
            &[x, gain, bias],
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    // ── losses ───────────────────────────────────────────────────────

    /// Sum over rows of the negative log-likelihood of `targets` under a
    /// row-wise softmax of `logits`. Computed in log space.
    pub fn cross_entropy_sum(
        &mut self,
        logits: Var,
        targets: &[usize],
    ) -> Result<Var, TensorError> {
        let vx = &self.nodes[logits.0].value;
        let (m, n) = vx.dims2();
        if targets.len() != m {
            return Err(Self::shape_err(
                "cross_entropy_sum",
                format!("{} targets for {m} rows", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            return Err(TensorError::IndexOutOfRange {
                op: "cross_entropy_sum",
                index: bad,
                size: n,
            });
        }
        let mut probs = vec![0.0; m * n];
        let mut nll = 0.0;
        for i in 0..m {
            let row = &vx.data()[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                probs[i * n + j] = e;
                z += e;
            }
            for j in 0..n {
                probs[i * n + j] /= z;
            }
            nll += z.ln() + max - row[targets[i]];
        }
        Ok(self.push_op(
            Array::scalar(nll),
            &[logits],
            Op::CrossEntropySum {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    // ── reverse pass ─────────────────────────────────────────────────

    /// Populate `grad` for every `requires_grad` ancestor of `loss`.
    /// Gradients accumulate additively across multiple uses of a node.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: self.nodes[loss.0].value.shape().to_vec(),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() {
                continue;
            }
            let g = self.nodes[i].grad.clone().expect("checked above");
            self.propagate(i, &g)?;
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accum(&mut self, v: Var, contrib: &[f64]) {
        let node = &mut self.nodes[v.0];
        let grad = node
            .grad
            .get_or_insert_with(|| vec![0.0; node.value.numel()]);
        for (g, &c) in grad.iter_mut().zip(contrib) {
            *g += c;
        }
    }

    fn propagate(&mut self, i: usize, g: &[f64]) -> Result<(), TensorError> {
        // Ops are matched by value where cached state is needed; the enum
        // holds only indices and small caches, so cloning is cheap relative
        // to the arithmetic below.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(a) {
                    self.accum(a, g);
                }
                if self.wants(b) {
                    self.accum(b, g);
                }
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(a) {
                    self.accum(a, g);
                }
                if self.wants(b) {
                    let neg: Vec<f64> = g.iter().map(|&v| -v).collect();
                    self.accum(b, &neg);
                }
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(a) {
                    let other = self.nodes[b.0].value.data();
                    let contrib: Vec<f64> = g.iter().zip(other).map(|(&gv, &o)| gv * o).collect();
                    self.accum(a, &contrib);
                }
                if self.wants(b) {
                    let other = self.nodes[a.0].value.data();
                    let contrib: Vec<f64> = g.iter().zip(other).map(|(&gv, &o)| gv * o).collect();
                    self.accum(b, &contrib);
                }
            }
            Op::Scale(x, c) => {
                let (x, c) = (*x, *c);
                if self.wants(x) {
                    let contrib: Vec<f64> = g.iter().map(|&v| v * c).collect();
                    self.accum(x, &contrib);
                }
            }
            Op::AddRow(x, row) => {
                let (x, row) = (*x, *row);
                let (m, n) = self.nodes[x.0].value.dims2();
                if self.wants(x) {
                    self.accum(x, g);
                }
                if self.wants(row) {
                    let mut contrib = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            contrib[j] += g[i * n + j];
                        }
                    }
                    self.accum(row, &contrib);
                }
            }
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = self.nodes[a.0].value.dims2();
                let (_, n) = self.nodes[b.0].value.dims2();
                if self.wants(a) {
                    // dA = dC · B^T
                    let da = matmul_nt_raw(g, self.nodes[b.0].value.data(), m, n, k);
                    self.accum(a, &da);
                }
                if self.wants(b) {
                    // dB = A^T · dC
                    let db = matmul_tn_raw(self.nodes[a.0].value.data(), g, m, k, n);
                    self.accum(b, &db);
                }
            }
            Op::Transpose(x) => {
                let x = *x;
                if self.wants(x) {
                    let (m, n) = self.nodes[x.0].value.dims2();
                    let mut contrib = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            contrib[i * n + j] = g[j * m + i];
                        }
                    }
                    self.accum(x, &contrib);
                }
            }
            Op::SoftmaxRows(x) => {
                let x = *x;
                if self.wants(x) {
                    let (m, n) = self.nodes[i].value.dims2();
                    let y = self.nodes[i].value.data();
                    let mut contrib = vec![0.0; m * n];
                    for r in 0..m {
                        let yr = &y[r * n..(r + 1) * n];
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            contrib[r * n + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    self.accum(x, &contrib);
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let xhat = xhat.clone();
                let inv_std = inv_std.clone();
                let (m, d) = self.nodes[x.0].value.dims2();
                let gval = self.nodes[gain.0].value.data().to_vec();
                if self.wants(x) {
                    let mut contrib = vec![0.0; m * d];
                    for r in 0..m {
                        let gr = &g[r * d..(r + 1) * d];
                        let hr = &xhat[r * d..(r + 1) * d];
                        // dxhat = dy * gain
                        let dxhat: Vec<f64> =
                            (0..d).map(|j| gr[j] * gval[j]).collect();
                        let mean_dx = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dxh =
                            dxhat.iter().zip(hr).map(|(&a, &b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            contrib[r * d + j] =
                                inv_std[r] * (dxhat[j] - mean_dx - hr[j] * mean_dxh);
                        }
                    }
                    self.accum(x, &contrib);
                }
                if self.wants(gain) {
                    let mut contrib = vec![0.0; d];
                    for r in 0..m {
                        for j in 0..d {
                            contrib[j] += g[r * d + j] * xhat[r * d + j];
                        }
                    }
                    self.accum(gain, &contrib);
                }
                if self.wants(bias) {
                    let mut contrib = vec![0.0; d];
                    for r in 0..m {
                        for j in 0..d {
                            contrib[j] += g[r * d + j];
                        }
                    }
                    self.accum(bias, &contrib);
                }
            }
            Op::LeakyRelu(x, slope) => {
                let (x, slope) = (*x, *slope);
                if self.wants(x) {
                    let xv = self.nodes[x.0].value.data();
                    let contrib: Vec<f64> = g
                        .iter()
                        .zip(xv)
                        .map(|(&gv, &v)| if v >= 0.0 { gv } else { gv * slope })
                        .collect();
                    self.accum(x, &contrib);
                }
            }
            Op::Sum(x) => {
                let x = *x;
                if self.wants(x) {
                    let n = self.nodes[x.0].value.numel();
                    self.accum(x, &vec![g[0]; n]);
                }
            }
            Op::Mean(x) => {
                let x = *x;
                if self.wants(x) {
                    let n = self.nodes[x.0].value.numel();
                    self.accum(x, &vec![g[0] / n as f64; n]);
                }
            }
            Op::GatherRows(x, idx) => {
                let x = *x;
                let idx = idx.clone();
                if self.wants(x) {
                    let (m, n) = self.nodes[x.0].value.dims2();
                    let mut contrib = vec![0.0; m * n];
                    for (out_row, &src_row) in idx.iter().enumerate() {
                        for j in 0..n {
                            contrib[src_row * n + j] += g[out_row * n + j];
                        }
                    }
                    self.accum(x, &contrib);
                }
            }
            Op::ConcatCols(parts) => {
                let parts = parts.clone();
                let (m, total) = self.nodes[i].value.dims2();
                let mut offset = 0;
                for p in parts {
                    let (_, w) = self.nodes[p.0].value.dims2();
                    if self.wants(p) {
                        let mut contrib = vec![0.0; m * w];
                        for r in 0..m {
                            contrib[r * w..(r + 1) * w]
                                .copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                        }
                        self.accum(p, &contrib);
                    }
                    offset += w;
                }
            }
            Op::Reshape(x) => {
                let x = *x;
                if self.wants(x) {
                    self.accum(x, g);
                }
            }
            Op::RowSums(x) => {
                let x = *x;
                if self.wants(x) {
                    let (m, n) = self.nodes[x.0].value.dims2();
                    let mut contrib = vec![0.0; m * n];
                    for r in 0..m {
                        for j in 0..n {
                            contrib[r * n + j] = g[r];
                        }
                    }
                    self.accum(x, &contrib);
                }
            }
            Op::CrossEntropySum {
                logits,
                targets,
                probs,
            } => {
                let logits = *logits;
                let targets = targets.clone();
                let probs = probs.clone();
                if self.wants(logits) {
                    let (m, n) = self.nodes[logits.0].value.dims2();
                    let mut contrib = probs;
                    for r in 0..m {
                        contrib[r * n + targets[r]] -= 1.0;
                    }
                    for v in contrib.iter_mut() {
                        *v *= g[0];
                    }
                    self.accum(logits, &contrib);
                }
            }
        }
        Ok(())
    }
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}
