//! Reverse-mode differentiation over 2-D row-major values.
//!
//! Forward values are computed eagerly as operations are recorded, so a
//! caller may read intermediate results (e.g. an argmax) while still building
//! the graph. [`Tape::backward`] replays the record once in reverse; a second
//! replay without [`Tape::reset`] is a state error.

use super::ops;
use super::{Gradients, ParamId, ParamSet, Tensor};
use crate::{Error, Result};

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Contiguous row range `[start, start + len)` forming one causal sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Gather {
        table: ParamId,
        rows: Vec<usize>,
    },
    GatherMean {
        table: ParamId,
        groups: Vec<Vec<usize>>,
    },
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    CausalAttention {
        qkv: Var,
        heads: usize,
        segments: Vec<Segment>,
        // per row: heads × (position-in-segment + 1) weights, concatenated
        probs: Vec<f64>,
    },
    SegmentMean {
        x: Var,
        segments: Vec<Segment>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        gold: Vec<usize>,
        probs: Vec<f64>,
    },
    BceWithLogits {
        logits: Var,
        targets: Vec<f64>,
    },
    SigmoidNll {
        logits: Var,
        gold: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    requires_grad: bool,
    op: Op,
}

/// Operation record over a borrowed parameter set.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    replayed: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            replayed: false,
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reset(&mut self) {
        self.nodes.clear();
        self.replayed = false;
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn row(&self, v: Var, i: usize) -> &[f64] {
        let n = &self.nodes[v.0];
        &n.value[i * n.cols..(i + 1) * n.cols]
    }

    fn push(
        &mut self,
        value: Vec<f64>,
        rows: usize,
        cols: usize,
        requires_grad: bool,
        op: Op,
    ) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            value,
            rows,
            cols,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.values().to_vec(), t.rows(), t.cols(), false, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let t = self.params.get(id);
        self.push(t.values().to_vec(), t.rows(), t.cols(), true, Op::Param(id))
    }

    /// Rows of a parameter table, without copying the whole table.
    pub fn gather(&mut self, table: ParamId, rows: Vec<usize>) -> Result<Var> {
        let t = self.params.get(table);
        let (n, c) = (t.rows(), t.cols());
        let mut value = Vec::with_capacity(rows.len() * c);
        for &r in &rows {
            if r >= n {
                return Err(Error::Index { index: r, len: n });
            }
            value.extend_from_slice(t.row(r));
        }
        let m = rows.len();
        Ok(self.push(value, m, c, true, Op::Gather { table, rows }))
    }

    /// One output row per group: the mean of the group's table rows. Empty
    /// groups give a zero row.
    pub fn gather_mean(&mut self, table: ParamId, groups: Vec<Vec<usize>>) -> Result<Var> {
        let t = self.params.get(table);
        let (n, c) = (t.rows(), t.cols());
        let mut value = vec![0.0; groups.len() * c];
        for (g, group) in groups.iter().enumerate() {
            let out = &mut value[g * c..(g + 1) * c];
            for &r in group {
                if r >= n {
                    return Err(Error::Index { index: r, len: n });
                }
                for (o, &x) in out.iter_mut().zip(t.row(r)) {
                    *o += x;
                }
            }
            if !group.is_empty() {
                let inv = 1.0 / group.len() as f64;
                for o in out.iter_mut() {
                    *o *= inv;
                }
            }
        }
        let m = groups.len();
        Ok(self.push(value, m, c, true, Op::GatherMean { table, groups }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{m}x{k}]·[{k2}x{n}]")));
        }
        let mut out = vec![0.0; m * n];
        ops::matmul(self.value(a), self.value(b), m, k, n, &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, m, n, rg, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(Error::Shape(format!(
                "add {:?} vs {:?}",
                self.dims(a),
                self.dims(b)
            )));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let (m, n) = self.dims(a);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, m, n, rg, Op::Add(a, b)))
    }

    /// `x[m×n] + b[1×n]` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(b) != (1, n) {
            return Err(Error::Shape(format!(
                "bias {:?} for [{m}x{n}]",
                self.dims(b)
            )));
        }
        let bv = self.value(b);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bb) in row.iter_mut().zip(bv) {
                *o += bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, m, n, rg, Op::AddBias(x, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(Error::Shape(format!(
                "mul {:?} vs {:?}",
                self.dims(a),
                self.dims(b)
            )));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let (m, n) = self.dims(a);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, m, n, rg, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let (m, n) = self.dims(a);
        let rg = self.rg(a);
        self.push(out, m, n, rg, Op::Scale(a, c))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let mut s = 0.0;
        for &x in self.value(a) {
            s += x;
        }
        let rg = self.rg(a);
        self.push(vec![s], 1, 1, rg, Op::Sum(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| ops::gelu(x)).collect();
        let (m, n) = self.dims(a);
        let rg = self.rg(a);
        self.push(out, m, n, rg, Op::Gelu(a))
    }

    /// Row-wise layer normalization with `gain`/`bias` of shape `[1×n]`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.dims(gain) != (1, n) || self.dims(bias) != (1, n) {
            return Err(Error::Shape("layer_norm gain/bias".into()));
        }
        let mut out = vec![0.0; m * n];
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        {
            let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
            for i in 0..m {
                inv_std[i] = ops::layer_norm_row(
                    &xv[i * n..(i + 1) * n],
                    gv,
                    bv,
                    &mut xhat[i * n..(i + 1) * n],
                    &mut out[i * n..(i + 1) * n],
                );
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            m,
            n,
            rg,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        ))
    }

    /// Multi-head causal self-attention. `qkv` is `[rows × 3d]` laid out
    /// `[q | k | v]`; each segment attends only within itself and only to
    /// earlier-or-equal positions. Output is `[rows × d]`.
    pub fn causal_attention(
        &mut self,
        qkv: Var,
        heads: usize,
        segments: Vec<Segment>,
    ) -> Result<Var> {
        let (rows, w) = self.dims(qkv);
        if w % 3 != 0 || (w / 3) % heads != 0 {
            return Err(Error::Shape(format!(
                "attention width {w} with {heads} heads"
            )));
        }
        check_segments(&segments, rows)?;
        let d = w / 3;
        let mut out = vec![0.0; rows * d];
        let total_probs: usize = segments
            .iter()
            .map(|s| heads * s.len * (s.len + 1) / 2)
            .sum();
        let mut probs = vec![0.0; total_probs];
        let mut off = 0;
        {
            let qv = self.value(qkv);
            for s in &segments {
                let block = &qv[s.start * w..(s.start + s.len) * w];
                for i in 0..s.len {
                    let n_keys = i + 1;
                    let q = &block[i * w..i * w + d];
                    let r = s.start + i;
                    ops::attention_row(
                        q,
                        block,
                        n_keys,
                        heads,
                        &mut out[r * d..(r + 1) * d],
                        &mut probs[off..off + heads * n_keys],
                    );
                    off += heads * n_keys;
                }
            }
        }
        let rg = self.rg(qkv);
        Ok(self.push(
            out,
            rows,
            d,
            rg,
            Op::CausalAttention {
                qkv,
                heads,
                segments,
                probs,
            },
        ))
    }

    /// Mean of the rows in each segment, one output row per segment.
    pub fn segment_mean(&mut self, x: Var, segments: Vec<Segment>) -> Result<Var> {
        let (rows, n) = self.dims(x);
        check_segments(&segments, rows)?;
        let mut out = vec![0.0; segments.len() * n];
        {
            let xv = self.value(x);
            for (g, s) in segments.iter().enumerate() {
                let o = &mut out[g * n..(g + 1) * n];
                for r in s.start..s.start + s.len {
                    for (a, &b) in o.iter_mut().zip(&xv[r * n..(r + 1) * n]) {
                        *a += b;
                    }
                }
                let inv = 1.0 / s.len as f64;
                for a in o.iter_mut() {
                    *a *= inv;
                }
            }
        }
        let m = segments.len();
        let rg = self.rg(x);
        Ok(self.push(out, m, n, rg, Op::SegmentMean { x, segments }))
    }

    /// `Σ_r −log softmax(logits_r)[gold_r]` as a `[1×1]` value.
    pub fn softmax_cross_entropy(&mut self, logits: Var, gold: Vec<usize>) -> Result<Var> {
        let (m, n) = self.dims(logits);
        if gold.len() != m {
            return Err(Error::Shape(format!("{} targets for {m} rows", gold.len())));
        }
        let mut probs = self.value(logits).to_vec();
        let mut loss = 0.0;
        for (r, &g) in gold.iter().enumerate() {
            if g >= n {
                return Err(Error::Index { index: g, len: n });
            }
            let row = &mut probs[r * n..(r + 1) * n];
            ops::log_softmax_in_place(row);
            loss -= row[g];
            for p in row.iter_mut() {
                *p = p.exp();
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            vec![loss],
            1,
            1,
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                gold,
                probs,
            },
        ))
    }

    /// `Σ bce(sigmoid(logits), targets)` over every entry, as `[1×1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Vec<f64>) -> Result<Var> {
        if targets.len() != self.value(logits).len() {
            return Err(Error::Shape("bce targets".into()));
        }
        let mut loss = 0.0;
        for (&z, &y) in self.value(logits).iter().zip(&targets) {
            loss += ops::bce_with_logit(z, y);
        }
        let rg = self.rg(logits);
        Ok(self.push(vec![loss], 1, 1, rg, Op::BceWithLogits { logits, targets }))
    }

    /// `Σ_r −log sigmoid(logits[r, gold_r])`, as `[1×1]`.
    pub fn sigmoid_nll(&mut self, logits: Var, gold: Vec<usize>) -> Result<Var> {
        let (m, n) = self.dims(logits);
        if gold.len() != m {
            return Err(Error::Shape(format!("{} targets for {m} rows", gold.len())));
        }
        let mut loss = 0.0;
        for (r, &g) in gold.iter().enumerate() {
            if g >= n {
                return Err(Error::Index { index: g, len: n });
            }
            loss -= ops::log_sigmoid_scalar(self.value(logits)[r * n + g]);
        }
        let rg = self.rg(logits);
        Ok(self.push(vec![loss], 1, 1, rg, Op::SigmoidNll { logits, gold }))
    }

    /// Replays adjoints from the scalar `loss`. Parameters that the loss does
    /// not reach receive zero gradient.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.replayed {
            return Err(Error::State(
                "tape already replayed; call reset() first".into(),
            ));
        }
        if self.dims(loss) != (1, 1) {
            return Err(Error::Shape(format!(
                "loss must be scalar, got {:?}",
                self.dims(loss)
            )));
        }
        self.replayed = true;
        let mut pgrads = Gradients::zeros_like(self.params);
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    for (a, b) in pgrads.get_mut(*id).iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Gather { table, rows } => {
                    let c = node.cols;
                    let pg = pgrads.get_mut(*table);
                    for (k, &r) in rows.iter().enumerate() {
                        for (a, b) in pg[r * c..(r + 1) * c]
                            .iter_mut()
                            .zip(&g[k * c..(k + 1) * c])
                        {
                            *a += b;
                        }
                    }
                }
                Op::GatherMean { table, groups } => {
                    let c = node.cols;
                    let pg = pgrads.get_mut(*table);
                    for (k, group) in groups.iter().enumerate() {
                        if group.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / group.len() as f64;
                        for &r in group {
                            for (a, b) in pg[r * c..(r + 1) * c]
                                .iter_mut()
                                .zip(&g[k * c..(k + 1) * c])
                            {
                                *a += b * inv;
                            }
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = node.cols;
                    if self.rg(*a) {
                        let ga = slot(&mut grads, *a, m * k);
                        ops::matmul_bt_acc(&g, &self.nodes[b.0].value, m, n, k, ga);
                    }
                    if self.rg(*b) {
                        let gb = slot(&mut grads, *b, k * n);
                        ops::matmul_at_acc(&self.nodes[a.0].value, &g, m, k, n, gb);
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if self.rg(v) {
                            acc(slot(&mut grads, v, g.len()), &g);
                        }
                    }
                }
                Op::AddBias(x, b) => {
                    let n = node.cols;
                    if self.rg(*x) {
                        acc(slot(&mut grads, *x, g.len()), &g);
                    }
                    if self.rg(*b) {
                        let gb = slot(&mut grads, *b, n);
                        for row in g.chunks(n) {
                            acc(gb, row);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.rg(a) {
                        let bv = &self.nodes[b.0].value;
                        let ga = slot(&mut grads, a, g.len());
                        for ((x, &gg), &y) in ga.iter_mut().zip(&g).zip(bv) {
                            *x += gg * y;
                        }
                    }
                    if self.rg(b) {
                        let av = &self.nodes[a.0].value;
                        let gb = slot(&mut grads, b, g.len());
                        for ((x, &gg), &y) in gb.iter_mut().zip(&g).zip(av) {
                            *x += gg * y;
                        }
                    }
                }
                Op::Scale(a, c) => {
                    if self.rg(*a) {
                        let ga = slot(&mut grads, *a, g.len());
                        for (x, &gg) in ga.iter_mut().zip(&g) {
                            *x += gg * c;
                        }
                    }
                }
                Op::Sum(a) => {
                    if self.rg(*a) {
                        let n = self.nodes[a.0].value.len();
                        let ga = slot(&mut grads, *a, n);
                        for x in ga.iter_mut() {
                            *x += g[0];
                        }
                    }
                }
                Op::Gelu(a) => {
                    if self.rg(*a) {
                        let av = &self.nodes[a.0].value;
                        let ga = slot(&mut grads, *a, g.len());
                        for ((x, &gg), &v) in ga.iter_mut().zip(&g).zip(av) {
                            *x += gg * ops::gelu_grad(v);
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let (m, n) = (node.rows, node.cols);
                    let gv = &self.nodes[gain.0].value;
                    if self.rg(*gain) {
                        let gg = slot(&mut grads, *gain, n);
                        for r in 0..m {
                            for j in 0..n {
                                gg[j] += g[r * n + j] * xhat[r * n + j];
                            }
                        }
                    }
                    if self.rg(*bias) {
                        let gb = slot(&mut grads, *bias, n);
                        for row in g.chunks(n) {
                            acc(gb, row);
                        }
                    }
                    if self.rg(*x) {
                        let gx = slot(&mut grads, *x, m * n);
                        let mut dxhat = vec![0.0; n];
                        for r in 0..m {
                            let xh = &xhat[r * n..(r + 1) * n];
                            let mut mean_d = 0.0;
                            let mut mean_dx = 0.0;
                            for j in 0..n {
                                dxhat[j] = g[r * n + j] * gv[j];
                                mean_d += dxhat[j];
                                mean_dx += dxhat[j] * xh[j];
                            }
                            mean_d /= n as f64;
                            mean_dx /= n as f64;
                            for j in 0..n {
                                gx[r * n + j] += inv_std[r] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                            }
                        }
                    }
                }
                Op::CausalAttention {
                    qkv,
                    heads,
                    segments,
                    probs,
                } => {
                    if !self.rg(*qkv) {
                        continue;
                    }
                    let d = node.cols;
                    let w = 3 * d;
                    let heads = *heads;
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let qv = &self.nodes[qkv.0].value;
                    let gq = slot(&mut grads, *qkv, qv.len());
                    let mut off = 0;
                    let mut dp = Vec::new();
                    for s in segments {
                        for i in 0..s.len {
                            let r = s.start + i;
                            let n_keys = i + 1;
                            for h in 0..heads {
                                let p = &probs[off + h * n_keys..off + (h + 1) * n_keys];
                                let go = &g[r * d + h * dh..r * d + (h + 1) * dh];
                                dp.clear();
                                let mut dot = 0.0;
                                for (u, &pu) in p.iter().enumerate() {
                                    let ru = s.start + u;
                                    let v =
                                        &qv[ru * w + 2 * d + h * dh..ru * w + 2 * d + (h + 1) * dh];
                                    let mut s_ = 0.0;
                                    for (a, b) in go.iter().zip(v) {
                                        s_ += a * b;
                                    }
                                    dp.push(s_);
                                    dot += pu * s_;
                                    let gv = &mut gq
                                        [ru * w + 2 * d + h * dh..ru * w + 2 * d + (h + 1) * dh];
                                    for (x, &gg) in gv.iter_mut().zip(go) {
                                        *x += pu * gg;
                                    }
                                }
                                for (u, &pu) in p.iter().enumerate() {
                                    let ds = pu * (dp[u] - dot) * scale;
                                    if ds == 0.0 {
                                        continue;
                                    }
                                    let ru = s.start + u;
                                    for j in 0..dh {
                                        let qj = qv[r * w + h * dh + j];
                                        let kj = qv[ru * w + d + h * dh + j];
                                        gq[r * w + h * dh + j] += ds * kj;
                                        gq[ru * w + d + h * dh + j] += ds * qj;
                                    }
                                }
                            }
                            off += heads * n_keys;
                        }
                    }
                }
                Op::SegmentMean { x, segments } => {
                    if self.rg(*x) {
                        let n = node.cols;
                        let total = self.nodes[x.0].value.len();
                        let gx = slot(&mut grads, *x, total);
                        for (k, s) in segments.iter().enumerate() {
                            let inv = 1.0 / s.len as f64;
                            for r in s.start..s.start + s.len {
                                for j in 0..n {
                                    gx[r * n + j] += g[k * n + j] * inv;
                                }
                            }
                        }
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    gold,
                    probs,
                } => {
                    if self.rg(*logits) {
                        let (_, n) = self.dims(*logits);
                        let gl = slot(&mut grads, *logits, probs.len());
                        for (r, &t) in gold.iter().enumerate() {
                            for j in 0..n {
                                let y = if j == t { 1.0 } else { 0.0 };
                                gl[r * n + j] += g[0] * (probs[r * n + j] - y);
                            }
                        }
                    }
                }
                Op::BceWithLogits { logits, targets } => {
                    if self.rg(*logits) {
                        let lv = &self.nodes[logits.0].value;
                        let gl = slot(&mut grads, *logits, lv.len());
                        for ((x, &z), &y) in gl.iter_mut().zip(lv).zip(targets) {
                            *x += g[0] * (ops::sigmoid_scalar(z) - y);
                        }
                    }
                }
                Op::SigmoidNll { logits, gold } => {
                    if self.rg(*logits) {
                        let (_, n) = self.dims(*logits);
                        let lv = &self.nodes[logits.0].value;
                        let gl = slot(&mut grads, *logits, lv.len());
                        for (r, &t) in gold.iter().enumerate() {
                            gl[r * n + t] += g[0] * (ops::sigmoid_scalar(lv[r * n + t]) - 1.0);
                        }
                    }
                }
            }
        }
        Ok(pgrads)
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

fn check_segments(segments: &[Segment], rows: usize) -> Result<()> {
    for s in segments {
        if s.len == 0 || s.start + s.len > rows {
            return Err(Error::Shape(format!("segment {s:?} outside {rows} rows")));
        }
    }
    Ok(())
}
