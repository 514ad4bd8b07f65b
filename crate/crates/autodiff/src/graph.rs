//! Tape-based compute graph. Nodes are appended in evaluation order, so the
//! node list is already a topological order and `backward` is a single
//! reverse sweep.

use rand::{Rng, SeedableRng};

use crate::error::{shape_err, AutodiffError, Result};
use crate::kernels::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc, sigmoid, softmax_forward};
use crate::scalar::{lit, Scalar};
use crate::tensor::{split_axis, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic kernels (dropout) are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Op selector for [`Graph::apply`]. Attributes travel with the kind.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Mul,
    Scale(f64),
    AddScalar(f64),
    Abs,
    Relu,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Softmax { axis: usize },
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Reshape { shape: Vec<usize> },
    Transpose,
    /// Mixture-weighted lookup: `x` rows weight the rows of `table` within each field range.
    Embedding { ranges: Vec<(usize, usize)> },
    /// Stride 1, symmetric zero padding, odd width taken from the weight tensor.
    Conv1d,
    LstmCell,
    Dropout { rate: f64, mode: DropoutMode, seed: u64 },
    LayerNorm { eps: f64 },
    WeightedCrossEntropy { targets: Vec<usize>, class_weights: Vec<f64> },
    Mean,
    Sum,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul { a: NodeId, b: NodeId, batch: usize, m: usize, k: usize, n: usize, shared_rhs: bool },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: T },
    AddScalar { a: NodeId },
    Abs { a: NodeId },
    Relu { a: NodeId },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Exp { a: NodeId },
    Log { a: NodeId },
    Softmax { a: NodeId, axis: usize },
    Concat { inputs: Vec<NodeId>, axis: usize },
    Slice { a: NodeId, axis: usize, start: usize },
    Reshape { a: NodeId },
    Transpose { a: NodeId },
    Embedding { x: NodeId, table: NodeId, ranges: Vec<(usize, usize)> },
    Conv1d { x: NodeId, w: NodeId, b: NodeId },
    LstmCell { inputs: [NodeId; 6], gates: Vec<T>, tanh_c: Vec<T> },
    Dropout { a: NodeId, mask: Vec<T> },
    LayerNorm { x: NodeId, gamma: NodeId, beta: NodeId, xhat: Vec<T>, inv_std: Vec<T> },
    WeightedCe { logits: NodeId, targets: Vec<usize>, weights: Vec<T>, probs: Vec<T>, norm: T },
    Mean { a: NodeId },
    Sum { a: NodeId },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Reverse-mode tape over dense tensors.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Result of [`Graph::backward`]: one gradient slot per node.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `id`; `None` when the node has no path to the loss
    /// and is not a parameter.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<T>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

fn same_suffix(a: &[usize], b: &[usize]) -> bool {
    b.len() <= a.len() && a[a.len() - b.len()..] == *b
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor<T>) -> NodeId {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn check_id(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(AutodiffError::Invalid(format!("unknown node {}", id.0)));
        }
        Ok(())
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn emit(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[NodeId]) -> NodeId {
        let rg = self.rg(inputs);
        self.push(value, op, rg)
    }

    /// Generic entry point: dispatches `kind` over `inputs`.
    pub fn apply(&mut self, kind: &OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        for &i in inputs {
            self.check_id(i)?;
        }
        let arity = |n: usize| -> Result<()> {
            if inputs.len() != n {
                return Err(AutodiffError::Invalid(format!(
                    "{kind:?} takes {n} inputs, got {}",
                    inputs.len()
                )));
            }
            Ok(())
        };
        match kind {
            OpKind::MatMul => {
                arity(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            OpKind::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            OpKind::Mul => {
                arity(2)?;
                self.mul(inputs[0], inputs[1])
            }
            OpKind::Scale(c) => {
                arity(1)?;
                Ok(self.scale(inputs[0], *c))
            }
            OpKind::AddScalar(c) => {
                arity(1)?;
                Ok(self.add_scalar(inputs[0], *c))
            }
            OpKind::Abs => {
                arity(1)?;
                Ok(self.abs(inputs[0]))
            }
            OpKind::Relu => {
                arity(1)?;
                Ok(self.relu(inputs[0]))
            }
            OpKind::Tanh => {
                arity(1)?;
                Ok(self.tanh(inputs[0]))
            }
            OpKind::Sigmoid => {
                arity(1)?;
                Ok(self.sigmoid(inputs[0]))
            }
            OpKind::Exp => {
                arity(1)?;
                self.exp(inputs[0])
            }
            OpKind::Log => {
                arity(1)?;
                self.log(inputs[0])
            }
            OpKind::Softmax { axis } => {
                arity(1)?;
                self.softmax(inputs[0], *axis)
            }
            OpKind::Concat { axis } => self.concat(inputs, *axis),
            OpKind::Slice { axis, start, len } => {
                arity(1)?;
                self.slice(inputs[0], *axis, *start, *len)
            }
            OpKind::Reshape { shape } => {
                arity(1)?;
                self.reshape(inputs[0], shape)
            }
            OpKind::Transpose => {
                arity(1)?;
                self.transpose(inputs[0])
            }
            OpKind::Embedding { ranges } => {
                arity(2)?;
                self.embedding(inputs[0], inputs[1], ranges)
            }
            OpKind::Conv1d => {
                arity(3)?;
                self.conv1d(inputs[0], inputs[1], inputs[2])
            }
            OpKind::LstmCell => {
                arity(6)?;
                self.lstm_cell(inputs[0], inputs[1], inputs[2], inputs[3], inputs[4], inputs[5])
            }
            OpKind::Dropout { rate, mode, seed } => {
                arity(1)?;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                self.dropout(inputs[0], *rate, *mode, &mut rng)
            }
            OpKind::LayerNorm { eps } => {
                arity(3)?;
                self.layer_norm(inputs[0], inputs[1], inputs[2], *eps)
            }
            OpKind::WeightedCrossEntropy {
                targets,
                class_weights,
            } => {
                arity(1)?;
                self.weighted_cross_entropy(inputs[0], targets, class_weights)
            }
            OpKind::Mean => {
                arity(1)?;
                Ok(self.mean(inputs[0]))
            }
            OpKind::Sum => {
                arity(1)?;
                Ok(self.sum(inputs[0]))
            }
        }
    }

    /// `a: m×k · b: k×n`; `a: B×m×k · b: B×k×n` (batched); or `a: …×k · b: k×n`
    /// with the leading dims of `a` flattened.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let (batch, m, k, n, shared_rhs, out_shape) = match (sa.len(), sb.len()) {
            (la, 2) if la >= 2 => {
                let k = sa[la - 1];
                if sb[0] != k {
                    return shape_err("matmul", format!("{sa:?} x {sb:?}"));
                }
                let m: usize = sa[..la - 1].iter().product();
                let mut out = sa[..la - 1].to_vec();
                out.push(sb[1]);
                (1, m, k, sb[1], true, out)
            }
            (3, 3) => {
                if sa[0] != sb[0] || sa[2] != sb[1] {
                    return shape_err("matmul", format!("{sa:?} x {sb:?}"));
                }
                (sa[0], sa[1], sa[2], sb[2], false, vec![sa[0], sa[1], sb[2]])
            }
            _ => return shape_err("matmul", format!("unsupported ranks {sa:?} x {sb:?}")),
        };
        let mut out = vec![T::zero(); batch * m * n];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            for t in 0..batch {
                let a_t = &av[t * m * k..(t + 1) * m * k];
                let b_t = if shared_rhs { bv } else { &bv[t * k * n..(t + 1) * k * n] };
                gemm_acc(a_t, b_t, &mut out[t * m * n..(t + 1) * m * n], m, k, n);
            }
        }
        let value = Tensor::new(out_shape, out)?;
        Ok(self.emit(
            value,
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                shared_rhs,
            },
            &[a, b],
        ))
    }

    fn broadcast_binary(
        &self,
        op: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if !same_suffix(sa, sb) {
            return shape_err(op, format!("{sa:?} with {sb:?} (rhs must be a suffix of lhs)"));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let inner = bv.len();
        let data = av
            .chunks(inner)
            .flat_map(|chunk| chunk.iter().zip(bv).map(|(&x, &y)| f(x, y)))
            .collect();
        Tensor::new(sa.to_vec(), data)
    }

    /// Elementwise sum; `b` may broadcast over the leading dims of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        Ok(self.emit(v, Op::Add { a, b }, &[a, b]))
    }

    /// Elementwise product; `b` may broadcast over the leading dims of `a`.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        Ok(self.emit(v, Op::Mul { a, b }, &[a, b]))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let c = lit::<T>(c);
        let v = self.value(a).map(|x| x * c);
        self.emit(v, Op::Scale { a, c }, &[a])
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let c = lit::<T>(c);
        let v = self.value(a).map(|x| x + c);
        self.emit(v, Op::AddScalar { a }, &[a])
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.abs());
        self.emit(v, Op::Abs { a }, &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.emit(v, Op::Relu { a }, &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.tanh());
        self.emit(v, Op::Tanh { a }, &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.emit(v, Op::Sigmoid { a }, &[a])
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(|x| x.exp());
        if self.value(a).all_finite() && !v.all_finite() {
            return Err(AutodiffError::Domain {
                op: "exp",
                detail: "overflow to infinity".into(),
            });
        }
        Ok(self.emit(v, Op::Exp { a }, &[a]))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        if let Some(bad) = self.value(a).data().iter().find(|&&x| !(x > T::zero())) {
            return Err(AutodiffError::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let v = self.value(a).map(|x| x.ln());
        Ok(self.emit(v, Op::Log { a }, &[a]))
    }

    pub fn softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return shape_err("softmax", format!("axis {axis} out of range for {shape:?}"));
        }
        let (outer, dim, inner) = split_axis(&shape, axis);
        let data = softmax_forward(self.value(a).data(), outer, dim, inner);
        let v = Tensor::new(shape, data)?;
        Ok(self.emit(v, Op::Softmax { a, axis }, &[a]))
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        let Some(&first) = inputs.first() else {
            return Err(AutodiffError::Invalid("concat of zero tensors".into()));
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return shape_err("concat", format!("axis {axis} out of range for {base:?}"));
        }
        let mut total = 0;
        for &id in inputs {
            let s = self.shape(id);
            let ok = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return shape_err("concat", format!("{s:?} incompatible with {base:?}"));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &id in inputs {
                let d = self.shape(id)[axis];
                let v = self.value(id).data();
                data.extend_from_slice(&v[o * d * inner..(o + 1) * d * inner]);
            }
        }
        let v = Tensor::new(shape, data)?;
        Ok(self.emit(
            v,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        ))
    }

    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return shape_err(
                "slice",
                format!("[{start}, {}) on axis {axis} of {shape:?}", start + len),
            );
        }
        let (outer, dim, inner) = split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * dim + start) * inner;
            data.extend_from_slice(&src[from..from + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let v = Tensor::new(out_shape, data)?;
        Ok(self.emit(v, Op::Slice { a, axis, start }, &[a]))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(a).clone().reshaped(shape)?;
        Ok(self.emit(v, Op::Reshape { a }, &[a]))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        let r = shape.len();
        if r < 2 {
            return shape_err("transpose", format!("rank {r} < 2"));
        }
        let (rows, cols) = (shape[r - 2], shape[r - 1]);
        let data = transpose_last2(self.value(a).data(), rows, cols);
        let mut out_shape = shape;
        out_shape.swap(r - 2, r - 1);
        let v = Tensor::new(out_shape, data)?;
        Ok(self.emit(v, Op::Transpose { a }, &[a]))
    }

    /// `x: B×D`, `table: D×E`, `ranges`: per-field column ranges → `B×F×E`.
    pub fn embedding(&mut self, x: NodeId, table: NodeId, ranges: &[(usize, usize)]) -> Result<NodeId> {
        let sx = self.shape(x).to_vec();
        let st = self.shape(table).to_vec();
        if sx.len() != 2 || st.len() != 2 || sx[1] != st[0] {
            return shape_err("embedding", format!("x {sx:?} with table {st:?}"));
        }
        if ranges.is_empty() || ranges.iter().any(|&(s, e)| s >= e || e > st[0]) {
            return shape_err("embedding", format!("bad field ranges {ranges:?} for {} rows", st[0]));
        }
        let (b, d, e, f) = (sx[0], sx[1], st[1], ranges.len());
        let xv = self.value(x).data();
        let tv = self.value(table).data();
        let mut out = vec![T::zero(); b * f * e];
        for r in 0..b {
            for (fi, &(s, end)) in ranges.iter().enumerate() {
                let o = &mut out[(r * f + fi) * e..(r * f + fi + 1) * e];
                for c in s..end {
                    let w = xv[r * d + c];
                    if w == T::zero() {
                        continue;
                    }
                    for (ov, &tvv) in o.iter_mut().zip(&tv[c * e..(c + 1) * e]) {
                        *ov += w * tvv;
                    }
                }
            }
        }
        let v = Tensor::new(vec![b, f, e], out)?;
        Ok(self.emit(
            v,
            Op::Embedding {
                x,
                table,
                ranges: ranges.to_vec(),
            },
            &[x, table],
        ))
    }

    /// `x: B×L×Cin`, `w: Cout×Cin×W` (W odd), `b: Cout` → `B×L×Cout`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let sb = self.shape(b).to_vec();
        if sx.len() != 3 || sw.len() != 3 || sw[1] != sx[2] || sb != [sw[0]] || sw[2] % 2 == 0 {
            return shape_err("conv1d", format!("x {sx:?}, w {sw:?}, b {sb:?}"));
        }
        let (bn, len, cin) = (sx[0], sx[1], sx[2]);
        let (cout, width) = (sw[0], sw[2]);
        let pad = width / 2;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![T::zero(); bn * len * cout];
        for r in 0..bn {
            for t in 0..len {
                let o = &mut out[(r * len + t) * cout..(r * len + t + 1) * cout];
                o.copy_from_slice(bv);
                for kk in 0..width {
                    let src = t as isize + kk as isize - pad as isize;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let xrow = &xv[(r * len + src as usize) * cin..(r * len + src as usize + 1) * cin];
                    for (oc, ov) in o.iter_mut().enumerate() {
                        let mut acc = T::zero();
                        for (ic, &xval) in xrow.iter().enumerate() {
                            acc += wv[(oc * cin + ic) * width + kk] * xval;
                        }
                        *ov += acc;
                    }
                }
            }
        }
        let v = Tensor::new(vec![bn, len, cout], out)?;
        Ok(self.emit(v, Op::Conv1d { x, w, b }, &[x, w, b]))
    }

    /// One LSTM step with gate order (input, forget, cell, output).
    /// Inputs: `x: B×I`, `h: B×H`, `c: B×H`, `wx: I×4H`, `wh: H×4H`, `bias: 4H`.
    /// Output `B×2H` holds `[h' | c']` per row.
    pub fn lstm_cell(
        &mut self,
        x: NodeId,
        h: NodeId,
        c: NodeId,
        wx: NodeId,
        wh: NodeId,
        bias: NodeId,
    ) -> Result<NodeId> {
        let sx = self.shape(x).to_vec();
        let sh = self.shape(h).to_vec();
        let sc = self.shape(c).to_vec();
        let swx = self.shape(wx).to_vec();
        let swh = self.shape(wh).to_vec();
        let sbias = self.shape(bias).to_vec();
        let ok = sx.len() == 2
            && sh.len() == 2
            && sh == sc
            && sx[0] == sh[0]
            && swx == [sx[1], 4 * sh[1]]
            && swh == [sh[1], 4 * sh[1]]
            && sbias == [4 * sh[1]];
        if !ok {
            return shape_err(
                "lstm_cell",
                format!("x {sx:?} h {sh:?} c {sc:?} wx {swx:?} wh {swh:?} b {sbias:?}"),
            );
        }
        let (bn, ni, hd) = (sx[0], sx[1], sh[1]);
        let mut z = Vec::with_capacity(bn * 4 * hd);
        for _ in 0..bn {
            z.extend_from_slice(self.value(bias).data());
        }
        gemm_acc(self.value(x).data(), self.value(wx).data(), &mut z, bn, ni, 4 * hd);
        gemm_acc(self.value(h).data(), self.value(wh).data(), &mut z, bn, hd, 4 * hd);
        let cv = self.value(c).data();
        let mut gates = z;
        let mut tanh_c = vec![T::zero(); bn * hd];
        let mut out = vec![T::zero(); bn * 2 * hd];
        for r in 0..bn {
            let g = &mut gates[r * 4 * hd..(r + 1) * 4 * hd];
            for j in 0..hd {
                g[j] = sigmoid(g[j]);
                g[hd + j] = sigmoid(g[hd + j]);
                g[2 * hd + j] = g[2 * hd + j].tanh();
                g[3 * hd + j] = sigmoid(g[3 * hd + j]);
                let c_new = g[hd + j] * cv[r * hd + j] + g[j] * g[2 * hd + j];
                let tc = c_new.tanh();
                tanh_c[r * hd + j] = tc;
                out[r * 2 * hd + j] = g[3 * hd + j] * tc;
                out[r * 2 * hd + hd + j] = c_new;
            }
        }
        let v = Tensor::new(vec![bn, 2 * hd], out)?;
        Ok(self.emit(
            v,
            Op::LstmCell {
                inputs: [x, h, c, wx, wh, bias],
                gates,
                tanh_c,
            },
            &[x, h, c, wx, wh, bias],
        ))
    }

    /// Inverted dropout. Eval mode (or rate 0) returns `a` unchanged.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: NodeId,
        rate: f64,
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(AutodiffError::Invalid(format!("dropout rate {rate} not in [0, 1)")));
        }
        if mode == DropoutMode::Eval || rate == 0.0 {
            return Ok(a);
        }
        let keep = lit::<T>(1.0 / (1.0 - rate));
        let n = self.value(a).len();
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.random::<f64>() >= rate { keep } else { T::zero() })
            .collect();
        let src = self.value(a);
        let data = src.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let v = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.emit(v, Op::Dropout { a, mask }, &[a]))
    }

    /// Normalizes over the last axis, then applies `gamma`/`beta` (both of that width).
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let sx = self.shape(x).to_vec();
        let w = *sx.last().unwrap_or(&0);
        if self.shape(gamma) != [w] || self.shape(beta) != [w] {
            return shape_err(
                "layer_norm",
                format!("x {sx:?}, gamma {:?}, beta {:?}", self.shape(gamma), self.shape(beta)),
            );
        }
        let rows = self.value(x).len() / w;
        let eps = lit::<T>(eps);
        let n = lit::<T>(w as f64);
        let xv = self.value(x).data();
        let gv = self.value(gamma).data();
        let bv = self.value(beta).data();
        let mut xhat = vec![T::zero(); xv.len()];
        let mut inv_std = vec![T::zero(); rows];
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = &xv[r * w..(r + 1) * w];
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let is = T::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..w {
                let xh = (row[j] - mean) * is;
                xhat[r * w + j] = xh;
                out[r * w + j] = gv[j] * xh + bv[j];
            }
        }
        let v = Tensor::new(sx, out)?;
        Ok(self.emit(
            v,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            &[x, gamma, beta],
        ))
    }

    /// Class-weighted softmax cross-entropy, normalized by the summed weight of
    /// the targets. `logits: B×C`.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        class_weights: &[f64],
    ) -> Result<NodeId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != targets.len() || s[1] != class_weights.len() {
            return shape_err(
                "weighted_cross_entropy",
                format!(
                    "logits {s:?}, {} targets, {} class weights",
                    targets.len(),
                    class_weights.len()
                ),
            );
        }
        let (b, c) = (s[0], s[1]);
        if let Some(&t) = targets.iter().find(|&&t| t >= c) {
            return Err(AutodiffError::Invalid(format!("target {t} >= {c} classes")));
        }
        if class_weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(AutodiffError::Invalid("class weights must be finite and >= 0".into()));
        }
        let probs = softmax_forward(self.value(logits).data(), b, c, 1);
        let weights: Vec<T> = class_weights.iter().map(|&w| lit(w)).collect();
        let norm: T = targets.iter().map(|&t| weights[t]).sum();
        if !(norm > T::zero()) {
            return Err(AutodiffError::Invalid("targets carry zero total weight".into()));
        }
        let lv = self.value(logits).data();
        let mut total = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = &lv[r * c..(r + 1) * c];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
            total += weights[t] * (lse - row[t]);
        }
        let v = Tensor::scalar(total / norm);
        Ok(self.emit(
            v,
            Op::WeightedCe {
                logits,
                targets: targets.to_vec(),
                weights,
                probs,
                norm,
            },
            &[logits],
        ))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let src = self.value(a).data();
        let v = Tensor::scalar(src.iter().copied().sum::<T>() / lit::<T>(src.len() as f64));
        self.emit(v, Op::Mean { a }, &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).data().iter().copied().sum::<T>());
        self.emit(v, Op::Sum { a }, &[a])
    }

    /// Reverse sweep from a scalar `loss`. Every parameter leaf gets a gradient
    /// slot (zeros when no path reaches it).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        self.check_id(loss)?;
        if !self.value(loss).is_scalar() {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(self.shape(loss), T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[i].is_none() {
                grads[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], id: NodeId, g: Tensor<T>) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        debug_assert_eq!(g.shape(), self.shape(id));
        match &mut grads[id.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn like(&self, id: NodeId, data: Vec<T>) -> Tensor<T> {
        // Shapes here always come from an existing node.
        Tensor::new(self.shape(id).to_vec(), data).expect("gradient shape")
    }

    fn backward_node(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let gd = g.data();
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                shared_rhs,
            } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if self.requires_grad(a) {
                    let mut da = vec![T::zero(); av.len()];
                    for t in 0..batch {
                        let b_t = if shared_rhs { bv } else { &bv[t * k * n..(t + 1) * k * n] };
                        gemm_a_bt_acc(
                            &gd[t * m * n..(t + 1) * m * n],
                            b_t,
                            &mut da[t * m * k..(t + 1) * m * k],
                            m,
                            k,
                            n,
                        );
                    }
                    self.accumulate(grads, a, self.like(a, da));
                }
                if self.requires_grad(b) {
                    let mut db = vec![T::zero(); bv.len()];
                    for t in 0..batch {
                        let off = if shared_rhs { 0 } else { t * k * n };
                        gemm_at_b_acc(
                            &av[t * m * k..(t + 1) * m * k],
                            &gd[t * m * n..(t + 1) * m * n],
                            &mut db[off..off + k * n],
                            m,
                            k,
                            n,
                        );
                    }
                    self.accumulate(grads, b, self.like(b, db));
                }
            }
            &Op::Add { a, b } => {
                self.accumulate(grads, a, g.clone());
                if self.requires_grad(b) {
                    let inner = self.value(b).len();
                    let mut db = vec![T::zero(); inner];
                    for chunk in gd.chunks(inner) {
                        for (d, &v) in db.iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, b, self.like(b, db));
                }
            }
            &Op::Mul { a, b } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let inner = bv.len();
                if self.requires_grad(a) {
                    let da = gd
                        .chunks(inner)
                        .flat_map(|chunk| chunk.iter().zip(bv).map(|(&gv, &y)| gv * y))
                        .collect();
                    self.accumulate(grads, a, self.like(a, da));
                }
                if self.requires_grad(b) {
                    let mut db = vec![T::zero(); inner];
                    for (gc, ac) in gd.chunks(inner).zip(av.chunks(inner)) {
                        for ((d, &gv), &x) in db.iter_mut().zip(gc).zip(ac) {
                            *d += gv * x;
                        }
                    }
                    self.accumulate(grads, b, self.like(b, db));
                }
            }
            &Op::Scale { a, c } => {
                self.accumulate(grads, a, g.map(|v| v * c));
            }
            &Op::AddScalar { a } | &Op::Reshape { a } => {
                let t = Tensor::new(self.shape(a).to_vec(), gd.to_vec())?;
                self.accumulate(grads, a, t);
            }
            &Op::Abs { a } => {
                let av = self.value(a).data();
                let d = gd
                    .iter()
                    .zip(av)
                    .map(|(&gv, &x)| {
                        if x > T::zero() {
                            gv
                        } else if x < T::zero() {
                            -gv
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Relu { a } => {
                let av = self.value(a).data();
                let d = gd
                    .iter()
                    .zip(av)
                    .map(|(&gv, &x)| if x > T::zero() { gv } else { T::zero() })
                    .collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Tanh { a } => {
                let d = gd.iter().zip(out).map(|(&gv, &y)| gv * (T::one() - y * y)).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Sigmoid { a } => {
                let d = gd.iter().zip(out).map(|(&gv, &y)| gv * y * (T::one() - y)).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Exp { a } => {
                let d = gd.iter().zip(out).map(|(&gv, &y)| gv * y).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Log { a } => {
                let av = self.value(a).data();
                let d = gd.iter().zip(av).map(|(&gv, &x)| gv / x).collect();
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Softmax { a, axis } => {
                let (outer, dim, inner) = split_axis(self.shape(a), axis);
                let mut d = vec![T::zero(); out.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |k: usize| (o * dim + k) * inner + i;
                        let dot: T = (0..dim).map(|k| gd[idx(k)] * out[idx(k)]).sum();
                        for k in 0..dim {
                            d[idx(k)] = out[idx(k)] * (gd[idx(k)] - dot);
                        }
                    }
                }
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Concat { inputs, axis } => {
                let total = node.value.shape()[*axis];
                let (outer, _, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &id in inputs {
                    let dim = self.shape(id)[*axis];
                    if self.requires_grad(id) {
                        let mut d = Vec::with_capacity(outer * dim * inner);
                        for o in 0..outer {
                            let from = (o * total + offset) * inner;
                            d.extend_from_slice(&gd[from..from + dim * inner]);
                        }
                        self.accumulate(grads, id, self.like(id, d));
                    }
                    offset += dim;
                }
            }
            &Op::Slice { a, axis, start } => {
                let (outer, dim, inner) = split_axis(self.shape(a), axis);
                let len = node.value.shape()[axis];
                let mut d = vec![T::zero(); self.value(a).len()];
                for o in 0..outer {
                    let to = (o * dim + start) * inner;
                    let from = o * len * inner;
                    d[to..to + len * inner].copy_from_slice(&gd[from..from + len * inner]);
                }
                self.accumulate(grads, a, self.like(a, d));
            }
            &Op::Transpose { a } => {
                let s = node.value.shape();
                let r = s.len();
                let d = transpose_last2(gd, s[r - 2], s[r - 1]);
                self.accumulate(grads, a, self.like(a, d));
            }
            Op::Embedding { x, table, ranges } => {
                let (x, table) = (*x, *table);
                let sx = self.shape(x);
                let (b, dcols) = (sx[0], sx[1]);
                let e = self.shape(table)[1];
                let f = ranges.len();
                let xv = self.value(x).data();
                let tv = self.value(table).data();
                if self.requires_grad(table) {
                    let mut dt = vec![T::zero(); tv.len()];
                    for r in 0..b {
                        for (fi, &(s, end)) in ranges.iter().enumerate() {
                            let grow = &gd[(r * f + fi) * e..(r * f + fi + 1) * e];
                            for c in s..end {
                                let w = xv[r * dcols + c];
                                if w == T::zero() {
                                    continue;
                                }
                                for (dv, &gv) in dt[c * e..(c + 1) * e].iter_mut().zip(grow) {
                                    *dv += w * gv;
                                }
                            }
                        }
                    }
                    self.accumulate(grads, table, self.like(table, dt));
                }
                if self.requires_grad(x) {
                    let mut dx = vec![T::zero(); xv.len()];
                    for r in 0..b {
                        for (fi, &(s, end)) in ranges.iter().enumerate() {
                            let grow = &gd[(r * f + fi) * e..(r * f + fi + 1) * e];
                            for c in s..end {
                                let dot: T = grow.iter().zip(&tv[c * e..(c + 1) * e]).map(|(&a, &b)| a * b).sum();
                                dx[r * dcols + c] += dot;
                            }
                        }
                    }
                    self.accumulate(grads, x, self.like(x, dx));
                }
            }
            &Op::Conv1d { x, w, b } => {
                let sx = self.shape(x);
                let (bn, len, cin) = (sx[0], sx[1], sx[2]);
                let sw = self.shape(w);
                let (cout, width) = (sw[0], sw[2]);
                let pad = width / 2;
                let xv = self.value(x).data();
                let wv = self.value(w).data();
                let mut dx = vec![T::zero(); xv.len()];
                let mut dw = vec![T::zero(); wv.len()];
                let mut db = vec![T::zero(); cout];
                for r in 0..bn {
                    for t in 0..len {
                        let grow = &gd[(r * len + t) * cout..(r * len + t + 1) * cout];
                        for (d, &gv) in db.iter_mut().zip(grow) {
                            *d += gv;
                        }
                        for kk in 0..width {
                            let src = t as isize + kk as isize - pad as isize;
                            if src < 0 || src >= len as isize {
                                continue;
                            }
                            let base = (r * len + src as usize) * cin;
                            for (oc, &gv) in grow.iter().enumerate() {
                                if gv == T::zero() {
                                    continue;
                                }
                                for ic in 0..cin {
                                    let wi = (oc * cin + ic) * width + kk;
                                    dx[base + ic] += wv[wi] * gv;
                                    dw[wi] += xv[base + ic] * gv;
                                }
                            }
                        }
                    }
                }
                self.accumulate(grads, x, self.like(x, dx));
                self.accumulate(grads, w, self.like(w, dw));
                self.accumulate(grads, b, self.like(b, db));
            }
            Op::LstmCell { inputs, gates, tanh_c } => {
                let [x, h, c, wx, wh, bias] = *inputs;
                let bn = self.shape(x)[0];
                let ni = self.shape(x)[1];
                let hd = self.shape(h)[1];
                let cv = self.value(c).data();
                let mut dz = vec![T::zero(); bn * 4 * hd];
                let mut dc = vec![T::zero(); bn * hd];
                for r in 0..bn {
                    let gt = &gates[r * 4 * hd..(r + 1) * 4 * hd];
                    for j in 0..hd {
                        let (ig, fg, cg, og) = (gt[j], gt[hd + j], gt[2 * hd + j], gt[3 * hd + j]);
                        let tc = tanh_c[r * hd + j];
                        let dh_new = gd[r * 2 * hd + j];
                        let dc_new = gd[r * 2 * hd + hd + j] + dh_new * og * (T::one() - tc * tc);
                        let d_o = dh_new * tc;
                        let d_i = dc_new * cg;
                        let d_g = dc_new * ig;
                        let d_f = dc_new * cv[r * hd + j];
                        dc[r * hd + j] = dc_new * fg;
                        let z = &mut dz[r * 4 * hd..(r + 1) * 4 * hd];
                        z[j] = d_i * ig * (T::one() - ig);
                        z[hd + j] = d_f * fg * (T::one() - fg);
                        z[2 * hd + j] = d_g * (T::one() - cg * cg);
                        z[3 * hd + j] = d_o * og * (T::one() - og);
                    }
                }
                if self.requires_grad(x) {
                    let mut dx = vec![T::zero(); bn * ni];
                    gemm_a_bt_acc(&dz, self.value(wx).data(), &mut dx, bn, ni, 4 * hd);
                    self.accumulate(grads, x, self.like(x, dx));
                }
                if self.requires_grad(h) {
                    let mut dh = vec![T::zero(); bn * hd];
                    gemm_a_bt_acc(&dz, self.value(wh).data(), &mut dh, bn, hd, 4 * hd);
                    self.accumulate(grads, h, self.like(h, dh));
                }
                self.accumulate(grads, c, self.like(c, dc));
                if self.requires_grad(wx) {
                    let mut dwx = vec![T::zero(); ni * 4 * hd];
                    gemm_at_b_acc(self.value(x).data(), &dz, &mut dwx, bn, ni, 4 * hd);
                    self.accumulate(grads, wx, self.like(wx, dwx));
                }
                if self.requires_grad(wh) {
                    let mut dwh = vec![T::zero(); hd * 4 * hd];
                    gemm_at_b_acc(self.value(h).data(), &dz, &mut dwh, bn, hd, 4 * hd);
                    self.accumulate(grads, wh, self.like(wh, dwh));
                }
                if self.requires_grad(bias) {
                    let mut db = vec![T::zero(); 4 * hd];
                    for row in dz.chunks(4 * hd) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, bias, self.like(bias, db));
                }
            }
            Op::Dropout { a, mask } => {
                let d = gd.iter().zip(mask).map(|(&gv, &m)| gv * m).collect();
                self.accumulate(grads, *a, self.like(*a, d));
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (x, gamma, beta) = (*x, *gamma, *beta);
                let w = self.shape(gamma)[0];
                let rows = gd.len() / w;
                let gv = self.value(gamma).data();
                let n = lit::<T>(w as f64);
                let mut dgamma = vec![T::zero(); w];
                let mut dbeta = vec![T::zero(); w];
                let mut dx = vec![T::zero(); gd.len()];
                for r in 0..rows {
                    let grow = &gd[r * w..(r + 1) * w];
                    let xh = &xhat[r * w..(r + 1) * w];
                    let mut sum_dxh = T::zero();
                    let mut sum_dxh_xh = T::zero();
                    for j in 0..w {
                        dgamma[j] += grow[j] * xh[j];
                        dbeta[j] += grow[j];
                        let dxh = grow[j] * gv[j];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[j];
                    }
                    let is = inv_std[r];
                    for j in 0..w {
                        let dxh = grow[j] * gv[j];
                        dx[r * w + j] = is * (n * dxh - sum_dxh - xh[j] * sum_dxh_xh) / n;
                    }
                }
                self.accumulate(grads, x, self.like(x, dx));
                self.accumulate(grads, gamma, self.like(gamma, dgamma));
                self.accumulate(grads, beta, self.like(beta, dbeta));
            }
            Op::WeightedCe {
                logits,
                targets,
                weights,
                probs,
                norm,
            } => {
                let c = weights.len();
                let scale = gd[0] / *norm;
                let mut d = vec![T::zero(); probs.len()];
                for (r, &t) in targets.iter().enumerate() {
                    let wt = weights[t] * scale;
                    for j in 0..c {
                        let y = if j == t { T::one() } else { T::zero() };
                        d[r * c + j] = wt * (probs[r * c + j] - y);
                    }
                }
                self.accumulate(grads, *logits, self.like(*logits, d));
            }
            &Op::Mean { a } => {
                let n = self.value(a).len();
                let v = gd[0] / lit::<T>(n as f64);
                self.accumulate(grads, a, Tensor::filled(self.shape(a), v));
            }
            &Op::Sum { a } => {
                self.accumulate(grads, a, Tensor::filled(self.shape(a), gd[0]));
            }
        }
        Ok(())
    }
}

fn transpose_last2<T: Copy>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let block = rows * cols;
    let mut out = Vec::with_capacity(src.len());
    for chunk in src.chunks(block) {
        for c in 0..cols {
            for r in 0..rows {
                out.push(chunk[r * cols + c]);
            }
        }
    }
    out
}
