use crate::{AutodiffError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `x + b` with `b` a single row broadcast over the rows of `x`.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    /// Output row `k` is source row `rows[k]`.
    GatherRows { src: Var, rows: Vec<usize> },
    /// Output element `k` is source element `index[k]`.
    Gather { src: Var, index: Vec<usize> },
    Sum(Var),
    Mean(Var),
    SoftmaxXent { logits: Var, probs: Vec<f64>, target: Vec<f64> },
    BceLogits { logits: Var, target: Vec<f64> },
    Mse { pred: Var, target: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Record of a single forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node on a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the loss
    /// through differentiable paths.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn mismatch(op: &'static str, detail: String) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, detail }
}

/// `c[m x n] (+)= a[m x k] * b[k x n]` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        return;
    }
    // SAFETY: callers pass slices sized for the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize, f: impl FnOnce(&mut [f64])) {
    let g = slot.get_or_insert_with(|| vec![0.0; len]);
    f(g);
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

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node { rows, cols, value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>, requires_grad: bool) -> Result<Var> {
        if rows * cols != value.len() {
            return Err(mismatch("leaf", format!("{rows}x{cols} from {} values", value.len())));
        }
        Ok(self.push(rows, cols, value, Op::Leaf, requires_grad))
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<Var> {
        self.leaf(rows, cols, value, false)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(rows, cols, vec![0.0; rows * cols], Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(mismatch("matmul", format!("{m}x{k} * {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a),
            k as isize,
            1,
            self.value(b),
            n as isize,
            1,
            0.0,
            &mut out,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::MatMul(a, b), rg))
    }

    /// `a * b^T`, e.g. all pairwise dot products between two row sets.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        if k != k2 {
            return Err(mismatch("matmul_t", format!("{m}x{k} * ({n}x{k2})^T")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a),
            k as isize,
            1,
            self.value(b),
            1,
            k as isize,
            0.0,
            &mut out,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(m, n, out, Op::MatMulT(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(r, c, out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(r, c, out, Op::Sub(a, b), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(r, c, out, Op::Mul(a, b), rg))
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let (br, bc) = self.shape(row);
        if br != 1 || bc != c {
            return Err(mismatch("add_row", format!("{r}x{c} + {br}x{bc}")));
        }
        let b = self.value(row);
        let mut out = self.value(x).to_vec();
        for chunk in out.chunks_mut(c.max(1)) {
            chunk.iter_mut().zip(b).for_each(|(o, bv)| *o += bv);
        }
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(r, c, out, Op::AddRow(x, row), rg))
    }

    /// `x * w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| v * s).collect();
        let rg = self.rg(x);
        self.push(r, c, out, Op::Scale(x, s), rg)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| 1.0 - v).collect();
        let rg = self.rg(x);
        self.push(r, c, out, Op::OneMinus(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let rg = self.rg(x);
        self.push(r, c, out, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let rg = self.rg(x);
        self.push(r, c, out, Op::Sigmoid(x), rg)
    }

    /// Concatenates along the column axis; all parts must share a row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| mismatch("concat", "no inputs".into()))?;
        let rows = self.shape(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(mismatch("concat", format!("row counts {rows} vs {r}")));
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(rows, cols, out, Op::Concat(parts.to_vec()), rg))
    }

    /// Stacks parts with a common column count on top of each other.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| mismatch("stack_rows", "no inputs".into()))?;
        let cols = self.shape(first).1;
        let mut flat = Vec::with_capacity(parts.len());
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if c != cols {
                return Err(mismatch("stack_rows", format!("column counts {cols} vs {c}")));
            }
            rows += r;
            flat.push(self.reshape(p, 1, r * c)?);
        }
        let line = self.concat(&flat)?;
        self.reshape(line, rows, cols)
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(mismatch("reshape", format!("{r}x{c} -> {rows}x{cols}")));
        }
        let out = self.value(x).to_vec();
        let rg = self.rg(x);
        Ok(self.push(rows, cols, out, Op::Reshape(x), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let v = self.value(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        let rg = self.rg(x);
        self.push(c, r, out, Op::Transpose(x), rg)
    }

    pub fn gather_rows(&mut self, src: Var, rows: Vec<usize>) -> Result<Var> {
        let (r, c) = self.shape(src);
        if let Some(&bad) = rows.iter().find(|&&k| k >= r) {
            return Err(mismatch("gather_rows", format!("row {bad} of {r}")));
        }
        let v = self.value(src);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &k in &rows {
            out.extend_from_slice(&v[k * c..(k + 1) * c]);
        }
        let rg = self.rg(src);
        let n = rows.len();
        Ok(self.push(n, c, out, Op::GatherRows { src, rows }, rg))
    }

    /// `[n, F] -> [n * n, F]` with row `i * n + j` equal to row `i`.
    pub fn repeat_rows(&mut self, src: Var) -> Result<Var> {
        let n = self.shape(src).0;
        let rows = (0..n * n).map(|k| k / n).collect();
        self.gather_rows(src, rows)
    }

    /// `[n, F] -> [n * n, F]` with row `i * n + j` equal to row `j`.
    pub fn tile_rows(&mut self, src: Var) -> Result<Var> {
        let n = self.shape(src).0;
        let rows = (0..n * n).map(|k| k % n).collect();
        self.gather_rows(src, rows)
    }

    /// Per node `i` and channel `c`, the maximum of `messages[i * n + j][c]`
    /// over the `j` with `adj[i * n + j]`. Ties resolve to the lowest `j`, and
    /// the backward pass routes the whole gradient there.
    pub fn max_aggregate(&mut self, messages: Var, adj: &[bool]) -> Result<Var> {
        let (nn, f) = self.shape(messages);
        let n = (nn as f64).sqrt().round() as usize;
        if n * n != nn || adj.len() != nn {
            return Err(mismatch(
                "max_aggregate",
                format!("{nn} message rows, {} adjacency entries", adj.len()),
            ));
        }
        let v = self.value(messages);
        let mut out = vec![f64::NEG_INFINITY; n * f];
        let mut index = vec![usize::MAX; n * f];
        for i in 0..n {
            let mut any = false;
            for j in 0..n {
                if !adj[i * n + j] {
                    continue;
                }
                any = true;
                let row = (i * n + j) * f;
                for c in 0..f {
                    let x = v[row + c];
                    if index[i * f + c] == usize::MAX || x > out[i * f + c] {
                        out[i * f + c] = x;
                        index[i * f + c] = row + c;
                    }
                }
            }
            if !any {
                return Err(AutodiffError::IsolatedNode(i));
            }
        }
        let rg = self.rg(messages);
        Ok(self.push(n, f, out, Op::Gather { src: messages, index }, rg))
    }

    /// Column-wise maximum over all rows, `[r, c] -> [1, c]`, lowest row on ties.
    pub fn max_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r == 0 {
            return Err(mismatch("max_rows", "no rows".into()));
        }
        let v = self.value(x);
        let mut out = v[..c].to_vec();
        let mut index: Vec<usize> = (0..c).collect();
        for i in 1..r {
            for j in 0..c {
                if v[i * c + j] > out[j] {
                    out[j] = v[i * c + j];
                    index[j] = i * c + j;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(1, c, out, Op::Gather { src: x, index }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.rg(x);
        self.push(1, 1, vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().sum::<f64>() / v.len().max(1) as f64;
        let rg = self.rg(x);
        self.push(1, 1, vec![s], Op::Mean(x), rg)
    }

    /// Mean over rows of the cross-entropy between `softmax(row)` and the
    /// matching target row. Targets are probability rows (usually one-hot).
    pub fn softmax_xent(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if target.len() != r * c || c == 0 {
            return Err(mismatch("softmax_xent", format!("{r}x{c} vs {} targets", target.len())));
        }
        let v = self.value(logits);
        let mut probs = vec![0.0; r * c];
        let mut loss = 0.0;
        for i in 0..r {
            let row = &v[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let lse = max + z.ln();
            for j in 0..c {
                probs[i * c + j] = (row[j] - lse).exp();
                let t = target[i * c + j];
                if t != 0.0 {
                    loss -= t * (row[j] - lse);
                }
            }
        }
        loss /= r as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::SoftmaxXent { logits, probs, target: target.to_vec() },
            rg,
        ))
    }

    /// Mean elementwise binary cross-entropy on logits.
    pub fn bce_logits(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if target.len() != r * c {
            return Err(mismatch("bce_logits", format!("{r}x{c} vs {} targets", target.len())));
        }
        let v = self.value(logits);
        let loss = v
            .iter()
            .zip(target)
            .map(|(&x, &t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / v.len().max(1) as f64;
        let rg = self.rg(logits);
        Ok(self.push(1, 1, vec![loss], Op::BceLogits { logits, target: target.to_vec() }, rg))
    }

    /// Mean squared error.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(pred);
        if target.len() != r * c {
            return Err(mismatch("mse", format!("{r}x{c} vs {} targets", target.len())));
        }
        let v = self.value(pred);
        let loss = v.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>()
            / v.len().max(1) as f64;
        let rg = self.rg(pred);
        Ok(self.push(1, 1, vec![loss], Op::Mse { pred, target: target.to_vec() }, rg))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![1.0; self.nodes[loss.0].value.len()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let len = |v: Var| self.nodes[v.0].value.len();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, k) = self.shape(a);
                let n = node.cols;
                if self.rg(a) {
                    // dA = dC * B^T
                    let bv = self.value(b);
                    accumulate(&mut grads[a.0], m * k, |ga| {
                        gemm(m, n, k, g, n as isize, 1, bv, 1, n as isize, 1.0, ga)
                    });
                }
                if self.rg(b) {
                    // dB = A^T * dC
                    let av = self.value(a);
                    accumulate(&mut grads[b.0], k * n, |gb| {
                        gemm(k, m, n, av, 1, k as isize, g, n as isize, 1, 1.0, gb)
                    });
                }
            }
            &Op::MatMulT(a, b) => {
                let (m, k) = self.shape(a);
                let n = node.cols;
                if self.rg(a) {
                    // dA = dC * B
                    let bv = self.value(b);
                    accumulate(&mut grads[a.0], m * k, |ga| {
                        gemm(m, n, k, g, n as isize, 1, bv, k as isize, 1, 1.0, ga)
                    });
                }
                if self.rg(b) {
                    // dB = dC^T * A
                    let av = self.value(a);
                    accumulate(&mut grads[b.0], n * k, |gb| {
                        gemm(n, m, k, g, 1, n as isize, av, k as isize, 1, 1.0, gb)
                    });
                }
            }
            &Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(v) {
                        accumulate(&mut grads[v.0], g.len(), |gv| {
                            gv.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                        });
                    }
                }
            }
            &Op::Sub(a, b) => {
                if self.rg(a) {
                    accumulate(&mut grads[a.0], g.len(), |gv| {
                        gv.iter_mut().zip(g).for_each(|(x, y)| *x += y)
                    });
                }
                if self.rg(b) {
                    accumulate(&mut grads[b.0], g.len(), |gv| {
                        gv.iter_mut().zip(g).for_each(|(x, y)| *x -= y)
                    });
                }
            }
            &Op::Mul(a, b) => {
                if self.rg(a) {
                    let bv = self.value(b);
                    accumulate(&mut grads[a.0], g.len(), |gv| {
                        for ((x, y), z) in gv.iter_mut().zip(g).zip(bv) {
                            *x += y * z;
                        }
                    });
                }
                if self.rg(b) {
                    let av = self.value(a);
                    accumulate(&mut grads[b.0], g.len(), |gv| {
                        for ((x, y), z) in gv.iter_mut().zip(g).zip(av) {
                            *x += y * z;
                        }
                    });
                }
            }
            &Op::AddRow(x, row) => {
                if self.rg(x) {
                    accumulate(&mut grads[x.0], g.len(), |gv| {
                        gv.iter_mut().zip(g).for_each(|(a, b)| *a += b)
                    });
                }
                if self.rg(row) {
                    let c = node.cols;
                    accumulate(&mut grads[row.0], c, |gv| {
                        for chunk in g.chunks(c.max(1)) {
                            gv.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
                        }
                    });
                }
            }
            &Op::Scale(x, s) => {
                accumulate(&mut grads[x.0], g.len(), |gv| {
                    gv.iter_mut().zip(g).for_each(|(a, b)| *a += s * b)
                });
            }
            &Op::OneMinus(x) => {
                accumulate(&mut grads[x.0], g.len(), |gv| {
                    gv.iter_mut().zip(g).for_each(|(a, b)| *a -= b)
                });
            }
            &Op::Relu(x) => {
                let xv = self.value(x);
                accumulate(&mut grads[x.0], g.len(), |gv| {
                    for ((a, b), v) in gv.iter_mut().zip(g).zip(xv) {
                        if *v > 0.0 {
                            *a += b;
                        }
                    }
                });
            }
            &Op::Sigmoid(x) => {
                let y = &node.value;
                accumulate(&mut grads[x.0], g.len(), |gv| {
                    for ((a, b), s) in gv.iter_mut().zip(g).zip(y) {
                        *a += b * s * (1.0 - s);
                    }
                });
            }
            Op::Concat(parts) => {
                let rows = node.rows;
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p).1;
                    if self.rg(p) {
                        let total = node.cols;
                        accumulate(&mut grads[p.0], rows * c, |gv| {
                            for i in 0..rows {
                                let src = &g[i * total + offset..i * total + offset + c];
                                gv[i * c..(i + 1) * c]
                                    .iter_mut()
                                    .zip(src)
                                    .for_each(|(a, b)| *a += b);
                            }
                        });
                    }
                    offset += c;
                }
            }
            &Op::Reshape(x) => {
                accumulate(&mut grads[x.0], g.len(), |gv| {
                    gv.iter_mut().zip(g).for_each(|(a, b)| *a += b)
                });
            }
            &Op::Transpose(x) => {
                let (r, c) = self.shape(x);
                accumulate(&mut grads[x.0], r * c, |gv| {
                    for i in 0..r {
                        for j in 0..c {
                            gv[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::GatherRows { src, rows } => {
                let c = node.cols;
                accumulate(&mut grads[src.0], len(*src), |gv| {
                    for (k, &r) in rows.iter().enumerate() {
                        gv[r * c..(r + 1) * c]
                            .iter_mut()
                            .zip(&g[k * c..(k + 1) * c])
                            .for_each(|(a, b)| *a += b);
                    }
                });
            }
            Op::Gather { src, index } => {
                accumulate(&mut grads[src.0], len(*src), |gv| {
                    for (k, &i) in index.iter().enumerate() {
                        gv[i] += g[k];
                    }
                });
            }
            &Op::Sum(x) => {
                let s = g[0];
                accumulate(&mut grads[x.0], len(x), |gv| gv.iter_mut().for_each(|a| *a += s));
            }
            &Op::Mean(x) => {
                let s = g[0] / len(x).max(1) as f64;
                accumulate(&mut grads[x.0], len(x), |gv| gv.iter_mut().for_each(|a| *a += s));
            }
            Op::SoftmaxXent { logits, probs, target } => {
                let (r, c) = self.shape(*logits);
                let s = g[0] / r as f64;
                accumulate(&mut grads[logits.0], r * c, |gv| {
                    for i in 0..r {
                        let t = &target[i * c..(i + 1) * c];
                        let mass: f64 = t.iter().sum();
                        for j in 0..c {
                            gv[i * c + j] += s * (mass * probs[i * c + j] - t[j]);
                        }
                    }
                });
            }
            Op::BceLogits { logits, target } => {
                let xv = self.value(*logits);
                let s = g[0] / xv.len().max(1) as f64;
                accumulate(&mut grads[logits.0], xv.len(), |gv| {
                    for ((a, &x), &t) in gv.iter_mut().zip(xv).zip(target) {
                        *a += s * (sigmoid(x) - t);
                    }
                });
            }
            Op::Mse { pred, target } => {
                let pv = self.value(*pred);
                let s = 2.0 * g[0] / pv.len().max(1) as f64;
                accumulate(&mut grads[pred.0], pv.len(), |gv| {
                    for ((a, &p), &t) in gv.iter_mut().zip(pv).zip(target) {
                        *a += s * (p - t);
                    }
                });
            }
        }
    }
}
