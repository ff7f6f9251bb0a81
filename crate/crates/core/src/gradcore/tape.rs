use super::tensor::gemm;
use super::{GradError, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `x[m×n] + bᵀ` with `b[n×1]` broadcast over rows.
    AddBias(Var, Var),
    /// Scalar broadcast to a `rows × cols` tensor.
    Broadcast(Var),
    Exp(Var),
    Log(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    MaxScalar(Var, f64),
    Scale(Var, f64),
    AddScalar(Var),
    Sum(Var),
    Mean(Var),
    LogSumExp(Var),
    /// Gradient stops here.
    Detach,
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Define-by-run record of tensor operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so parents always precede children
/// and the reverse sweep in [`Tape::backward`] is a plain reverse iteration.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node on the tape.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient for `v`, zero-filled when `v` does not influence the root.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a column-vector bias `b[n×1]` to every row of `x[m×n]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, GradError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.cols() != 1 || bv.rows() != xv.cols() {
            return Err(GradError::Shape {
                op: "add_bias",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut out = xv.clone();
        let n = xv.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += bv.data()[i % n];
        }
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    /// Broadcasts a scalar node to a `rows × cols` tensor.
    pub fn broadcast(&mut self, s: Var, rows: usize, cols: usize) -> Result<Var, GradError> {
        let sv = self.value(s);
        if sv.len() != 1 {
            return Err(GradError::Shape {
                op: "broadcast",
                left: sv.shape(),
                right: (1, 1),
            });
        }
        let out = Tensor::filled(rows, cols, sv.item());
        Ok(self.push(out, Op::Broadcast(s)))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        if let Some(&bad) = av.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(GradError::Domain {
                op: "log",
                value: bad,
            });
        }
        let out = av.map(f64::ln);
        Ok(self.push(out, Op::Log(a)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// `max(x, c)` entrywise; gradient passes only where `x > c`.
    pub fn max_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x.max(c));
        self.push(out, Op::MaxScalar(a, c))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::AddScalar(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(GradError::Empty { op: "sum" });
        }
        let out = Tensor::scalar(av.sum());
        Ok(self.push(out, Op::Sum(a)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(GradError::Empty { op: "mean" });
        }
        let out = Tensor::scalar(av.mean());
        Ok(self.push(out, Op::Mean(a)))
    }

    /// Stable `log Σ exp(x)` over all entries; backward is the softmax of `x`.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var, GradError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(GradError::Empty { op: "logsumexp" });
        }
        let out = Tensor::scalar(av.logsumexp());
        Ok(self.push(out, Op::LogSumExp(a)))
    }

    /// Same value as `a`, but no gradient flows back through it.
    pub fn detach(&mut self, a: Var) -> Var {
        let out = self.value(a).clone();
        self.push(out, Op::Detach)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients, GradError> {
        let root_shape = self.value(root).shape();
        if root_shape != (1, 1) {
            return Err(GradError::NonScalarRoot { shape: root_shape });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match node.op {
                Op::Leaf | Op::Detach => {}
                Op::MatMul(a, b) => {
                    let da = gemm(&g, false, self.value(b), true);
                    let db = gemm(self.value(a), true, &g, false);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, a, g.transpose()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let da = elementwise(&g, self.value(b), |g, y| g * y);
                    let db = elementwise(&g, self.value(a), |g, x| g * x);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::AddBias(x, b) => {
                    let n = g.cols();
                    let mut db = vec![0.0; n];
                    for (i, v) in g.data().iter().enumerate() {
                        db[i % n] += v;
                    }
                    accumulate(&mut grads, x, g.clone());
                    accumulate(&mut grads, b, Tensor::column(&db));
                }
                Op::Broadcast(s) => accumulate(&mut grads, s, Tensor::scalar(g.sum())),
                Op::Exp(a) => {
                    let da = elementwise(&g, &node.value, |g, y| g * y);
                    accumulate(&mut grads, a, da);
                }
                Op::Log(a) => {
                    let da = elementwise(&g, self.value(a), |g, x| g / x);
                    accumulate(&mut grads, a, da);
                }
                Op::Relu(a) => {
                    let da = elementwise(&g, self.value(a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, a, da);
                }
                Op::LeakyRelu(a, slope) => {
                    let da = elementwise(&g, self.value(a), |g, x| if x > 0.0 { g } else { slope * g });
                    accumulate(&mut grads, a, da);
                }
                Op::MaxScalar(a, c) => {
                    let da = elementwise(&g, self.value(a), |g, x| if x > c { g } else { 0.0 });
                    accumulate(&mut grads, a, da);
                }
                Op::Scale(a, s) => accumulate(&mut grads, a, g.scale(s)),
                Op::AddScalar(a) => accumulate(&mut grads, a, g.clone()),
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    accumulate(&mut grads, a, Tensor::filled(r, c, g.item()));
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(a).shape();
                    let n = (r * c) as f64;
                    accumulate(&mut grads, a, Tensor::filled(r, c, g.item() / n));
                }
                Op::LogSumExp(a) => {
                    let lse = node.value.item();
                    let gs = g.item();
                    let da = self.value(a).map(|x| gs * (x - lse).exp());
                    accumulate(&mut grads, a, da);
                }
            }
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn elementwise(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g.data().iter().zip(x.data()).map(|(&g, &x)| f(g, x)).collect();
    Tensor::new(g.rows(), g.cols(), data).expect("gradient shape matches value shape")
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).item(), 6.0);
    }

    #[test]
    fn two_paths_accumulate() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.5));
        let y = tape.add(x, x).unwrap();
        assert_eq!(tape.backward(y).unwrap().wrt(x).item(), 2.0);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 1));
        assert!(matches!(
            tape.backward(x),
            Err(GradError::NonScalarRoot { shape: (2, 1) })
        ));
    }

    #[test]
    fn mean_distributes_evenly() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::column(&[1., 2., 3., 4., 5.]));
        let m = tape.mean(x).unwrap();
        let g = tape.backward(m).unwrap().wrt(x);
        assert!(g.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn reductions() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::column(&[1., 2., 3.]));
        let m = tape.mean(x).unwrap();
        assert_eq!(tape.value(m).item(), 2.0);
        let y = tape.leaf(Tensor::ones(2, 2));
        let s = tape.sum(y).unwrap();
        assert_eq!(tape.value(s).item(), 4.0);
        let e = tape.leaf(Tensor::zeros(0, 1));
        assert!(matches!(tape.mean(e), Err(GradError::Empty { .. })));
    }

    #[test]
    fn pointwise_examples() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::column(&[0.0, 2f64.ln()]));
        let e = tape.exp(x);
        let ev = tape.value(e).data().to_vec();
        assert_eq!(ev[0], 1.0);
        assert!((ev[1] - 2.0).abs() < 1e-15);

        let x = tape.leaf(Tensor::column(&[-1.0, 2.0]));
        let l = tape.leaky_relu(x, 0.2);
        assert_eq!(tape.value(l).data(), &[-0.2, 2.0]);

        let x = tape.leaf(Tensor::column(&[-4.0, 2.0, 2.0]));
        let c = tape.max_scalar(x, 0.0);
        assert_eq!(tape.value(c).data(), &[0.0, 2.0, 2.0]);
    }

    #[test]
    fn log_of_nonpositive_is_domain_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::column(&[1.0, 0.0]));
        assert!(matches!(tape.log(x), Err(GradError::Domain { .. })));
    }

    #[test]
    fn binary_shape_mismatch() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 1));
        let b = tape.leaf(Tensor::zeros(1, 2));
        assert!(tape.add(a, b).is_err());
        assert!(tape.mul(a, b).is_err());
    }

    #[test]
    fn logsumexp_values_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::column(&[0.0, 0.0]));
        let l = tape.logsumexp(x).unwrap();
        assert!((tape.value(l).item() - 2f64.ln()).abs() < 1e-15);

        let big = tape.leaf(Tensor::column(&[1000.0, 1000.0]));
        let l = tape.logsumexp(big).unwrap();
        assert!((tape.value(l).item() - (1000.0 + 2f64.ln())).abs() < 1e-12);

        let x = tape.leaf(Tensor::column(&[0.0, 3f64.ln()]));
        let l = tape.logsumexp(x).unwrap();
        let g = tape.backward(l).unwrap().wrt(x);
        assert!((g.data()[0] - 0.25).abs() < 1e-15);
        assert!((g.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let d = tape.detach(x);
        let y = tape.mul(x, d).unwrap();
        assert_eq!(tape.backward(y).unwrap().wrt(x).item(), 2.0);
    }

    #[test]
    fn unreachable_leaf_gets_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 3));
        let y = tape.leaf(Tensor::scalar(1.0));
        let g = tape.backward(y).unwrap();
        assert!(g.get(x).is_none());
        assert_eq!(g.wrt(x), Tensor::zeros(2, 3));
    }
}
