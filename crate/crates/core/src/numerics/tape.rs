//! Matrix-level reverse-mode differentiation.
//!
//! A [`GradientTape`] records every intermediate matrix of a forward pass
//! together with the operation that produced it. [`GradientTape::backward`]
//! walks the record in reverse and accumulates `d(loss)/d(node)` for every
//! node, returning the blocks that belong to parameters.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Variance floor used by [`GradientTape::instance_norm`].
pub const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    InstanceNorm { x: Var, inv_std: Vec<f64> },
    Concat(Vec<Var>),
    Gather { x: Var, index: Vec<usize> },
    IncidenceSum { x: Var, src: Vec<usize>, dst: Vec<usize> },
    ScaleRows { x: Var, w: Var },
    ExpNegClamped { x: Var, lo: f64, hi: f64 },
    SquaredError { x: Var, target: Matrix },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the parameters registered on a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn param(&self, id: usize) -> Option<&Matrix> {
        self.by_param.get(id).and_then(Option::as_ref)
    }

    /// Dense gradient list matching `shapes`; parameters that never reached
    /// the loss get an all-zero block.
    pub fn into_dense(self, shapes: &[(usize, usize)]) -> Vec<Matrix> {
        let mut by_param = self.by_param;
        by_param.resize(shapes.len(), None);
        by_param
            .into_iter()
            .zip(shapes)
            .map(|(g, &(r, c))| g.unwrap_or_else(|| Matrix::zeros(r, c)))
            .collect()
    }
}

fn same_shape(context: &str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            context,
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    Ok(())
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Which side of every piecewise boundary (ReLU input sign, clamp
    /// limits) each recorded value fell on. Two passes with equal patterns
    /// stayed on one smooth piece.
    pub fn branch_pattern(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => out.extend(self.value(*x).as_slice().iter().map(|&v| u8::from(v > 0.0))),
                Op::ExpNegClamped { x, lo, hi } => out.extend(self.value(*x).as_slice().iter().map(|&v| {
                    if v < *lo {
                        0
                    } else if v > *hi {
                        2
                    } else {
                        1
                    }
                })),
                _ => {}
            }
        }
        out
    }

    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    /// Registers a parameter block under `id`; its gradient is reported back
    /// under the same id.
    pub fn param(&mut self, id: usize, value: &Matrix) -> Var {
        self.push(value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Adds the `1×c` row vector `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let b = self.value(bias);
        let xv = self.value(x);
        if b.rows() != 1 || b.cols() != xv.cols() {
            return Err(Error::shape(
                "add_bias",
                format!("1x{}", xv.cols()),
                format!("{}x{}", b.rows(), b.cols()),
            ));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, &bb) in value.row_mut(r).iter_mut().zip(b.as_slice()) {
                *o += bb;
            }
        }
        Ok(self.push(value, Op::AddBias(x, bias)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x))
    }

    /// Normalizes every column over the rows of `x` (zero mean, unit
    /// variance up to [`INSTANCE_NORM_EPS`]).
    pub fn instance_norm(&mut self, x: Var) -> Var {
        let (value, inv_std) = instance_norm_forward(self.value(x));
        self.push(value, Op::InstanceNorm { x, inv_std })
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hconcat(&mats)?;
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    /// `out[k] = x[index[k]]`.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::shape("gather", format!("row < {}", xv.rows()), bad));
        }
        let mut value = Matrix::zeros(index.len(), xv.cols());
        for (k, &i) in index.iter().enumerate() {
            value.row_mut(k).copy_from_slice(xv.row(i));
        }
        Ok(self.push(
            value,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        ))
    }

    /// Edge-to-vertex sum: row `k` of `x` is added to output rows `src[k]`
    /// and `dst[k]`, in ascending `k`. Vertices without incident rows get 0.
    pub fn incidence_sum(&mut self, x: Var, src: &[usize], dst: &[usize], rows: usize) -> Result<Var> {
        let xv = self.value(x);
        if src.len() != xv.rows() || dst.len() != xv.rows() {
            return Err(Error::shape(
                "incidence_sum",
                format!("{} incidences", xv.rows()),
                format!("{} src / {} dst", src.len(), dst.len()),
            ));
        }
        if let Some(&bad) = src.iter().chain(dst).find(|&&i| i >= rows) {
            return Err(Error::shape("incidence_sum", format!("vertex < {rows}"), bad));
        }
        let mut value = Matrix::zeros(rows, xv.cols());
        for k in 0..xv.rows() {
            for &t in &[src[k], dst[k]] {
                for (o, &v) in value.row_mut(t).iter_mut().zip(xv.row(k)) {
                    *o += v;
                }
            }
        }
        Ok(self.push(
            value,
            Op::IncidenceSum {
                x,
                src: src.to_vec(),
                dst: dst.to_vec(),
            },
        ))
    }

    /// Scales row `k` of `x` by `w[k]` where `w` is an `n×1` column.
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        if wv.cols() != 1 || wv.rows() != xv.rows() {
            return Err(Error::shape(
                "scale_rows",
                format!("{}x1", xv.rows()),
                format!("{}x{}", wv.rows(), wv.cols()),
            ));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let s = wv[(r, 0)];
            value.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        Ok(self.push(value, Op::ScaleRows { x, w }))
    }

    /// `exp(-clamp(x, lo, hi))`, elementwise.
    pub fn exp_neg_clamped(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).map(|v| (-v.clamp(lo, hi)).exp());
        self.push(value, Op::ExpNegClamped { x, lo, hi })
    }

    /// `Σ (x - target)²` as a `1×1` node.
    pub fn squared_error(&mut self, x: Var, target: &Matrix) -> Result<Var> {
        let xv = self.value(x);
        same_shape("squared_error", target, xv)?;
        let sum: f64 = xv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(self.push(
            Matrix::filled(1, 1, sum),
            Op::SquaredError {
                x,
                target: target.clone(),
            },
        ))
    }

    /// Reverse pass from the scalar node `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let Some(node) = self.nodes.get(loss.0) else {
            return Err(Error::IncompleteTape(format!(
                "loss node {} not recorded (tape holds {} nodes)",
                loss.0,
                self.nodes.len()
            )));
        };
        if node.value.shape() != (1, 1) {
            return Err(Error::IncompleteTape(format!(
                "loss node is {}x{}, expected a 1x1 scalar",
                node.value.rows(),
                node.value.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        let mut by_param: Vec<Option<Matrix>> = Vec::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    if by_param.len() <= *id {
                        by_param.resize(*id + 1, None);
                    }
                    accumulate_owned(&mut by_param[*id], g);
                }
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    // dA = G·Bᵀ, dB = Aᵀ·G
                    let da = g.matmul_t(bv)?;
                    let db = av.t_matmul(&g)?;
                    accumulate_owned(&mut grads[a.0], da);
                    accumulate_owned(&mut grads[b.0], db);
                }
                Op::AddBias(x, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in db.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate_owned(&mut grads[b.0], db);
                    accumulate_owned(&mut grads[x.0], g);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let mut dx = g;
                    for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::Sigmoid(x) => {
                    let mut dx = g;
                    for (d, &y) in dx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        *d *= y * (1.0 - y);
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::InstanceNorm { x, inv_std } => {
                    let y = &node.value;
                    let n = y.rows();
                    let mut dx = Matrix::zeros(n, y.cols());
                    for c in 0..y.cols() {
                        let mut sum_g = 0.0;
                        let mut sum_gy = 0.0;
                        for r in 0..n {
                            sum_g += g[(r, c)];
                            sum_gy += g[(r, c)] * y[(r, c)];
                        }
                        let nf = n as f64;
                        for r in 0..n {
                            dx[(r, c)] = inv_std[c] / nf * (nf * g[(r, c)] - sum_g - y[(r, c)] * sum_gy);
                        }
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let width = self.value(*p).cols();
                        accumulate_owned(&mut grads[p.0], g.column_block(offset, width));
                        offset += width;
                    }
                }
                Op::Gather { x, index } => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for (k, &i) in index.iter().enumerate() {
                        for (o, &v) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::IncidenceSum { x, src, dst } => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for k in 0..xv.rows() {
                        let out = dx.row_mut(k);
                        for ((o, &a), &b) in out.iter_mut().zip(g.row(src[k])).zip(g.row(dst[k])) {
                            *o = a + b;
                        }
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::ScaleRows { x, w } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let mut dx = g.clone();
                    let mut dw = Matrix::zeros(wv.rows(), 1);
                    for r in 0..xv.rows() {
                        let s = wv[(r, 0)];
                        dw[(r, 0)] = g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum();
                        dx.row_mut(r).iter_mut().for_each(|v| *v *= s);
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                    accumulate_owned(&mut grads[w.0], dw);
                }
                Op::ExpNegClamped { x, lo, hi } => {
                    let xv = self.value(*x);
                    let mut dx = g;
                    for ((d, &v), &y) in dx
                        .as_mut_slice()
                        .iter_mut()
                        .zip(xv.as_slice())
                        .zip(node.value.as_slice())
                    {
                        *d = if v > *lo && v < *hi { -y * *d } else { 0.0 };
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
                Op::SquaredError { x, target } => {
                    let xv = self.value(*x);
                    let s = g[(0, 0)];
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    for ((d, &a), &b) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()).zip(target.as_slice()) {
                        *d = 2.0 * (a - b) * s;
                    }
                    accumulate_owned(&mut grads[x.0], dx);
                }
            }
        }
        Ok(Gradients { by_param })
    }
}

fn accumulate_owned(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Returns the normalized matrix and the per-column `1/sqrt(var + eps)`.
pub(crate) fn instance_norm_forward(x: &Matrix) -> (Matrix, Vec<f64>) {
    let n = x.rows();
    let mut out = Matrix::zeros(n, x.cols());
    let mut inv_std = vec![0.0; x.cols()];
    if n == 0 {
        return (out, inv_std);
    }
    let nf = n as f64;
    for c in 0..x.cols() {
        let mean = (0..n).map(|r| x[(r, c)]).sum::<f64>() / nf;
        let var = (0..n).map(|r| (x[(r, c)] - mean).powi(2)).sum::<f64>() / nf;
        let s = 1.0 / (var + INSTANCE_NORM_EPS).sqrt();
        inv_std[c] = s;
        for r in 0..n {
            out[(r, c)] = (x[(r, c)] - mean) * s;
        }
    }
    (out, inv_std)
}

/// Column-wise instance normalization over rows.
pub fn instance_norm(batch: &Matrix) -> Matrix {
    instance_norm_forward(batch).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_diff(f: impl Fn(&Matrix) -> f64, at: &Matrix) -> Matrix {
        let h = 1e-6;
        let mut out = Matrix::zeros(at.rows(), at.cols());
        for i in 0..at.len() {
            let mut p = at.clone();
            p.as_mut_slice()[i] += h;
            let mut m = at.clone();
            m.as_mut_slice()[i] -= h;
            out.as_mut_slice()[i] = (f(&p) - f(&m)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn linear_map_closed_form() {
        // y = W x, loss = |y|²/2 ⇒ dW = y xᵀ. squared_error gives |y|², so halve.
        let w = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap();
        let x = Matrix::from_rows(&[vec![1.5], vec![-2.0]]).unwrap();
        let mut tape = GradientTape::new();
        let wv = tape.param(0, &w);
        let xv = tape.input(x.clone());
        let y = tape.matmul(wv, xv).unwrap();
        let loss = tape.squared_error(y, &Matrix::zeros(2, 1)).unwrap();
        let g = tape.backward(loss).unwrap();
        let yv = tape.value(y).clone();
        let expected = yv.matmul(&x.transpose()).unwrap();
        let got = g.param(0).unwrap().map(|v| v / 2.0);
        assert!(got.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn constant_parameter_has_zero_gradient() {
        let mut tape = GradientTape::new();
        let used = tape.param(0, &Matrix::filled(1, 1, 2.0));
        let _unused = tape.param(1, &Matrix::filled(2, 2, 3.0));
        let loss = tape.squared_error(used, &Matrix::zeros(1, 1)).unwrap();
        let dense = tape.backward(loss).unwrap().into_dense(&[(1, 1), (2, 2)]);
        assert_eq!(dense[0].as_slice(), &[4.0]);
        assert!(dense[1].as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_incomplete() {
        let mut tape = GradientTape::new();
        let x = tape.input(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::IncompleteTape(_))));
        assert!(matches!(
            GradientTape::new().backward(Var(3)),
            Err(Error::IncompleteTape(_))
        ));
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let x0 = Matrix::from_rows(&[
            vec![0.3, -1.2, 0.7],
            vec![1.1, 0.4, -0.5],
            vec![-0.8, 0.9, 0.2],
            vec![0.6, -0.3, 1.4],
        ])
        .unwrap();
        let w0 = Matrix::from_rows(&[vec![0.2, -0.4], vec![0.7, 0.1], vec![-0.3, 0.5]]).unwrap();
        let bias = Matrix::row_vector(&[0.05, -0.1]);
        let target = Matrix::from_rows(&[vec![0.1, 0.9, 0.3], vec![0.4, 0.2, 0.8], vec![0.5, 0.5, 0.1]]).unwrap();
        let src = [0usize, 1, 0, 2];
        let dst = [1usize, 2, 2, 1];

        let run = |x: &Matrix, w: &Matrix| -> (f64, Gradients) {
            let mut t = GradientTape::new();
            let xv = t.param(0, x);
            let wv = t.param(1, w);
            let bv = t.input(bias.clone());
            let h = t.matmul(xv, wv).unwrap();
            let h = t.add_bias(h, bv).unwrap();
            let h = t.instance_norm(h);
            let r = t.relu(h);
            let s = t.sigmoid(h);
            let c = t.concat(&[r, s]).unwrap();
            let col = t.gather(h, &[0, 1, 2, 3]).unwrap();
            let col = t.gather(col, &[1, 1, 0, 3]).unwrap();
            let pc = t_param_col(&mut t);
            let theta = t.matmul(col, pc).unwrap();
            let wexp = t.exp_neg_clamped(theta, -10.0, 10.0);
            let scaled = t.scale_rows(c, wexp).unwrap();
            let agg = t.incidence_sum(scaled, &src, &dst, 3).unwrap();
            let agg = t.gather(agg, &[0, 1, 2]).unwrap();
            let small = t.concat(&[agg]).unwrap();
            let out = t.sigmoid(small);
            let picked = t.gather(out, &[0, 1, 2]).unwrap();
            let proj = t_proj(&mut t);
            let three = t.matmul(picked, proj).unwrap();
            let loss = t.squared_error(three, &target).unwrap();
            let v = t.value(loss)[(0, 0)];
            (v, t.backward(loss).unwrap())
        };
        fn t_param_col(t: &mut GradientTape) -> Var {
            t.input(Matrix::from_rows(&[vec![0.8], vec![-0.6]]).unwrap())
        }
        fn t_proj(t: &mut GradientTape) -> Var {
            let mut p = Matrix::zeros(4, 3);
            for i in 0..4 {
                for j in 0..3 {
                    p[(i, j)] = ((i * 3 + j) as f64 * 0.37).sin();
                }
            }
            t.input(p)
        }

        let (_, g) = run(&x0, &w0);
        let fd_x = finite_diff(|x| run(x, &w0).0, &x0);
        let fd_w = finite_diff(|w| run(&x0, w).0, &w0);
        assert!(g.param(0).unwrap().max_abs_diff(&fd_x) < 1e-7);
        assert!(g.param(1).unwrap().max_abs_diff(&fd_w) < 1e-7);
    }

    #[test]
    fn instance_norm_examples() {
        let flat = Matrix::column_vector(&[1.0, 1.0, 1.0]);
        assert_eq!(instance_norm(&flat).as_slice(), &[0.0, 0.0, 0.0]);

        let pm = instance_norm(&Matrix::column_vector(&[-1.0, 1.0]));
        assert!((pm[(0, 0)] + 1.0).abs() < 1e-5);
        assert!((pm[(1, 0)] - 1.0).abs() < 1e-5);

        let single = instance_norm(&Matrix::row_vector(&[3.0, -2.0]));
        assert_eq!(single.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn exp_clamp_blocks_gradient_outside_range() {
        let mut t = GradientTape::new();
        let x = t.param(0, &Matrix::column_vector(&[20.0, 0.5]));
        let y = t.exp_neg_clamped(x, -10.0, 10.0);
        assert!((t.value(y)[(0, 0)] - (-10.0f64).exp()).abs() < 1e-18);
        let loss = t.squared_error(y, &Matrix::zeros(2, 1)).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.param(0).unwrap()[(0, 0)], 0.0);
        assert!(g.param(0).unwrap()[(1, 0)] < 0.0);
    }
}
