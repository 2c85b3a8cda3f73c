use super::{invalid, numel_of, BackwardFn, Result, Tensor, TensorError};
use crate::par;

#[derive(Clone, Copy, Debug)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }

    #[inline]
    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        }
    }
}

/// Output shape of a broadcast binary op, or `None` when not allowed.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a == b {
        return Some(a.to_vec());
    }
    if numel_of(b) == 1 && b.iter().all(|&d| d == 1) {
        return Some(a.to_vec());
    }
    if numel_of(a) == 1 && a.iter().all(|&d| d == 1) {
        return Some(b.to_vec());
    }
    if a.len() != b.len() {
        return None;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Some(x),
            (1, y) => Some(y),
            (x, 1) => Some(x),
            _ => None,
        })
        .collect()
}

/// For each output element, the linear offset into an operand of `in_shape`
/// broadcast to `out_shape`, fed to `f(out_index, in_offset)` in order.
fn for_each_broadcast_offset(out_shape: &[usize], in_shape: &[usize], mut f: impl FnMut(usize, usize)) {
    let n = numel_of(out_shape);
    if in_shape == out_shape {
        for i in 0..n {
            f(i, i);
        }
        return;
    }
    if numel_of(in_shape) == 1 {
        for i in 0..n {
            f(i, 0);
        }
        return;
    }
    let rank = out_shape.len();
    let mut in_strides = vec![0usize; rank];
    let mut acc = 1;
    for ax in (0..rank).rev() {
        in_strides[ax] = if in_shape[ax] == 1 { 0 } else { acc };
        acc *= in_shape[ax];
    }
    // Innermost run length over which the input offset advances uniformly.
    let inner = out_shape[rank - 1];
    let inner_stride = in_strides[rank - 1];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    let mut i = 0;
    while i < n {
        for j in 0..inner {
            f(i + j, base + j * inner_stride);
        }
        i += inner;
        // Odometer increment over the leading axes.
        let mut ax = rank - 1;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            base += in_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= in_strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

fn expand_to(data: &[f64], in_shape: &[usize], out_shape: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; numel_of(out_shape)];
    for_each_broadcast_offset(out_shape, in_shape, |i, o| out[i] = data[o]);
    out
}

/// Sums a gradient of `out_shape` back down to `in_shape`.
fn reduce_to(grad: Vec<f64>, out_shape: &[usize], in_shape: &[usize]) -> Vec<f64> {
    if in_shape == out_shape {
        return grad;
    }
    let mut out = vec![0.0; numel_of(in_shape)];
    for_each_broadcast_offset(out_shape, in_shape, |i, o| out[o] += grad[i]);
    out
}

fn binary(op: BinOp, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let out_shape = broadcast_shape(x.shape(), y.shape()).ok_or_else(|| TensorError::ShapeMismatch {
        op: op.name(),
        lhs: x.shape().to_vec(),
        rhs: y.shape().to_vec(),
    })?;
    let data = if x.shape() == y.shape() {
        par::zip_map(x.data(), y.data(), move |a, b| op.apply(a, b))
    } else if y.numel() == 1 && out_shape.as_slice() == x.shape() {
        let s = y.data()[0];
        par::map_slice(x.data(), move |a| op.apply(a, s))
    } else if out_shape.as_slice() == x.shape() {
        let (xd, yd) = (x.data(), y.data());
        let mut out = vec![0.0; xd.len()];
        for_each_broadcast_offset(&out_shape, y.shape(), |i, o| out[i] = op.apply(xd[i], yd[o]));
        out
    } else {
        let xe = expand_to(x.data(), x.shape(), &out_shape);
        let ye = expand_to(y.data(), y.shape(), &out_shape);
        par::zip_map(&xe, &ye, move |a, b| op.apply(a, b))
    };
    let (xc, yc) = (x.clone(), y.clone());
    let os = out_shape.clone();
    let backward: BackwardFn = Box::new(move |args| {
        let g = args.grad;
        let gx = args.needs[0].then(|| {
            let full = match op {
                BinOp::Add | BinOp::Sub => g.to_vec(),
                BinOp::Mul => {
                    let ye = expand_to(yc.data(), yc.shape(), &os);
                    par::zip_map(g, &ye, |a, b| a * b)
                }
                BinOp::Div => {
                    let ye = expand_to(yc.data(), yc.shape(), &os);
                    par::zip_map(g, &ye, |a, b| a / b)
                }
            };
            reduce_to(full, &os, xc.shape())
        });
        let gy = args.needs[1].then(|| {
            let full = match op {
                BinOp::Add => g.to_vec(),
                BinOp::Sub => par::map_slice(g, |a| -a),
                BinOp::Mul => {
                    let xe = expand_to(xc.data(), xc.shape(), &os);
                    par::zip_map(g, &xe, |a, b| a * b)
                }
                BinOp::Div => {
                    // d(x/y)/dy = -out / y
                    let ye = expand_to(yc.data(), yc.shape(), &os);
                    let t = par::zip_map(args.out, &ye, |o, b| -o / b);
                    par::zip_map(g, &t, |a, b| a * b)
                }
            };
            reduce_to(full, &os, yc.shape())
        });
        vec![gx, gy]
    });
    Ok(Tensor::from_op(op.name(), data, out_shape, vec![x.clone(), y.clone()], backward))
}

/// Unary op with derivative `dfdx(x, y)` expressed through input and output.
fn unary<F, D>(op: &'static str, x: &Tensor, f: F, dfdx: D) -> Tensor
where
    F: Fn(f64) -> f64 + Sync + Send,
    D: Fn(f64, f64) -> f64 + Sync + Send + 'static,
{
    let data = par::map_slice(x.data(), f);
    let xc = x.clone();
    let backward: BackwardFn = Box::new(move |args| {
        let g = par::zip3_map(args.grad, xc.data(), args.out, |g, x, y| g * dfdx(x, y));
        vec![Some(g)]
    });
    Tensor::from_op(op, data, x.shape().to_vec(), vec![x.clone()], backward)
}

/// Unary op whose derivative is computed alongside the value and kept for
/// the backward pass.
fn unary_cached<F>(op: &'static str, x: &Tensor, f: F) -> Tensor
where
    F: Fn(f64) -> (f64, f64) + Sync + Send,
{
    let (data, deriv) = par::map_slice2(x.data(), f);
    let backward: BackwardFn = Box::new(move |args| vec![Some(par::zip_map(args.grad, &deriv, |g, d| g * d))]);
    Tensor::from_op(op, data, x.shape().to_vec(), vec![x.clone()], backward)
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `tanh` through a single `exp`; within a few ulps of `f64::tanh` in
/// absolute terms and noticeably faster.
#[inline]
fn tanh_exp(u: f64) -> f64 {
    let e = (-2.0 * u.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(u)
}

/// GELU (tanh approximation) and its derivative.
fn gelu_with_grad(x: f64) -> (f64, f64) {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = tanh_exp(u);
    let y = 0.5 * x * (1.0 + t);
    (y, 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x))
}

/// Mish and its derivative.
fn mish_with_grad(x: f64) -> (f64, f64) {
    let t = softplus(x).tanh();
    (x * t, t + x * (1.0 - t * t) * sigmoid(x))
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        binary(BinOp::Add, self, other)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        binary(BinOp::Sub, self, other)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        binary(BinOp::Mul, self, other)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        binary(BinOp::Div, self, other)
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let data = par::map_slice(self.data(), move |x| x * c);
        let backward: BackwardFn = Box::new(move |args| vec![Some(par::map_slice(args.grad, move |g| g * c))]);
        Tensor::from_op("scale", data, self.shape().to_vec(), vec![self.clone()], backward)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data = par::map_slice(self.data(), move |x| x + c);
        let backward: BackwardFn = Box::new(|args| vec![Some(args.grad.to_vec())]);
        Tensor::from_op("add_scalar", data, self.shape().to_vec(), vec![self.clone()], backward)
    }

    /// Elementwise `x^p` for a constant exponent.
    pub fn powf(&self, p: f64) -> Tensor {
        unary("powf", self, move |x| x.powf(p), move |x, _| p * x.powf(p - 1.0))
    }

    pub fn square(&self) -> Tensor {
        unary("square", self, |x| x * x, |x, _| 2.0 * x)
    }

    /// Square root; the gradient at 0 is taken as 0.
    pub fn sqrt(&self) -> Tensor {
        unary("sqrt", self, f64::sqrt, |_, y| if y == 0.0 { 0.0 } else { 0.5 / y })
    }

    pub fn exp(&self) -> Tensor {
        unary("exp", self, f64::exp, |_, y| y)
    }

    pub fn ln(&self) -> Tensor {
        unary("ln", self, f64::ln, |x, _| 1.0 / x)
    }

    pub fn sin(&self) -> Tensor {
        unary("sin", self, f64::sin, |x, _| x.cos())
    }

    pub fn tanh(&self) -> Tensor {
        unary("tanh", self, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn relu(&self) -> Tensor {
        unary("relu", self, |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// `x·0.5·(1 + tanh(√(2/π)(x + 0.044715x³)))`.
    pub fn gelu(&self) -> Tensor {
        unary_cached("gelu", self, gelu_with_grad)
    }

    /// `x·tanh(ln(1 + eˣ))`.
    pub fn mish(&self) -> Tensor {
        unary_cached("mish", self, mish_with_grad)
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let n = self.numel();
        let backward: BackwardFn = Box::new(move |args| vec![Some(vec![args.grad[0]; n])]);
        Tensor::from_op("sum", vec![s], Vec::new(), vec![self.clone()], backward)
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Sums over `axis`; the axis is kept with extent 1 when `keepdim`.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return invalid("sum_axis", format!("axis {axis} out of range for shape {shape:?}"));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = vec![0.0; outer * inner];
        let x = self.data();
        for o in 0..outer {
            let dst = &mut out[o * inner..(o + 1) * inner];
            for k in 0..len {
                let src = &x[(o * len + k) * inner..(o * len + k + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut out_shape = shape.clone();
        if keepdim {
            out_shape[axis] = 1;
        } else {
            out_shape.remove(axis);
        }
        let backward: BackwardFn = Box::new(move |args| {
            let mut g = vec![0.0; outer * len * inner];
            for o in 0..outer {
                let src = &args.grad[o * inner..(o + 1) * inner];
                for k in 0..len {
                    g[(o * len + k) * inner..(o * len + k + 1) * inner].copy_from_slice(src);
                }
            }
            vec![Some(g)]
        });
        Ok(Tensor::from_op("sum_axis", out, out_shape, vec![self.clone()], backward))
    }
}

#[cfg(test)]
pub(crate) fn broadcast_shape_for_test(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    broadcast_shape(a, b)
}
