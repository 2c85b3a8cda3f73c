use super::{invalid, numel_of, BackwardFn, Result, Tensor, TensorError};

/// Views a shape as `[outer, axis_len, inner]` around `axis`.
pub(crate) fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let rank = shape.len();
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let mut in_strides = vec![1usize; rank];
    for ax in (0..rank.saturating_sub(1)).rev() {
        in_strides[ax] = in_strides[ax + 1] * shape[ax + 1];
    }
    // Stride in the input for each output axis.
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = data.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return (out, out_shape);
    }
    let inner = out_shape[rank - 1];
    let inner_stride = strides[rank - 1];
    let mut idx = vec![0usize; rank];
    let mut base = 0usize;
    let mut i = 0;
    while i < n {
        for j in 0..inner {
            out[i + j] = data[base + j * inner_stride];
        }
        i += inner;
        let mut ax = rank - 1;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            base += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    (out, out_shape)
}

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let backward: BackwardFn = Box::new(|args| vec![Some(args.grad.to_vec())]);
        Ok(Tensor::from_op(
            "reshape",
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            backward,
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.ndim();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return invalid("permute", format!("{axes:?} is not a permutation of {rank} axes"));
        }
        let (data, out_shape) = permute_data(self.data(), self.shape(), axes);
        let mut inverse = vec![0usize; rank];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let os = out_shape.clone();
        let backward: BackwardFn = Box::new(move |args| vec![Some(permute_data(args.grad, &os, &inverse).0)]);
        Ok(Tensor::from_op("permute", data, out_shape, vec![self.clone()], backward))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return invalid(
                "narrow",
                format!("range {start}..{} on axis {axis} of shape {shape:?}", start + len),
            );
        }
        let (outer, n, inner) = split_at_axis(&shape, axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        let x = self.data();
        for o in 0..outer {
            let base = (o * n + start) * inner;
            out.extend_from_slice(&x[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let backward: BackwardFn = Box::new(move |args| {
            let mut g = vec![0.0; outer * n * inner];
            for o in 0..outer {
                let base = (o * n + start) * inner;
                g[base..base + len * inner].copy_from_slice(&args.grad[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(g)]
        });
        Ok(Tensor::from_op("narrow", out, out_shape, vec![self.clone()], backward))
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            return invalid("concat", "no tensors given");
        };
        let rank = first.ndim();
        if axis >= rank {
            return invalid("concat", format!("axis {axis} out of range for rank {rank}"));
        }
        for p in parts.iter().skip(1) {
            let ok = p.ndim() == rank
                && p.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(ax, (a, b))| ax == axis || a == b);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let (outer, _, inner) = split_at_axis(first.shape(), axis);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &l) in parts.iter().zip(&lens) {
                out.extend_from_slice(&p.data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = total;
        let lens_b = lens.clone();
        let backward: BackwardFn = Box::new(move |args| {
            let mut grads: Vec<Vec<f64>> = lens_b.iter().map(|&l| Vec::with_capacity(outer * l * inner)).collect();
            let mut off = 0;
            for _ in 0..outer {
                for (g, &l) in grads.iter_mut().zip(&lens_b) {
                    g.extend_from_slice(&args.grad[off..off + l * inner]);
                    off += l * inner;
                }
            }
            grads
                .into_iter()
                .zip(args.needs)
                .map(|(g, &need)| need.then_some(g))
                .collect()
        });
        let inputs = parts.iter().map(|&p| p.clone()).collect();
        Ok(Tensor::from_op("concat", out, out_shape, inputs, backward))
    }

    /// Zero-pads `before`/`after` entries along `axis`.
    pub fn pad_zeros(&self, axis: usize, before: usize, after: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return invalid("pad_zeros", format!("axis {axis} out of range for shape {shape:?}"));
        }
        if before == 0 && after == 0 {
            return Ok(self.clone());
        }
        let (outer, n, inner) = split_at_axis(&shape, axis);
        let m = n + before + after;
        let mut out = vec![0.0; outer * m * inner];
        let x = self.data();
        for o in 0..outer {
            let dst = (o * m + before) * inner;
            out[dst..dst + n * inner].copy_from_slice(&x[o * n * inner..(o + 1) * n * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = m;
        let backward: BackwardFn = Box::new(move |args| {
            let mut g = Vec::with_capacity(outer * n * inner);
            for o in 0..outer {
                let src = (o * m + before) * inner;
                g.extend_from_slice(&args.grad[src..src + n * inner]);
            }
            vec![Some(g)]
        });
        Ok(Tensor::from_op("pad_zeros", out, out_shape, vec![self.clone()], backward))
    }
}
