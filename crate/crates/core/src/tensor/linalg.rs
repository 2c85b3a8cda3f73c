use super::{gemm, BackwardFn, Result, Tensor, TensorError};
use crate::par;

impl Tensor {
    /// Matrix product. Accepts `[m,k]·[k,n]` or batched `[..,m,k]·[..,k,n]`
    /// with identical leading axes.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (a, b) = (self.shape(), other.shape());
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        };
        if a.len() < 2 || a.len() != b.len() || a[..a.len() - 2] != b[..b.len() - 2] {
            return Err(mismatch());
        }
        let r = a.len();
        let (m, k, n) = (a[r - 2], a[r - 1], b[r - 1]);
        if b[r - 2] != k {
            return Err(mismatch());
        }
        let batch: usize = a[..r - 2].iter().product();
        let mut out = vec![0.0; batch * m * n];
        let (ad, bd) = (self.data(), other.data());
        par::for_each_chunk(&mut out, m * n, |i, c| {
            gemm(m, k, n, &ad[i * m * k..], false, &bd[i * k * n..], false, c, 0.0);
        });
        let mut out_shape = a[..r - 2].to_vec();
        out_shape.extend([m, n]);
        let (ac, bc) = (self.clone(), other.clone());
        let backward: BackwardFn = Box::new(move |args| {
            let g = args.grad;
            let ga = args.needs[0].then(|| {
                // dA = dC · Bᵀ
                let mut ga = vec![0.0; batch * m * k];
                let bd = bc.data();
                par::for_each_chunk(&mut ga, m * k, |i, c| {
                    gemm(m, n, k, &g[i * m * n..], false, &bd[i * k * n..], true, c, 0.0);
                });
                ga
            });
            let gb = args.needs[1].then(|| {
                // dB = Aᵀ · dC
                let mut gb = vec![0.0; batch * k * n];
                let ad = ac.data();
                par::for_each_chunk(&mut gb, k * n, |i, c| {
                    gemm(k, m, n, &ad[i * m * k..], true, &g[i * m * n..], false, c, 0.0);
                });
                gb
            });
            vec![ga, gb]
        });
        Ok(Tensor::from_op(
            "matmul",
            out,
            out_shape,
            vec![self.clone(), other.clone()],
            backward,
        ))
    }
}
