use super::{Activation, ModelError, Result};
use crate::tensor::{PaddingMode, Tensor};

/// Weights of the two-stage U-Net path. Each entry is `(kernel, bias)`;
/// kernels are `[out, in, 3]` (1-D) or `[out, in, 3, 3]` (2-D).
#[derive(Clone, Debug)]
pub struct UnetWeights {
    pub enc1: (Tensor, Tensor),
    pub enc2: (Tensor, Tensor),
    pub bottleneck: (Tensor, Tensor),
    pub dec1: (Tensor, Tensor),
    pub dec2: (Tensor, Tensor),
}

/// Shapes of the U-Net kernels for `width` channels and plan `[c1, c2]`.
pub fn unet_kernel_shapes(width: usize, c1: usize, c2: usize, dims: usize) -> [(&'static str, Vec<usize>); 5] {
    let k = |o: usize, i: usize| {
        let mut s = vec![o, i];
        s.extend(std::iter::repeat_n(3, dims));
        s
    };
    [
        ("enc1", k(c1, width)),
        ("enc2", k(c2, c1)),
        ("bottleneck", k(c2, c2)),
        ("dec1", k(c1, 2 * c2)),
        ("dec2", k(width, 2 * c1)),
    ]
}

fn bias_shape(channels: usize, dims: usize) -> Vec<usize> {
    let mut s = vec![1, channels];
    s.extend(std::iter::repeat_n(1, dims));
    s
}

fn conv_bias(x: &Tensor, (w, b): &(Tensor, Tensor), padding: PaddingMode) -> Result<Tensor> {
    let dims = x.ndim() - 2;
    let y = if dims == 1 {
        x.conv1d(w, 1, padding)?
    } else {
        x.conv2d(w, 1, padding)?
    };
    Ok(y.add(&b.reshape(&bias_shape(w.shape()[0], dims))?)?)
}

fn pool(x: &Tensor) -> Result<Tensor> {
    Ok(if x.ndim() == 3 { x.avg_pool1d()? } else { x.avg_pool2d()? })
}

fn upsample(x: &Tensor) -> Result<Tensor> {
    Ok(if x.ndim() == 3 { x.upsample1d()? } else { x.upsample2d()? })
}

/// Encoder/decoder branch on channels-first `v`. Spatial extents that are
/// not multiples of 4 are zero-padded at the end and cropped afterwards.
pub fn unet_path(v: &Tensor, w: &UnetWeights, act: Activation, padding: PaddingMode) -> Result<Tensor> {
    let shape = v.shape();
    let dims = shape.len().saturating_sub(2);
    if !(1..=2).contains(&dims) {
        return Err(ModelError::Shape(format!(
            "U-Net path expects [B, C, spatial..] with 1 or 2 spatial axes, got {shape:?}"
        )));
    }
    let spatial = shape[2..].to_vec();
    if let Some(&small) = spatial.iter().find(|&&n| n < 4) {
        return Err(ModelError::Shape(format!(
            "U-Net path needs every spatial extent >= 4, got {small} in {shape:?}"
        )));
    }
    let mut x = v.clone();
    for (i, &n) in spatial.iter().enumerate() {
        x = x.pad_zeros(2 + i, 0, n.next_multiple_of(4) - n)?;
    }
    let e1 = act.apply(&conv_bias(&x, &w.enc1, padding)?);
    let e2 = act.apply(&conv_bias(&pool(&e1)?, &w.enc2, padding)?);
    let mid = act.apply(&conv_bias(&pool(&e2)?, &w.bottleneck, padding)?);
    let d1 = Tensor::concat(&[&upsample(&mid)?, &e2], 1)?;
    let d1 = act.apply(&conv_bias(&d1, &w.dec1, padding)?);
    let d2 = Tensor::concat(&[&upsample(&d1)?, &e1], 1)?;
    let mut out = conv_bias(&d2, &w.dec2, padding)?;
    for (i, &n) in spatial.iter().enumerate() {
        out = out.narrow(2 + i, 0, n)?;
    }
    Ok(out)
}
