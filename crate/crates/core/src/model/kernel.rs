use super::{ModelError, Result};
use crate::tensor::Tensor;
use crate::wavelet::{dwt1d, dwt2d, idwt1d, idwt2d, WaveletFilter};

/// Number of level-`m` bands carrying weights: approximation plus details.
pub fn band_count(spatial_dims: usize) -> usize {
    if spatial_dims == 1 {
        2
    } else {
        4
    }
}

/// Mixes channels independently at every coefficient position.
///
/// `bands` are `[B, C, ζ...]` tensors; `r` is `[bands, ζ..., O, C]`.
/// Returns one `[B, O, ζ...]` tensor per band.
fn mix_bands(bands: &[Tensor], r: &Tensor) -> Result<Vec<Tensor>> {
    let shape = bands[0].shape().to_vec();
    let (b, c) = (shape[0], shape[1]);
    let spatial = &shape[2..];
    let z: usize = spatial.iter().product();
    let nb = bands.len();
    let rs = r.shape();
    let o = rs[rs.len() - 2];
    let mut expected = vec![nb];
    expected.extend_from_slice(spatial);
    expected.extend([o, c]);
    if rs != expected.as_slice() {
        return Err(ModelError::Shape(format!(
            "R has extents {rs:?} but the coarsest wavelet bands need {expected:?}"
        )));
    }
    let flat: Vec<Tensor> = bands
        .iter()
        .map(|t| t.reshape(&[b, c, 1, z]))
        .collect::<std::result::Result<_, _>>()?;
    let refs: Vec<&Tensor> = flat.iter().collect();
    let stacked = Tensor::concat(&refs, 2)?.reshape(&[b, c, nb * z])?.permute(&[2, 0, 1])?;
    let weights = r.reshape(&[nb * z, o, c])?.permute(&[0, 2, 1])?;
    let mixed = stacked.matmul(&weights)?.permute(&[1, 2, 0])?.reshape(&[b, o, nb, z])?;
    let mut out_shape = vec![b, o];
    out_shape.extend_from_slice(spatial);
    (0..nb)
        .map(|i| Ok(mixed.narrow(2, i, 1)?.reshape(&out_shape)?))
        .collect()
}

/// Kernel integral in wavelet space for channels-first `v` (`[B, C, N]` or
/// `[B, C, H, W]`).
///
/// The level-`level` approximation and detail bands are mixed by their own
/// slices of `r`; finer details are dropped before the inverse transform.
pub fn wavelet_kernel_conv(v: &Tensor, r: &Tensor, filter: &WaveletFilter, level: usize) -> Result<Tensor> {
    let dims = v.ndim().saturating_sub(2);
    if !(1..=2).contains(&dims) || r.ndim() != dims + 3 {
        return Err(ModelError::Shape(format!(
            "kernel path expects [B, C, spatial..] with 1 or 2 spatial axes and a matching R; got v {:?}, R {:?}",
            v.shape(),
            r.shape()
        )));
    }
    let zeros_like = |t: &Tensor| Tensor::zeros(t.shape());
    if dims == 1 {
        let mut co = dwt1d(v, filter, level)?;
        let mixed = mix_bands(&[co.approx.clone(), co.details[0].clone()], r)?;
        co.approx = mixed[0].clone();
        co.details[0] = mixed[1].clone();
        for d in co.details.iter_mut().skip(1) {
            *d = zeros_like(d);
        }
        Ok(idwt1d(&co, filter)?)
    } else {
        let mut co = dwt2d(v, filter, level)?;
        let [lh, hl, hh] = co.details[0].clone();
        let mixed = mix_bands(&[co.approx.clone(), lh, hl, hh], r)?;
        co.approx = mixed[0].clone();
        co.details[0] = [mixed[1].clone(), mixed[2].clone(), mixed[3].clone()];
        for bands in co.details.iter_mut().skip(1) {
            *bands = [zeros_like(&bands[0]), zeros_like(&bands[1]), zeros_like(&bands[2])];
        }
        Ok(idwt2d(&co, filter)?)
    }
}
