use super::{Result, WaveletError, WaveletFilter};
use crate::par;
use crate::tensor::{BackwardFn, Tensor, TensorError};

/// Smallest multiple of `2^level` that is at least `len`.
pub fn padded_len(len: usize, level: usize) -> usize {
    let block = 1usize << level;
    len.div_ceil(block) * block
}

/// Length of the level-`level` bands for a signal of length `len`.
pub fn coarsest_len(len: usize, level: usize) -> usize {
    padded_len(len, level) >> level
}

/// Deepest level whose zero padding does not exceed the signal itself.
pub fn max_level(len: usize) -> usize {
    let mut level = 0;
    while len > 0 && padded_len(len, level + 1) <= 2 * len {
        level += 1;
    }
    level
}

fn check_level(len: usize, level: usize, filter: &WaveletFilter) -> Result<()> {
    if level == 0 {
        return Err(WaveletError::ZeroLevel);
    }
    if len < filter.len() {
        return Err(WaveletError::SignalTooShort {
            len,
            filter_len: filter.len(),
        });
    }
    let max = max_level(len);
    if level > max {
        return Err(WaveletError::LevelTooDeep { level, len, max });
    }
    Ok(())
}

/// Splits `shape` into `(outer, n, inner)` around `axis`.
fn axis_view(shape: &[usize], axis: usize, op: &'static str) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(TensorError::Invalid {
            op,
            msg: format!("axis {axis} out of range for shape {shape:?}"),
        }
        .into());
    }
    let n = shape[axis];
    if n < 2 || !n.is_multiple_of(2) {
        return Err(TensorError::Invalid {
            op,
            msg: format!("axis length {n} must be even and positive"),
        }
        .into());
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, n, inner))
}

/// One periodized analysis step on a `[n, inner]` block:
/// `lo[j] = Σ_k lo_f[k]·x[(2j+k) mod n]`, likewise for `hi`.
fn analyze_block(x: &[f64], n: usize, inner: usize, lo_f: &[f64], hi_f: &[f64], out: &mut [f64]) {
    let half = n / 2;
    if inner == 1 {
        return analyze_contiguous(x, lo_f, hi_f, out);
    }
    out.fill(0.0);
    let (lo_out, hi_out) = out.split_at_mut(half * inner);
    for j in 0..half {
        let lo_row = &mut lo_out[j * inner..(j + 1) * inner];
        let hi_row = &mut hi_out[j * inner..(j + 1) * inner];
        for (k, (&a, &b)) in lo_f.iter().zip(hi_f).enumerate() {
            let src = (2 * j + k) % n;
            let xs = &x[src * inner..(src + 1) * inner];
            for ((l, h), &v) in lo_row.iter_mut().zip(hi_row.iter_mut()).zip(xs) {
                *l += a * v;
                *h += b * v;
            }
        }
    }
}

/// Transpose of [`analyze_block`], written with the reconstruction filters.
fn synthesize_block(y: &[f64], n: usize, inner: usize, rec_lo: &[f64], rec_hi: &[f64], out: &mut [f64]) {
    let half = n / 2;
    let len = rec_lo.len();
    if inner == 1 {
        return synthesize_contiguous(y, rec_lo, rec_hi, out);
    }
    out.fill(0.0);
    let (lo_in, hi_in) = y.split_at(half * inner);
    for j in 0..half {
        let lo_row = &lo_in[j * inner..(j + 1) * inner];
        let hi_row = &hi_in[j * inner..(j + 1) * inner];
        for (r, (&a, &b)) in rec_lo.iter().zip(rec_hi).enumerate() {
            let dst = (2 * j + len - 1 - r) % n;
            let xs = &mut out[dst * inner..(dst + 1) * inner];
            for ((o, &l), &h) in xs.iter_mut().zip(lo_row).zip(hi_row) {
                *o += a * l + b * h;
            }
        }
    }
}

/// [`analyze_block`] for a contiguous signal. Taps that wrap around read
/// from a periodic extension so the inner loop needs no modulo.
fn analyze_contiguous(x: &[f64], lo_f: &[f64], hi_f: &[f64], out: &mut [f64]) {
    let n = x.len();
    let half = n / 2;
    let len = lo_f.len();
    let ext: Vec<f64> = (0..n + len).map(|i| x[i % n]).collect();
    let (lo_out, hi_out) = out.split_at_mut(half);
    for j in 0..half {
        let win = &ext[2 * j..2 * j + len];
        let (mut l, mut h) = (0.0, 0.0);
        for k in 0..len {
            l += lo_f[k] * win[k];
            h += hi_f[k] * win[k];
        }
        lo_out[j] = l;
        hi_out[j] = h;
    }
}

/// [`synthesize_block`] for a contiguous signal, accumulating into a
/// periodic extension that is folded back at the end.
fn synthesize_contiguous(y: &[f64], rec_lo: &[f64], rec_hi: &[f64], out: &mut [f64]) {
    let n = y.len();
    let half = n / 2;
    let len = rec_lo.len();
    let (lo_in, hi_in) = y.split_at(half);
    let mut ext = vec![0.0; n + len];
    for j in 0..half {
        let (l, h) = (lo_in[j], hi_in[j]);
        let win = &mut ext[2 * j..2 * j + len];
        for r in 0..len {
            win[len - 1 - r] += rec_lo[r] * l + rec_hi[r] * h;
        }
    }
    out.fill(0.0);
    for (i, v) in ext.into_iter().enumerate() {
        out[i % n] += v;
    }
}

type BlockFn = fn(&[f64], usize, usize, &[f64], &[f64], &mut [f64]);

fn apply_blocks(src: &[f64], outer: usize, n: usize, inner: usize, f0: &[f64], f1: &[f64], block: BlockFn) -> Vec<f64> {
    let size = n * inner;
    let mut out = vec![0.0; outer * size];
    par::for_each_chunk(&mut out, size, |o, chunk| {
        block(&src[o * size..(o + 1) * size], n, inner, f0, f1, chunk);
    });
    out
}

/// One analysis level along `axis`. The output has the input's shape with
/// the low band in the first half of `axis` and the high band in the second.
pub fn analysis_step(x: &Tensor, axis: usize, filter: &WaveletFilter) -> Result<Tensor> {
    let (outer, n, inner) = axis_view(x.shape(), axis, "dwt_analysis")?;
    let out = apply_blocks(x.data(), outer, n, inner, &filter.dec_lo, &filter.dec_hi, analyze_block);
    let (rec_lo, rec_hi) = (filter.rec_lo.clone(), filter.rec_hi.clone());
    let backward: BackwardFn = Box::new(move |args| {
        vec![Some(apply_blocks(args.grad, outer, n, inner, &rec_lo, &rec_hi, synthesize_block))]
    });
    Ok(Tensor::from_op("dwt_analysis", out, x.shape().to_vec(), vec![x.clone()], backward))
}

/// Inverse of [`analysis_step`].
pub fn synthesis_step(y: &Tensor, axis: usize, filter: &WaveletFilter) -> Result<Tensor> {
    let (outer, n, inner) = axis_view(y.shape(), axis, "dwt_synthesis")?;
    let out = apply_blocks(y.data(), outer, n, inner, &filter.rec_lo, &filter.rec_hi, synthesize_block);
    let (dec_lo, dec_hi) = (filter.dec_lo.clone(), filter.dec_hi.clone());
    let backward: BackwardFn = Box::new(move |args| {
        vec![Some(apply_blocks(args.grad, outer, n, inner, &dec_lo, &dec_hi, analyze_block))]
    });
    Ok(Tensor::from_op("dwt_synthesis", out, y.shape().to_vec(), vec![y.clone()], backward))
}

/// Multilevel 1D decomposition along the last axis.
#[derive(Clone, Debug)]
pub struct DwtCoeffs {
    /// Level-`level` approximation band.
    pub approx: Tensor,
    /// Detail bands, coarsest (level `level`) first.
    pub details: Vec<Tensor>,
    pub original_len: usize,
    pub level: usize,
    pub filter_name: String,
}

impl DwtCoeffs {
    /// Length of the coarsest bands.
    pub fn zeta(&self) -> usize {
        *self.approx.shape().last().unwrap_or(&0)
    }

    /// Sum of squares over every band.
    pub fn energy(&self) -> f64 {
        std::iter::once(&self.approx)
            .chain(&self.details)
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum()
    }
}

pub fn dwt1d(signal: &Tensor, filter: &WaveletFilter, level: usize) -> Result<DwtCoeffs> {
    let axis = signal
        .ndim()
        .checked_sub(1)
        .ok_or_else(|| WaveletError::Inconsistent("cannot transform a scalar".into()))?;
    let len = signal.shape()[axis];
    check_level(len, level, filter)?;
    let padded = padded_len(len, level);
    let mut cur = signal.pad_zeros(axis, 0, padded - len)?;
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let half = cur.shape()[axis] / 2;
        let y = analysis_step(&cur, axis, filter)?;
        details.push(y.narrow(axis, half, half)?);
        cur = y.narrow(axis, 0, half)?;
    }
    details.reverse();
    Ok(DwtCoeffs {
        approx: cur,
        details,
        original_len: len,
        level,
        filter_name: filter.name.clone(),
    })
}

fn check_band(band: &Tensor, lead: &[usize], tail: &[usize], what: &str) -> Result<()> {
    let shape = band.shape();
    if shape.len() != lead.len() + tail.len() || &shape[..lead.len()] != lead || &shape[lead.len()..] != tail {
        return Err(WaveletError::Inconsistent(format!(
            "{what} has shape {shape:?}, expected {lead:?} followed by {tail:?}"
        )));
    }
    Ok(())
}

fn check_filter(coeffs_name: &str, filter: &WaveletFilter) -> Result<()> {
    if coeffs_name != filter.name {
        return Err(WaveletError::FilterMismatch {
            coeffs: coeffs_name.to_string(),
            filter: filter.name.clone(),
        });
    }
    Ok(())
}

fn check_header(level: usize, n_details: usize, zeta: usize, original: usize) -> Result<()> {
    if level == 0 {
        return Err(WaveletError::ZeroLevel);
    }
    if n_details != level {
        return Err(WaveletError::Inconsistent(format!(
            "{n_details} detail levels for a level-{level} decomposition"
        )));
    }
    if zeta << level != padded_len(original, level) {
        return Err(WaveletError::Inconsistent(format!(
            "coarsest band length {zeta} does not match original length {original} at level {level}"
        )));
    }
    Ok(())
}

/// Reconstructs the signal and truncates it to `original_len`.
pub fn idwt1d(coeffs: &DwtCoeffs, filter: &WaveletFilter) -> Result<Tensor> {
    check_filter(&coeffs.filter_name, filter)?;
    let shape = coeffs.approx.shape();
    let axis = shape
        .len()
        .checked_sub(1)
        .ok_or_else(|| WaveletError::Inconsistent("scalar approximation band".into()))?;
    let zeta = shape[axis];
    check_header(coeffs.level, coeffs.details.len(), zeta, coeffs.original_len)?;
    let lead = &shape[..axis];
    let mut cur = coeffs.approx.clone();
    for (i, d) in coeffs.details.iter().enumerate() {
        check_band(d, lead, &[zeta << i], "detail band")?;
        cur = synthesis_step(&Tensor::concat(&[&cur, d], axis)?, axis, filter)?;
    }
    Ok(cur.narrow(axis, 0, coeffs.original_len)?)
}

/// Multilevel separable 2D decomposition over the last two axes.
#[derive(Clone, Debug)]
pub struct DwtCoeffs2d {
    pub approx: Tensor,
    /// Per level, coarsest first: `[lo_h·hi_w, hi_h·lo_w, hi_h·hi_w]`, i.e.
    /// the LH, HL and HH bands (first letter along rows of the field).
    pub details: Vec<[Tensor; 3]>,
    /// Original `(H, W)`.
    pub original_len: (usize, usize),
    pub level: usize,
    pub filter_name: String,
}

impl DwtCoeffs2d {
    pub fn zeta(&self) -> (usize, usize) {
        let s = self.approx.shape();
        (s[s.len() - 2], s[s.len() - 1])
    }

    pub fn energy(&self) -> f64 {
        std::iter::once(&self.approx)
            .chain(self.details.iter().flatten())
            .flat_map(|t| t.data().iter())
            .map(|v| v * v)
            .sum()
    }
}

pub fn dwt2d(field: &Tensor, filter: &WaveletFilter, level: usize) -> Result<DwtCoeffs2d> {
    let rank = field.ndim();
    if rank < 2 {
        return Err(WaveletError::Inconsistent(format!(
            "2D transform needs at least two axes, got shape {:?}",
            field.shape()
        )));
    }
    let (ah, aw) = (rank - 2, rank - 1);
    let (h, w) = (field.shape()[ah], field.shape()[aw]);
    check_level(h, level, filter)?;
    check_level(w, level, filter)?;
    let mut cur = field
        .pad_zeros(ah, 0, padded_len(h, level) - h)?
        .pad_zeros(aw, 0, padded_len(w, level) - w)?;
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (hh, hw) = (cur.shape()[ah] / 2, cur.shape()[aw] / 2);
        // Rows first (filtering along W), then columns.
        let y = analysis_step(&analysis_step(&cur, aw, filter)?, ah, filter)?;
        let top = y.narrow(ah, 0, hh)?;
        let bottom = y.narrow(ah, hh, hh)?;
        details.push([
            top.narrow(aw, hw, hw)?,
            bottom.narrow(aw, 0, hw)?,
            bottom.narrow(aw, hw, hw)?,
        ]);
        cur = top.narrow(aw, 0, hw)?;
    }
    details.reverse();
    Ok(DwtCoeffs2d {
        approx: cur,
        details,
        original_len: (h, w),
        level,
        filter_name: filter.name.clone(),
    })
}

pub fn idwt2d(coeffs: &DwtCoeffs2d, filter: &WaveletFilter) -> Result<Tensor> {
    check_filter(&coeffs.filter_name, filter)?;
    let shape = coeffs.approx.shape();
    if shape.len() < 2 {
        return Err(WaveletError::Inconsistent("approximation band needs two axes".into()));
    }
    let (ah, aw) = (shape.len() - 2, shape.len() - 1);
    let (zh, zw) = coeffs.zeta();
    let (h, w) = coeffs.original_len;
    check_header(coeffs.level, coeffs.details.len(), zh, h)?;
    check_header(coeffs.level, coeffs.details.len(), zw, w)?;
    let lead = &shape[..ah];
    let mut cur = coeffs.approx.clone();
    for (i, [lh, hl, hh]) in coeffs.details.iter().enumerate() {
        let tail = [zh << i, zw << i];
        for band in [lh, hl, hh] {
            check_band(band, lead, &tail, "detail band")?;
        }
        let top = Tensor::concat(&[&cur, lh], aw)?;
        let bottom = Tensor::concat(&[hl, hh], aw)?;
        let y = Tensor::concat(&[&top, &bottom], ah)?;
        cur = synthesis_step(&synthesis_step(&y, ah, filter)?, aw, filter)?;
    }
    Ok(cur.narrow(ah, 0, h)?.narrow(aw, 0, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haar() -> WaveletFilter {
        WaveletFilter::by_name("db1").unwrap()
    }

    #[test]
    fn haar_constant_signal() {
        let c = 1.7;
        let x = Tensor::full(&[8], c);
        let co = dwt1d(&x, &haar(), 1).unwrap();
        for &v in co.approx.data() {
            assert!((v - c * 2f64.sqrt()).abs() < 1e-14);
        }
        assert!(co.details[0].data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn haar_pairs() {
        let x = Tensor::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let co = dwt1d(&x, &haar(), 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = co.approx.data();
        let d = co.details[0].data();
        assert!((a[0] - 3.0 * r).abs() < 1e-15 && (a[1] - 7.0 * r).abs() < 1e-15);
        assert!((d[0] + r).abs() < 1e-15 && (d[1] + r).abs() < 1e-15);
    }

    #[test]
    fn haar_zeroed_details_gives_pair_averages() {
        let x = Tensor::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let mut co = dwt1d(&x, &haar(), 1).unwrap();
        co.details[0] = Tensor::zeros(&[2]);
        let y = idwt1d(&co, &haar()).unwrap();
        for (a, b) in y.data().iter().zip([1.5, 1.5, 3.5, 3.5]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn band_lengths_halve() {
        let f = WaveletFilter::daubechies(3).unwrap();
        let co = dwt1d(&Tensor::zeros(&[2, 85]), &f, 3).unwrap();
        assert_eq!(co.approx.shape(), &[2, 11]);
        let lens: Vec<usize> = co.details.iter().map(|d| d.shape()[1]).collect();
        assert_eq!(lens, vec![11, 22, 44]);
        assert_eq!(co.zeta(), coarsest_len(85, 3));
    }

    #[test]
    fn level_limits() {
        assert_eq!(max_level(32), 6);
        assert_eq!(max_level(85), 7);
        assert_eq!(max_level(1024), 11);
        let f = WaveletFilter::daubechies(2).unwrap();
        let err = dwt1d(&Tensor::zeros(&[16]), &f, 6).unwrap_err();
        assert_eq!(err, WaveletError::LevelTooDeep { level: 6, len: 16, max: 5 });
        assert!(err.to_string().contains("maximum level is 5"));
        assert_eq!(dwt1d(&Tensor::zeros(&[16]), &f, 0).unwrap_err(), WaveletError::ZeroLevel);
        let db8 = WaveletFilter::daubechies(8).unwrap();
        assert!(matches!(
            dwt1d(&Tensor::zeros(&[10]), &db8, 1),
            Err(WaveletError::SignalTooShort { len: 10, filter_len: 16 })
        ));
    }

    #[test]
    fn mismatched_filter_rejected() {
        let co = dwt1d(&Tensor::zeros(&[16]), &haar(), 2).unwrap();
        let db2 = WaveletFilter::daubechies(2).unwrap();
        assert!(matches!(idwt1d(&co, &db2), Err(WaveletError::FilterMismatch { .. })));
    }

    #[test]
    fn inconsistent_bands_rejected() {
        let mut co = dwt1d(&Tensor::zeros(&[16]), &haar(), 2).unwrap();
        co.details.pop();
        assert!(matches!(idwt1d(&co, &haar()), Err(WaveletError::Inconsistent(_))));
        let mut co = dwt1d(&Tensor::zeros(&[16]), &haar(), 2).unwrap();
        co.details[1] = Tensor::zeros(&[5]);
        assert!(matches!(idwt1d(&co, &haar()), Err(WaveletError::Inconsistent(_))));
    }

    #[test]
    fn haar_constant_field() {
        let c = -0.6;
        let co = dwt2d(&Tensor::full(&[4, 6], c), &haar(), 1).unwrap();
        assert!(co.approx.data().iter().all(|v| (v - 2.0 * c).abs() < 1e-14));
        assert!(co.details[0].iter().all(|b| b.data().iter().all(|v| v.abs() < 1e-15)));
    }

    #[test]
    fn band_orientation_2d() {
        // A field varying only along W has energy only in the lo_h·hi_w band.
        let data: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let co = dwt2d(&Tensor::new(data, &[4, 4]).unwrap(), &haar(), 1).unwrap();
        let energy = |t: &Tensor| t.data().iter().map(|v| v * v).sum::<f64>();
        assert!(energy(&co.details[0][0]) > 1.0);
        assert!(energy(&co.details[0][1]) < 1e-28);
        assert!(energy(&co.details[0][2]) < 1e-28);
        assert!(energy(&co.approx) < 1e-28);
    }
}
