//! Cross-correlation convolutions (no kernel flip), pooling and upsampling.
//!
//! Convolutions lower to GEMM through an im2col buffer per batch item.
//! Batch items run independently; the weight gradient is reduced over
//! items in index order afterwards.

use super::{gemm, invalid, BackwardFn, Result, Tensor, TensorError};
use crate::par;

/// Boundary handling for convolutions.
///
/// `Zero` and `Periodic` pad `k - 1` entries per spatial axis
/// (`(k - 1) / 2` before, the rest after), so stride-1 outputs keep the
/// input extent. `None` applies no padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    Zero,
    Periodic,
    None,
}

#[derive(Clone, Copy, Debug)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: isize,
    pad_left: isize,
    oh: usize,
    ow: usize,
    periodic: bool,
}

impl Geom {
    fn new(c: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize, mode: PaddingMode) -> Result<Geom> {
        if stride == 0 {
            return invalid("conv", "stride must be at least 1");
        }
        let (pt_h, pt_w) = match mode {
            PaddingMode::None => (0, 0),
            _ => (kh - 1, kw - 1),
        };
        if kh == 0 || kw == 0 || h + pt_h < kh || w + pt_w < kw {
            return invalid(
                "conv",
                format!("kernel {kh}x{kw} larger than padded input {}x{}", h + pt_h, w + pt_w),
            );
        }
        Ok(Geom {
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad_top: (pt_h / 2) as isize,
            pad_left: (pt_w / 2) as isize,
            oh: (h + pt_h - kh) / stride + 1,
            ow: (w + pt_w - kw) / stride + 1,
            periodic: mode == PaddingMode::Periodic,
        })
    }

    fn cols_rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Maps a padded coordinate onto the input, or `None` for a zero pad.
    #[inline]
    fn source(&self, i: isize, n: usize) -> Option<usize> {
        if i >= 0 && (i as usize) < n {
            Some(i as usize)
        } else if self.periodic {
            Some(i.rem_euclid(n as isize) as usize)
        } else {
            None
        }
    }
}

impl Geom {
    /// For stride 1: the output columns `[lo, hi)` whose tap `kx` lands
    /// inside the row, so they can be copied as one slice.
    #[inline]
    fn interior(&self, kx: usize) -> (usize, usize) {
        let shift = kx as isize - self.pad_left;
        let lo = (-shift).clamp(0, self.ow as isize) as usize;
        let hi = (self.w as isize - shift).clamp(lo as isize, self.ow as isize) as usize;
        (lo, hi)
    }
}

fn im2col(x: &[f64], g: &Geom, cols: &mut [f64]) {
    let p = g.positions();
    for ci in 0..g.c {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                let (lo, hi) = if g.stride == 1 { g.interior(kx) } else { (0, 0) };
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top;
                    let seg = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let Some(sy) = g.source(iy, g.h) else {
                        seg.fill(0.0);
                        continue;
                    };
                    let src_row = &plane[sy * g.w..(sy + 1) * g.w];
                    if hi > lo {
                        let start = (lo as isize + kx as isize - g.pad_left) as usize;
                        seg[lo..hi].copy_from_slice(&src_row[start..start + hi - lo]);
                    }
                    for ox in (0..lo).chain(hi..g.ow) {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left;
                        seg[ox] = g.source(ix, g.w).map_or(0.0, |sx| src_row[sx]);
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], g: &Geom, x: &mut [f64]) {
    let p = g.positions();
    for ci in 0..g.c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let src = &cols[row * p..(row + 1) * p];
                let (lo, hi) = if g.stride == 1 { g.interior(kx) } else { (0, 0) };
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top;
                    let Some(sy) = g.source(iy, g.h) else { continue };
                    let seg = &src[oy * g.ow..(oy + 1) * g.ow];
                    let dst_row = &mut plane[sy * g.w..(sy + 1) * g.w];
                    if hi > lo {
                        let start = (lo as isize + kx as isize - g.pad_left) as usize;
                        for (d, v) in dst_row[start..start + hi - lo].iter_mut().zip(&seg[lo..hi]) {
                            *d += v;
                        }
                    }
                    for ox in (0..lo).chain(hi..g.ow) {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left;
                        if let Some(sx) = g.source(ix, g.w) {
                            dst_row[sx] += seg[ox];
                        }
                    }
                }
            }
        }
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Runs `f` with a per-thread buffer of `len` values. Contents are
/// unspecified; callers overwrite every entry they read.
fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    SCRATCH.with(|cell| {
        let mut buf = cell.take();
        buf.resize(len, 0.0);
        let r = f(&mut buf[..len]);
        cell.replace(buf);
        r
    })
}

/// Shared implementation over `[B, C, H, W]` inputs and `[O, C, KH, KW]` kernels.
fn conv_impl(op: &'static str, x: &Tensor, w: &Tensor, geom: Geom, batch: usize, out_shape: Vec<usize>) -> Tensor {
    let o = w.shape()[0];
    let rows = geom.cols_rows();
    let p = geom.positions();
    let in_item = geom.c * geom.h * geom.w;
    let mut out = vec![0.0; batch * o * p];
    {
        let (xd, wd) = (x.data(), w.data());
        par::for_each_chunk(&mut out, o * p, |b, chunk| {
            with_scratch(rows * p, |cols| {
                im2col(&xd[b * in_item..(b + 1) * in_item], &geom, cols);
                gemm(o, rows, p, wd, false, cols, false, chunk, 0.0);
            });
        });
    }
    let (xc, wc) = (x.clone(), w.clone());
    let backward: BackwardFn = Box::new(move |args| {
        let (need_x, need_w) = (args.needs[0], args.needs[1]);
        let (xd, wd, g) = (xc.data(), wc.data(), args.grad);
        let per_item: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)> = par::map_range(batch, |b| {
            let gb = &g[b * o * p..(b + 1) * o * p];
            let gx = need_x.then(|| {
                let mut gx = vec![0.0; in_item];
                with_scratch(rows * p, |gcols| {
                    gemm(rows, o, p, wd, true, gb, false, gcols, 0.0);
                    col2im(gcols, &geom, &mut gx);
                });
                gx
            });
            let gw = need_w.then(|| {
                let mut gw = vec![0.0; o * rows];
                with_scratch(rows * p, |cols| {
                    im2col(&xd[b * in_item..(b + 1) * in_item], &geom, cols);
                    gemm(o, p, rows, gb, false, cols, true, &mut gw, 0.0);
                });
                gw
            });
            (gx, gw)
        });
        let mut gx_all = need_x.then(|| Vec::with_capacity(batch * in_item));
        let mut gw_all = need_w.then(|| vec![0.0; o * rows]);
        for (gx, gw) in per_item {
            if let (Some(acc), Some(gx)) = (gx_all.as_mut(), gx) {
                acc.extend_from_slice(&gx);
            }
            if let (Some(acc), Some(gw)) = (gw_all.as_mut(), gw) {
                for (a, v) in acc.iter_mut().zip(&gw) {
                    *a += v;
                }
            }
        }
        vec![gx_all, gw_all]
    });
    Tensor::from_op(op, out, out_shape, vec![x.clone(), w.clone()], backward)
}

impl Tensor {
    /// 1-D convolution: `[B, C, N] ⋆ [O, C, K] -> [B, O, N']` with
    /// `N' = (N + pad_total - K) / stride + 1`.
    pub fn conv1d(&self, w: &Tensor, stride: usize, padding: PaddingMode) -> Result<Tensor> {
        let (xs, ws) = (self.shape(), w.shape());
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        let geom = Geom::new(xs[1], 1, xs[2], 1, ws[2], stride, padding)?;
        let out_shape = vec![xs[0], ws[0], geom.ow];
        Ok(conv_impl("conv1d", self, w, geom, xs[0], out_shape))
    }

    /// 2-D convolution: `[B, C, H, W] ⋆ [O, C, KH, KW] -> [B, O, H', W']`.
    pub fn conv2d(&self, w: &Tensor, stride: usize, padding: PaddingMode) -> Result<Tensor> {
        let (xs, ws) = (self.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        let geom = Geom::new(xs[1], xs[2], xs[3], ws[2], ws[3], stride, padding)?;
        let out_shape = vec![xs[0], ws[0], geom.oh, geom.ow];
        Ok(conv_impl("conv2d", self, w, geom, xs[0], out_shape))
    }

    /// Pointwise (1×1) convolution over the channel axis:
    /// `[B, C, ...] · [O, C] -> [B, O, ...]` for any number of spatial axes.
    pub fn conv_pointwise(&self, w: &Tensor) -> Result<Tensor> {
        let (xs, ws) = (self.shape(), w.shape());
        if xs.len() < 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv_pointwise",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        let (b, c, o) = (xs[0], xs[1], ws[0]);
        let s: usize = xs[2..].iter().product();
        let mut out = vec![0.0; b * o * s];
        let (xd, wd) = (self.data(), w.data());
        par::for_each_chunk(&mut out, o * s, |i, chunk| {
            gemm(o, c, s, wd, false, &xd[i * c * s..], false, chunk, 0.0);
        });
        let mut out_shape = xs.to_vec();
        out_shape[1] = o;
        let (xc, wc) = (self.clone(), w.clone());
        let backward: BackwardFn = Box::new(move |args| {
            let g = args.grad;
            let gx = args.needs[0].then(|| {
                let mut gx = vec![0.0; b * c * s];
                let wd = wc.data();
                par::for_each_chunk(&mut gx, c * s, |i, chunk| {
                    gemm(c, o, s, wd, true, &g[i * o * s..], false, chunk, 0.0);
                });
                gx
            });
            let gw = args.needs[1].then(|| {
                let xd = xc.data();
                let mut gw = vec![0.0; o * c];
                for i in 0..b {
                    gemm(o, s, c, &g[i * o * s..], false, &xd[i * c * s..], true, &mut gw, 1.0);
                }
                gw
            });
            vec![gx, gw]
        });
        Ok(Tensor::from_op(
            "conv_pointwise",
            out,
            out_shape,
            vec![self.clone(), w.clone()],
            backward,
        ))
    }

    /// 2×2 average pooling with stride 2 over the last two axes.
    pub fn avg_pool2d(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() < 2 {
            return invalid("avg_pool2d", format!("need at least 2 axes, got {s:?}"));
        }
        let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
        if h % 2 != 0 || w % 2 != 0 {
            return invalid("avg_pool2d", format!("spatial extent {h}x{w} must be even; pad first"));
        }
        Ok(pool_impl("avg_pool2d", self, h, w, 2))
    }

    /// Average pooling with window 2 and stride 2 over the last axis.
    pub fn avg_pool1d(&self) -> Result<Tensor> {
        let s = self.shape();
        let Some(&n) = s.last() else {
            return invalid("avg_pool1d", "rank-0 input");
        };
        if n % 2 != 0 {
            return invalid("avg_pool1d", format!("length {n} must be even; pad first"));
        }
        Ok(pool_impl("avg_pool1d", self, 1, n, 1))
    }

    /// Nearest-neighbour 2× upsampling of the last two axes.
    pub fn upsample2d(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() < 2 {
            return invalid("upsample2d", format!("need at least 2 axes, got {s:?}"));
        }
        Ok(upsample_impl("upsample2d", self, s[s.len() - 2], s[s.len() - 1], 2))
    }

    /// Nearest-neighbour 2× upsampling of the last axis.
    pub fn upsample1d(&self) -> Result<Tensor> {
        let Some(&n) = self.shape().last() else {
            return invalid("upsample1d", "rank-0 input");
        };
        Ok(upsample_impl("upsample1d", self, 1, n, 1))
    }
}

/// Pools planes of `h×w`; `fh` is the vertical factor (1 or 2).
fn pool_impl(op: &'static str, x: &Tensor, h: usize, w: usize, fh: usize) -> Tensor {
    let planes = x.numel() / (h * w);
    let (oh, ow) = (h / fh, w / 2);
    let scale = 1.0 / (2 * fh) as f64;
    let mut out = vec![0.0; planes * oh * ow];
    let xd = x.data();
    par::for_each_chunk(&mut out, oh * ow, |pi, dst| {
        let src = &xd[pi * h * w..(pi + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = 0.0;
                for dy in 0..fh {
                    let row = &src[(oy * fh + dy) * w..];
                    s += row[2 * ox] + row[2 * ox + 1];
                }
                dst[oy * ow + ox] = s * scale;
            }
        }
    });
    let mut out_shape = x.shape().to_vec();
    let r = out_shape.len();
    out_shape[r - 1] = ow;
    if fh == 2 {
        out_shape[r - 2] = oh;
    }
    let backward: BackwardFn = Box::new(move |args| {
        let mut g = vec![0.0; planes * h * w];
        par::for_each_chunk(&mut g, h * w, |pi, dst| {
            let src = &args.grad[pi * oh * ow..(pi + 1) * oh * ow];
            for y in 0..h {
                for xx in 0..w {
                    dst[y * w + xx] = src[(y / fh) * ow + xx / 2] * scale;
                }
            }
        });
        vec![Some(g)]
    });
    Tensor::from_op(op, out, out_shape, vec![x.clone()], backward)
}

fn upsample_impl(op: &'static str, x: &Tensor, h: usize, w: usize, fh: usize) -> Tensor {
    let planes = x.numel() / (h * w).max(1);
    let (oh, ow) = (h * fh, w * 2);
    let mut out = vec![0.0; planes * oh * ow];
    let xd = x.data();
    par::for_each_chunk(&mut out, oh * ow, |pi, dst| {
        let src = &xd[pi * h * w..(pi + 1) * h * w];
        for y in 0..oh {
            for xx in 0..ow {
                dst[y * ow + xx] = src[(y / fh) * w + xx / 2];
            }
        }
    });
    let mut out_shape = x.shape().to_vec();
    let r = out_shape.len();
    out_shape[r - 1] = ow;
    if fh == 2 {
        out_shape[r - 2] = oh;
    }
    let backward: BackwardFn = Box::new(move |args| {
        let mut g = vec![0.0; planes * h * w];
        par::for_each_chunk(&mut g, h * w, |pi, dst| {
            let src = &args.grad[pi * oh * ow..(pi + 1) * oh * ow];
            for y in 0..oh {
                for xx in 0..ow {
                    dst[(y / fh) * w + xx / 2] += src[y * ow + xx];
                }
            }
        });
        vec![Some(g)]
    });
    Tensor::from_op(op, out, out_shape, vec![x.clone()], backward)
}
