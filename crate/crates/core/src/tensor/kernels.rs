//! Raw numeric kernels behind the tape ops.
//!
//! Every kernel writes each output element from exactly one thread with a
//! fixed sequential accumulation order, so results are bit-identical
//! regardless of the rayon thread count.

use rayon::prelude::*;

/// Work threshold below which kernels stay single-threaded.
const PAR_FLOPS: usize = 1 << 16;

/// out[m×n] = a[m×k] · b[k×n]
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |out_row: &mut [f64], i: usize| {
        out_row.fill(0.0);
        for l in 0..k {
            let a_il = a[i * k + l];
            if a_il == 0.0 {
                continue;
            }
            let b_row = &b[l * n..(l + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += a_il * bv;
            }
        }
    };
    if m * k * n >= PAR_FLOPS {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(r, i));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(r, i);
        }
    }
}

/// out[m×k] = a[m×n] · b[k×n]ᵀ  (dot products of rows)
pub fn matmul_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    let row = |out_row: &mut [f64], i: usize| {
        let a_row = &a[i * n..(i + 1) * n];
        for (l, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[l * n..(l + 1) * n];
            let mut s = 0.0;
            for (av, bv) in a_row.iter().zip(b_row) {
                s += av * bv;
            }
            *o = s;
        }
    };
    if m * n * k >= PAR_FLOPS {
        out.par_chunks_mut(k).enumerate().for_each(|(i, r)| row(r, i));
    } else {
        for (i, r) in out.chunks_mut(k).enumerate() {
            row(r, i);
        }
    }
}

/// out[k×n] = a[m×k]ᵀ · b[m×n]
pub fn matmul_tn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let row = |out_row: &mut [f64], l: usize| {
        out_row.fill(0.0);
        for i in 0..m {
            let a_il = a[i * k + l];
            if a_il == 0.0 {
                continue;
            }
            let b_row = &b[i * n..(i + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += a_il * bv;
            }
        }
    };
    if m * k * n >= PAR_FLOPS {
        out.par_chunks_mut(n).enumerate().for_each(|(l, r)| row(r, l));
    } else {
        for (l, r) in out.chunks_mut(n).enumerate() {
            row(r, l);
        }
    }
}

/// Geometry of one conv2d application.
#[derive(Debug, Clone, Copy)]
pub struct ConvDims {
    pub c_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvDims {
    pub fn h_out(&self) -> usize {
        (self.h_in + 2 * self.pad - self.kh) / self.stride + 1
    }
    pub fn w_out(&self) -> usize {
        (self.w_in + 2 * self.pad - self.kw) / self.stride + 1
    }
}

/// Direct convolution with explicit zero padding.
/// x: [c_in, h_in, w_in], w: [c_out, c_in, kh, kw], bias: [c_out] optional.
pub fn conv2d(x: &[f64], w: &[f64], bias: Option<&[f64]>, out: &mut [f64], d: &ConvDims) {
    let (ho, wo) = (d.h_out(), d.w_out());
    debug_assert_eq!(out.len(), d.c_out * ho * wo);
    let plane = |out_plane: &mut [f64], o: usize| {
        let base = bias.map_or(0.0, |b| b[o]);
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = base;
                for ci in 0..d.c_in {
                    for ky in 0..d.kh {
                        let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                        if iy < 0 || iy >= d.h_in as isize {
                            continue;
                        }
                        let x_row = &x[ci * d.h_in * d.w_in + iy as usize * d.w_in..];
                        let w_row = &w[((o * d.c_in + ci) * d.kh + ky) * d.kw..];
                        for kx in 0..d.kw {
                            let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                            if ix < 0 || ix >= d.w_in as isize {
                                continue;
                            }
                            acc += x_row[ix as usize] * w_row[kx];
                        }
                    }
                }
                out_plane[oy * wo + ox] = acc;
            }
        }
    };
    let flops = d.c_out * ho * wo * d.c_in * d.kh * d.kw;
    if flops >= PAR_FLOPS {
        out.par_chunks_mut(ho * wo).enumerate().for_each(|(o, p)| plane(p, o));
    } else {
        for (o, p) in out.chunks_mut(ho * wo).enumerate() {
            plane(p, o);
        }
    }
}

/// Gradient w.r.t. the input of `conv2d`, gather form (one thread per input channel).
pub fn conv2d_grad_x(d_out: &[f64], w: &[f64], d_x: &mut [f64], d: &ConvDims) {
    let (ho, wo) = (d.h_out(), d.w_out());
    let plane = |dx_plane: &mut [f64], ci: usize| {
        for iy in 0..d.h_in {
            for ix in 0..d.w_in {
                let mut acc = 0.0;
                for o in 0..d.c_out {
                    let d_plane = &d_out[o * ho * wo..(o + 1) * ho * wo];
                    for ky in 0..d.kh {
                        // oy*stride + ky - pad = iy  =>  oy = (iy + pad - ky)/stride
                        let num_y = iy as isize + d.pad as isize - ky as isize;
                        if num_y < 0 || num_y % d.stride as isize != 0 {
                            continue;
                        }
                        let oy = (num_y / d.stride as isize) as usize;
                        if oy >= ho {
                            continue;
                        }
                        for kx in 0..d.kw {
                            let num_x = ix as isize + d.pad as isize - kx as isize;
                            if num_x < 0 || num_x % d.stride as isize != 0 {
                                continue;
                            }
                            let ox = (num_x / d.stride as isize) as usize;
                            if ox >= wo {
                                continue;
                            }
                            acc += d_plane[oy * wo + ox] * w[((o * d.c_in + ci) * d.kh + ky) * d.kw + kx];
                        }
                    }
                }
                dx_plane[iy * d.w_in + ix] = acc;
            }
        }
    };
    let flops = d.c_in * d.h_in * d.w_in * d.c_out * d.kh * d.kw;
    if flops >= PAR_FLOPS {
        d_x.par_chunks_mut(d.h_in * d.w_in).enumerate().for_each(|(ci, p)| plane(p, ci));
    } else {
        for (ci, p) in d_x.chunks_mut(d.h_in * d.w_in).enumerate() {
            plane(p, ci);
        }
    }
}

/// Gradients w.r.t. the kernel and bias of `conv2d` (one thread per output channel).
pub fn conv2d_grad_w(
    d_out: &[f64],
    x: &[f64],
    d_w: &mut [f64],
    mut d_b: Option<&mut [f64]>,
    d: &ConvDims,
) {
    let (ho, wo) = (d.h_out(), d.w_out());
    let per_out = |dw_o: &mut [f64], db_o: Option<&mut f64>, o: usize| {
        let d_plane = &d_out[o * ho * wo..(o + 1) * ho * wo];
        if let Some(db) = db_o {
            *db = d_plane.iter().sum();
        }
        for ci in 0..d.c_in {
            let x_plane = &x[ci * d.h_in * d.w_in..(ci + 1) * d.h_in * d.w_in];
            for ky in 0..d.kh {
                for kx in 0..d.kw {
                    let mut acc = 0.0;
                    for oy in 0..ho {
                        let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                        if iy < 0 || iy >= d.h_in as isize {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                            if ix < 0 || ix >= d.w_in as isize {
                                continue;
                            }
                            acc += d_plane[oy * wo + ox] * x_plane[iy as usize * d.w_in + ix as usize];
                        }
                    }
                    dw_o[(ci * d.kh + ky) * d.kw + kx] = acc;
                }
            }
        }
    };
    let w_per_out = d.c_in * d.kh * d.kw;
    let flops = d.c_out * w_per_out * ho * wo;
    if flops >= PAR_FLOPS {
        match d_b {
            Some(db) => d_w
                .par_chunks_mut(w_per_out)
                .zip(db.par_iter_mut())
                .enumerate()
                .for_each(|(o, (dw, db))| per_out(dw, Some(db), o)),
            None => d_w
                .par_chunks_mut(w_per_out)
                .enumerate()
                .for_each(|(o, dw)| per_out(dw, None, o)),
        }
    } else {
        for (o, dw) in d_w.chunks_mut(w_per_out).enumerate() {
            per_out(dw, d_b.as_deref_mut().map(|db| &mut db[o]), o);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let b = [3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 4];
        matmul(&a, &b, &mut out, 2, 2, 2);
        assert_eq!(out, b);
    }

    #[test]
    fn matmul_variants_agree() {
        // a: 3x2, b: 2x4. Check nt/tn against explicit transposes.
        let a: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let mut c = vec![0.0; 12];
        matmul(&a, &b, &mut c, 3, 2, 4);

        // c = a·b  =>  c·bᵀ recovers a·(b·bᵀ); compare nt against matmul of transpose
        let mut bt = vec![0.0; 8];
        for i in 0..2 {
            for j in 0..4 {
                bt[j * 2 + i] = b[i * 4 + j];
            }
        }
        let mut c2 = vec![0.0; 12];
        matmul_nt(&a, &bt, &mut c2, 3, 2, 4);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut at = vec![0.0; 6];
        for i in 0..3 {
            for j in 0..2 {
                at[j * 3 + i] = a[i * 2 + j];
            }
        }
        let mut c3 = vec![0.0; 12];
        matmul_tn(&at, &b, &mut c3, 2, 3, 4);
        for (x, y) in c.iter().zip(&c3) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_pointwise_scaling() {
        // 1x3x3 ones through one 1x1 kernel of value 2 -> all twos.
        let x = vec![1.0; 9];
        let w = vec![2.0];
        let d = ConvDims { c_in: 1, h_in: 3, w_in: 3, c_out: 1, kh: 1, kw: 1, stride: 1, pad: 0 };
        let mut out = vec![0.0; 9];
        conv2d(&x, &w, None, &mut out, &d);
        assert!(out.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn conv2d_same_padding_halves_odd_extent() {
        // kernel 3, stride 2, pad 1: 127 -> 64, matching ceil(n/2).
        let d = ConvDims { c_in: 1, h_in: 127, w_in: 127, c_out: 1, kh: 3, kw: 3, stride: 2, pad: 1 };
        assert_eq!(d.h_out(), 64);
        let d2 = ConvDims { h_in: 289, w_in: 289, stride: 1, ..d };
        assert_eq!(d2.h_out(), 289);
    }
}
