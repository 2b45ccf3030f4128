//! Layer kernels: zero-padded 3×3 convolution, 2×2 max pooling and
//! nearest-neighbor upsampling, with their adjoints.
//!
//! Kernel weights are laid out [out][in][ky][kx]. Each convolution row is
//! processed as one fused three-tap pass (boundaries peeled off), so the
//! interior loop is a straight elementwise multiply-add over four
//! contiguous slices.

use super::tensor::Tensor;

/// Valid output range along one axis for kernel offset `k` ∈ {0,1,2}
/// (shift k−1) with zero padding.
#[inline]
fn valid_range(k: usize, len: usize) -> (usize, usize) {
    let lo = 1usize.saturating_sub(k);
    let hi = (len + 1).saturating_sub(k).min(len);
    (lo, hi)
}

/// orow[x] += w0·irow[x−1] + w1·irow[x] + w2·irow[x+1], out-of-range taps
/// reading zero.
#[inline]
fn row_conv3(irow: &[f64], orow: &mut [f64], w0: f64, w1: f64, w2: f64) {
    let wd = irow.len();
    debug_assert_eq!(orow.len(), wd);
    if wd == 1 {
        orow[0] += w1 * irow[0];
        return;
    }
    orow[0] += w1 * irow[0] + w2 * irow[1];
    let n = wd - 2;
    {
        let (a, b, c) = (&irow[..n], &irow[1..1 + n], &irow[2..2 + n]);
        for (((o, &av), &bv), &cv) in orow[1..1 + n].iter_mut().zip(a).zip(b).zip(c) {
            *o += w0 * av + w1 * bv + w2 * cv;
        }
    }
    orow[wd - 1] += w0 * irow[wd - 2] + w1 * irow[wd - 1];
}

/// Correlations of one row pair at the three horizontal shifts:
/// (Σ irow[x−1]·zrow[x], Σ irow[x]·zrow[x], Σ irow[x+1]·zrow[x]).
#[inline]
fn row_corr3(irow: &[f64], zrow: &[f64]) -> (f64, f64, f64) {
    let wd = irow.len();
    debug_assert_eq!(zrow.len(), wd);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for x in 0..wd {
        let z = zrow[x];
        if x >= 1 {
            s0 += irow[x - 1] * z;
        }
        s1 += irow[x] * z;
        if x + 1 < wd {
            s2 += irow[x + 1] * z;
        }
    }
    (s0, s1, s2)
}

/// z[co] = b[co] + Σ_ci w[co][ci] * input[ci], zero-padded to keep h×w.
pub(crate) fn conv3x3_forward(input: &Tensor, w: &[f64], b: &[f64], out_ch: usize) -> Tensor {
    let (h, wd) = (input.h, input.w);
    let in_ch = input.ch;
    debug_assert_eq!(w.len(), out_ch * in_ch * 9);
    debug_assert_eq!(b.len(), out_ch);
    let mut out = Tensor::zeros(out_ch, h, wd);
    let plane = h * wd;
    for co in 0..out_ch {
        out.plane_mut(co).fill(b[co]);
        let oplane = &mut out.data[co * plane..(co + 1) * plane];
        for ci in 0..in_ch {
            let iplane = input.plane(ci);
            let wbase = (co * in_ch + ci) * 9;
            for ky in 0..3 {
                let w0 = w[wbase + ky * 3];
                let w1 = w[wbase + ky * 3 + 1];
                let w2 = w[wbase + ky * 3 + 2];
                if w0 == 0.0 && w1 == 0.0 && w2 == 0.0 {
                    continue;
                }
                let (y0, y1) = valid_range(ky, h);
                for y in y0..y1 {
                    let iy = y + ky - 1;
                    row_conv3(
                        &iplane[iy * wd..(iy + 1) * wd],
                        &mut oplane[y * wd..(y + 1) * wd],
                        w0,
                        w1,
                        w2,
                    );
                }
            }
        }
    }
    out
}

/// Backward pass of the convolution: accumulates the weight/bias gradients
/// and returns the gradient w.r.t. the input.
pub(crate) fn conv3x3_backward(
    input: &Tensor,
    dz: &Tensor,
    w: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Tensor {
    let (h, wd) = (input.h, input.w);
    let in_ch = input.ch;
    let out_ch = dz.ch;
    let plane = h * wd;
    let mut dinput = Tensor::zeros(in_ch, h, wd);
    for co in 0..out_ch {
        let zplane = dz.plane(co);
        db[co] += zplane.iter().sum::<f64>();
        for ci in 0..in_ch {
            let iplane = input.plane(ci);
            let dplane = &mut dinput.data[ci * plane..(ci + 1) * plane];
            let wbase = (co * in_ch + ci) * 9;
            for ky in 0..3 {
                let (y0, y1) = valid_range(ky, h);
                let w0 = w[wbase + ky * 3];
                let w1 = w[wbase + ky * 3 + 1];
                let w2 = w[wbase + ky * 3 + 2];
                let mut g0 = 0.0;
                let mut g1 = 0.0;
                let mut g2 = 0.0;
                let propagate = w0 != 0.0 || w1 != 0.0 || w2 != 0.0;
                for y in y0..y1 {
                    let iy = y + ky - 1;
                    let irow = &iplane[iy * wd..(iy + 1) * wd];
                    let zrow = &zplane[y * wd..(y + 1) * wd];
                    let (s0, s1, s2) = row_corr3(irow, zrow);
                    g0 += s0;
                    g1 += s1;
                    g2 += s2;
                    // Adjoint of the shifted accumulation: the kernel acts
                    // flipped on the upstream gradient.
                    if propagate {
                        row_conv3(
                            zrow,
                            &mut dplane[iy * wd..(iy + 1) * wd],
                            w2,
                            w1,
                            w0,
                        );
                    }
                }
                dw[wbase + ky * 3] += g0;
                dw[wbase + ky * 3 + 1] += g1;
                dw[wbase + ky * 3 + 2] += g2;
            }
        }
    }
    dinput
}

/// 2×2 max pooling with stride 2. Ties go to the first element in scan
/// order. Also returns the flat argmax index per output cell for the
/// backward scatter.
pub(crate) fn maxpool2_forward(input: &Tensor) -> (Tensor, Vec<usize>) {
    debug_assert!(input.h % 2 == 0 && input.w % 2 == 0);
    let (oh, ow) = (input.h / 2, input.w / 2);
    let mut out = Tensor::zeros(input.ch, oh, ow);
    let mut argmax = vec![0usize; input.ch * oh * ow];
    for c in 0..input.ch {
        let ip = input.plane(c);
        let base = c * oh * ow;
        for y in 0..oh {
            for x in 0..ow {
                let mut best_idx = (2 * y) * input.w + 2 * x;
                let mut best = ip[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * y + dy) * input.w + 2 * x + dx;
                    if ip[idx] > best {
                        best = ip[idx];
                        best_idx = idx;
                    }
                }
                out.data[base + y * ow + x] = best;
                argmax[base + y * ow + x] = best_idx;
            }
        }
    }
    (out, argmax)
}

pub(crate) fn maxpool2_backward(
    dout: &Tensor,
    argmax: &[usize],
    in_h: usize,
    in_w: usize,
) -> Tensor {
    let mut dinput = Tensor::zeros(dout.ch, in_h, in_w);
    let osz = dout.h * dout.w;
    for c in 0..dout.ch {
        let dop = &dout.data[c * osz..(c + 1) * osz];
        let am = &argmax[c * osz..(c + 1) * osz];
        let dip = dinput.plane_mut(c);
        for (g, &idx) in dop.iter().zip(am) {
            dip[idx] += g;
        }
    }
    dinput
}

/// Nearest-neighbor 2× upsampling.
pub(crate) fn upsample2_forward(input: &Tensor) -> Tensor {
    let (oh, ow) = (input.h * 2, input.w * 2);
    let mut out = Tensor::zeros(input.ch, oh, ow);
    for c in 0..input.ch {
        let ip = input.plane(c);
        let op = out.plane_mut(c);
        for y in 0..input.h {
            for x in 0..input.w {
                let v = ip[y * input.w + x];
                let o = (2 * y) * ow + 2 * x;
                op[o] = v;
                op[o + 1] = v;
                op[o + ow] = v;
                op[o + ow + 1] = v;
            }
        }
    }
    out
}

pub(crate) fn upsample2_backward(dout: &Tensor) -> Tensor {
    let (ih, iw) = (dout.h / 2, dout.w / 2);
    let mut dinput = Tensor::zeros(dout.ch, ih, iw);
    for c in 0..dout.ch {
        let dop = dout.plane(c);
        let dip = dinput.plane_mut(c);
        for y in 0..ih {
            for x in 0..iw {
                let o = (2 * y) * dout.w + 2 * x;
                dip[y * iw + x] = dop[o] + dop[o + 1] + dop[o + dout.w] + dop[o + dout.w + 1];
            }
        }
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel_passes_through() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0; // center tap
        let input = Tensor::from_plane(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        let z = conv3x3_forward(&input, &w, &[0.0], 1);
        assert_eq!(z.data, input.data);
    }

    #[test]
    fn conv_shift_kernel_respects_zero_padding() {
        // Kernel selecting the left neighbor: output[x] = input[x-1].
        let mut w = vec![0.0; 9];
        w[3] = 1.0; // ky=1 (no vertical shift), kx=0 (dx = -1)
        let input = Tensor::from_plane(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3);
        let z = conv3x3_forward(&input, &w, &[0.0], 1);
        assert_eq!(z.data, vec![0.0, 1.0, 2.0, 0.0, 4.0, 5.0]);
    }

    #[test]
    fn conv_matches_direct_stencil_evaluation() {
        // Dense random kernel against an index-by-index reference.
        let (h, wd, in_ch, out_ch) = (5, 7, 3, 2);
        let mut seed = 0x59u64;
        let mut next = || {
            seed = crate::rng::splitmix64(seed);
            (seed as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let input = Tensor {
            ch: in_ch,
            h,
            w: wd,
            data: (0..in_ch * h * wd).map(|_| next()).collect(),
        };
        let w: Vec<f64> = (0..out_ch * in_ch * 9).map(|_| next()).collect();
        let b: Vec<f64> = (0..out_ch).map(|_| next()).collect();
        let z = conv3x3_forward(&input, &w, &b, out_ch);
        for co in 0..out_ch {
            for y in 0..h {
                for x in 0..wd {
                    let mut expect = b[co];
                    for ci in 0..in_ch {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = y as isize + ky as isize - 1;
                                let ix = x as isize + kx as isize - 1;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < wd as isize {
                                    expect += w[((co * in_ch + ci) * 3 + ky) * 3 + kx]
                                        * input.plane(ci)[iy as usize * wd + ix as usize];
                                }
                            }
                        }
                    }
                    let got = z.plane(co)[y * wd + x];
                    assert!(
                        (got - expect).abs() < 1e-12,
                        "({co},{y},{x}): {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn maxpool_picks_first_on_ties() {
        let input = Tensor::from_plane(&[5.0, 5.0, 5.0, 5.0], 2, 2);
        let (out, argmax) = maxpool2_forward(&input);
        assert_eq!(out.data, vec![5.0]);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn upsample_then_downsample_adjointness() {
        // <up(x), y> == <x, up_backward(y)> for the nearest-neighbor pair.
        let x = Tensor::from_plane(&[1.0, -2.0, 0.5, 3.0], 2, 2);
        let y = Tensor::from_plane(
            &(0..16).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>(),
            4,
            4,
        );
        let ux = upsample2_forward(&x);
        let uty = upsample2_backward(&y);
        let lhs: f64 = ux.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&uty.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn conv_backward_is_adjoint_of_forward() {
        // <conv(x), z> == <x, conv_backward_input(z)> with zero bias.
        let (h, wd, in_ch, out_ch) = (4, 6, 2, 3);
        let mut seed = 0x77u64;
        let mut next = || {
            seed = crate::rng::splitmix64(seed);
            (seed as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let x = Tensor {
            ch: in_ch,
            h,
            w: wd,
            data: (0..in_ch * h * wd).map(|_| next()).collect(),
        };
        let z = Tensor {
            ch: out_ch,
            h,
            w: wd,
            data: (0..out_ch * h * wd).map(|_| next()).collect(),
        };
        let w: Vec<f64> = (0..out_ch * in_ch * 9).map(|_| next()).collect();
        let fx = conv3x3_forward(&x, &w, &vec![0.0; out_ch], out_ch);
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; out_ch];
        let atz = conv3x3_backward(&x, &z, &w, &mut dw, &mut db);
        let lhs: f64 = fx.data.iter().zip(&z.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&atz.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}
