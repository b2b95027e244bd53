//! Same-padded stride-1 2D cross-correlation.
//!
//! Each kernel tap is one GEMM over the zero-padded input raster: for tap
//! (ky, kx) the padded output position u pulls padded input position
//! u + ky·Wp + kx, a constant offset, so the whole tap is a [Cout, Cin] ×
//! [Cin, span] product with unit column stride. Positions whose column falls
//! in the horizontal padding compute garbage that the crop step discards.

use rand_chacha::ChaCha8Rng;

use super::elem::missing_cache;
use super::{init, Param, Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    /// [cout, cin, kh, kw]
    pub w: Param,
    /// [cout]
    pub b: Param,
    x: Option<Tensor>,
}

impl Conv2d {
    pub fn new(cin: usize, cout: usize, kh: usize, kw: usize, rng: &mut ChaCha8Rng) -> Conv2d {
        assert!(cin > 0 && cout > 0 && kh > 0 && kw > 0);
        let fan_in = cin * kh * kw;
        let w = Tensor::from_vec(
            &[cout, cin, kh, kw],
            init::fan_in_uniform(rng, fan_in, cout * fan_in),
        );
        Conv2d {
            cin,
            cout,
            kh,
            kw,
            w: Param::new(w),
            b: Param::new(Tensor::zeros(&[cout])),
            x: None,
        }
    }

    fn geometry(&self, h: usize, w: usize) -> (usize, usize, usize, usize, usize) {
        let pt = (self.kh - 1) / 2;
        let pl = (self.kw - 1) / 2;
        let hp = h + self.kh - 1;
        let wp = w + self.kw - 1;
        let span = (h - 1) * wp + w;
        (pt, pl, hp, wp, span)
    }

    /// Zero-pads one sample of `x` into `xp` ([cin, hp, wp]).
    fn pad_sample(&self, x: &Tensor, bi: usize, pt: usize, pl: usize, wp: usize, xp: &mut [f64]) {
        let (c, h, w) = (self.cin, x.dim(2), x.dim(3));
        let hp = h + self.kh - 1;
        xp.fill(0.0);
        for ci in 0..c {
            for yy in 0..h {
                let src = ((bi * c + ci) * h + yy) * w;
                let dst = ci * hp * wp + (yy + pt) * wp + pl;
                xp[dst..dst + w].copy_from_slice(&x.data[src..src + w]);
            }
        }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        if x.rank() != 4 || x.dim(1) != self.cin {
            return Err(Error::shape(
                "conv2d",
                format!("[B, {}, H, W]", self.cin),
                format!("{:?}", x.shape),
            ));
        }
        let (bsz, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        let (pt, pl, hp, wp, span) = self.geometry(h, w);
        let mut xp = vec![0.0; self.cin * hp * wp];
        let mut yp = vec![0.0; self.cout * span];
        let mut y = Tensor::zeros(&[bsz, self.cout, h, w]);
        let (khw, ckhw) = (self.kh * self.kw, self.cin * self.kh * self.kw);
        for bi in 0..bsz {
            self.pad_sample(&x, bi, pt, pl, wp, &mut xp);
            let mut beta = 0.0;
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    unsafe {
                        matrixmultiply::dgemm(
                            self.cout, self.cin, span, 1.0,
                            self.w.value.data.as_ptr().add(ky * self.kw + kx),
                            ckhw as isize, khw as isize,
                            xp.as_ptr().add(ky * wp + kx),
                            (hp * wp) as isize, 1,
                            beta,
                            yp.as_mut_ptr(), span as isize, 1,
                        );
                    }
                    beta = 1.0;
                }
            }
            for co in 0..self.cout {
                let bias = self.b.value.data[co];
                for yy in 0..h {
                    let src = co * span + yy * wp;
                    let dst = ((bi * self.cout + co) * h + yy) * w;
                    for xx in 0..w {
                        y.data[dst + xx] = yp[src + xx] + bias;
                    }
                }
            }
        }
        self.x = if phase == Phase::Train { Some(x) } else { None };
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let x = self.x.take().ok_or_else(|| missing_cache("conv2d"))?;
        let (bsz, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        dy.check_shape(&[bsz, self.cout, h, w], "conv2d backward")?;
        let (pt, pl, hp, wp, span) = self.geometry(h, w);
        let mut xp = vec![0.0; self.cin * hp * wp];
        let mut dxp = vec![0.0; self.cin * hp * wp];
        let mut dyp = vec![0.0; self.cout * span];
        let mut dx = Tensor::zeros(&[bsz, self.cin, h, w]);
        let (khw, ckhw) = (self.kh * self.kw, self.cin * self.kh * self.kw);

        for co in 0..self.cout {
            let mut s = 0.0;
            for bi in 0..bsz {
                let base = ((bi * self.cout + co) * h) * w;
                s += dy.data[base..base + h * w].iter().sum::<f64>();
            }
            self.b.grad.data[co] += s;
        }

        for bi in 0..bsz {
            self.pad_sample(&x, bi, pt, pl, wp, &mut xp);
            // dy in padded raster coordinates; horizontal-pad columns stay 0
            dyp.fill(0.0);
            for co in 0..self.cout {
                for yy in 0..h {
                    let src = ((bi * self.cout + co) * h + yy) * w;
                    let dst = co * span + yy * wp;
                    dyp[dst..dst + w].copy_from_slice(&dy.data[src..src + w]);
                }
            }
            dxp.fill(0.0);
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let off = ky * wp + kx;
                    unsafe {
                        // dw[co, ci, tap] += Σ_u dyp[co, u] · xp[ci, u + off]
                        matrixmultiply::dgemm(
                            self.cout, span, self.cin, 1.0,
                            dyp.as_ptr(), span as isize, 1,
                            xp.as_ptr().add(off), 1, (hp * wp) as isize,
                            1.0,
                            self.w.grad.data.as_mut_ptr().add(ky * self.kw + kx),
                            ckhw as isize, khw as isize,
                        );
                        // dxp[ci, u + off] += Σ_co w[co, ci, tap] · dyp[co, u]
                        matrixmultiply::dgemm(
                            self.cin, self.cout, span, 1.0,
                            self.w.value.data.as_ptr().add(ky * self.kw + kx),
                            khw as isize, ckhw as isize,
                            dyp.as_ptr(), span as isize, 1,
                            1.0,
                            dxp.as_mut_ptr().add(off), (hp * wp) as isize, 1,
                        );
                    }
                }
            }
            for ci in 0..self.cin {
                for yy in 0..h {
                    let src = ci * hp * wp + (yy + pt) * wp + pl;
                    let dst = ((bi * self.cin + ci) * h + yy) * w;
                    dx.data[dst..dst + w].copy_from_slice(&dxp[src..src + w]);
                }
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    /// Direct-definition oracle: same-padded cross-correlation.
    fn naive_conv(x: &Tensor, w: &Tensor, b: &[f64]) -> Tensor {
        let (bsz, cin, h, wd) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (cout, _, kh, kw) = (w.dim(0), w.dim(1), w.dim(2), w.dim(3));
        let (pt, pl) = ((kh - 1) / 2, (kw - 1) / 2);
        let mut y = Tensor::zeros(&[bsz, cout, h, wd]);
        for bi in 0..bsz {
            for co in 0..cout {
                for yy in 0..h {
                    for xx in 0..wd {
                        let mut acc = b[co];
                        for ci in 0..cin {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = yy as isize + ky as isize - pt as isize;
                                    let ix = xx as isize + kx as isize - pl as isize;
                                    if iy >= 0 && iy < h as isize && ix >= 0 && ix < wd as isize {
                                        acc += x.data
                                            [((bi * cin + ci) * h + iy as usize) * wd + ix as usize]
                                            * w.data[((co * cin + ci) * kh + ky) * kw + kx];
                                    }
                                }
                            }
                        }
                        y.data[((bi * cout + co) * h + yy) * wd + xx] = acc;
                    }
                }
            }
        }
        y
    }

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        use rand::Rng;
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn impulse_with_ones_kernel_makes_a_plateau() {
        let mut conv = Conv2d::new(1, 1, 3, 3, &mut rng());
        conv.w.value.data.fill(1.0);
        conv.b.value.data.fill(0.0);
        let mut x = Tensor::zeros(&[1, 1, 5, 5]);
        x.data[2 * 5 + 2] = 1.0; // interior impulse
        let y = conv.forward(x, Phase::Infer).unwrap();
        for yy in 0..5 {
            for xx in 0..5 {
                let want = if (1..=3).contains(&yy) && (1..=3).contains(&xx) { 1.0 } else { 0.0 };
                assert_eq!(y.data[yy * 5 + xx], want, "at ({yy},{xx})");
            }
        }
    }

    #[test]
    fn matches_direct_definition_on_random_cases() {
        let mut r = rng();
        for &(cin, cout, kh, kw, h, w) in &[
            (1, 4, 3, 3, 6, 9),
            (3, 2, 6, 6, 7, 8),   // even kernel: pad splits 2/3
            (2, 3, 4, 4, 5, 5),
            (2, 2, 1, 1, 4, 6),   // 1×1 projection
            (1, 2, 6, 4, 3, 11),  // non-square, h smaller than kernel
        ] {
            let mut conv = Conv2d::new(cin, cout, kh, kw, &mut r);
            let x = random_tensor(&[2, cin, h, w], &mut r);
            let want = naive_conv(&x, &conv.w.value, &conv.b.value.data);
            let got = conv.forward(x, Phase::Infer).unwrap();
            assert_eq!(got.shape, want.shape);
            for (a, b) in got.data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-10, "cin={cin} cout={cout} k={kh}x{kw}");
            }
        }
    }

    #[test]
    fn even_kernel_pads_less_before_than_after() {
        // k=4 → pad_top 1, pad_bottom 2: an impulse at (0,0) with an
        // all-ones kernel must still see the kernel rows that overlap.
        let mut conv = Conv2d::new(1, 1, 4, 4, &mut rng());
        conv.w.value.data.fill(0.0);
        conv.b.value.data.fill(0.0);
        // only the tap at (ky=1, kx=1) active: output (y,x) = input (y, x)
        conv.w.value.data[1 * 4 + 1] = 1.0;
        let mut x = Tensor::zeros(&[1, 1, 4, 4]);
        x.data[0] = 1.0;
        let y = conv.forward(x, Phase::Infer).unwrap();
        assert_eq!(y.data[0], 1.0);
        assert_eq!(y.data.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn backward_matches_naive_accumulation() {
        let mut r = rng();
        let mut conv = Conv2d::new(2, 3, 3, 3, &mut r);
        let x = random_tensor(&[2, 2, 4, 5], &mut r);
        let dy = random_tensor(&[2, 3, 4, 5], &mut r);
        let _ = conv.forward(x.clone(), Phase::Train).unwrap();
        let dx = conv.backward(dy.clone()).unwrap();

        // loss = Σ dy ⊙ conv(x): finite differences on a few coordinates
        let eval = |conv: &mut Conv2d, x: &Tensor| -> f64 {
            let y = conv.forward(x.clone(), Phase::Infer).unwrap();
            y.data.iter().zip(&dy.data).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for &i in &[0usize, 7, 33, 79] {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (eval(&mut conv, &xp) - eval(&mut conv, &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-5, "dx[{i}]: fd {fd} vs {}", dx.data[i]);
        }
        for &i in &[0usize, 5, 53] {
            let orig = conv.w.value.data[i];
            conv.w.value.data[i] = orig + h;
            let lp = eval(&mut conv, &x);
            conv.w.value.data[i] = orig - h;
            let lm = eval(&mut conv, &x);
            conv.w.value.data[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - conv.w.grad.data[i]).abs() < 1e-5, "dw[{i}]");
        }
        let fdb: f64 = dy.data.chunks(4 * 5).step_by(3).map(|c| c.iter().sum::<f64>()).sum();
        assert!((fdb - conv.b.grad.data[0]).abs() < 1e-9, "db");
    }

    #[test]
    fn backward_without_forward_errors() {
        let mut conv = Conv2d::new(1, 1, 3, 3, &mut rng());
        assert!(conv.backward(Tensor::zeros(&[1, 1, 2, 2])).is_err());
    }
}
