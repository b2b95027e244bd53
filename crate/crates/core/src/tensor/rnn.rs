//! Gated recurrent units. One `Gru` walks the sequence forward; `BiGru` runs
//! one per direction and concatenates the per-step hidden states.
//!
//! Gate order along the 3H axis is update | reset | candidate, with separate
//! input-side and recurrent-side bias vectors. The reset gate scales the
//! *precomputed* recurrent candidate term (recurrent bias included):
//!
//!   z = σ(x·Wz + bz + h·Uz + cz)
//!   r = σ(x·Wr + br + h·Ur + cr)
//!   n = tanh(x·Wh + bh + r ⊙ (h·Uh + ch))
//!   h' = z ⊙ h + (1 − z) ⊙ n

use rand_chacha::ChaCha8Rng;

use super::elem::missing_cache;
use super::{gemm_nn, gemm_nt, gemm_tn, init, Param, Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Gru {
    pub din: usize,
    pub hidden: usize,
    /// [din, 3H], columns z | r | n
    pub w_in: Param,
    /// [H, 3H]
    pub w_rec: Param,
    /// [3H]
    pub b_in: Param,
    /// [3H]
    pub b_rec: Param,
    cache: Option<GruCache>,
}

#[derive(Debug)]
struct GruCache {
    x: Tensor,
    /// [(T+1)·B·H]; slot t holds the state entering step t
    hseq: Vec<f64>,
    /// step-major [T·B·H] each
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    /// recurrent candidate term h·Uh + ch, pre-reset
    s: Vec<f64>,
}

impl Clone for Gru {
    fn clone(&self) -> Gru {
        Gru {
            din: self.din,
            hidden: self.hidden,
            w_in: self.w_in.clone(),
            w_rec: self.w_rec.clone(),
            b_in: self.b_in.clone(),
            b_rec: self.b_rec.clone(),
            cache: None,
        }
    }
}

impl Gru {
    pub fn new(din: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Gru {
        assert!(din > 0 && hidden > 0);
        let w_in = Tensor::from_vec(&[din, 3 * hidden], init::fan_in_uniform(rng, din, din * 3 * hidden));
        let w_rec = Tensor::from_vec(
            &[hidden, 3 * hidden],
            init::recurrent_uniform(rng, hidden, hidden * 3 * hidden),
        );
        Gru {
            din,
            hidden,
            w_in: Param::new(w_in),
            w_rec: Param::new(w_rec),
            b_in: Param::new(Tensor::zeros(&[3 * hidden])),
            b_rec: Param::new(Tensor::zeros(&[3 * hidden])),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        if x.rank() != 3 || x.dim(2) != self.din {
            return Err(Error::shape(
                "gru",
                format!("[B, T, {}]", self.din),
                format!("{:?}", x.shape),
            ));
        }
        let (b, t_len, hn) = (x.dim(0), x.dim(1), self.hidden);
        let h3 = 3 * hn;
        let n = b * t_len;

        // input contributions for all steps at once
        let mut a_in = vec![0.0; n * h3];
        gemm_nn(n, self.din, h3, &x.data, &self.w_in.value.data, 0.0, &mut a_in);
        for row in 0..n {
            for j in 0..h3 {
                a_in[row * h3 + j] += self.b_in.value.data[j];
            }
        }

        let train = phase == Phase::Train;
        let mut hseq = vec![0.0; (t_len + 1) * b * hn];
        let (mut zc, mut rc, mut cc, mut sc) = if train {
            let sz = t_len * b * hn;
            (vec![0.0; sz], vec![0.0; sz], vec![0.0; sz], vec![0.0; sz])
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };

        let mut rbuf = vec![0.0; b * h3];
        let mut y = Tensor::zeros(&[b, t_len, hn]);
        for t in 0..t_len {
            gemm_nn(b, hn, h3, &hseq[t * b * hn..(t + 1) * b * hn],
                &self.w_rec.value.data, 0.0, &mut rbuf);
            for bi in 0..b {
                for j in 0..h3 {
                    rbuf[bi * h3 + j] += self.b_rec.value.data[j];
                }
            }
            for bi in 0..b {
                let a = (bi * t_len + t) * h3;
                let rb = bi * h3;
                let hp_off = t * b * hn + bi * hn;
                let hn_off = (t + 1) * b * hn + bi * hn;
                for j in 0..hn {
                    let z = sigmoid(a_in[a + j] + rbuf[rb + j]);
                    let r = sigmoid(a_in[a + hn + j] + rbuf[rb + hn + j]);
                    let s = rbuf[rb + 2 * hn + j];
                    let c = (a_in[a + 2 * hn + j] + r * s).tanh();
                    let h_prev = hseq[hp_off + j];
                    let h_new = z * h_prev + (1.0 - z) * c;
                    hseq[hn_off + j] = h_new;
                    y.data[(bi * t_len + t) * hn + j] = h_new;
                    if train {
                        let st = t * b * hn + bi * hn + j;
                        zc[st] = z;
                        rc[st] = r;
                        cc[st] = c;
                        sc[st] = s;
                    }
                }
            }
        }
        self.cache = if train {
            Some(GruCache { x, hseq, z: zc, r: rc, c: cc, s: sc })
        } else {
            None
        };
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("gru"))?;
        let (b, t_len, hn) = (cache.x.dim(0), cache.x.dim(1), self.hidden);
        dy.check_shape(&[b, t_len, hn], "gru backward")?;
        let h3 = 3 * hn;
        let n = b * t_len;

        // input-side gate grads in batch-major rows (aligned with x),
        // recurrent-side in step-major rows (aligned with hseq)
        let mut da_in = vec![0.0; n * h3];
        let mut da_rec = vec![0.0; n * h3];
        let mut dh = vec![0.0; b * hn];
        let mut dh_next = vec![0.0; b * hn];

        for t in (0..t_len).rev() {
            for bi in 0..b {
                for j in 0..hn {
                    let st = t * b * hn + bi * hn + j;
                    let dh_cur = dh[bi * hn + j] + dy.data[(bi * t_len + t) * hn + j];
                    let (z, r, c, s) = (cache.z[st], cache.r[st], cache.c[st], cache.s[st]);
                    let h_prev = cache.hseq[st];
                    let dz = dh_cur * (h_prev - c);
                    let dc = dh_cur * (1.0 - z);
                    let dah = dc * (1.0 - c * c);
                    let ds = dah * r;
                    let dr = dah * s;
                    let daz = dz * z * (1.0 - z);
                    let dar = dr * r * (1.0 - r);
                    let ai = (bi * t_len + t) * h3;
                    da_in[ai + j] = daz;
                    da_in[ai + hn + j] = dar;
                    da_in[ai + 2 * hn + j] = dah;
                    let ar = (t * b + bi) * h3;
                    da_rec[ar + j] = daz;
                    da_rec[ar + hn + j] = dar;
                    da_rec[ar + 2 * hn + j] = ds;
                    dh_next[bi * hn + j] = dh_cur * z;
                }
            }
            // dh_prev += dA_rec_t · w_recᵀ
            gemm_nt(
                b,
                h3,
                hn,
                &da_rec[t * b * h3..(t + 1) * b * h3],
                &self.w_rec.value.data,
                1.0,
                &mut dh_next,
            );
            std::mem::swap(&mut dh, &mut dh_next);
            dh_next.fill(0.0);
        }

        gemm_tn(self.din, n, h3, &cache.x.data, &da_in, 1.0, &mut self.w_in.grad.data);
        gemm_tn(hn, n, h3, &cache.hseq[..n * hn], &da_rec, 1.0, &mut self.w_rec.grad.data);
        for row in 0..n {
            for j in 0..h3 {
                self.b_in.grad.data[j] += da_in[row * h3 + j];
                self.b_rec.grad.data[j] += da_rec[row * h3 + j];
            }
        }
        let mut dx = Tensor::zeros(&cache.x.shape);
        gemm_nt(n, h3, self.din, &da_in, &self.w_in.value.data, 0.0, &mut dx.data);
        Ok(dx)
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn reverse_time(x: &Tensor) -> Tensor {
    let (b, t_len, d) = (x.dim(0), x.dim(1), x.dim(2));
    let mut y = Tensor::zeros(&x.shape);
    for bi in 0..b {
        for t in 0..t_len {
            let src = (bi * t_len + t) * d;
            let dst = (bi * t_len + (t_len - 1 - t)) * d;
            y.data[dst..dst + d].copy_from_slice(&x.data[src..src + d]);
        }
    }
    y
}

/// Bidirectional GRU: output width 2H, forward direction in columns 0..H,
/// backward direction in columns H..2H.
#[derive(Debug, Clone)]
pub struct BiGru {
    pub fw: Gru,
    pub bw: Gru,
}

impl BiGru {
    pub fn new(din: usize, hidden: usize, rng: &mut ChaCha8Rng) -> BiGru {
        let fw = Gru::new(din, hidden, rng);
        let bw = Gru::new(din, hidden, rng);
        BiGru { fw, bw }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        let xr = if x.rank() == 3 { reverse_time(&x) } else { x.clone() };
        let yf = self.fw.forward(x, phase)?;
        let yb = reverse_time(&self.bw.forward(xr, phase)?);
        let (b, t_len, hn) = (yf.dim(0), yf.dim(1), yf.dim(2));
        let mut y = Tensor::zeros(&[b, t_len, 2 * hn]);
        for row in 0..b * t_len {
            y.data[row * 2 * hn..row * 2 * hn + hn]
                .copy_from_slice(&yf.data[row * hn..(row + 1) * hn]);
            y.data[row * 2 * hn + hn..(row + 1) * 2 * hn]
                .copy_from_slice(&yb.data[row * hn..(row + 1) * hn]);
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let hn = self.fw.hidden;
        if dy.rank() != 3 || dy.dim(2) != 2 * hn {
            return Err(Error::shape("bigru backward", format!("[B, T, {}]", 2 * hn),
                format!("{:?}", dy.shape)));
        }
        let (b, t_len) = (dy.dim(0), dy.dim(1));
        let mut dyf = Tensor::zeros(&[b, t_len, hn]);
        let mut dyb = Tensor::zeros(&[b, t_len, hn]);
        for row in 0..b * t_len {
            dyf.data[row * hn..(row + 1) * hn]
                .copy_from_slice(&dy.data[row * 2 * hn..row * 2 * hn + hn]);
            dyb.data[row * hn..(row + 1) * hn]
                .copy_from_slice(&dy.data[row * 2 * hn + hn..(row + 1) * 2 * hn]);
        }
        let mut dx = self.fw.backward(dyf)?;
        let dxb = reverse_time(&self.bw.backward(reverse_time(&dyb))?);
        dx.add_assign(&dxb)?;
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn zero_weights_fix_the_state_at_zero() {
        let mut gru = Gru::new(4, 3, &mut rng());
        gru.w_in.value.data.fill(0.0);
        gru.w_rec.value.data.fill(0.0);
        let x = Tensor::from_vec(&[2, 5, 4], (0..40).map(|i| i as f64 * 0.1 - 2.0).collect());
        let y = gru.forward(x, Phase::Infer).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_scalar_reference_recurrence() {
        // D = 1, H = 1: every matrix is a scalar, so the recurrence can be
        // written out longhand.
        let mut gru = Gru::new(1, 1, &mut rng());
        let (wz, wr, wh) = (0.4, -0.3, 0.8);
        let (uz, ur, uh) = (0.2, 0.5, -0.6);
        let (bz, br, bh) = (0.05, -0.1, 0.2);
        let (cz, cr, ch) = (0.01, 0.02, -0.03);
        gru.w_in.value.data = vec![wz, wr, wh];
        gru.w_rec.value.data = vec![uz, ur, uh];
        gru.b_in.value.data = vec![bz, br, bh];
        gru.b_rec.value.data = vec![cz, cr, ch];
        let xs = [0.7, -1.2, 0.3, 2.0];
        let x = Tensor::from_vec(&[1, 4, 1], xs.to_vec());
        let y = gru.forward(x, Phase::Infer).unwrap();

        let mut h = 0.0;
        for (t, &xv) in xs.iter().enumerate() {
            let z = sigmoid(wz * xv + bz + uz * h + cz);
            let r = sigmoid(wr * xv + br + ur * h + cr);
            let s = uh * h + ch;
            let c = (wh * xv + bh + r * s).tanh();
            h = z * h + (1.0 - z) * c;
            assert!((y.data[t] - h).abs() < 1e-12, "step {t}: {} vs {h}", y.data[t]);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng();
        let mut gru = Gru::new(3, 2, &mut r);
        let x = Tensor::from_vec(&[2, 4, 3], (0..24).map(|_| r.random_range(-1.0..1.0)).collect());
        let dy = Tensor::from_vec(&[2, 4, 2], (0..16).map(|_| r.random_range(-1.0..1.0)).collect());
        let _ = gru.forward(x.clone(), Phase::Train).unwrap();
        let dx = gru.backward(dy.clone()).unwrap();

        let eval = |gru: &mut Gru, x: &Tensor| -> f64 {
            let y = gru.forward(x.clone(), Phase::Infer).unwrap();
            y.data.iter().zip(&dy.data).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in (0..24).step_by(5) {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (eval(&mut gru, &xp) - eval(&mut gru, &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-6 * fd.abs().max(1.0), "dx[{i}]");
        }
        for i in (0..18).step_by(4) {
            let orig = gru.w_in.value.data[i];
            gru.w_in.value.data[i] = orig + h;
            let lp = eval(&mut gru, &x);
            gru.w_in.value.data[i] = orig - h;
            let lm = eval(&mut gru, &x);
            gru.w_in.value.data[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - gru.w_in.grad.data[i]).abs() < 1e-6 * fd.abs().max(1.0), "dw_in[{i}]");
        }
        for i in (0..12).step_by(3) {
            let orig = gru.w_rec.value.data[i];
            gru.w_rec.value.data[i] = orig + h;
            let lp = eval(&mut gru, &x);
            gru.w_rec.value.data[i] = orig - h;
            let lm = eval(&mut gru, &x);
            gru.w_rec.value.data[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - gru.w_rec.grad.data[i]).abs() < 1e-6 * fd.abs().max(1.0), "dw_rec[{i}]");
        }
    }

    #[test]
    fn bigru_concatenates_directions() {
        let mut b = BiGru::new(2, 3, &mut rng());
        let x = Tensor::from_vec(&[1, 4, 2], (0..8).map(|i| (i as f64 * 0.3).sin()).collect());
        let y = b.forward(x.clone(), Phase::Infer).unwrap();
        assert_eq!(y.shape, vec![1, 4, 6]);

        let yf = b.fw.forward(x.clone(), Phase::Infer).unwrap();
        let yb = reverse_time(&b.bw.forward(reverse_time(&x), Phase::Infer).unwrap());
        for t in 0..4 {
            for j in 0..3 {
                assert_eq!(y.data[t * 6 + j], yf.data[t * 3 + j]);
                assert_eq!(y.data[t * 6 + 3 + j], yb.data[t * 3 + j]);
            }
        }
    }

    #[test]
    fn bigru_backward_sums_direction_input_grads() {
        let mut r = rng();
        let mut b = BiGru::new(2, 2, &mut r);
        let x = Tensor::from_vec(&[1, 3, 2], (0..6).map(|_| r.random_range(-1.0..1.0)).collect());
        let dy = Tensor::from_vec(&[1, 3, 4], (0..12).map(|_| r.random_range(-1.0..1.0)).collect());
        let _ = b.forward(x.clone(), Phase::Train).unwrap();
        let dx = b.backward(dy.clone()).unwrap();

        let eval = |b: &mut BiGru, x: &Tensor| -> f64 {
            let y = b.forward(x.clone(), Phase::Infer).unwrap();
            y.data.iter().zip(&dy.data).map(|(a, v)| a * v).sum()
        };
        let h = 1e-6;
        for i in 0..6 {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (eval(&mut b, &xp) - eval(&mut b, &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-6 * fd.abs().max(1.0), "dx[{i}]");
        }
    }
}
