//! Per-channel batch normalization over [B, C, H, W].

use super::elem::missing_cache;
use super::{Param, Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub eps: f64,
    /// Fraction of the old running statistic kept per batch.
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> BatchNorm {
        assert!(channels > 0);
        BatchNorm {
            channels,
            eps: 1e-5,
            momentum: 0.99,
            gamma: Param::new(Tensor::from_vec(&[channels], vec![1.0; channels])),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Param::new(Tensor::zeros(&[channels])),
            running_var: Param::new(Tensor::from_vec(&[channels], vec![1.0; channels])),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        if x.rank() != 4 || x.dim(1) != self.channels {
            return Err(Error::shape(
                "batchnorm",
                format!("[B, {}, H, W]", self.channels),
                format!("{:?}", x.shape),
            ));
        }
        let (b, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let plane = h * w;
        let n = (b * plane) as f64;
        let mut y = Tensor::zeros(&x.shape);

        if phase == Phase::Infer {
            for ci in 0..c {
                let inv = 1.0 / (self.running_var.value.data[ci] + self.eps).sqrt();
                let mu = self.running_mean.value.data[ci];
                let (g, be) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
                for bi in 0..b {
                    let base = ((bi * c + ci) * h) * w;
                    for i in 0..plane {
                        y.data[base + i] = g * (x.data[base + i] - mu) * inv + be;
                    }
                }
            }
            self.cache = None;
            return Ok(y);
        }

        let mut xhat = Tensor::zeros(&x.shape);
        let mut inv_std = vec![0.0; c];
        for ci in 0..c {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for bi in 0..b {
                let base = ((bi * c + ci) * h) * w;
                for i in 0..plane {
                    let v = x.data[base + i];
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0); // population variance
            let inv = 1.0 / (var + self.eps).sqrt();
            inv_std[ci] = inv;
            let (g, be) = (self.gamma.value.data[ci], self.beta.value.data[ci]);
            for bi in 0..b {
                let base = ((bi * c + ci) * h) * w;
                for i in 0..plane {
                    let xh = (x.data[base + i] - mean) * inv;
                    xhat.data[base + i] = xh;
                    y.data[base + i] = g * xh + be;
                }
            }
            let m = self.momentum;
            self.running_mean.value.data[ci] = m * self.running_mean.value.data[ci] + (1.0 - m) * mean;
            self.running_var.value.data[ci] = m * self.running_var.value.data[ci] + (1.0 - m) * var;
        }
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("batchnorm"))?;
        dy.check_shape(&cache.xhat.shape, "batchnorm backward")?;
        let (b, c, h, w) = (dy.dim(0), dy.dim(1), dy.dim(2), dy.dim(3));
        let plane = h * w;
        let n = (b * plane) as f64;
        let mut dx = Tensor::zeros(&dy.shape);
        for ci in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for bi in 0..b {
                let base = ((bi * c + ci) * h) * w;
                for i in 0..plane {
                    sum_dy += dy.data[base + i];
                    sum_dy_xhat += dy.data[base + i] * cache.xhat.data[base + i];
                }
            }
            self.beta.grad.data[ci] += sum_dy;
            self.gamma.grad.data[ci] += sum_dy_xhat;
            let g = self.gamma.value.data[ci];
            let k = g * cache.inv_std[ci] / n;
            for bi in 0..b {
                let base = ((bi * c + ci) * h) * w;
                for i in 0..plane {
                    dx.data[base + i] = k
                        * (n * dy.data[base + i]
                            - sum_dy
                            - cache.xhat.data[base + i] * sum_dy_xhat);
                }
            }
        }
        Ok(dx)
    }
}
