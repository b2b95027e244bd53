//! 2×2 max pooling with stride 2. Odd trailing rows/columns are dropped
//! (floor semantics); ties keep the first maximum in raster order.

use super::elem::missing_cache;
use super::{Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    in_shape: [usize; 4],
    /// Flat index into the input [H, W] plane per output element.
    argmax: Vec<u32>,
}

impl MaxPool2 {
    pub fn new() -> MaxPool2 {
        MaxPool2 { cache: None }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        if x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2 {
            return Err(Error::shape("maxpool", "rank-4, H ≥ 2, W ≥ 2", format!("{:?}", x.shape)));
        }
        let (b, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let (ho, wo) = (h / 2, w / 2);
        let mut y = Tensor::zeros(&[b, c, ho, wo]);
        let mut argmax = Vec::new();
        if phase == Phase::Train {
            argmax = vec![0u32; b * c * ho * wo];
        }
        for bi in 0..b {
            for ci in 0..c {
                let plane = ((bi * c + ci) * h) * w;
                let out_plane = ((bi * c + ci) * ho) * wo;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut best_idx = (2 * oy) * w + 2 * ox;
                        let mut best = x.data[plane + best_idx];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = (2 * oy + dy) * w + 2 * ox + dx;
                            let v = x.data[plane + idx];
                            if v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                        y.data[out_plane + oy * wo + ox] = best;
                        if phase == Phase::Train {
                            argmax[out_plane + oy * wo + ox] = best_idx as u32;
                        }
                    }
                }
            }
        }
        self.cache = if phase == Phase::Train {
            Some(PoolCache { in_shape: [b, c, h, w], argmax })
        } else {
            None
        };
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("maxpool"))?;
        let [b, c, h, w] = cache.in_shape;
        dy.check_shape(&[b, c, h / 2, w / 2], "maxpool backward")?;
        let mut dx = Tensor::zeros(&[b, c, h, w]);
        let (ho, wo) = (h / 2, w / 2);
        for bi in 0..b {
            for ci in 0..c {
                let plane = ((bi * c + ci) * h) * w;
                let out_plane = ((bi * c + ci) * ho) * wo;
                for i in 0..ho * wo {
                    dx.data[plane + cache.argmax[out_plane + i] as usize] += dy.data[out_plane + i];
                }
            }
        }
        Ok(dx)
    }
}
