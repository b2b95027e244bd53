//! Elementwise and reshaping layers: ReLU, Sigmoid, Dropout, and the
//! per-timestep flatten that turns conv feature maps into a GRU sequence.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<u8>>,
}

impl Relu {
    pub fn new() -> Relu {
        Relu { mask: None }
    }

    pub fn forward(&mut self, mut x: Tensor, phase: Phase) -> Tensor {
        if phase == Phase::Train {
            self.mask = Some(x.data.iter().map(|&v| (v > 0.0) as u8).collect());
        } else {
            self.mask = None;
        }
        for v in &mut x.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Result<Tensor> {
        let mask = self.mask.as_ref().ok_or_else(|| missing_cache("relu"))?;
        if mask.len() != dy.numel() {
            return Err(Error::shape("relu backward", format!("{} values", mask.len()),
                format!("{:?}", dy.shape)));
        }
        for (v, &m) in dy.data.iter_mut().zip(mask) {
            if m == 0 {
                *v = 0.0;
            }
        }
        Ok(dy)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    y: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Sigmoid {
        Sigmoid { y: None }
    }

    pub fn forward(&mut self, mut x: Tensor, phase: Phase) -> Tensor {
        for v in &mut x.data {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        if phase == Phase::Train {
            self.y = Some(x.clone());
        } else {
            self.y = None;
        }
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Result<Tensor> {
        let y = self.y.as_ref().ok_or_else(|| missing_cache("sigmoid"))?;
        dy.check_shape(&y.shape, "sigmoid backward")?;
        for (g, &p) in dy.data.iter_mut().zip(&y.data) {
            *g *= p * (1.0 - p);
        }
        Ok(dy)
    }
}

/// Inverted-scale dropout: training multiplies kept values by 1/(1-rate),
/// inference is the identity. A rate of zero draws nothing from the RNG, so
/// dropout-free models are bit-stable regardless of the stream handed in.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<u8>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Dropout> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate, mask: None })
    }

    pub fn forward(&mut self, mut x: Tensor, phase: Phase, rng: &mut ChaCha8Rng) -> Tensor {
        if phase == Phase::Infer || self.rate == 0.0 {
            self.mask = None;
            return x;
        }
        let scale = 1.0 / (1.0 - self.rate);
        let mask: Vec<u8> = (0..x.numel())
            .map(|_| (rng.random::<f64>() >= self.rate) as u8)
            .collect();
        for (v, &keep) in x.data.iter_mut().zip(&mask) {
            *v = if keep == 1 { *v * scale } else { 0.0 };
        }
        self.mask = Some(mask);
        x
    }

    pub fn backward(&mut self, mut dy: Tensor) -> Result<Tensor> {
        if self.rate == 0.0 {
            return Ok(dy);
        }
        let mask = self.mask.as_ref().ok_or_else(|| missing_cache("dropout"))?;
        if mask.len() != dy.numel() {
            return Err(Error::shape("dropout backward", format!("{} values", mask.len()),
                format!("{:?}", dy.shape)));
        }
        let scale = 1.0 / (1.0 - self.rate);
        for (v, &keep) in dy.data.iter_mut().zip(mask) {
            *v = if keep == 1 { *v * scale } else { 0.0 };
        }
        Ok(dy)
    }
}

/// [B, C, H, W] → [B, W, C·H]: each time step keeps its own stacked feature
/// column so the recurrent head sees one vector per frame.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    in_shape: Option<[usize; 4]>,
}

impl Flatten {
    pub fn new() -> Flatten {
        Flatten { in_shape: None }
    }

    pub fn forward(&mut self, x: Tensor, _phase: Phase) -> Result<Tensor> {
        if x.rank() != 4 {
            return Err(Error::shape("flatten", "rank-4 [B, C, H, W]", format!("{:?}", x.shape)));
        }
        let (b, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        self.in_shape = Some([b, c, h, w]);
        let mut y = Tensor::zeros(&[b, w, c * h]);
        for bi in 0..b {
            for ci in 0..c {
                for hi in 0..h {
                    let src = ((bi * c + ci) * h + hi) * w;
                    let d = ci * h + hi;
                    for wi in 0..w {
                        y.data[(bi * w + wi) * (c * h) + d] = x.data[src + wi];
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let [b, c, h, w] = self.in_shape.ok_or_else(|| missing_cache("flatten"))?;
        dy.check_shape(&[b, w, c * h], "flatten backward")?;
        let mut dx = Tensor::zeros(&[b, c, h, w]);
        for bi in 0..b {
            for ci in 0..c {
                for hi in 0..h {
                    let dst = ((bi * c + ci) * h + hi) * w;
                    let d = ci * h + hi;
                    for wi in 0..w {
                        dx.data[dst + wi] = dy.data[(bi * w + wi) * (c * h) + d];
                    }
                }
            }
        }
        Ok(dx)
    }
}

pub(super) fn missing_cache(layer: &str) -> Error {
    Error::Data(format!("{layer}: backward without a cached train-mode forward"))
}
