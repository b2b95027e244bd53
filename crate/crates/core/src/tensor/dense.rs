//! Fully connected layer applied to the last axis; all leading axes are
//! treated as batch rows.

use rand_chacha::ChaCha8Rng;

use super::elem::missing_cache;
use super::{gemm_nn, gemm_nt, gemm_tn, init, Param, Phase, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dense {
    pub din: usize,
    pub dout: usize,
    /// [din, dout]
    pub w: Param,
    /// [dout]
    pub b: Param,
    x: Option<Tensor>,
}

impl Dense {
    pub fn new(din: usize, dout: usize, rng: &mut ChaCha8Rng) -> Dense {
        assert!(din > 0 && dout > 0);
        let w = Tensor::from_vec(&[din, dout], init::fan_in_uniform(rng, din, din * dout));
        Dense { din, dout, w: Param::new(w), b: Param::new(Tensor::zeros(&[dout])), x: None }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        if x.rank() == 0 || *x.shape.last().unwrap() != self.din {
            return Err(Error::shape(
                "dense",
                format!("[..., {}]", self.din),
                format!("{:?}", x.shape),
            ));
        }
        let rows = x.numel() / self.din;
        let mut out_shape = x.shape.clone();
        *out_shape.last_mut().unwrap() = self.dout;
        let mut y = Tensor::zeros(&out_shape);
        gemm_nn(rows, self.din, self.dout, &x.data, &self.w.value.data, 0.0, &mut y.data);
        for r in 0..rows {
            for j in 0..self.dout {
                y.data[r * self.dout + j] += self.b.value.data[j];
            }
        }
        self.x = if phase == Phase::Train { Some(x) } else { None };
        Ok(y)
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let x = self.x.take().ok_or_else(|| missing_cache("dense"))?;
        let rows = x.numel() / self.din;
        let mut want = x.shape.clone();
        *want.last_mut().unwrap() = self.dout;
        dy.check_shape(&want, "dense backward")?;

        gemm_tn(self.din, rows, self.dout, &x.data, &dy.data, 1.0, &mut self.w.grad.data);
        for r in 0..rows {
            for j in 0..self.dout {
                self.b.grad.data[j] += dy.data[r * self.dout + j];
            }
        }
        let mut dx = Tensor::zeros(&x.shape);
        gemm_nt(rows, self.dout, self.din, &dy.data, &self.w.value.data, 0.0, &mut dx.data);
        Ok(dx)
    }
}
