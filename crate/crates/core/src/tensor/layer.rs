//! Uniform layer interface: a closed enum over the layer zoo with forward,
//! backward, and named-parameter traversal.

use rand_chacha::ChaCha8Rng;

use super::{
    BatchNorm, BiGru, Conv2d, Dense, Dropout, Flatten, MaxPool2, Param, Relu, ResidualBlock,
    Sigmoid, Tensor,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

#[derive(Debug)]
pub enum Layer {
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    MaxPool2(MaxPool2),
    Dropout(Dropout),
    Flatten(Flatten),
    BiGru(BiGru),
    Dense(Dense),
    Sigmoid(Sigmoid),
    Residual(ResidualBlock),
}

impl Layer {
    pub fn forward(&mut self, x: Tensor, phase: Phase, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.forward(x, phase),
            Layer::BatchNorm(l) => l.forward(x, phase),
            Layer::Relu(l) => Ok(l.forward(x, phase)),
            Layer::MaxPool2(l) => l.forward(x, phase),
            Layer::Dropout(l) => Ok(l.forward(x, phase, rng)),
            Layer::Flatten(l) => l.forward(x, phase),
            Layer::BiGru(l) => l.forward(x, phase),
            Layer::Dense(l) => l.forward(x, phase),
            Layer::Sigmoid(l) => Ok(l.forward(x, phase)),
            Layer::Residual(l) => l.forward(x, phase),
        }
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::MaxPool2(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::Flatten(l) => l.backward(dy),
            Layer::BiGru(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
            Layer::Sigmoid(l) => l.backward(dy),
            Layer::Residual(l) => l.backward(dy),
        }
    }

    /// Walks every named parameter in a fixed order. `trainable` is false
    /// for buffers that persist in checkpoints but are not optimized
    /// (batch-norm running statistics).
    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &mut Param, bool) -> Result<()>,
    ) -> Result<()> {
        match self {
            Layer::Conv2d(l) => {
                f(&format!("{prefix}.w"), &mut l.w, true)?;
                f(&format!("{prefix}.b"), &mut l.b, true)
            }
            Layer::BatchNorm(l) => {
                f(&format!("{prefix}.gamma"), &mut l.gamma, true)?;
                f(&format!("{prefix}.beta"), &mut l.beta, true)?;
                f(&format!("{prefix}.running_mean"), &mut l.running_mean, false)?;
                f(&format!("{prefix}.running_var"), &mut l.running_var, false)
            }
            Layer::BiGru(l) => {
                f(&format!("{prefix}.fw.w_in"), &mut l.fw.w_in, true)?;
                f(&format!("{prefix}.fw.w_rec"), &mut l.fw.w_rec, true)?;
                f(&format!("{prefix}.fw.b_in"), &mut l.fw.b_in, true)?;
                f(&format!("{prefix}.fw.b_rec"), &mut l.fw.b_rec, true)?;
                f(&format!("{prefix}.bw.w_in"), &mut l.bw.w_in, true)?;
                f(&format!("{prefix}.bw.w_rec"), &mut l.bw.w_rec, true)?;
                f(&format!("{prefix}.bw.b_in"), &mut l.bw.b_in, true)?;
                f(&format!("{prefix}.bw.b_rec"), &mut l.bw.b_rec, true)
            }
            Layer::Dense(l) => {
                f(&format!("{prefix}.w"), &mut l.w, true)?;
                f(&format!("{prefix}.b"), &mut l.b, true)
            }
            Layer::Residual(l) => l.visit_params(prefix, f),
            Layer::Relu(_) | Layer::MaxPool2(_) | Layer::Dropout(_) | Layer::Flatten(_)
            | Layer::Sigmoid(_) => Ok(()),
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |_, p, _| {
            n += p.numel();
            Ok(())
        })
        .expect("counting cannot fail");
        n
    }

    /// Short lowercase tag used in reports and checkpoint names.
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::MaxPool2(_) => "maxpool2",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten(_) => "flatten",
            Layer::BiGru(_) => "bigru",
            Layer::Dense(_) => "dense",
            Layer::Sigmoid(_) => "sigmoid",
            Layer::Residual(_) => "residual",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn conv_params_are_counted_with_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = Layer::Conv2d(Conv2d::new(1, 64, 6, 6, &mut rng));
        assert_eq!(l.param_count(), 6 * 6 * 64 + 64);
    }

    #[test]
    fn stateless_layers_have_no_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mut l in [
            Layer::Relu(Relu::new()),
            Layer::MaxPool2(MaxPool2::new()),
            Layer::Dropout(Dropout::new(0.1).unwrap()),
            Layer::Flatten(Flatten::new()),
            Layer::Sigmoid(Sigmoid::new()),
        ] {
            assert_eq!(l.param_count(), 0);
            let x = Tensor::from_vec(&[1, 1, 2, 2], vec![0.5, -0.5, 1.0, 2.0]);
            // every stateless layer accepts the rank-4 probe except sigmoid,
            // which is shape-agnostic anyway
            let _ = l.forward(x, Phase::Infer, &mut rng);
        }
    }

    #[test]
    fn bigru_param_count_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, h) = (12, 5);
        let mut l = Layer::BiGru(BiGru::new(d, h, &mut rng));
        assert_eq!(l.param_count(), 2 * (d * 3 * h + h * 3 * h + 3 * h + 3 * h));
    }
}
