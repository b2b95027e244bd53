//! Residual conv block: conv 3×3 → batch norm → ReLU → conv 3×3 → shortcut
//! add → ReLU. The shortcut is the identity when channel counts match and a
//! 1×1 projection otherwise.

use rand_chacha::ChaCha8Rng;

use super::{BatchNorm, Conv2d, Param, Phase, Relu, Tensor};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    pub bn: BatchNorm,
    pub conv2: Conv2d,
    pub proj: Option<Conv2d>,
    relu1: Relu,
    relu2: Relu,
}

impl ResidualBlock {
    pub fn new(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> ResidualBlock {
        let conv1 = Conv2d::new(cin, cout, 3, 3, rng);
        let bn = BatchNorm::new(cout);
        let conv2 = Conv2d::new(cout, cout, 3, 3, rng);
        let proj = if cin == cout { None } else { Some(Conv2d::new(cin, cout, 1, 1, rng)) };
        ResidualBlock { conv1, bn, conv2, proj, relu1: Relu::new(), relu2: Relu::new() }
    }

    pub fn forward(&mut self, x: Tensor, phase: Phase) -> Result<Tensor> {
        let shortcut = match &mut self.proj {
            Some(p) => p.forward(x.clone(), phase)?,
            None => x.clone(),
        };
        let t = self.conv1.forward(x, phase)?;
        let t = self.bn.forward(t, phase)?;
        let t = self.relu1.forward(t, phase);
        let mut y = self.conv2.forward(t, phase)?;
        y.add_assign(&shortcut)?;
        Ok(self.relu2.forward(y, phase))
    }

    pub fn backward(&mut self, dy: Tensor) -> Result<Tensor> {
        let dsum = self.relu2.backward(dy)?;
        let dshort = dsum.clone();
        let dt = self.conv2.backward(dsum)?;
        let dt = self.relu1.backward(dt)?;
        let dt = self.bn.backward(dt)?;
        let mut dx = self.conv1.backward(dt)?;
        match &mut self.proj {
            Some(p) => dx.add_assign(&p.backward(dshort)?)?,
            None => dx.add_assign(&dshort)?,
        }
        Ok(dx)
    }

    pub fn visit_params(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(&str, &mut Param, bool) -> Result<()>,
    ) -> Result<()> {
        f(&format!("{prefix}.conv1.w"), &mut self.conv1.w, true)?;
        f(&format!("{prefix}.conv1.b"), &mut self.conv1.b, true)?;
        f(&format!("{prefix}.bn.gamma"), &mut self.bn.gamma, true)?;
        f(&format!("{prefix}.bn.beta"), &mut self.bn.beta, true)?;
        f(&format!("{prefix}.bn.running_mean"), &mut self.bn.running_mean, false)?;
        f(&format!("{prefix}.bn.running_var"), &mut self.bn.running_var, false)?;
        f(&format!("{prefix}.conv2.w"), &mut self.conv2.w, true)?;
        f(&format!("{prefix}.conv2.b"), &mut self.conv2.b, true)?;
        if let Some(p) = &mut self.proj {
            f(&format!("{prefix}.proj.w"), &mut p.w, true)?;
            f(&format!("{prefix}.proj.b"), &mut p.b, true)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_convs_with_identity_shortcut_passes_relu_of_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rb = ResidualBlock::new(3, 3, &mut rng);
        assert!(rb.proj.is_none());
        rb.conv1.w.value.data.fill(0.0);
        rb.conv2.w.value.data.fill(0.0);
        let x = Tensor::from_vec(&[1, 3, 4, 4], (0..48).map(|i| i as f64 - 20.0).collect());
        let y = rb.forward(x.clone(), Phase::Infer).unwrap();
        for (a, b) in y.data.iter().zip(&x.data) {
            assert_eq!(*a, b.max(0.0));
        }
    }

    #[test]
    fn channel_mismatch_installs_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rb = ResidualBlock::new(1, 8, &mut rng);
        let p = rb.proj.as_ref().expect("projection");
        assert_eq!((p.kh, p.kw, p.cin, p.cout), (1, 1, 1, 8));
    }

    #[test]
    fn backward_matches_finite_differences_through_the_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rb = ResidualBlock::new(2, 3, &mut rng);
        let n = 2 * 2 * 3 * 4;
        let x = Tensor::from_vec(&[2, 2, 3, 4], (0..n).map(|_| rng.random_range(0.1..1.0)).collect());
        let dy = Tensor::from_vec(&[2, 3, 3, 4], (0..72).map(|_| rng.random_range(-1.0..1.0)).collect());
        let _ = rb.forward(x.clone(), Phase::Train).unwrap();
        let dx = rb.backward(dy.clone()).unwrap();

        let eval = |rb: &mut ResidualBlock, x: &Tensor| -> f64 {
            let y = rb.forward(x.clone(), Phase::Train).unwrap();
            y.data.iter().zip(&dy.data).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in (0..n).step_by(7) {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (eval(&mut rb, &xp) - eval(&mut rb, &xm)) / (2.0 * h);
            assert!(
                (fd - dx.data[i]).abs() < 2e-4 * fd.abs().max(1.0),
                "dx[{i}]: {fd} vs {}",
                dx.data[i]
            );
        }
    }

    #[test]
    fn visit_order_is_stable_and_flags_buffers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rb = ResidualBlock::new(1, 4, &mut rng);
        let mut seen = Vec::new();
        rb.visit_params("rb", &mut |name, _, trainable| {
            seen.push((name.to_string(), trainable));
            Ok(())
        })
        .unwrap();
        let names: Vec<&str> = seen.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "rb.conv1.w", "rb.conv1.b", "rb.bn.gamma", "rb.bn.beta",
                "rb.bn.running_mean", "rb.bn.running_var", "rb.conv2.w", "rb.conv2.b",
                "rb.proj.w", "rb.proj.b",
            ]
        );
        assert!(seen.iter().all(|(n, t)| *t != n.contains("running")));
    }
}
