//! Central finite-difference gradient checking for layers and layer stacks.
//!
//! The scalar objective is a fixed random weighting of the stack's outputs,
//! so its gradient w.r.t. the outputs is exactly that weight tensor and the
//! analytic chain can be driven by one backward pass. Dropout layers are fed
//! a freshly re-seeded stream on every forward, which pins the mask and keeps
//! the objective differentiable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Layer, Phase, Tensor};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct CheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

/// Uniform draws conditioned for kink safety: values sit on a coarse grid
/// plus a distinct position-keyed sub-offset, so 2×2 pooling blocks cannot
/// tie within the FD step, and nothing sits close enough to zero for ReLU to
/// straddle its kink.
pub fn well_separated(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|i| {
            let raw: f64 = rng.random_range(-1.0..1.0);
            let mut v = (raw * 50.0).round() / 50.0;
            v += (i.wrapping_mul(2_654_435_761) % 97) as f64 * 1e-4;
            if v.abs() < 1e-3 {
                v = 1e-3 + (i % 97) as f64 * 1e-4;
            }
            v
        })
        .collect();
    Tensor::from_vec(shape, data)
}

fn relative_error(a: f64, f: f64) -> f64 {
    let err = (a - f).abs();
    if err < 1e-8 {
        0.0
    } else {
        err / a.abs().max(f.abs())
    }
}

fn sample_coords(numel: usize, cap: usize) -> Vec<usize> {
    if numel <= cap {
        (0..numel).collect()
    } else {
        let stride = numel as f64 / cap as f64;
        (0..cap).map(|i| (i as f64 * stride) as usize).collect()
    }
}

/// Checks d(objective)/d(input) and d(objective)/d(params) for a stack of
/// layers against central finite differences, returning the worst relative
/// error over all sampled coordinates.
pub fn check_stack(
    layers: &mut [Layer],
    x: &Tensor,
    seed: u64,
    max_coords: usize,
) -> Result<CheckReport> {
    let drop_seed = seed ^ 0xD509_5509_ABCD_1234;

    let eval = |layers: &mut [Layer], x: &Tensor, w: &[f64]| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(drop_seed);
        let mut cur = x.clone();
        for l in layers.iter_mut() {
            cur = l.forward(cur, Phase::Train, &mut rng)?;
        }
        Ok(cur.data.iter().zip(w).map(|(a, b)| a * b).sum())
    };

    // probe output size, then fix the objective weights
    let mut rng = ChaCha8Rng::seed_from_u64(drop_seed);
    let mut probe = x.clone();
    for l in layers.iter_mut() {
        probe = l.forward(probe, Phase::Train, &mut rng)?;
    }
    let mut wrng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let w: Vec<f64> = (0..probe.numel()).map(|_| wrng.random_range(-1.0..1.0)).collect();

    // analytic pass
    for l in layers.iter_mut() {
        l.visit_params("z", &mut |_, p, _| {
            p.grad.data.fill(0.0);
            Ok(())
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(drop_seed);
    let mut cur = x.clone();
    for l in layers.iter_mut() {
        cur = l.forward(cur, Phase::Train, &mut rng)?;
    }
    let mut dy = Tensor::from_vec(&probe.shape, w.clone());
    for l in layers.iter_mut().rev() {
        dy = l.backward(dy)?;
    }
    let dx = dy;

    let mut max_rel: f64 = 0.0;
    let mut checked = 0;

    for &i in &sample_coords(x.numel(), max_coords) {
        let mut xp = x.clone();
        xp.data[i] += FD_STEP;
        let mut xm = x.clone();
        xm.data[i] -= FD_STEP;
        let fd = (eval(layers, &xp, &w)? - eval(layers, &xm, &w)?) / (2.0 * FD_STEP);
        max_rel = max_rel.max(relative_error(dx.data[i], fd));
        checked += 1;
    }

    // inventory of trainable parameters: (layer index, name, analytic grads)
    let mut inventory: Vec<(usize, String, Vec<f64>)> = Vec::new();
    for (li, l) in layers.iter_mut().enumerate() {
        l.visit_params(&format!("l{li}"), &mut |name, p, trainable| {
            if trainable {
                inventory.push((li, name.to_string(), p.grad.data.clone()));
            }
            Ok(())
        })?;
    }

    for (li, name, analytic) in &inventory {
        for &i in &sample_coords(analytic.len(), max_coords) {
            perturb(&mut layers[*li], name, i, FD_STEP)?;
            let lp = eval(layers, x, &w)?;
            perturb(&mut layers[*li], name, i, -2.0 * FD_STEP)?;
            let lm = eval(layers, x, &w)?;
            perturb(&mut layers[*li], name, i, FD_STEP)?;
            let fd = (lp - lm) / (2.0 * FD_STEP);
            max_rel = max_rel.max(relative_error(analytic[i], fd));
            checked += 1;
        }
    }

    Ok(CheckReport { max_rel_err: max_rel, coords_checked: checked })
}

fn perturb(layer: &mut Layer, target: &str, idx: usize, delta: f64) -> Result<()> {
    let li = target.split('.').next().unwrap_or("").to_string();
    layer.visit_params(&li, &mut |name, p, _| {
        if name == target {
            p.value.data[idx] += delta;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Conv2d, Dense, Relu, Sigmoid};

    #[test]
    fn well_separated_keeps_pool_blocks_tie_free() {
        let t = well_separated(&[1, 1, 6, 8], 3);
        assert!(t.data.iter().all(|v| v.abs() >= 1e-3 - 1e-12));
        let w = 8;
        for by in 0..3 {
            for bx in 0..4 {
                let idx = [
                    (2 * by) * w + 2 * bx,
                    (2 * by) * w + 2 * bx + 1,
                    (2 * by + 1) * w + 2 * bx,
                    (2 * by + 1) * w + 2 * bx + 1,
                ];
                for i in 0..4 {
                    for j in i + 1..4 {
                        let gap = (t.data[idx[i]] - t.data[idx[j]]).abs();
                        assert!(gap > 4.0 * FD_STEP, "tie in block ({by},{bx}): {gap}");
                    }
                }
            }
        }
    }

    #[test]
    fn harness_accepts_a_correct_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut layers = [Layer::Dense(Dense::new(4, 3, &mut rng)), Layer::Sigmoid(Sigmoid::new())];
        let x = well_separated(&[2, 4], 51);
        let rep = check_stack(&mut layers, &x, 52, 200).unwrap();
        assert!(rep.max_rel_err < 1e-4, "rel err {}", rep.max_rel_err);
        assert!(rep.coords_checked >= 8 + 15);
    }

    #[test]
    fn conv_relu_stack_passes_and_is_rerunnable() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let conv = Conv2d::new(1, 2, 3, 3, &mut rng);
        let mut layers = [Layer::Conv2d(conv), Layer::Relu(Relu::new())];
        let x = well_separated(&[1, 1, 4, 4], 61);
        let good = check_stack(&mut layers, &x, 62, 300).unwrap();
        assert!(good.max_rel_err < 1e-4, "rel err {}", good.max_rel_err);
        if let Layer::Conv2d(c) = &mut layers[0] {
            c.w.value.data[0] += 0.01;
        }
        // gradients are recomputed from the current weights on every call
        let again = check_stack(&mut layers, &x, 63, 300).unwrap();
        assert!(again.max_rel_err < 1e-4);
    }
}
