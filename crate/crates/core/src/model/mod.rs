//! The six detector variants: convolutional front ends over the feature
//! matrix feeding a shared BiGRU → per-step dense → sigmoid head that emits
//! one probability per pooled time step.

pub mod checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FrameGrid};
use crate::tensor::{
    BiGru, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2, Param, Phase, Relu, ResidualBlock,
    Sigmoid, Tensor,
};

pub const SPEC_ROWS: usize = 129;
pub const AUX_ROWS: usize = 64; // cepstral block (60) + band energies (4)
pub const DEFAULT_INPUT_ROWS: usize = SPEC_ROWS + AUX_ROWS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Rb1,
    Rb2,
    Cnn96,
    Cnn128,
    MultiPath,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Baseline, Variant::Rb1, Variant::Rb2, Variant::Cnn96, Variant::Cnn128, Variant::MultiPath];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Rb1 => "rb1",
            Variant::Rb2 => "rb2",
            Variant::Cnn96 => "cnn96",
            Variant::Cnn128 => "cnn128",
            Variant::MultiPath => "multipath",
        }
    }

    /// The conv width each named variant is defined with.
    pub fn required_kernels(&self) -> usize {
        match self {
            Variant::Cnn96 => 96,
            Variant::Cnn128 => 128,
            _ => 64,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "rb1" => Ok(Variant::Rb1),
            "rb2" => Ok(Variant::Rb2),
            "cnn96" => Ok(Variant::Cnn96),
            "cnn128" => Ok(Variant::Cnn128),
            "multipath" => Ok(Variant::MultiPath),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected baseline, rb1, rb2, cnn96, cnn128 or multipath)"
            ))),
        }
    }
}

fn default_gru_hidden() -> usize {
    256
}
fn default_dropout() -> f64 {
    0.1
}
fn default_width_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Conv channels per layer; pinned per variant (64 / 96 / 128).
    pub conv_kernels: usize,
    /// Hidden units per GRU direction.
    #[serde(default = "default_gru_hidden")]
    pub gru_hidden: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    /// Multiplier on conv widths for small test models; 1.0 for the real ones.
    #[serde(default = "default_width_scale")]
    pub width_scale: f64,
}

impl ModelSpec {
    pub fn for_variant(variant: Variant) -> ModelSpec {
        ModelSpec {
            variant,
            conv_kernels: variant.required_kernels(),
            gru_hidden: default_gru_hidden(),
            dropout_rate: default_dropout(),
            width_scale: default_width_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.variant.required_kernels();
        if self.conv_kernels != want {
            return Err(Error::Config(format!(
                "variant {} is defined with {want} conv kernels, got {}",
                self.variant.name(),
                self.conv_kernels
            )));
        }
        if self.gru_hidden == 0 {
            return Err(Error::Config("gru_hidden must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.width_scale > 0.0) || !self.width_scale.is_finite() {
            return Err(Error::Config(format!("width_scale {} must be positive", self.width_scale)));
        }
        Ok(())
    }

    /// Conv channels after the toy-model width multiplier.
    pub fn effective_kernels(&self) -> usize {
        ((self.conv_kernels as f64 * self.width_scale).round() as usize).max(1)
    }
}

/// One convolutional front end reading a contiguous row range of the input.
#[derive(Debug)]
pub struct PathStack {
    pub rows: std::ops::Range<usize>,
    pub layers: Vec<Layer>,
}

#[derive(Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub n_input_rows: usize,
    pub seed: u64,
    /// Decision threshold learned during training (0.5 until selected).
    pub threshold: f64,
    pub paths: Vec<PathStack>,
    pub head: Vec<Layer>,
}

/// Number of output steps for an input with `n_frames` columns: one 2×2 pool
/// halves the time axis once.
pub fn output_len(n_frames: usize) -> usize {
    n_frames / 2
}

fn conv_stack(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Layer>> {
    let k = spec.effective_kernels();
    Ok(vec![
        Layer::Conv2d(Conv2d::new(1, k, 6, 6, rng)),
        Layer::Relu(Relu::new()),
        Layer::Conv2d(Conv2d::new(k, k, 4, 4, rng)),
        Layer::Relu(Relu::new()),
        Layer::MaxPool2(MaxPool2::new()),
        Layer::Dropout(Dropout::new(spec.dropout_rate)?),
        Layer::Flatten(Flatten::new()),
    ])
}

fn residual_stack(spec: &ModelSpec, blocks: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Layer>> {
    let k = spec.effective_kernels();
    let mut layers = Vec::new();
    let mut cin = 1;
    for _ in 0..blocks {
        layers.push(Layer::Residual(ResidualBlock::new(cin, k, rng)));
        cin = k;
    }
    layers.push(Layer::MaxPool2(MaxPool2::new()));
    layers.push(Layer::Dropout(Dropout::new(spec.dropout_rate)?));
    layers.push(Layer::Flatten(Flatten::new()));
    Ok(layers)
}

/// Builds a variant for `n_input_rows`-row feature matrices, drawing all
/// weights from one seeded stream in construction order.
pub fn build_model(spec: &ModelSpec, n_input_rows: usize, seed: u64) -> Result<Model> {
    spec.validate()?;
    if n_input_rows < 2 {
        return Err(Error::Config(format!("n_input_rows {n_input_rows} too small to pool")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.effective_kernels();

    let paths: Vec<PathStack> = match spec.variant {
        Variant::Baseline | Variant::Cnn96 | Variant::Cnn128 => {
            vec![PathStack { rows: 0..n_input_rows, layers: conv_stack(spec, &mut rng)? }]
        }
        Variant::Rb1 => {
            vec![PathStack { rows: 0..n_input_rows, layers: residual_stack(spec, 1, &mut rng)? }]
        }
        Variant::Rb2 => {
            vec![PathStack { rows: 0..n_input_rows, layers: residual_stack(spec, 2, &mut rng)? }]
        }
        Variant::MultiPath => {
            if n_input_rows != DEFAULT_INPUT_ROWS {
                return Err(Error::Config(format!(
                    "multipath consumes the {DEFAULT_INPUT_ROWS}-row feature layout \
                     ({SPEC_ROWS} spectrogram rows + {AUX_ROWS} cepstral/energy rows), \
                     got {n_input_rows} rows"
                )));
            }
            vec![
                PathStack { rows: 0..SPEC_ROWS, layers: conv_stack(spec, &mut rng)? },
                PathStack { rows: SPEC_ROWS..DEFAULT_INPUT_ROWS, layers: conv_stack(spec, &mut rng)? },
            ]
        }
    };

    let flat_width: usize = paths.iter().map(|p| k * (p.rows.len() / 2)).sum();
    let head = vec![
        Layer::BiGru(BiGru::new(flat_width, spec.gru_hidden, &mut rng)),
        Layer::Dense(Dense::new(2 * spec.gru_hidden, 1, &mut rng)),
        Layer::Sigmoid(Sigmoid::new()),
    ];

    Ok(Model {
        spec: spec.clone(),
        n_input_rows,
        seed,
        threshold: 0.5,
        paths,
        head,
    })
}

impl Model {
    /// Forward pass over a batch [B, rows, F] → probabilities [B, k, 1].
    pub fn forward(&mut self, x: &Tensor, phase: Phase, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if x.rank() != 3 || x.dim(1) != self.n_input_rows {
            return Err(Error::shape(
                "model input",
                format!("[B, {}, F]", self.n_input_rows),
                format!("{:?}", x.shape),
            ));
        }
        let (b, f) = (x.dim(0), x.dim(2));
        let mut flat: Option<Tensor> = None;
        for path in &mut self.paths {
            let rows = path.rows.clone();
            let mut cur = Tensor::zeros(&[b, 1, rows.len(), f]);
            for bi in 0..b {
                for (ri, r) in rows.clone().enumerate() {
                    let src = (bi * self.n_input_rows + r) * f;
                    let dst = (bi * rows.len() + ri) * f;
                    cur.data[dst..dst + f].copy_from_slice(&x.data[src..src + f]);
                }
            }
            for layer in &mut path.layers {
                cur = layer.forward(cur, phase, rng)?;
            }
            flat = Some(match flat.take() {
                None => cur,
                Some(prev) => concat_features(&prev, &cur)?,
            });
        }
        let mut cur = flat.expect("at least one path");
        for layer in &mut self.head {
            cur = layer.forward(cur, phase, rng)?;
        }
        Ok(cur)
    }

    /// Backward pass from the output gradient; parameter gradients accumulate
    /// in place and input gradients are discarded.
    pub fn backward(&mut self, dy: Tensor) -> Result<()> {
        let mut cur = dy;
        for layer in self.head.iter_mut().rev() {
            cur = layer.backward(cur)?;
        }
        if self.paths.len() == 1 {
            let mut d = cur;
            for layer in self.paths[0].layers.iter_mut().rev() {
                d = layer.backward(d)?;
            }
            return Ok(());
        }
        let widths: Vec<usize> = self
            .paths
            .iter()
            .map(|p| self.spec.effective_kernels() * (p.rows.len() / 2))
            .collect();
        let parts = split_features(&cur, &widths)?;
        for (path, part) in self.paths.iter_mut().zip(parts) {
            let mut d = part;
            for layer in path.layers.iter_mut().rev() {
                d = layer.backward(d)?;
            }
        }
        Ok(())
    }

    pub fn visit_params(
        &mut self,
        f: &mut dyn FnMut(&str, &mut Param, bool) -> Result<()>,
    ) -> Result<()> {
        for (pi, path) in self.paths.iter_mut().enumerate() {
            for (li, layer) in path.layers.iter_mut().enumerate() {
                layer.visit_params(&format!("path{pi}.{li}.{}", layer_tag(layer)), f)?;
            }
        }
        for (li, layer) in self.head.iter_mut().enumerate() {
            layer.visit_params(&format!("head.{li}.{}", layer_tag(layer)), f)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |_, p, _| {
            p.grad.data.fill(0.0);
            Ok(())
        })
        .expect("zeroing cannot fail");
    }

    pub fn count_params(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p, _| {
            n += p.numel();
            Ok(())
        })
        .expect("counting cannot fail");
        n
    }

    /// Recording-level inference: probabilities plus the output-resolution
    /// grid (each output step owns two input frames).
    pub fn predict(&mut self, features: &FeatureMatrix) -> Result<(Vec<f64>, FrameGrid)> {
        if !features.normalized {
            return Err(Error::Data("predict requires normalized features".into()));
        }
        if features.n_rows() != self.n_input_rows {
            return Err(Error::shape(
                "predict",
                format!("{} feature rows", self.n_input_rows),
                format!("{} feature rows", features.n_rows()),
            ));
        }
        let f = features.n_frames;
        if output_len(f) == 0 {
            return Err(Error::Data(format!("recording too short: {f} feature frames")));
        }
        let x = Tensor::from_vec(&[1, self.n_input_rows, f], features.data.clone());
        // dropout is inert in infer mode, so the stream is never consumed
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let y = self.forward(&x, Phase::Infer, &mut rng)?;
        let grid = FrameGrid { n_frames: y.dim(1), hop_s: features.grid.hop_s * 2.0 };
        Ok((y.data, grid))
    }

    /// Per-layer report rows: (name, output shape, parameter count).
    pub fn describe(&mut self, n_frames: usize) -> Result<Vec<LayerReport>> {
        let mut rows = Vec::new();
        let b = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut flat: Option<Tensor> = None;
        let n_paths = self.paths.len();
        for (pi, path) in self.paths.iter_mut().enumerate() {
            let mut cur = Tensor::zeros(&[b, 1, path.rows.len(), n_frames]);
            for (li, layer) in path.layers.iter_mut().enumerate() {
                cur = layer.forward(cur, Phase::Infer, &mut rng)?;
                let name = if n_paths == 1 {
                    format!("{}{li}", layer_tag(layer))
                } else {
                    format!("path{pi}.{}{li}", layer_tag(layer))
                };
                rows.push(LayerReport {
                    name,
                    kind: layer.kind().to_string(),
                    output_shape: cur.shape.clone(),
                    params: layer.param_count(),
                });
            }
            flat = Some(match flat.take() {
                None => cur,
                Some(prev) => concat_features(&prev, &cur)?,
            });
        }
        let mut cur = flat.expect("at least one path");
        for (li, layer) in self.head.iter_mut().enumerate() {
            cur = layer.forward(cur, Phase::Infer, &mut rng)?;
            rows.push(LayerReport {
                name: format!("head.{}{li}", layer_tag(layer)),
                kind: layer.kind().to_string(),
                output_shape: cur.shape.clone(),
                params: layer.param_count(),
            });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub name: String,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

fn layer_tag(layer: &Layer) -> &'static str {
    layer.kind()
}

/// Concatenates two [B, T, W] tensors along the feature axis.
fn concat_features(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) {
        return Err(Error::shape(
            "path concat",
            format!("{:?} × [same B, T, *]", a.shape),
            format!("{:?}", b.shape),
        ));
    }
    let (bs, t, wa, wb) = (a.dim(0), a.dim(1), a.dim(2), b.dim(2));
    let mut y = Tensor::zeros(&[bs, t, wa + wb]);
    for row in 0..bs * t {
        y.data[row * (wa + wb)..row * (wa + wb) + wa]
            .copy_from_slice(&a.data[row * wa..(row + 1) * wa]);
        y.data[row * (wa + wb) + wa..(row + 1) * (wa + wb)]
            .copy_from_slice(&b.data[row * wb..(row + 1) * wb]);
    }
    Ok(y)
}

fn split_features(x: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = widths.iter().sum();
    if x.rank() != 3 || x.dim(2) != total {
        return Err(Error::shape("path split", format!("[B, T, {total}]"), format!("{:?}", x.shape)));
    }
    let (bs, t) = (x.dim(0), x.dim(1));
    let mut out = Vec::with_capacity(widths.len());
    let mut off = 0;
    for &w in widths {
        let mut part = Tensor::zeros(&[bs, t, w]);
        for row in 0..bs * t {
            part.data[row * w..(row + 1) * w]
                .copy_from_slice(&x.data[row * total + off..row * total + off + w]);
        }
        out.push(part);
        off += w;
    }
    Ok(out)
}
