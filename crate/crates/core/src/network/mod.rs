//! A small fully-connected classifier with an Eigenlayer.
//!
//! Layout: `input → [affine + ReLU]* → h → (h·W) = f → affine → logits`.
//! The Eigenlayer `W` has no bias and no activation so that orthogonalizing
//! its columns is meaningful for Euclidean retrieval on `f`.

mod checkpoint;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result, SvdnetError};
use crate::linalg::Matrix;
use crate::rng::{seeded, uniform_matrix};

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Affine layer `x·weight + bias`, `weight` is `in×out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Affine {
    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.weight)?;
        let cols = z.cols();
        for row in z.data_mut().chunks_exact_mut(cols) {
            row.iter_mut().zip(&self.bias).for_each(|(v, b)| *v += b);
        }
        Ok(z)
    }

    fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    /// Backbone widths; the last one is the Eigenlayer input width `n`.
    pub hidden_dims: Vec<usize>,
    /// Eigenlayer output width `k`, must not exceed `n`.
    pub eigen_dim: usize,
    pub classes: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.eigen_dim == 0 || self.classes < 2 {
            return Err(validation(format!("invalid model dims {self:?}")));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(validation("backbone needs at least one non-empty hidden layer"));
        }
        let n = *self.hidden_dims.last().unwrap();
        if self.eigen_dim > n {
            return Err(validation(format!(
                "eigen_dim {} exceeds the Eigenlayer input width {n}",
                self.eigen_dim
            )));
        }
        Ok(())
    }
}

/// Which side of the Eigenlayer to read features from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// `h`, the backbone output.
    Input,
    /// `f = h·W`.
    #[default]
    Output,
}

impl std::str::FromStr for FeatureKind {
    type Err = SvdnetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(Self::Input),
            "output" => Ok(Self::Output),
            other => Err(validation(format!("unknown feature kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FreezeMask {
    pub eigenlayer_frozen: bool,
}

impl FreezeMask {
    pub const FREE: FreezeMask = FreezeMask { eigenlayer_frozen: false };
    pub const FROZEN: FreezeMask = FreezeMask { eigenlayer_frozen: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenModel {
    pub backbone: Vec<Affine>,
    pub eigenlayer: Matrix,
    pub classifier: Affine,
}

/// Gradients shaped like [`EigenModel`]. `eigenlayer` is `None` when the
/// Eigenlayer was frozen for the pass that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub backbone: Vec<Affine>,
    pub eigenlayer: Option<Matrix>,
    pub classifier: Affine,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub h: Matrix,
    pub f: Matrix,
    pub logits: Matrix,
}

impl EigenModel {
    /// Uniform fan-in initialization: `±√(6/fan_in)` for ReLU layers and
    /// `±√(3/fan_in)` for the linear Eigenlayer and classifier. Biases start
    /// at zero.
    pub fn init(dims: &ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = seeded(seed);
        let mut backbone = Vec::with_capacity(dims.hidden_dims.len());
        let mut fan_in = dims.input_dim;
        for &width in &dims.hidden_dims {
            let limit = (6.0 / fan_in as f64).sqrt();
            backbone.push(Affine {
                weight: uniform_matrix(fan_in, width, limit, &mut rng),
                bias: vec![0.0; width],
            });
            fan_in = width;
        }
        let eigenlayer = uniform_matrix(fan_in, dims.eigen_dim, (3.0 / fan_in as f64).sqrt(), &mut rng);
        let classifier = Affine {
            weight: uniform_matrix(
                dims.eigen_dim,
                dims.classes,
                (3.0 / dims.eigen_dim as f64).sqrt(),
                &mut rng,
            ),
            bias: vec![0.0; dims.classes],
        };
        let model = Self { backbone, eigenlayer, classifier };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input_dim: self.input_dim(),
            hidden_dims: self.backbone.iter().map(Affine::out_dim).collect(),
            eigen_dim: self.eigenlayer.cols(),
            classes: self.classes(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.first().map_or(self.eigenlayer.rows(), Affine::in_dim)
    }

    pub fn classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn num_parameters(&self) -> usize {
        let affine = |a: &Affine| a.weight.as_slice().len() + a.bias.len();
        self.backbone.iter().map(affine).sum::<usize>()
            + self.eigenlayer.as_slice().len()
            + affine(&self.classifier)
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let mut width = self.input_dim();
        for (i, layer) in self.backbone.iter().enumerate() {
            if layer.in_dim() != width || layer.bias.len() != layer.out_dim() {
                return Err(validation(format!("backbone layer {i} has inconsistent shape")));
            }
            width = layer.out_dim();
        }
        if self.eigenlayer.rows() != width {
            return Err(validation(format!(
                "eigenlayer expects {} inputs, backbone yields {width}",
                self.eigenlayer.rows()
            )));
        }
        if self.eigenlayer.cols() > self.eigenlayer.rows() {
            return Err(validation("eigenlayer must have at least as many rows as columns"));
        }
        if self.classifier.in_dim() != self.eigenlayer.cols()
            || self.classifier.bias.len() != self.classifier.out_dim()
        {
            return Err(validation("classifier shape does not match eigenlayer"));
        }
        Ok(())
    }

    fn backbone_forward(&self, batch: &Matrix) -> Result<(Vec<Matrix>, Matrix)> {
        if batch.cols() != self.input_dim() {
            return Err(validation(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        // activations[i] is the input of backbone layer i
        let mut activations = Vec::with_capacity(self.backbone.len());
        let mut x = batch.clone();
        for layer in &self.backbone {
            let mut z = layer.forward(&x)?;
            z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            activations.push(x);
            x = z;
        }
        Ok((activations, x))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardPass> {
        let (_, h) = self.backbone_forward(batch)?;
        let f = h.matmul(&self.eigenlayer)?;
        let logits = self.classifier.forward(&f)?;
        Ok(ForwardPass { h, f, logits })
    }

    pub fn extract_features(&self, batch: &Matrix, which: FeatureKind) -> Result<Matrix> {
        let (_, h) = self.backbone_forward(batch)?;
        match which {
            FeatureKind::Input => Ok(h),
            FeatureKind::Output => h.matmul(&self.eigenlayer),
        }
    }

    /// Mean softmax cross-entropy of the batch, computed from [`Self::forward`].
    pub fn loss(&self, batch: &Matrix, labels: &[usize]) -> Result<f64> {
        check_labels(labels, batch.rows(), self.classes())?;
        let logits = self.forward(batch)?.logits;
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let row = logits.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                log_z - row[label]
            })
            .sum();
        Ok(total / labels.len() as f64)
    }

    /// All parameters in a fixed order: each backbone layer (weight, then
    /// bias), the Eigenlayer, then classifier weight and bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for layer in &self.backbone {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(self.eigenlayer.as_slice());
        out.extend_from_slice(self.classifier.weight.as_slice());
        out.extend_from_slice(&self.classifier.bias);
        out
    }

    /// Inverse of [`Self::flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(validation(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(validation("non-finite parameter"));
        }
        let mut it = params.iter().copied();
        let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|d| *d = it.next().unwrap());
        for layer in &mut self.backbone {
            fill(layer.weight.data_mut());
            fill(&mut layer.bias);
        }
        fill(self.eigenlayer.data_mut());
        fill(self.classifier.weight.data_mut());
        fill(&mut self.classifier.bias);
        Ok(())
    }

    /// Mean softmax cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grads(
        &self,
        batch: &Matrix,
        labels: &[usize],
        mask: FreezeMask,
    ) -> Result<(f64, Gradients)> {
        let m = batch.rows();
        let c = self.classes();
        check_labels(labels, m, c)?;

        let (activations, h) = self.backbone_forward(batch)?;
        let f = h.matmul(&self.eigenlayer)?;
        let logits = self.classifier.forward(&f)?;

        // softmax cross-entropy; dlogits = (p - onehot) / m
        let mut loss = 0.0;
        let mut dlogits = Matrix::zeros(m, c);
        let inv_m = 1.0 / m as f64;
        for (i, &label) in labels.iter().enumerate() {
            let row = logits.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + sum.ln();
            loss += log_z - row[label];
            for j in 0..c {
                let p = (row[j] - log_z).exp();
                dlogits[(i, j)] = (p - if j == label { 1.0 } else { 0.0 }) * inv_m;
            }
        }
        loss *= inv_m;
        if !loss.is_finite() {
            return Err(SvdnetError::NumericFailure("loss is not finite".into()));
        }

        let classifier = Affine {
            weight: f.t_matmul(&dlogits)?,
            bias: column_sums(&dlogits),
        };
        let df = dlogits.matmul_t(&self.classifier.weight)?;
        let eigenlayer = if mask.eigenlayer_frozen {
            None
        } else {
            Some(h.t_matmul(&df)?)
        };
        let mut upstream = df.matmul_t(&self.eigenlayer)?;

        let mut backbone = Vec::with_capacity(self.backbone.len());
        let mut out = h;
        for (layer, input) in self.backbone.iter().zip(&activations).rev() {
            // ReLU gate: out > 0 iff pre-activation > 0
            let mut dz = upstream;
            dz.data_mut()
                .iter_mut()
                .zip(out.as_slice())
                .for_each(|(g, &a)| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            backbone.push(Affine {
                weight: input.t_matmul(&dz)?,
                bias: column_sums(&dz),
            });
            upstream = dz.matmul_t(&layer.weight)?;
            out = input.clone();
        }
        backbone.reverse();

        Ok((loss, Gradients { backbone, eigenlayer, classifier }))
    }

    /// Plain SGD: `p ← p − lr·g` for every parameter that has a gradient.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(validation(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if grads.backbone.len() != self.backbone.len() {
            return Err(validation("gradient layer count does not match model"));
        }
        let all_finite = grads.backbone.iter().chain([&grads.classifier]).all(|a| {
            a.bias.iter().all(|v| v.is_finite())
        });
        if !all_finite {
            return Err(SvdnetError::NumericFailure("non-finite gradient".into()));
        }
        let mut next = self.clone();
        for (layer, g) in next.backbone.iter_mut().zip(&grads.backbone) {
            update_affine(layer, g, lr)?;
        }
        update_affine(&mut next.classifier, &grads.classifier, lr)?;
        if let Some(gw) = &grads.eigenlayer {
            next.eigenlayer = next.eigenlayer.sub(&gw.scale(lr)?)?;
        }
        *self = next;
        Ok(())
    }
}

fn check_labels(labels: &[usize], samples: usize, classes: usize) -> Result<()> {
    if labels.len() != samples {
        return Err(validation(format!("{} labels for {samples} samples", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(validation(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

impl Gradients {
    /// Flattened in [`EigenModel::flat_params`] order; a frozen Eigenlayer
    /// contributes zeros.
    pub fn flatten(&self, eigen_shape: (usize, usize)) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.backbone {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        match &self.eigenlayer {
            Some(g) => out.extend_from_slice(g.as_slice()),
            None => out.extend(std::iter::repeat_n(0.0, eigen_shape.0 * eigen_shape.1)),
        }
        out.extend_from_slice(self.classifier.weight.as_slice());
        out.extend_from_slice(&self.classifier.bias);
        out
    }
}

fn update_affine(layer: &mut Affine, grad: &Affine, lr: f64) -> Result<()> {
    if grad.bias.len() != layer.bias.len() {
        return Err(validation("bias gradient shape mismatch"));
    }
    layer.weight = layer.weight.sub(&grad.weight.scale(lr)?)?;
    for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
        *b -= lr * g;
    }
    if layer.bias.iter().any(|v| !v.is_finite()) {
        return Err(SvdnetError::NumericFailure("bias became non-finite".into()));
    }
    Ok(())
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        out.iter_mut().zip(m.row(i)).for_each(|(o, v)| *o += v);
    }
    out
}
