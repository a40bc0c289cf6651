//! Digit-recognizer CNN: conv 32@5x5 (same) -> ReLU -> pool2 ->
//! conv 64@5x5 (same) -> ReLU -> pool2 -> fc 3136x512 -> ReLU -> fc 512x10,
//! trained with minibatch SGD + momentum on cross-entropy.

use std::path::Path;

use crate::checkpoint;
use crate::datasets::mnist::LabeledImageSet;
use crate::datasets::partition::Shard;
use crate::error::{Error, Result};
use crate::numerics::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::numerics::layers::{
    argmax_row, conv2d_backward, conv2d_forward_cached, linear_backward, linear_forward,
    maxpool2_backward, maxpool2_forward, relu_backward, relu_forward, softmax_cross_entropy,
    Padding,
};
use crate::numerics::precision::{Precision, Scalar};
use crate::numerics::tensor::Tensor;
use crate::util::{seeded_permutation, seeded_rng};

pub const CONV1_FILTERS: usize = 32;
pub const CONV2_FILTERS: usize = 64;
pub const KERNEL: usize = 5;
pub const HIDDEN: usize = 512;
pub const CLASSES: usize = 10;
pub const FLAT: usize = CONV2_FILTERS * 7 * 7;

/// Total trainable parameters across all eight tensors:
/// 832 + 51,264 + 1,606,144 + 5,130.
pub const PARAMETER_COUNT: u64 = 832 + 51_264 + 1_606_144 + 5_130;

/// Parameter container. The same struct doubles as the gradient and
/// momentum buffer since the shapes coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T: Scalar> {
    pub conv1_w: Tensor<T>,
    pub conv1_b: Tensor<T>,
    pub conv2_w: Tensor<T>,
    pub conv2_b: Tensor<T>,
    pub fc1_w: Tensor<T>,
    pub fc1_b: Tensor<T>,
    pub fc2_w: Tensor<T>,
    pub fc2_b: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Local epochs one server runs per federation round.
    pub local_epochs: usize,
    pub seed: u64,
    /// Simulated compute cost charged per processed sample.
    pub sim_seconds_per_sample: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            local_epochs: 1,
            seed: 0,
            sim_seconds_per_sample: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub samples_processed: u64,
    pub sim_compute_seconds: f64,
}

/// Activations cached by the forward pass for exact gradient routing.
pub struct ForwardCache<T: Scalar> {
    input_shape: Vec<usize>,
    col1: Tensor<T>,
    pre1: Tensor<T>,
    pool1_in_shape: Vec<usize>,
    pool1_idx: Vec<u32>,
    pool1_out: Tensor<T>,
    col2: Tensor<T>,
    pre2: Tensor<T>,
    pool2_in_shape: Vec<usize>,
    pool2_idx: Vec<u32>,
    flat: Tensor<T>,
    fc1_pre: Tensor<T>,
    fc1_out: Tensor<T>,
}

impl<T: Scalar> CnnModel<T> {
    /// Kaiming-style scaled uniform init (bound sqrt(6 / fan_in) per layer,
    /// zero biases), deterministic under the seed.
    pub fn init(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut uniform = |shape: Vec<usize>, fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            Tensor::random_uniform(shape, -bound, bound, &mut rng)
        };
        CnnModel {
            conv1_w: uniform(vec![CONV1_FILTERS, 1, KERNEL, KERNEL], KERNEL * KERNEL),
            conv2_w: uniform(
                vec![CONV2_FILTERS, CONV1_FILTERS, KERNEL, KERNEL],
                CONV1_FILTERS * KERNEL * KERNEL,
            ),
            fc1_w: uniform(vec![FLAT, HIDDEN], FLAT),
            fc2_w: uniform(vec![HIDDEN, CLASSES], HIDDEN),
            conv1_b: Tensor::zeros(vec![CONV1_FILTERS]),
            conv2_b: Tensor::zeros(vec![CONV2_FILTERS]),
            fc1_b: Tensor::zeros(vec![HIDDEN]),
            fc2_b: Tensor::zeros(vec![CLASSES]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        CnnModel {
            conv1_w: Tensor::zeros(self.conv1_w.shape().to_vec()),
            conv1_b: Tensor::zeros(self.conv1_b.shape().to_vec()),
            conv2_w: Tensor::zeros(self.conv2_w.shape().to_vec()),
            conv2_b: Tensor::zeros(self.conv2_b.shape().to_vec()),
            fc1_w: Tensor::zeros(self.fc1_w.shape().to_vec()),
            fc1_b: Tensor::zeros(self.fc1_b.shape().to_vec()),
            fc2_w: Tensor::zeros(self.fc2_w.shape().to_vec()),
            fc2_b: Tensor::zeros(self.fc2_b.shape().to_vec()),
        }
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor<T>); 8] {
        [
            ("conv1_w", &self.conv1_w),
            ("conv1_b", &self.conv1_b),
            ("conv2_w", &self.conv2_w),
            ("conv2_b", &self.conv2_b),
            ("fc1_w", &self.fc1_w),
            ("fc1_b", &self.fc1_b),
            ("fc2_w", &self.fc2_w),
            ("fc2_b", &self.fc2_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 8] {
        [
            ("conv1_w", &mut self.conv1_w),
            ("conv1_b", &mut self.conv1_b),
            ("conv2_w", &mut self.conv2_w),
            ("conv2_b", &mut self.conv2_b),
            ("fc1_w", &mut self.fc1_w),
            ("fc1_b", &mut self.fc1_b),
            ("fc2_w", &mut self.fc2_w),
            ("fc2_b", &mut self.fc2_b),
        ]
    }

    pub fn parameter_count(&self) -> u64 {
        self.tensors().iter().map(|(_, t)| t.len() as u64).sum()
    }

    pub fn is_all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_all_finite())
    }

    /// Bytes needed to store the parameters at this model's precision.
    pub fn storage_bytes(&self) -> u64 {
        self.parameter_count() * T::PRECISION.bytes_per_value()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(PARAMETER_COUNT as usize);
        for (_, t) in self.tensors() {
            out.extend(t.as_slice().iter().map(|v| v.to_f64()));
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() as u64 != self.parameter_count() {
            return Err(Error::Argument(format!(
                "expected {} flat parameters, got {}",
                self.parameter_count(),
                flat.len()
            )));
        }
        let mut cursor = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            for (dst, &src) in t.as_mut_slice().iter_mut().zip(&flat[cursor..cursor + n]) {
                *dst = T::from_f64(src);
            }
            cursor += n;
        }
        Ok(())
    }

    /// Forward pass over a B x 1 x 28 x 28 batch; returns B x 10 logits and
    /// the activation cache for `backward`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        if batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != 28 || batch.dim(3) != 28 {
            return Err(Error::dimension(
                "cnn_forward",
                batch.shape(),
                &[batch.dim(0), 1, 28, 28],
            ));
        }
        let b = batch.dim(0);
        let (pre1, col1) =
            conv2d_forward_cached(batch, &self.conv1_w, &self.conv1_b, Padding::Same)?;
        let act1 = relu_forward(&pre1);
        let (pool1, pool1_idx) = maxpool2_forward(&act1)?;
        let (pre2, col2) =
            conv2d_forward_cached(&pool1, &self.conv2_w, &self.conv2_b, Padding::Same)?;
        let act2 = relu_forward(&pre2);
        let (pool2, pool2_idx) = maxpool2_forward(&act2)?;
        let flat = pool2.reshaped(vec![b, FLAT])?;
        let fc1_pre = linear_forward(&flat, &self.fc1_w, &self.fc1_b)?;
        let fc1_out = relu_forward(&fc1_pre);
        let logits = linear_forward(&fc1_out, &self.fc2_w, &self.fc2_b)?;
        Ok((
            logits,
            ForwardCache {
                input_shape: batch.shape().to_vec(),
                col1,
                pre1,
                pool1_in_shape: act1.shape().to_vec(),
                pool1_idx,
                pool1_out: pool1,
                col2,
                pre2,
                pool2_in_shape: act2.shape().to_vec(),
                pool2_idx,
                flat,
                fc1_pre,
                fc1_out,
            },
        ))
    }

    /// Backpropagates `d_logits` through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &Tensor<T>) -> Result<CnnModel<T>> {
        let (d_fc1_out, fc2_dw, fc2_db) = linear_backward(&cache.fc1_out, &self.fc2_w, d_logits)?;
        let d_fc1_pre = relu_backward(&cache.fc1_pre, &d_fc1_out);
        let (d_flat, fc1_dw, fc1_db) = linear_backward(&cache.flat, &self.fc1_w, &d_fc1_pre)?;
        let b = cache.input_shape[0];
        let d_pool2 = d_flat.reshaped(vec![b, CONV2_FILTERS, 7, 7])?;
        let d_act2 = maxpool2_backward(&cache.pool2_in_shape, &cache.pool2_idx, &d_pool2);
        let d_pre2 = relu_backward(&cache.pre2, &d_act2);
        let (d_pool1, conv2_dw, conv2_db) = conv2d_backward(
            cache.pool1_out.shape(),
            &self.conv2_w,
            &cache.col2,
            &d_pre2,
            Padding::Same,
        )?;
        let d_act1 = maxpool2_backward(&cache.pool1_in_shape, &cache.pool1_idx, &d_pool1);
        let d_pre1 = relu_backward(&cache.pre1, &d_act1);
        let (_, conv1_dw, conv1_db) = conv2d_backward(
            &cache.input_shape,
            &self.conv1_w,
            &cache.col1,
            &d_pre1,
            Padding::Same,
        )?;
        Ok(CnnModel {
            conv1_w: conv1_dw,
            conv1_b: conv1_db,
            conv2_w: conv2_dw,
            conv2_b: conv2_db,
            fc1_w: fc1_dw,
            fc1_b: fc1_db,
            fc2_w: fc2_dw,
            fc2_b: fc2_db,
        })
    }

    /// v <- mu v + g;  w <- w - lr v
    fn sgd_step(&mut self, grads: &CnnModel<T>, velocity: &mut CnnModel<T>, cfg: &TrainConfig) {
        let lr = T::from_f64(cfg.learning_rate);
        let mu = T::from_f64(cfg.momentum);
        for (((_, w), (_, g)), (_, v)) in self
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(velocity.tensors_mut())
        {
            for ((wv, &gv), vv) in w
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(v.as_mut_slice())
            {
                *vv = mu * *vv + gv;
                *wv = *wv - lr * *vv;
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(path, &self.tensors())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let entries = checkpoint::load::<T>(path)?;
        let mut model = CnnModel::init(0);
        if entries.len() != 8 {
            return Err(Error::Argument(format!(
                "checkpoint has {} tensors, expected 8",
                entries.len()
            )));
        }
        for ((name, tensor), (expected_name, slot)) in
            entries.into_iter().zip(model.tensors_mut())
        {
            if name != expected_name || tensor.shape() != slot.shape() {
                return Err(Error::Argument(format!(
                    "checkpoint tensor {name} {:?} does not match slot {expected_name} {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = tensor;
        }
        Ok(model)
    }
}

/// One epoch of minibatch SGD with momentum over a seeded shuffle of the
/// shard. The momentum buffer is fresh per epoch.
pub fn cnn_train_epoch<T: Scalar>(
    model: &mut CnnModel<T>,
    data: &LabeledImageSet,
    shard: &Shard,
    cfg: &TrainConfig,
) -> Result<EpochStats> {
    cfg.validate()?;
    if shard.is_empty() {
        return Err(Error::Argument("cannot train on an empty shard".into()));
    }
    let order = seeded_permutation(shard.len(), cfg.seed);
    let mut velocity = model.zeros_like();
    let mut loss_sum = 0.0;
    let mut batch_idxs = Vec::with_capacity(cfg.batch_size);
    let mut start = 0;
    while start < order.len() {
        let end = (start + cfg.batch_size).min(order.len());
        batch_idxs.clear();
        batch_idxs.extend(order[start..end].iter().map(|&i| shard.indices[i]));
        let (batch, labels) = data.batch(&batch_idxs);
        let batch = Tensor::new(batch.shape().to_vec(), batch.as_slice().iter().map(|&v| T::from_f64(v as f64)).collect())?;
        let (logits, cache) = model.forward(&batch)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
        let grads = model.backward(&cache, &d_logits)?;
        model.sgd_step(&grads, &mut velocity, cfg);
        loss_sum += loss * batch_idxs.len() as f64;
        start = end;
    }
    let samples = shard.len() as u64;
    Ok(EpochStats {
        mean_loss: loss_sum / samples as f64,
        samples_processed: samples,
        sim_compute_seconds: samples as f64 * cfg.sim_seconds_per_sample,
    })
}

/// Fraction of test samples whose argmax logit matches the label.
/// Ties break toward the lowest class index.
pub fn evaluate_accuracy<T: Scalar>(model: &CnnModel<T>, test: &LabeledImageSet) -> Result<f64> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    let chunk = 64;
    let mut idxs = Vec::with_capacity(chunk);
    let mut start = 0;
    while start < test.len() {
        let end = (start + chunk).min(test.len());
        idxs.clear();
        idxs.extend(start..end);
        let (batch, labels) = test.batch(&idxs);
        let batch = Tensor::new(
            batch.shape().to_vec(),
            batch.as_slice().iter().map(|&v| T::from_f64(v as f64)).collect(),
        )?;
        let (logits, _) = model.forward(&batch)?;
        for (r, &label) in labels.iter().enumerate() {
            if argmax_row(logits.row(r)) == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Bytes to store the model parameters (count x bytes per value).
pub fn model_storage_bytes<T: Scalar>(model: &CnnModel<T>) -> u64 {
    model.storage_bytes()
}

/// Full-model finite-difference gradient check on one 64-bit sample.
pub fn cnn_grad_check(
    image: &Tensor<f64>,
    label: usize,
    model_seed: u64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let model = CnnModel::<f64>::init(model_seed);
    let (logits, cache) = model.forward(image)?;
    let (_, d_logits) = softmax_cross_entropy(&logits, &[label])?;
    let grads = model.backward(&cache, &d_logits)?;
    let analytic = grads.flatten();
    let mut params = model.flatten();
    let mut scratch = model.clone();
    let image = image.clone();
    grad_check(
        move |p: &[f64]| {
            scratch.assign_flat(p)?;
            let (logits, _) = scratch.forward(&image)?;
            Ok(softmax_cross_entropy(&logits, &[label])?.0)
        },
        &mut params,
        &analytic,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::mnist::Split;

    pub(crate) fn synthetic_set(n: usize, seed: u64) -> LabeledImageSet {
        let mut rng = seeded_rng(seed);
        let images = Tensor::<f32>::random_uniform(vec![n, 1, 28, 28], 0.0, 1.0, &mut rng);
        use rand::Rng;
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
        LabeledImageSet { images, labels, split: Split::Train }
    }

    fn full_shard(n: usize) -> Shard {
        Shard { owner: 0, indices: (0..n).collect() }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = CnnModel::<f32>::init(5);
        let b = CnnModel::<f32>::init(5);
        let c = CnnModel::<f32>::init(6);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_all_finite());
    }

    #[test]
    fn parameter_count_is_exact() {
        // layer-shape arithmetic: (32*1*5*5 + 32) + (64*32*5*5 + 64)
        //   + (3136*512 + 512) + (512*10 + 10)
        let m = CnnModel::<f32>::init(0);
        assert_eq!(m.parameter_count(), PARAMETER_COUNT);
        assert_eq!(PARAMETER_COUNT, 1_663_370);
    }

    #[test]
    fn storage_bytes_by_precision() {
        assert_eq!(model_storage_bytes(&CnnModel::<f32>::init(0)), 1_663_370 * 4);
        assert_eq!(model_storage_bytes(&CnnModel::<f64>::init(0)), 1_663_370 * 8);
    }

    #[test]
    fn forward_shape_and_zero_input_rows_constant() {
        let mut m = CnnModel::<f64>::init(3);
        let batch = Tensor::<f64>::zeros(vec![2, 1, 28, 28]);
        let (logits, _) = m.forward(&batch).unwrap();
        assert_eq!(logits.shape(), &[2, 10]);
        // zero input with zero biases: every logit in a row identical
        for (_, t) in m.tensors_mut().into_iter().filter(|(n, _)| n.ends_with("_b")) {
            for v in t.as_mut_slice() {
                *v = 0.0;
            }
        }
        let (logits, _) = m.forward(&batch).unwrap();
        for r in 0..2 {
            let row = logits.row(r);
            for &v in row {
                assert!((v - row[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_input_shape_errors() {
        let m = CnnModel::<f32>::init(0);
        assert!(m.forward(&Tensor::zeros(vec![1, 1, 27, 28])).is_err());
        assert!(m.forward(&Tensor::zeros(vec![1, 3, 28, 28])).is_err());
    }

    #[test]
    fn zero_learning_rate_is_a_null_step() {
        let data = synthetic_set(8, 31);
        let mut m = CnnModel::<f32>::init(1);
        let before = m.clone();
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let stats = cnn_train_epoch(&mut m, &data, &full_shard(8), &cfg).unwrap();
        assert_eq!(m, before);
        assert!(stats.mean_loss > 0.0);
        assert_eq!(stats.samples_processed, 8);
    }

    #[test]
    fn empty_shard_is_rejected() {
        let data = synthetic_set(4, 32);
        let mut m = CnnModel::<f32>::init(1);
        let empty = Shard { owner: 0, indices: vec![] };
        assert!(matches!(
            cnn_train_epoch(&mut m, &data, &empty, &TrainConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn fixed_seed_gives_identical_loss_trajectory() {
        let data = synthetic_set(32, 33);
        let cfg = TrainConfig { seed: 77, ..Default::default() };
        let mut m1 = CnnModel::<f32>::init(2);
        let mut m2 = CnnModel::<f32>::init(2);
        let s1 = cnn_train_epoch(&mut m1, &data, &full_shard(32), &cfg).unwrap();
        let s2 = cnn_train_epoch(&mut m2, &data, &full_shard(32), &cfg).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(m1, m2);
        assert_eq!(m1.parameter_count(), PARAMETER_COUNT);
    }

    #[test]
    fn memorizes_a_single_repeated_sample() {
        // 16 copies of one image: a few epochs drive its loss below 0.01
        let one = synthetic_set(1, 40);
        let mut data = synthetic_set(16, 41);
        let px = 28 * 28;
        for i in 0..16 {
            let src = one.images.as_slice()[..px].to_vec();
            data.images.as_mut_slice()[i * px..(i + 1) * px].copy_from_slice(&src);
            data.labels[i] = 3;
        }
        let mut m = CnnModel::<f32>::init(9);
        let mut last = f64::INFINITY;
        for epoch in 0..30 {
            let cfg = TrainConfig {
                batch_size: 8,
                seed: epoch,
                ..Default::default()
            };
            last = cnn_train_epoch(&mut m, &data, &full_shard(16), &cfg).unwrap().mean_loss;
            if last < 0.01 {
                break;
            }
        }
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn sgd_matches_closed_form_on_quadratic() {
        // loss 0.5*w^2 has gradient w; with momentum 0 and lr eta the
        // iterate is w_{t+1} = (1 - eta) w_t
        let eta = 0.1;
        let mut w = 2.0f64;
        let mut expected = 2.0f64;
        let mut model = CnnModel::<f64>::init(0);
        let mut velocity = model.zeros_like();
        let cfg = TrainConfig { learning_rate: eta, momentum: 0.0, ..Default::default() };
        for _ in 0..5 {
            model.fc2_b.as_mut_slice()[0] = w;
            let mut grads = model.zeros_like();
            grads.fc2_b.as_mut_slice()[0] = w;
            model.sgd_step(&grads, &mut velocity, &cfg);
            w = model.fc2_b.as_slice()[0];
            expected *= 1.0 - eta;
            assert!((w - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn full_model_gradient_check() {
        let mut rng = seeded_rng(50);
        let image = Tensor::<f64>::random_uniform(vec![1, 1, 28, 28], 0.0, 1.0, &mut rng);
        let report = cnn_grad_check(
            &image,
            4,
            11,
            &GradCheckOptions {
                max_params: Some(120),
                seed: 21,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            report.max_relative_error < 1e-4,
            "max rel err {} (kinks skipped {})",
            report.max_relative_error,
            report.kinks_skipped
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cnn.ckpt");
        let m = CnnModel::<f32>::init(77);
        m.save(&path).unwrap();
        let loaded = CnnModel::<f32>::load(&path).unwrap();
        assert_eq!(m, loaded);
        assert!(CnnModel::<f64>::load(&path).is_err());
    }
}
