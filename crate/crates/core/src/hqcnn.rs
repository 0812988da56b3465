//! Hybrid classifier: a small CNN front-end squashes an image into rotation
//! angles, a parameterized circuit turns them into per-qubit expectations,
//! and a linear readout maps those to class probabilities. Circuit parameter
//! gradients use the shift rule; everything classical uses backprop.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{
    accumulate_grads, flat_grad_slices, softmax, softmax_cross_entropy, LayerSpec, Network,
    OptimState, Tensor,
};
use crate::quantum::angle_encode;
use crate::seeding::{derive_seed, rng_from_seed};
use crate::vqc::{
    build_ansatz, input_angle_grad, param_shift_grad, vqc_forward, AnsatzSpec, Entangler,
    ParamCircuit,
};

/// Architecture of the hybrid classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HqcnnSpec {
    pub image_side: usize,
    pub conv_channels: usize,
    pub n_qubits: usize,
    pub vqc_depth: usize,
    pub entangler: Entangler,
    pub n_classes: usize,
}

impl Default for HqcnnSpec {
    fn default() -> Self {
        Self {
            image_side: 8,
            conv_channels: 4,
            n_qubits: 4,
            vqc_depth: 2,
            entangler: Entangler::Ring,
            n_classes: 3,
        }
    }
}

impl HqcnnSpec {
    /// Flattened feature count after conv (valid 3x3) and 2x2 pooling.
    fn flat_features(&self) -> usize {
        let pooled = (self.image_side - 2) / 2;
        self.conv_channels * pooled * pooled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqcnnModel {
    spec: HqcnnSpec,
    cnn: Network,
    vqc: ParamCircuit,
    vqc_params: Vec<f64>,
    readout: Network,
}

/// Gradients matching [`HqcnnModel`]'s trainable parts.
#[derive(Debug, Clone)]
pub struct HqcnnGrads {
    pub cnn: Vec<Vec<Tensor>>,
    pub vqc: Vec<f64>,
    pub readout: Vec<Vec<Tensor>>,
}

/// One classified sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

/// Loss/accuracy trace of one training epoch. `loss` averages the minibatch
/// losses seen during the epoch; accuracies are measured afterwards.
/// `test_accuracy` is present only when training monitors a held-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    #[serde(default)]
    pub test_accuracy: Option<f64>,
}

/// Which update rule a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimChoice {
    Sgd { lr: f64 },
    Adam { lr: f64 },
}

impl OptimChoice {
    pub fn build(self) -> OptimState {
        match self {
            OptimChoice::Sgd { lr } => OptimState::sgd(lr),
            OptimChoice::Adam { lr } => OptimState::adam(lr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimChoice,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 10, optimizer: OptimChoice::Adam { lr: 0.01 }, seed: 0 }
    }
}

/// Per-class evaluation summary. Classes absent from the test set carry
/// `None` accuracy/confidence and a zero count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_accuracy: Vec<Option<f64>>,
    pub per_class_confidence: Vec<Option<f64>>,
    pub average_accuracy: f64,
    pub per_class_count: Vec<usize>,
    pub confusion: Vec<Vec<usize>>,
}

/// Everything needed to resume or audit a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqcnnCheckpoint {
    pub model: HqcnnModel,
    pub optimizer: OptimState,
    pub seed: u64,
    pub epochs_trained: usize,
}

struct ForwardTrace {
    cnn_cache: crate::nn::ForwardCache,
    features: Tensor,
    angles: Vec<f64>,
    readout_cache: crate::nn::ForwardCache,
    logits: Vec<f64>,
}

impl HqcnnModel {
    pub fn new(spec: HqcnnSpec, seed: u64) -> Result<Self> {
        if spec.image_side < 4 {
            return Err(Error::Config(format!(
                "image side {} too small for conv + pool",
                spec.image_side
            )));
        }
        if spec.n_classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        let cnn = Network::new(
            vec![
                LayerSpec::Conv3x3 { in_channels: 1, out_channels: spec.conv_channels },
                LayerSpec::MaxPool2x2,
                LayerSpec::ReLU,
                LayerSpec::Linear { in_features: spec.flat_features(), out_features: spec.n_qubits },
            ],
            derive_seed(seed, 0),
        );
        let vqc = build_ansatz(&AnsatzSpec {
            n_qubits: spec.n_qubits,
            depth: spec.vqc_depth,
            entangler: spec.entangler,
        })?;
        let vqc_params = vqc.init_params(derive_seed(seed, 1));
        let readout = Network::new(
            vec![LayerSpec::Linear { in_features: spec.n_qubits, out_features: spec.n_classes }],
            derive_seed(seed, 2),
        );
        Ok(Self { spec, cnn, vqc, vqc_params, readout })
    }

    pub fn spec(&self) -> &HqcnnSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.cnn.n_params() + self.vqc_params.len() + self.readout.n_params()
    }

    /// All trainable values as mutable flat slices (CNN, circuit, readout).
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let Self { cnn, vqc_params, readout, .. } = self;
        let mut slices = cnn.param_slices_mut();
        slices.push(vqc_params.as_mut_slice());
        slices.extend(readout.param_slices_mut());
        slices
    }

    fn measured(&self) -> Vec<usize> {
        (0..self.spec.n_qubits).collect()
    }

    fn forward_trace(&self, image: &Tensor) -> Result<ForwardTrace> {
        let (features, cnn_cache) = self.cnn.forward(image)?;
        let angles: Vec<f64> = features.data().iter().map(|&f| PI * f.tanh()).collect();
        let state = angle_encode(&angles)?;
        let expectations =
            vqc_forward(&self.vqc, &self.vqc_params, &state, &self.measured())?;
        let exp_tensor = Tensor::new(vec![self.spec.n_qubits], expectations)?;
        let (logit_tensor, readout_cache) = self.readout.forward(&exp_tensor)?;
        let logits = logit_tensor.data().to_vec();
        Ok(ForwardTrace { cnn_cache, features, angles, readout_cache, logits })
    }

    /// Class probabilities for one image.
    pub fn forward(&self, image: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward_trace(image)?.logits))
    }

    pub fn predict(&self, image: &Tensor) -> Result<Prediction> {
        let probs = self.forward(image)?;
        let class = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(Prediction { class, confidence: probs[class], probs })
    }

    pub fn zero_grads(&self) -> HqcnnGrads {
        HqcnnGrads {
            cnn: self.cnn.zero_grads(),
            vqc: vec![0.0; self.vqc_params.len()],
            readout: self.readout.zero_grads(),
        }
    }

    /// Mean cross-entropy over the batch and its gradients for every
    /// trainable part. Circuit parameters get shift-rule gradients; the
    /// encoding angles are differentiated the same way and chained through
    /// the pi*tanh squash into the CNN.
    pub fn loss_grad(&self, images: &[&Tensor], labels: &[usize]) -> Result<(f64, HqcnnGrads)> {
        if images.is_empty() || images.len() != labels.len() {
            return Err(Error::Shape(format!(
                "batch of {} images with {} labels",
                images.len(),
                labels.len()
            )));
        }
        let scale = 1.0 / images.len() as f64;
        let mut total_loss = 0.0;
        let mut grads = self.zero_grads();
        let measured = self.measured();
        for (&image, &label) in images.iter().zip(labels) {
            let trace = self.forward_trace(image)?;
            let (loss, dlogits) = softmax_cross_entropy(&trace.logits, label)?;
            total_loss += loss * scale;

            let upstream = Tensor::new(vec![self.spec.n_classes], dlogits)?;
            let (dexp, readout_grads) = self.readout.backward(&trace.readout_cache, &upstream)?;
            accumulate_grads(&mut grads.readout, &readout_grads, scale);

            let state = angle_encode(&trace.angles)?;
            let vqc_grad =
                param_shift_grad(&self.vqc, &self.vqc_params, &state, &measured, dexp.data())?;
            for (g, d) in grads.vqc.iter_mut().zip(&vqc_grad) {
                *g += d * scale;
            }

            let dangles = input_angle_grad(
                &self.vqc,
                &self.vqc_params,
                &trace.angles,
                &measured,
                dexp.data(),
            )?;
            let dfeatures: Vec<f64> = dangles
                .iter()
                .zip(trace.features.data())
                .map(|(&da, &f)| da * PI * (1.0 - f.tanh().powi(2)))
                .collect();
            let dfeat_tensor = Tensor::new(trace.features.shape().to_vec(), dfeatures)?;
            let (_, cnn_grads) = self.cnn.backward(&trace.cnn_cache, &dfeat_tensor)?;
            accumulate_grads(&mut grads.cnn, &cnn_grads, scale);
        }
        Ok((total_loss, grads))
    }

    fn apply_grads(&mut self, optim: &mut OptimState, grads: &HqcnnGrads) -> Result<()> {
        let mut grad_slices = flat_grad_slices(&grads.cnn);
        grad_slices.push(grads.vqc.as_slice());
        grad_slices.extend(flat_grad_slices(&grads.readout));
        let mut params = self.param_slices_mut();
        optim.apply(&mut params, &grad_slices)
    }

    /// Minibatch training. Sample order reshuffles per epoch from the run
    /// seed; the returned history has exactly `epochs` entries.
    pub fn train(
        &mut self,
        train_set: &LabeledDataset,
        config: &TrainConfig,
    ) -> Result<(Vec<EpochStat>, OptimState)> {
        self.train_monitored(train_set, None, config)
    }

    /// [`Self::train`] with an optional held-out set evaluated after every
    /// epoch; its average accuracy lands in [`EpochStat::test_accuracy`].
    /// Monitoring never influences the updates.
    pub fn train_monitored(
        &mut self,
        train_set: &LabeledDataset,
        monitor_set: Option<&LabeledDataset>,
        config: &TrainConfig,
    ) -> Result<(Vec<EpochStat>, OptimState)> {
        if train_set.is_empty() {
            return Err(Error::EmptyDataset("training set is empty".into()));
        }
        if config.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let mut optim = config.optimizer.build();
        let mut history = Vec::with_capacity(config.epochs);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        for epoch in 0..config.epochs {
            let mut rng = rng_from_seed(derive_seed(config.seed, epoch as u64));
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(config.batch_size) {
                let images: Vec<&Tensor> = chunk.iter().map(|&i| &train_set.images[i]).collect();
                let labels: Vec<usize> = chunk.iter().map(|&i| train_set.labels[i]).collect();
                let (loss, grads) = self.loss_grad(&images, &labels)?;
                self.apply_grads(&mut optim, &grads)?;
                epoch_loss += loss;
                batches += 1;
            }
            let train_accuracy = self.evaluate(train_set)?.average_accuracy;
            let test_accuracy = match monitor_set {
                Some(ds) => Some(self.evaluate(ds)?.average_accuracy),
                None => None,
            };
            history.push(EpochStat {
                epoch,
                loss: epoch_loss / batches as f64,
                train_accuracy,
                test_accuracy,
            });
        }
        Ok((history, optim))
    }

    /// Per-class accuracy, mean predicted-class confidence, and the
    /// confusion matrix (rows = true class, columns = predicted).
    pub fn evaluate(&self, test_set: &LabeledDataset) -> Result<EvalReport> {
        if test_set.is_empty() {
            return Err(Error::EmptyDataset("evaluation set is empty".into()));
        }
        let c = self.spec.n_classes;
        let mut count = vec![0usize; c];
        let mut correct = vec![0usize; c];
        let mut confidence_sum = vec![0.0f64; c];
        let mut confusion = vec![vec![0usize; c]; c];
        for (image, &label) in test_set.images.iter().zip(&test_set.labels) {
            if label >= c {
                return Err(Error::Index(format!("label {label} with {c} classes")));
            }
            let pred = self.predict(image)?;
            count[label] += 1;
            confusion[label][pred.class] += 1;
            confidence_sum[label] += pred.confidence;
            if pred.class == label {
                correct[label] += 1;
            }
        }
        let per_class_accuracy = (0..c)
            .map(|i| (count[i] > 0).then(|| correct[i] as f64 / count[i] as f64))
            .collect();
        let per_class_confidence = (0..c)
            .map(|i| (count[i] > 0).then(|| confidence_sum[i] / count[i] as f64))
            .collect();
        let average_accuracy =
            correct.iter().sum::<usize>() as f64 / count.iter().sum::<usize>() as f64;
        Ok(EvalReport {
            per_class_accuracy,
            per_class_confidence,
            average_accuracy,
            per_class_count: count,
            confusion,
        })
    }
}
