//! Adversarial generators. The hybrid model runs noise through a
//! parameterized circuit, reads per-qubit expectations, and lets a small
//! classical net paint pixels; a classical MLP generator serves as the
//! baseline. A distribution-level toy mode trains a bare 2-qubit circuit
//! against a fixed target using exact outcome probabilities.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{allocate_counts, ClassSampler};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{
    accumulate_grads, flat_grad_slices, gan_bce_losses, softmax, GanBce, LayerSpec, Network,
    OptimState, Tensor, PROB_CLAMP,
};
use crate::quantum::{angle_encode, StateVector};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::vqc::{build_ansatz, param_shift_grad, vqc_forward, AnsatzSpec, Entangler, ParamCircuit};

/// Architecture of the hybrid generator/discriminator pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QganSpec {
    /// Noise dimension; equals the generator circuit's qubit count.
    pub noise_dim: usize,
    pub vqc_depth: usize,
    pub entangler: Entangler,
    /// Hidden sizes of the classical post-processing net.
    pub post_hidden: Vec<usize>,
    pub image_side: usize,
    /// Hidden sizes of the discriminator MLP.
    pub disc_hidden: Vec<usize>,
}

impl Default for QganSpec {
    fn default() -> Self {
        Self {
            noise_dim: 4,
            vqc_depth: 2,
            entangler: Entangler::Ring,
            post_hidden: vec![16],
            image_side: 8,
            disc_hidden: vec![64, 32],
        }
    }
}

fn mlp(sizes: &[usize], final_sigmoid: bool, seed: u64) -> Network {
    let mut layers = Vec::new();
    for (i, pair) in sizes.windows(2).enumerate() {
        layers.push(LayerSpec::Linear { in_features: pair[0], out_features: pair[1] });
        if i + 2 < sizes.len() {
            layers.push(LayerSpec::ReLU);
        }
    }
    if final_sigmoid {
        layers.push(LayerSpec::Sigmoid);
    }
    Network::new(layers, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QganModel {
    spec: QganSpec,
    gen_vqc: ParamCircuit,
    gen_vqc_params: Vec<f64>,
    gen_post: Network,
    discriminator: Network,
}

/// Per-step training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanStep {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Min-max game value on the step's real/fake batch, before the update.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHistory {
    pub steps: Vec<GanStep>,
    pub g_params: usize,
    pub d_params: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub seed: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 16, lr_g: 2e-3, lr_d: 2e-3, d_steps: 1, seed: 0 }
    }
}

impl GanTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.d_steps == 0 {
            return Err(Error::Config("batch_size and d_steps must be >= 1".into()));
        }
        if self.lr_g <= 0.0 || self.lr_d <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

struct GenTrace {
    state: StateVector,
    post_cache: crate::nn::ForwardCache,
    flat: Tensor,
}

impl QganModel {
    pub fn new(spec: QganSpec, seed: u64) -> Result<Self> {
        if spec.image_side == 0 {
            return Err(Error::Config("image side must be >= 1".into()));
        }
        let gen_vqc = build_ansatz(&AnsatzSpec {
            n_qubits: spec.noise_dim,
            depth: spec.vqc_depth,
            entangler: spec.entangler,
        })?;
        let gen_vqc_params = gen_vqc.init_params(derive_seed(seed, 0));
        let pixels = spec.image_side * spec.image_side;
        let mut post_sizes = vec![spec.noise_dim];
        post_sizes.extend(&spec.post_hidden);
        post_sizes.push(pixels);
        let gen_post = mlp(&post_sizes, true, derive_seed(seed, 1));
        let mut disc_sizes = vec![pixels];
        disc_sizes.extend(&spec.disc_hidden);
        disc_sizes.push(1);
        let discriminator = mlp(&disc_sizes, true, derive_seed(seed, 2));
        Ok(Self { spec, gen_vqc, gen_vqc_params, gen_post, discriminator })
    }

    pub fn spec(&self) -> &QganSpec {
        &self.spec
    }

    pub fn generator_param_count(&self) -> usize {
        self.gen_vqc_params.len() + self.gen_post.n_params()
    }

    pub fn discriminator_param_count(&self) -> usize {
        self.discriminator.n_params()
    }

    pub fn image_shape(&self) -> Vec<usize> {
        vec![1, self.spec.image_side, self.spec.image_side]
    }

    /// Mutable views of every generator parameter: the circuit angles first,
    /// then the post-net weights layer by layer. Matches the gradient order
    /// of [`Self::generator_loss_grads`].
    pub fn generator_param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut slices = vec![self.gen_vqc_params.as_mut_slice()];
        slices.extend(self.gen_post.param_slices_mut());
        slices
    }

    fn measured(&self) -> Vec<usize> {
        (0..self.spec.noise_dim).collect()
    }

    fn generator_trace(&self, noise: &[f64]) -> Result<GenTrace> {
        if noise.len() != self.spec.noise_dim {
            return Err(Error::Shape(format!(
                "noise of length {}, generator expects {}",
                noise.len(),
                self.spec.noise_dim
            )));
        }
        let state = angle_encode(noise)?;
        let expvals = vqc_forward(&self.gen_vqc, &self.gen_vqc_params, &state, &self.measured())?;
        let exp_tensor = Tensor::new(vec![self.spec.noise_dim], expvals)?;
        let (flat, post_cache) = self.gen_post.forward(&exp_tensor)?;
        Ok(GenTrace { state, post_cache, flat })
    }

    /// Noise in, image out: encode, run the circuit, measure, post-process.
    /// Pixels land in [0, 1] through the final sigmoid.
    pub fn generator_forward(&self, noise: &[f64]) -> Result<Tensor> {
        let trace = self.generator_trace(noise)?;
        Tensor::new(self.image_shape(), trace.flat.data().to_vec())
    }

    /// Probability the discriminator assigns to "real".
    pub fn discriminate(&self, image: &Tensor) -> Result<f64> {
        let (out, _) = self.discriminator.forward(image)?;
        Ok(out.data()[0])
    }

    /// Generator objective against the frozen discriminator for a noise
    /// batch, with gradients for the circuit parameters (shift rule chained
    /// through the post-net and discriminator) and the post-net weights.
    pub fn generator_loss_grads(
        &self,
        noises: &[Vec<f64>],
    ) -> Result<(f64, Vec<f64>, Vec<Vec<Tensor>>)> {
        if noises.is_empty() {
            return Err(Error::Shape("empty noise batch".into()));
        }
        let traces = noises
            .iter()
            .map(|z| self.generator_trace(z))
            .collect::<Result<Vec<_>>>()?;
        let mut d_probs = Vec::with_capacity(traces.len());
        let mut d_caches = Vec::with_capacity(traces.len());
        for t in &traces {
            let (out, cache) = self.discriminator.forward(&t.flat)?;
            d_probs.push(out.data()[0]);
            d_caches.push(cache);
        }
        let bce = gan_bce_losses(&[], &d_probs);
        let mut vqc_grads = vec![0.0; self.gen_vqc_params.len()];
        let mut post_grads = self.gen_post.zero_grads();
        let measured = self.measured();
        for (k, t) in traces.iter().enumerate() {
            let upstream = Tensor::new(vec![1], vec![bce.d_fake_grad_g[k]])?;
            let (dpixels, _) = self.discriminator.backward(&d_caches[k], &upstream)?;
            let (dexp, pg) = self.gen_post.backward(&t.post_cache, &dpixels)?;
            accumulate_grads(&mut post_grads, &pg, 1.0);
            let shift = param_shift_grad(
                &self.gen_vqc,
                &self.gen_vqc_params,
                &t.state,
                &measured,
                dexp.data(),
            )?;
            for (g, s) in vqc_grads.iter_mut().zip(&shift) {
                *g += s;
            }
        }
        Ok((bce.g_loss, vqc_grads, post_grads))
    }

    /// Discriminator loss on a real/fake batch with weight gradients.
    fn discriminator_loss_grads(
        &self,
        reals: &[&Tensor],
        fakes: &[Tensor],
    ) -> Result<(GanBce, Vec<Vec<Tensor>>)> {
        let mut d_grads = self.discriminator.zero_grads();
        let mut real_probs = Vec::with_capacity(reals.len());
        let mut real_caches = Vec::with_capacity(reals.len());
        for &img in reals {
            let (out, cache) = self.discriminator.forward(img)?;
            real_probs.push(out.data()[0]);
            real_caches.push(cache);
        }
        let mut fake_probs = Vec::with_capacity(fakes.len());
        let mut fake_caches = Vec::with_capacity(fakes.len());
        for img in fakes {
            let (out, cache) = self.discriminator.forward(img)?;
            fake_probs.push(out.data()[0]);
            fake_caches.push(cache);
        }
        let bce = gan_bce_losses(&real_probs, &fake_probs);
        for (k, cache) in real_caches.iter().enumerate() {
            let upstream = Tensor::new(vec![1], vec![bce.d_real_grad[k]])?;
            let (_, grads) = self.discriminator.backward(cache, &upstream)?;
            accumulate_grads(&mut d_grads, &grads, 1.0);
        }
        for (k, cache) in fake_caches.iter().enumerate() {
            let upstream = Tensor::new(vec![1], vec![bce.d_fake_grad_d[k]])?;
            let (_, grads) = self.discriminator.backward(cache, &upstream)?;
            accumulate_grads(&mut d_grads, &grads, 1.0);
        }
        Ok((bce, d_grads))
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// Alternating adversarial training of the hybrid model. Each loop runs
/// `d_steps` discriminator updates then one generator update; the recorded
/// losses are measured before the corresponding weight update.
pub fn train_qgan(
    model: &mut QganModel,
    train_set: &LabeledDataset,
    config: &GanTrainConfig,
) -> Result<GanHistory> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("adversarial training set is empty".into()));
    }
    let mut optim_d = OptimState::adam(config.lr_d);
    let mut optim_g = OptimState::adam(config.lr_g);
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x9a4));
    let mut steps = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 0x5f0 + epoch as u64));
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let reals: Vec<&Tensor> = chunk.iter().map(|&i| &train_set.images[i]).collect();
            let mut d_loss = 0.0;
            let mut value = 0.0;
            for _ in 0..config.d_steps {
                let fakes = (0..chunk.len())
                    .map(|_| model.generator_forward(&draw_noise(&mut rng, model.spec.noise_dim)))
                    .collect::<Result<Vec<_>>>()?;
                let (bce, d_grads) = model.discriminator_loss_grads(&reals, &fakes)?;
                d_loss = bce.d_loss;
                value = bce.value;
                let grad_slices = flat_grad_slices(&d_grads);
                let mut params = model.discriminator.param_slices_mut();
                optim_d.apply(&mut params, &grad_slices)?;
            }
            let noises: Vec<Vec<f64>> = (0..chunk.len())
                .map(|_| draw_noise(&mut rng, model.spec.noise_dim))
                .collect();
            let (g_loss, vqc_grads, post_grads) = model.generator_loss_grads(&noises)?;
            {
                let mut grad_slices = vec![vqc_grads.as_slice()];
                grad_slices.extend(flat_grad_slices(&post_grads));
                let QganModel { gen_vqc_params, gen_post, .. } = model;
                let mut params = vec![gen_vqc_params.as_mut_slice()];
                params.extend(gen_post.param_slices_mut());
                optim_g.apply(&mut params, &grad_slices)?;
            }
            if !(d_loss.is_finite() && g_loss.is_finite() && value.is_finite()) {
                return Err(Error::Numeric(format!("non-finite losses at step {step}")));
            }
            steps.push(GanStep { step, d_loss, g_loss, value });
            step += 1;
        }
    }
    Ok(GanHistory {
        steps,
        g_params: model.generator_param_count(),
        d_params: model.discriminator_param_count(),
    })
}

/// `n` images from fresh noise, deterministic in `seed`.
pub fn generate_samples(model: &QganModel, n: usize, seed: u64) -> Result<Vec<Tensor>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| model.generator_forward(&draw_noise(&mut rng, model.spec.noise_dim)))
        .collect()
}

/// Fully classical baseline: an MLP generator against the same kind of
/// discriminator, same losses, same noise prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalGan {
    pub generator: Network,
    pub discriminator: Network,
    pub noise_dim: usize,
    pub image_side: usize,
}

impl ClassicalGan {
    pub fn new(spec: &QganSpec, gen_hidden: &[usize], seed: u64) -> Self {
        let pixels = spec.image_side * spec.image_side;
        let mut gen_sizes = vec![spec.noise_dim];
        gen_sizes.extend(gen_hidden);
        gen_sizes.push(pixels);
        let mut disc_sizes = vec![pixels];
        disc_sizes.extend(&spec.disc_hidden);
        disc_sizes.push(1);
        Self {
            generator: mlp(&gen_sizes, true, derive_seed(seed, 3)),
            discriminator: mlp(&disc_sizes, true, derive_seed(seed, 4)),
            noise_dim: spec.noise_dim,
            image_side: spec.image_side,
        }
    }

    pub fn generator_forward(&self, noise: &[f64]) -> Result<Tensor> {
        let input = Tensor::new(vec![self.noise_dim], noise.to_vec())?;
        let (flat, _) = self.generator.forward(&input)?;
        Tensor::new(vec![1, self.image_side, self.image_side], flat.data().to_vec())
    }
}

/// Alternating training for the classical pair; mirrors [`train_qgan`] with
/// plain backprop replacing the shift rule.
pub fn train_classical_gan(
    model: &mut ClassicalGan,
    train_set: &LabeledDataset,
    config: &GanTrainConfig,
) -> Result<GanHistory> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("adversarial training set is empty".into()));
    }
    let mut optim_d = OptimState::adam(config.lr_d);
    let mut optim_g = OptimState::adam(config.lr_g);
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x9a4));
    let mut steps = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 0x5f0 + epoch as u64));
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let mut d_loss = 0.0;
            let mut value = 0.0;
            for _ in 0..config.d_steps {
                let mut real_probs = Vec::new();
                let mut real_caches = Vec::new();
                for &i in chunk {
                    let (out, cache) = model.discriminator.forward(&train_set.images[i])?;
                    real_probs.push(out.data()[0]);
                    real_caches.push(cache);
                }
                let mut fake_probs = Vec::new();
                let mut fake_caches = Vec::new();
                for _ in chunk {
                    let image = model.generator_forward(&draw_noise(&mut rng, model.noise_dim))?;
                    let (out, cache) = model.discriminator.forward(&image)?;
                    fake_probs.push(out.data()[0]);
                    fake_caches.push(cache);
                }
                let bce = gan_bce_losses(&real_probs, &fake_probs);
                d_loss = bce.d_loss;
                value = bce.value;
                let mut d_grads = model.discriminator.zero_grads();
                for (k, cache) in real_caches.iter().enumerate() {
                    let upstream = Tensor::new(vec![1], vec![bce.d_real_grad[k]])?;
                    let (_, grads) = model.discriminator.backward(cache, &upstream)?;
                    accumulate_grads(&mut d_grads, &grads, 1.0);
                }
                for (k, cache) in fake_caches.iter().enumerate() {
                    let upstream = Tensor::new(vec![1], vec![bce.d_fake_grad_d[k]])?;
                    let (_, grads) = model.discriminator.backward(cache, &upstream)?;
                    accumulate_grads(&mut d_grads, &grads, 1.0);
                }
                let grad_slices = flat_grad_slices(&d_grads);
                let mut params = model.discriminator.param_slices_mut();
                optim_d.apply(&mut params, &grad_slices)?;
            }
            // Generator update via straight backprop through the frozen D.
            let mut g_loss = 0.0;
            let mut g_grads = model.generator.zero_grads();
            let mut gen_caches = Vec::new();
            let mut d_probs = Vec::new();
            let mut d_caches = Vec::new();
            for _ in chunk {
                let noise = draw_noise(&mut rng, model.noise_dim);
                let input = Tensor::new(vec![model.noise_dim], noise)?;
                let (flat, gen_cache) = model.generator.forward(&input)?;
                let (out, d_cache) = model.discriminator.forward(&flat)?;
                d_probs.push(out.data()[0]);
                gen_caches.push(gen_cache);
                d_caches.push(d_cache);
            }
            let bce = gan_bce_losses(&[], &d_probs);
            g_loss += bce.g_loss;
            for (k, (gen_cache, d_cache)) in gen_caches.iter().zip(&d_caches).enumerate() {
                let upstream = Tensor::new(vec![1], vec![bce.d_fake_grad_g[k]])?;
                let (dpixels, _) = model.discriminator.backward(d_cache, &upstream)?;
                let (_, grads) = model.generator.backward(gen_cache, &dpixels)?;
                accumulate_grads(&mut g_grads, &grads, 1.0);
            }
            let grad_slices = flat_grad_slices(&g_grads);
            let mut params = model.generator.param_slices_mut();
            optim_g.apply(&mut params, &grad_slices)?;
            if !(d_loss.is_finite() && g_loss.is_finite() && value.is_finite()) {
                return Err(Error::Numeric(format!("non-finite losses at step {step}")));
            }
            steps.push(GanStep { step, d_loss, g_loss, value });
            step += 1;
        }
    }
    Ok(GanHistory {
        steps,
        g_params: model.generator.n_params(),
        d_params: model.discriminator.n_params(),
    })
}

// --- Per-class conditioning ---------------------------------------------------

/// Clamp every share up to at least `floor`, renormalizing the rest.
/// Degenerate inputs fall back to the uniform distribution.
pub fn floor_simplex(r: &[f64], floor: f64) -> Vec<f64> {
    let n = r.len();
    let uniform = vec![1.0 / n as f64; n];
    if n == 0 || floor * n as f64 >= 1.0 {
        return uniform;
    }
    let total: f64 = r.iter().sum();
    if total <= 0.0 || r.iter().any(|&v| v < 0.0) {
        return uniform;
    }
    let mut pinned = vec![false; n];
    loop {
        let pinned_mass = floor * pinned.iter().filter(|&&p| p).count() as f64;
        let free_sum: f64 = r
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(&v, _)| v)
            .sum();
        if free_sum <= 0.0 {
            return uniform;
        }
        let scale = (1.0 - pinned_mass) / free_sum;
        if let Some(i) =
            (0..n).find(|&i| !pinned[i] && r[i] * scale < floor - 1e-12)
        {
            pinned[i] = true;
            continue;
        }
        return (0..n)
            .map(|i| if pinned[i] { floor } else { r[i] * scale })
            .collect();
    }
}

/// How per-class generator training is weighted by an error profile:
/// real-batch sampling shares (floored at 0.02) and integer epoch budgets
/// proportional to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditioning {
    pub real_sampling: Vec<f64>,
    pub epoch_budgets: Vec<usize>,
}

pub const SAMPLING_FLOOR: f64 = 0.02;

pub fn per_class_conditioning(total_epochs: usize, r: &[f64]) -> Result<ClassConditioning> {
    if r.is_empty() {
        return Err(Error::Config("conditioning needs at least one class".into()));
    }
    let real_sampling = floor_simplex(r, SAMPLING_FLOOR);
    let epoch_budgets = allocate_counts(total_epochs, &real_sampling)?;
    Ok(ClassConditioning { real_sampling, epoch_budgets })
}

/// One trained generator per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGenerators {
    pub models: Vec<QganModel>,
    pub trained: bool,
}

impl ClassSampler for ClassGenerators {
    fn sample(&self, class: usize, n: usize, seed: u64) -> Result<Vec<Tensor>> {
        let model = self.models.get(class).ok_or_else(|| {
            Error::Index(format!("class {class} with {} generators", self.models.len()))
        })?;
        generate_samples(model, n, seed)
    }

    fn is_trained(&self) -> bool {
        self.trained
    }
}

/// Train one generator per class on that class's real samples. Conditioning,
/// when given, sets each class's epoch budget; otherwise every class gets
/// `config.epochs`.
pub fn train_class_generators(
    spec: &QganSpec,
    config: &GanTrainConfig,
    train_set: &LabeledDataset,
    conditioning: Option<&ClassConditioning>,
) -> Result<(ClassGenerators, Vec<GanHistory>)> {
    let n_classes = train_set.n_classes();
    if let Some(c) = conditioning {
        if c.epoch_budgets.len() != n_classes {
            return Err(Error::Shape(format!(
                "conditioning covers {} classes, dataset has {n_classes}",
                c.epoch_budgets.len()
            )));
        }
    }
    let mut models = Vec::with_capacity(n_classes);
    let mut histories = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let members: Vec<usize> =
            (0..train_set.len()).filter(|&i| train_set.labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::EmptyDataset(format!("class {class} has no samples")));
        }
        let class_set = LabeledDataset::new(
            members.iter().map(|&i| train_set.images[i].clone()).collect(),
            vec![0; members.len()],
            vec![train_set.class_names[class].clone()],
        )?;
        let mut model = QganModel::new(spec.clone(), derive_seed(config.seed, class as u64))?;
        let class_config = GanTrainConfig {
            epochs: conditioning.map_or(config.epochs, |c| c.epoch_budgets[class]),
            seed: derive_seed(config.seed, 0x1000 + class as u64),
            ..*config
        };
        histories.push(train_qgan(&mut model, &class_set, &class_config)?);
        models.push(model);
    }
    Ok((ClassGenerators { models, trained: true }, histories))
}

// --- Distribution-level toy mode ----------------------------------------------

/// Total-variation distance between two distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Outcome probabilities of measuring the circuit state in the computational
/// basis, starting from |0...0>.
pub fn born_probabilities(pc: &ParamCircuit, params: &[f64]) -> Result<Vec<f64>> {
    let state = pc.run_bound(params, &StateVector::zero(pc.n_qubits())?)?;
    Ok(state.probabilities())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornConfig {
    pub n_qubits: usize,
    pub depth: usize,
    /// Step budget; training may end sooner via `stop_tv`.
    pub steps: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub d_steps: usize,
    /// Stop as soon as the distance to the target drops below this value.
    /// Adversarial play oscillates around the matched distribution, so the
    /// run ends at the crossing rather than riding the cycle.
    pub stop_tv: Option<f64>,
    pub seed: u64,
}

impl Default for BornConfig {
    fn default() -> Self {
        Self {
            n_qubits: 2,
            depth: 2,
            steps: 2000,
            lr_g: 0.05,
            lr_d: 0.05,
            d_steps: 1,
            stop_tv: Some(BORN_CONVERGENCE_TV),
            seed: 0,
        }
    }
}

/// Result of a toy-mode run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornOutcome {
    /// Final model distribution over the 2^n outcomes.
    pub probs: Vec<f64>,
    /// Total-variation distance to the target after training.
    pub tv: f64,
    /// First step at which the distance dropped below 0.1, if any.
    pub converged_step: Option<usize>,
    pub history: GanHistory,
}

const BORN_CONVERGENCE_TV: f64 = 0.1;

fn validate_target(target: &[f64], n_qubits: usize) -> Result<()> {
    if target.len() != 1 << n_qubits {
        return Err(Error::Shape(format!(
            "target has {} outcomes, {n_qubits} qubits give {}",
            target.len(),
            1 << n_qubits
        )));
    }
    if target.iter().any(|&p| p < 0.0) || (target.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("target must be a probability distribution".into()));
    }
    Ok(())
}

/// Discriminator over basis outcomes: one-hot input, one sigmoid output.
fn born_discriminator(n_outcomes: usize, seed: u64) -> Network {
    mlp(&[n_outcomes, 16, 1], true, seed)
}

fn one_hot(n: usize, index: usize) -> Tensor {
    let mut t = Tensor::zeros(vec![n]);
    t.data_mut()[index] = 1.0;
    t
}

/// D(x) for every outcome, with caches for backprop.
fn disc_all(
    disc: &Network,
    n: usize,
) -> Result<(Vec<f64>, Vec<crate::nn::ForwardCache>)> {
    let mut probs = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    for x in 0..n {
        let (out, cache) = disc.forward(&one_hot(n, x))?;
        probs.push(out.data()[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP));
        caches.push(cache);
    }
    Ok((probs, caches))
}

/// Exact-expectation discriminator update. Returns (d_loss, value).
fn born_d_step(
    disc: &mut Network,
    optim: &mut OptimState,
    target: &[f64],
    p_g: &[f64],
) -> Result<(f64, f64)> {
    let n = target.len();
    let (d, caches) = disc_all(disc, n)?;
    let mut d_loss = 0.0;
    let mut value = 0.0;
    let mut grads = disc.zero_grads();
    for x in 0..n {
        d_loss += -target[x] * d[x].ln() - p_g[x] * (1.0 - d[x]).ln();
        value += target[x] * d[x].ln() + p_g[x] * (1.0 - d[x]).ln();
        let upstream_val = -target[x] / d[x] + p_g[x] / (1.0 - d[x]);
        let upstream = Tensor::new(vec![1], vec![upstream_val])?;
        let (_, g) = disc.backward(&caches[x], &upstream)?;
        accumulate_grads(&mut grads, &g, 1.0);
    }
    let grad_slices = flat_grad_slices(&grads);
    let mut params = disc.param_slices_mut();
    optim.apply(&mut params, &grad_slices)?;
    Ok((d_loss, value))
}

/// Expectation of a diagonal observable under the circuit's distribution.
fn diagonal_expectation(pc: &ParamCircuit, params: &[f64], f: &[f64]) -> Result<f64> {
    let p = born_probabilities(pc, params)?;
    Ok(p.iter().zip(f).map(|(a, b)| a * b).sum())
}

/// Train a bare quantum circuit to match a target outcome distribution,
/// using exact probabilities on both sides of the adversarial game. The
/// generator loss is the expectation of -log D(x), differentiated with the
/// shift rule applied to that diagonal observable.
pub fn train_born_qgan(target: &[f64], config: &BornConfig) -> Result<(ParamCircuit, Vec<f64>, BornOutcome)> {
    validate_target(target, config.n_qubits)?;
    let pc = build_ansatz(&AnsatzSpec {
        n_qubits: config.n_qubits,
        depth: config.depth,
        entangler: Entangler::Ring,
    })?;
    let mut params = pc.init_params(derive_seed(config.seed, 0));
    let n = target.len();
    let mut disc = born_discriminator(n, derive_seed(config.seed, 1));
    let mut optim_d = OptimState::adam(config.lr_d);
    let mut optim_g = OptimState::adam(config.lr_g);
    let mut steps = Vec::with_capacity(config.steps);
    let mut converged_step = None;
    for step in 0..config.steps {
        let p_g = born_probabilities(&pc, &params)?;
        let mut d_loss = 0.0;
        let mut value = 0.0;
        for _ in 0..config.d_steps.max(1) {
            let (dl, v) = born_d_step(&mut disc, &mut optim_d, target, &p_g)?;
            d_loss = dl;
            value = v;
        }
        // Frozen-discriminator scores define the generator's observable.
        let (d, _) = disc_all(&disc, n)?;
        let f: Vec<f64> = d.iter().map(|&p| -p.ln()).collect();
        let g_loss = p_g.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        let mut grad = vec![0.0; params.len()];
        let mut shifted = params.clone();
        for j in 0..params.len() {
            shifted[j] = params[j] + std::f64::consts::FRAC_PI_2;
            let up = diagonal_expectation(&pc, &shifted, &f)?;
            shifted[j] = params[j] - std::f64::consts::FRAC_PI_2;
            let down = diagonal_expectation(&pc, &shifted, &f)?;
            shifted[j] = params[j];
            grad[j] = (up - down) / 2.0;
        }
        optim_g.apply(&mut [params.as_mut_slice()], &[grad.as_slice()])?;
        steps.push(GanStep { step, d_loss, g_loss, value });
        let tv = tv_distance(&born_probabilities(&pc, &params)?, target);
        if converged_step.is_none() && tv < BORN_CONVERGENCE_TV {
            converged_step = Some(step);
        }
        if config.stop_tv.is_some_and(|t| tv < t) {
            break;
        }
    }
    let probs = born_probabilities(&pc, &params)?;
    let tv = tv_distance(&probs, target);
    let history = GanHistory {
        steps,
        g_params: params.len(),
        d_params: disc.n_params(),
    };
    Ok((pc, params, BornOutcome { probs, tv, converged_step, history }))
}

/// Classical twin of the toy mode: a softmax over logits plays the generator
/// against the same discriminator, with exact gradients throughout.
pub fn train_born_classical(target: &[f64], config: &BornConfig) -> Result<(Vec<f64>, BornOutcome)> {
    validate_target(target, config.n_qubits)?;
    let n = target.len();
    let mut rng = rng_from_seed(derive_seed(config.seed, 0));
    let mut logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut disc = born_discriminator(n, derive_seed(config.seed, 1));
    let mut optim_d = OptimState::adam(config.lr_d);
    let mut optim_g = OptimState::adam(config.lr_g);
    let mut steps = Vec::with_capacity(config.steps);
    let mut converged_step = None;
    for step in 0..config.steps {
        let p_g = softmax(&logits);
        let mut d_loss = 0.0;
        let mut value = 0.0;
        for _ in 0..config.d_steps.max(1) {
            let (dl, v) = born_d_step(&mut disc, &mut optim_d, target, &p_g)?;
            d_loss = dl;
            value = v;
        }
        let (d, _) = disc_all(&disc, n)?;
        let f: Vec<f64> = d.iter().map(|&p| -p.ln()).collect();
        let g_loss: f64 = p_g.iter().zip(&f).map(|(a, b)| a * b).sum();
        // d/dlogit_k of sum_x p_x f_x with p = softmax(logits).
        let grad: Vec<f64> = (0..n).map(|k| p_g[k] * (f[k] - g_loss)).collect();
        optim_g.apply(&mut [logits.as_mut_slice()], &[grad.as_slice()])?;
        steps.push(GanStep { step, d_loss, g_loss, value });
        let tv = tv_distance(&softmax(&logits), target);
        if converged_step.is_none() && tv < BORN_CONVERGENCE_TV {
            converged_step = Some(step);
        }
        if config.stop_tv.is_some_and(|t| tv < t) {
            break;
        }
    }
    let probs = softmax(&logits);
    let tv = tv_distance(&probs, target);
    let history = GanHistory { steps, g_params: n, d_params: disc.n_params() };
    Ok((logits, BornOutcome { probs, tv, converged_step, history }))
}
