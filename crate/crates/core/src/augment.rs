//! Dataset augmentation strategies built around a trained classifier:
//! uniform generation, error-profile-driven generation with per-class
//! confidence filtering and retries, and a classical-transform baseline.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::hqcnn::HqcnnModel;
use crate::nn::Tensor;
use crate::seeding::{derive_seed, rng_from_seed};

/// Anything that can assign a class and a confidence to an image.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    /// Predicted class and its probability.
    fn predict_class(&self, image: &Tensor) -> Result<(usize, f64)>;
}

impl Classifier for HqcnnModel {
    fn n_classes(&self) -> usize {
        self.spec().n_classes
    }

    fn predict_class(&self, image: &Tensor) -> Result<(usize, f64)> {
        let p = self.predict(image)?;
        Ok((p.class, p.confidence))
    }
}

/// Anything that can produce images of a requested class.
pub trait ClassSampler {
    /// `n` images of `class`, deterministic in `seed`.
    fn sample(&self, class: usize, n: usize, seed: u64) -> Result<Vec<Tensor>>;
    /// Whether the sampler has been trained; untrained samplers are refused.
    fn is_trained(&self) -> bool;
}

/// Per-class misclassification counts and their normalized shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub e: Vec<usize>,
    pub e_total: usize,
    pub r: Vec<f64>,
}

impl ErrorProfile {
    pub fn from_errors(e: Vec<usize>) -> Self {
        let e_total: usize = e.iter().sum();
        let r = if e_total == 0 {
            vec![1.0 / e.len() as f64; e.len()]
        } else {
            e.iter().map(|&c| c as f64 / e_total as f64).collect()
        };
        Self { e, e_total, r }
    }
}

/// Count misclassifications per true class on `test_set`. A model with no
/// errors yields the uniform share vector.
pub fn compute_error_profile(
    model: &dyn Classifier,
    test_set: &LabeledDataset,
) -> Result<ErrorProfile> {
    if test_set.is_empty() {
        return Err(Error::EmptyDataset("error profile needs a non-empty test set".into()));
    }
    let mut e = vec![0usize; model.n_classes()];
    for (image, &label) in test_set.images.iter().zip(&test_set.labels) {
        if label >= e.len() {
            return Err(Error::Index(format!("label {label} with {} classes", e.len())));
        }
        let (predicted, _) = model.predict_class(image)?;
        if predicted != label {
            e[label] += 1;
        }
    }
    Ok(ErrorProfile::from_errors(e))
}

/// Integer apportionment of `n_gen` by shares `r` (largest-remainder method;
/// remainder ties go to the lower class index). Totals are exact.
pub fn allocate_counts(n_gen: usize, r: &[f64]) -> Result<Vec<usize>> {
    if r.is_empty() {
        return Err(Error::Config("allocation needs at least one class".into()));
    }
    if r.iter().any(|&v| !(0.0..=1.0 + 1e-9).contains(&v)) {
        return Err(Error::Config(format!("shares must lie in [0, 1], got {r:?}")));
    }
    let mut counts: Vec<usize> = Vec::with_capacity(r.len());
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(r.len());
    let mut used = 0usize;
    for (i, &share) in r.iter().enumerate() {
        let exact = n_gen as f64 * share;
        let floor = exact.floor() as usize;
        counts.push(floor);
        used += floor;
        fractions.push((i, exact - floor as f64));
    }
    // Largest fractional part first; ties favor the lower index.
    fractions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for k in 0..n_gen.saturating_sub(used) {
        counts[fractions[k % fractions.len()].0] += 1;
    }
    Ok(counts)
}

/// Augmentation settings shared by the filtering strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Total number of samples to add.
    pub n_gen: usize,
    /// Base confidence threshold.
    pub tau: f64,
    /// Threshold decrease rate for high-error classes.
    pub alpha: f64,
    /// Threshold increase rate for low-error classes.
    pub beta: f64,
    /// Generation rounds allowed per class before accepting a shortfall.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { n_gen: 300, tau: 0.48, alpha: 0.04, beta: 0.04, max_attempts: 5, seed: 0 }
    }
}

pub const THRESHOLD_FLOOR: f64 = 0.05;
pub const THRESHOLD_CEIL: f64 = 0.99;

/// Per-class acceptance thresholds: classes holding more than their uniform
/// share of the errors get `tau - alpha * r`, the rest `tau + beta * r`,
/// clamped to [0.05, 0.99].
pub fn class_thresholds(config: &AugmentConfig, profile: &ErrorProfile) -> Vec<f64> {
    let uniform = 1.0 / profile.r.len() as f64;
    profile
        .r
        .iter()
        .map(|&r| {
            let t = if r > uniform {
                config.tau - config.alpha * r
            } else {
                config.tau + config.beta * r
            };
            t.clamp(THRESHOLD_FLOOR, THRESHOLD_CEIL)
        })
        .collect()
}

/// Keep the samples the model assigns to `class_i` with confidence at least
/// `tau_i`, in their original order, paired with that confidence.
pub fn filter_samples(
    model: &dyn Classifier,
    samples: &[Tensor],
    class_i: usize,
    tau_i: f64,
) -> Result<Vec<(Tensor, f64)>> {
    let mut accepted = Vec::new();
    for sample in samples {
        let (predicted, confidence) = model.predict_class(sample)?;
        if predicted == class_i && confidence >= tau_i {
            accepted.push((sample.clone(), confidence));
        }
    }
    Ok(accepted)
}

/// One generated image with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub image: Tensor,
    pub class: usize,
    /// Classifier confidence when a model was in the loop; absent for the
    /// classical-transform baseline.
    pub confidence: Option<f64>,
    /// Generation round the sample came from (0-based).
    pub attempt: usize,
    /// Seed the sample's generation batch was drawn from.
    pub seed: u64,
}

/// An original dataset plus tagged generated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub original: LabeledDataset,
    pub generated: Vec<GeneratedSample>,
    /// Classes that fell short of their target after all attempts.
    pub warnings: Vec<String>,
    pub profile: Option<ErrorProfile>,
    pub thresholds: Option<Vec<f64>>,
}

impl AugmentedDataset {
    fn unfiltered(original: LabeledDataset, generated: Vec<GeneratedSample>) -> Self {
        Self { original, generated, warnings: Vec::new(), profile: None, thresholds: None }
    }

    /// Original and generated samples as one dataset.
    pub fn combined(&self) -> Result<LabeledDataset> {
        let mut images = self.original.images.clone();
        let mut labels = self.original.labels.clone();
        for g in &self.generated {
            images.push(g.image.clone());
            labels.push(g.class);
        }
        LabeledDataset::new(images, labels, self.original.class_names.clone())
    }

    /// Generated-sample counts per class.
    pub fn generated_histogram(&self, n_classes: usize) -> Vec<usize> {
        let mut h = vec![0usize; n_classes];
        for g in &self.generated {
            h[g.class] += 1;
        }
        h
    }
}

/// Split `n_gen` evenly over classes, remainder to the lowest indices.
fn balanced_counts(n_gen: usize, n_classes: usize) -> Vec<usize> {
    let base = n_gen / n_classes;
    let extra = n_gen % n_classes;
    (0..n_classes).map(|c| base + usize::from(c < extra)).collect()
}

/// Uniform augmentation: the same number of samples for every class, no
/// confidence filtering. The classifier only annotates provenance.
pub fn augment_general(
    model: &dyn Classifier,
    train_set: &LabeledDataset,
    generator: &dyn ClassSampler,
    n_gen: usize,
    n_classes: usize,
) -> Result<AugmentedDataset> {
    if !generator.is_trained() {
        return Err(Error::Config("generator has not been trained".into()));
    }
    let mut generated = Vec::with_capacity(n_gen);
    for (class, &count) in balanced_counts(n_gen, n_classes).iter().enumerate() {
        let seed = derive_seed(0x6e6e, class as u64);
        for image in generator.sample(class, count, seed)? {
            let (_, confidence) = model.predict_class(&image)?;
            generated.push(GeneratedSample {
                image,
                class,
                confidence: Some(confidence),
                attempt: 0,
                seed,
            });
        }
    }
    Ok(AugmentedDataset::unfiltered(train_set.clone(), generated))
}

/// Error-profile-driven augmentation: allocate generation proportional to
/// each class's error share, over-generate 3x, keep only confident samples
/// of the right class, and retry up to `max_attempts` rounds per class.
/// Classes that still fall short are recorded as warnings, not failures.
pub fn augment_custom(
    model: &dyn Classifier,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    generators: &dyn ClassSampler,
    config: &AugmentConfig,
) -> Result<AugmentedDataset> {
    if !generators.is_trained() {
        return Err(Error::Config("generators have not been trained".into()));
    }
    let profile = compute_error_profile(model, test_set)?;
    let targets = allocate_counts(config.n_gen, &profile.r)?;
    let thresholds = class_thresholds(config, &profile);
    let mut generated = Vec::new();
    let mut warnings = Vec::new();
    for (class, (&target, &tau_i)) in targets.iter().zip(&thresholds).enumerate() {
        if target == 0 {
            continue;
        }
        let mut accepted: Vec<GeneratedSample> = Vec::with_capacity(target);
        for attempt in 0..config.max_attempts {
            if accepted.len() >= target {
                break;
            }
            let seed = derive_seed(config.seed, (class as u64) << 32 | attempt as u64);
            let batch = generators.sample(class, 3 * target, seed)?;
            for (image, confidence) in filter_samples(model, &batch, class, tau_i)? {
                accepted.push(GeneratedSample {
                    image,
                    class,
                    confidence: Some(confidence),
                    attempt,
                    seed,
                });
            }
        }
        if accepted.len() < target {
            warnings.push(format!(
                "class {class}: {} of {target} accepted after {} attempts (threshold {tau_i:.3})",
                accepted.len(),
                config.max_attempts
            ));
        }
        accepted.truncate(target);
        generated.extend(accepted);
    }
    Ok(AugmentedDataset {
        original: train_set.clone(),
        generated,
        warnings,
        profile: Some(profile),
        thresholds: Some(thresholds),
    })
}

// --- Classical transform baseline -------------------------------------------

/// Rotate about the image center by `degrees` (bilinear, zero fill).
pub fn rotate_image(image: &Tensor, degrees: f64) -> Tensor {
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (sin_a, cos_a) = degrees.to_radians().sin_cos();
    let mut out = Tensor::zeros(image.shape().to_vec());
    for y in 0..h {
        for x in 0..w {
            // Inverse-map the output pixel into the source frame.
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            let sy = cy + dy * cos_a - dx * sin_a;
            let sx = cx + dy * sin_a + dx * cos_a;
            let (y0, x0) = (sy.floor(), sx.floor());
            let (fy, fx) = (sy - y0, sx - x0);
            let mut acc = 0.0;
            for (oy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                for (ox, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                    let (py, px) = (y0 + oy, x0 + ox);
                    if (0.0..h as f64).contains(&py) && (0.0..w as f64).contains(&px) {
                        acc += wy * wx * image.data()[py as usize * w + px as usize];
                    }
                }
            }
            out.data_mut()[y * w + x] = acc;
        }
    }
    out
}

/// Shift by whole pixels (zero fill at the borders).
pub fn translate_image(image: &Tensor, dy: i64, dx: i64) -> Tensor {
    let (h, w) = (image.shape()[1] as i64, image.shape()[2] as i64);
    let mut out = Tensor::zeros(image.shape().to_vec());
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = (y - dy, x - dx);
            if (0..h).contains(&sy) && (0..w).contains(&sx) {
                out.data_mut()[(y * w + x) as usize] = image.data()[(sy * w + sx) as usize];
            }
        }
    }
    out
}

/// Scale contrast around mid-gray by `factor`, clamped back into [0, 1].
pub fn adjust_contrast(image: &Tensor, factor: f64) -> Tensor {
    let data = image
        .data()
        .iter()
        .map(|&p| (0.5 + factor * (p - 0.5)).clamp(0.0, 1.0))
        .collect();
    Tensor::new(image.shape().to_vec(), data).unwrap()
}

/// Transform-based augmentation: each new sample applies one of rotation
/// (within +/-15 degrees), translation (within +/-2 px), or contrast scaling
/// (x0.7..1.3) to a randomly chosen original, balanced across classes.
pub fn classic_augment(
    train_set: &LabeledDataset,
    n_gen: usize,
    seed: u64,
) -> Result<AugmentedDataset> {
    let n_classes = train_set.n_classes();
    if n_classes == 0 {
        return Err(Error::EmptyDataset("classic augmentation needs classes".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut generated = Vec::with_capacity(n_gen);
    for (class, &count) in balanced_counts(n_gen, n_classes).iter().enumerate() {
        let members: Vec<usize> =
            (0..train_set.len()).filter(|&i| train_set.labels[i] == class).collect();
        if members.is_empty() && count > 0 {
            return Err(Error::EmptyDataset(format!("class {class} has no originals")));
        }
        for _ in 0..count {
            let source = &train_set.images[members[rng.gen_range(0..members.len())]];
            let image = match rng.gen_range(0..3) {
                0 => rotate_image(source, rng.gen_range(-15.0..15.0)),
                1 => translate_image(source, rng.gen_range(-2..=2), rng.gen_range(-2..=2)),
                _ => adjust_contrast(source, rng.gen_range(0.7..1.3)),
            };
            generated.push(GeneratedSample { image, class, confidence: None, attempt: 0, seed });
        }
    }
    Ok(AugmentedDataset::unfiltered(train_set.clone(), generated))
}

/// Partition the samples the model accepts for `class_i` into disjoint
/// confidence bands, truncating each band to its quota.
pub fn quality_vs_quantity_bands(
    model: &dyn Classifier,
    samples: &[Tensor],
    class_i: usize,
    bands: &[(f64, f64)],
    quotas: &[usize],
) -> Result<Vec<Vec<(Tensor, f64)>>> {
    if bands.len() != quotas.len() {
        return Err(Error::Config(format!(
            "{} bands with {} quotas",
            bands.len(),
            quotas.len()
        )));
    }
    let mut sorted: Vec<(f64, f64)> = bands.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in sorted.windows(2) {
        if pair[0].1 > pair[1].0 {
            return Err(Error::Config(format!(
                "bands [{}, {}) and [{}, {}) overlap",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            )));
        }
    }
    let mut out: Vec<Vec<(Tensor, f64)>> = vec![Vec::new(); bands.len()];
    for sample in samples {
        let (predicted, confidence) = model.predict_class(sample)?;
        if predicted != class_i {
            continue;
        }
        for (b, &(low, high)) in bands.iter().enumerate() {
            if confidence >= low && confidence < high && out[b].len() < quotas[b] {
                out[b].push((sample.clone(), confidence));
                break;
            }
        }
    }
    Ok(out)
}

// --- Persistence -------------------------------------------------------------

/// Manifest entry for one persisted generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub class: usize,
    pub confidence: Option<f64>,
    pub attempt: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentManifest {
    pub strategy: String,
    pub n_original: usize,
    pub image_shape: Vec<usize>,
    pub class_names: Vec<String>,
    pub generated_per_class: Vec<usize>,
    pub entries: Vec<ManifestEntry>,
    pub warnings: Vec<String>,
    pub profile: Option<ErrorProfile>,
    pub thresholds: Option<Vec<f64>>,
}

/// Persist generated samples as little-endian f64 files plus a manifest.
/// Originals are never copied or touched.
pub fn save_augmented(dir: &Path, aug: &AugmentedDataset, strategy: &str) -> Result<AugmentManifest> {
    let gen_dir = dir.join("generated");
    std::fs::create_dir_all(&gen_dir)?;
    let mut entries = Vec::with_capacity(aug.generated.len());
    for (i, g) in aug.generated.iter().enumerate() {
        let file = format!("generated/gen-{i:05}.bin");
        let mut bytes = Vec::with_capacity(g.image.numel() * 8);
        for v in g.image.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(dir.join(&file), bytes)?;
        entries.push(ManifestEntry {
            file,
            class: g.class,
            confidence: g.confidence,
            attempt: g.attempt,
            seed: g.seed,
        });
    }
    let image_shape = aug
        .generated
        .first()
        .map(|g| g.image.shape().to_vec())
        .or_else(|| aug.original.images.first().map(|t| t.shape().to_vec()))
        .unwrap_or_default();
    let manifest = AugmentManifest {
        strategy: strategy.to_string(),
        n_original: aug.original.len(),
        image_shape,
        class_names: aug.original.class_names.clone(),
        generated_per_class: aug.generated_histogram(aug.original.n_classes()),
        entries,
        warnings: aug.warnings.clone(),
        profile: aug.profile.clone(),
        thresholds: aug.thresholds.clone(),
    };
    crate::nn::save_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Load a persisted manifest and its generated samples.
pub fn load_augmented(dir: &Path) -> Result<(AugmentManifest, Vec<GeneratedSample>)> {
    let manifest: AugmentManifest = crate::nn::load_json(&dir.join("manifest.json"))?;
    let numel: usize = manifest.image_shape.iter().product();
    let mut generated = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let bytes = std::fs::read(dir.join(&entry.file))?;
        if bytes.len() != numel * 8 {
            return Err(Error::Length(format!(
                "{}: {} bytes for {numel} values",
                entry.file,
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        generated.push(GeneratedSample {
            image: Tensor::new(manifest.image_shape.clone(), data)?,
            class: entry.class,
            confidence: entry.confidence,
            attempt: entry.attempt,
            seed: entry.seed,
        });
    }
    Ok((manifest, generated))
}
