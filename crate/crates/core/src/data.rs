//! Dataset handling: IDX-format image/label files (the MNIST container
//! format), class subsetting, area-weighted downscaling, and a procedural
//! three-class digit set for demos and self-contained tests.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::seeding::rng_from_seed;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Images with class labels. Pixels are stored as [1, H, W] tensors with
/// values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(images: Vec<Tensor>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} images vs {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Index(format!(
                "label {bad} with {} classes",
                class_names.len()
            )));
        }
        Ok(Self { images, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Per-class sample counts.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.class_names.len()];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    /// Side length of the (square) images.
    pub fn image_side(&self) -> usize {
        self.images.first().map_or(0, |t| t.shape()[1])
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(file, Compression::default())))
    } else {
        Ok(Box::new(file))
    }
}

fn read_u32_be(r: &mut dyn Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Length(format!("file ends before {what}")))?;
    Ok(u32::from_be_bytes(buf))
}

/// Load an IDX image/label file pair (gzip transparent for `.gz` paths).
/// Pixel bytes are scaled by 1/255 into [1, H, W] tensors.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let mut ir = open_reader(images_path)?;
    let magic = read_u32_be(&mut ir, "image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(&mut ir, "image count")? as usize;
    let rows = read_u32_be(&mut ir, "row count")? as usize;
    let cols = read_u32_be(&mut ir, "column count")? as usize;
    let mut pixels = vec![0u8; n * rows * cols];
    ir.read_exact(&mut pixels)
        .map_err(|_| Error::Length(format!("image payload shorter than {n}x{rows}x{cols}")))?;

    let mut lr = open_reader(labels_path)?;
    let magic = read_u32_be(&mut lr, "label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let n_labels = read_u32_be(&mut lr, "label count")? as usize;
    if n_labels != n {
        return Err(Error::Consistency(format!(
            "{n} images but {n_labels} labels"
        )));
    }
    let mut raw_labels = vec![0u8; n];
    lr.read_exact(&mut raw_labels)
        .map_err(|_| Error::Length(format!("label payload shorter than {n}")))?;

    let images = pixels
        .chunks(rows * cols)
        .map(|chunk| {
            Tensor::new(
                vec![1, rows, cols],
                chunk.iter().map(|&b| f64::from(b) / 255.0).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = raw_labels.iter().map(|&b| b as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let class_names = (0..n_classes).map(|c| c.to_string()).collect();
    LabeledDataset::new(images, labels, class_names)
}

/// Write raw byte images in IDX format (gzip transparent for `.gz` paths).
pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    if let Some(bad) = images.iter().find(|img| img.len() != rows * cols) {
        return Err(Error::Shape(format!(
            "image with {} bytes, expected {rows}x{cols}",
            bad.len()
        )));
    }
    let mut w = open_writer(path)?;
    w.write_all(&IDX_IMAGE_MAGIC.to_be_bytes())?;
    w.write_all(&(images.len() as u32).to_be_bytes())?;
    w.write_all(&(rows as u32).to_be_bytes())?;
    w.write_all(&(cols as u32).to_be_bytes())?;
    for img in images {
        w.write_all(img)?;
    }
    w.flush()?;
    Ok(())
}

/// Write labels in IDX format (gzip transparent for `.gz` paths).
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_all(&IDX_LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    w.flush()?;
    Ok(())
}

/// Seeded balanced subset: `per_class` samples of each listed class, labels
/// remapped to 0..classes.len(), sample order shuffled.
pub fn subset(
    ds: &LabeledDataset,
    classes: &[usize],
    per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(classes.len() * per_class);
    for (new_label, &class) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if members.len() < per_class {
            return Err(Error::Capacity(format!(
                "class {class} has {} samples, need {per_class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        picked.extend(members[..per_class].iter().map(|&i| (i, new_label)));
    }
    picked.shuffle(&mut rng);
    let images = picked.iter().map(|&(i, _)| ds.images[i].clone()).collect();
    let labels = picked.iter().map(|&(_, l)| l).collect();
    let class_names = classes
        .iter()
        .map(|&c| ds.class_names.get(c).cloned().unwrap_or_else(|| c.to_string()))
        .collect();
    LabeledDataset::new(images, labels, class_names)
}

/// Area-weighted square resize. Reduces to exact block means when the
/// original side is a multiple of the target side.
pub fn downscale(ds: &LabeledDataset, size: usize) -> Result<LabeledDataset> {
    let images = ds
        .images
        .iter()
        .map(|img| downscale_image(img, size))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(images, ds.labels.clone(), ds.class_names.clone())
}

fn downscale_image(img: &Tensor, size: usize) -> Result<Tensor> {
    let (h, w) = (img.shape()[1], img.shape()[2]);
    if h != w {
        return Err(Error::Shape(format!("expected square image, got {h}x{w}")));
    }
    if size == 0 || size > h {
        return Err(Error::Config(format!("target side {size} outside 1..={h}")));
    }
    if size == h {
        return Ok(img.clone());
    }
    let scale = h as f64 / size as f64;
    let area = scale * scale;
    let mut out = Tensor::zeros(vec![1, size, size]);
    for ty in 0..size {
        let (y0, y1) = (ty as f64 * scale, (ty + 1) as f64 * scale);
        for tx in 0..size {
            let (x0, x1) = (tx as f64 * scale, (tx + 1) as f64 * scale);
            let mut acc = 0.0;
            let mut sy = y0.floor() as usize;
            while (sy as f64) < y1 && sy < h {
                let wy = (y1.min((sy + 1) as f64) - y0.max(sy as f64)).max(0.0);
                let mut sx = x0.floor() as usize;
                while (sx as f64) < x1 && sx < w {
                    let wx = (x1.min((sx + 1) as f64) - x0.max(sx as f64)).max(0.0);
                    acc += wy * wx * img.data()[sy * w + sx];
                    sx += 1;
                }
                sy += 1;
            }
            out.data_mut()[ty * size + tx] = acc / area;
        }
    }
    Ok(out)
}

/// Convert a dataset back to quantized bytes (round(p * 255)) per image.
pub fn to_bytes(ds: &LabeledDataset) -> (Vec<Vec<u8>>, Vec<u8>) {
    let images = ds
        .images
        .iter()
        .map(|t| t.data().iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect())
        .collect();
    let labels = ds.labels.iter().map(|&l| l as u8).collect();
    (images, labels)
}

// --- Procedural digit images -----------------------------------------------
//
// Strokes are rendered as soft distance fields on a 28x28 grid with per-sample
// jitter (shift, scale, rotation, thickness, pixel noise), giving a compact
// three-class set (digits 0, 1, 2) that behaves like thumbnail handwriting.

const GLYPH_SIDE: usize = 28;

struct Jitter {
    dx: f64,
    dy: f64,
    scale_x: f64,
    scale_y: f64,
    rot: f64,
    shear: f64,
    thickness: f64,
    ink: f64,
    warp_amp: f64,
    warp_fx: f64,
    warp_fy: f64,
    warp_px: f64,
    warp_py: f64,
}

fn dist_to_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (vx, vy) = (bx - ax, by - ay);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * vx, ay + t * vy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn dist_to_ellipse_ring(px: f64, py: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    // Radial approximation: distance along the ray from the center.
    let (dx, dy) = (px - cx, py - cy);
    let r = (dx * dx + dy * dy).sqrt();
    if r < 1e-9 {
        return rx.min(ry);
    }
    let (ux, uy) = (dx / r, dy / r);
    let ring_r = 1.0 / ((ux / rx).powi(2) + (uy / ry).powi(2)).sqrt();
    (r - ring_r).abs()
}

fn dist_to_arc(px: f64, py: f64, cx: f64, cy: f64, radius: f64, a0: f64, a1: f64) -> f64 {
    // Arc from angle a0 to a1 (radians, a0 < a1), y axis pointing down.
    let (dx, dy) = (px - cx, py - cy);
    let ang = dy.atan2(dx);
    let wrapped = if ang < a0 { ang + 2.0 * PI } else { ang };
    if wrapped <= a1 {
        ((dx * dx + dy * dy).sqrt() - radius).abs()
    } else {
        let (e0x, e0y) = (cx + radius * a0.cos(), cy + radius * a0.sin());
        let (e1x, e1y) = (cx + radius * a1.cos(), cy + radius * a1.sin());
        let d0 = ((px - e0x).powi(2) + (py - e0y).powi(2)).sqrt();
        let d1 = ((px - e1x).powi(2) + (py - e1y).powi(2)).sqrt();
        d0.min(d1)
    }
}

/// Distance from a (col, row) point to the skeleton of a digit glyph in a
/// canonical 28x28 frame.
fn glyph_distance(digit: u8, x: f64, y: f64) -> f64 {
    match digit {
        0 => dist_to_ellipse_ring(x, y, 14.0, 14.0, 5.5, 8.0),
        1 => {
            let stem = dist_to_segment(x, y, 14.0, 6.5, 14.0, 21.5);
            let flag = dist_to_segment(x, y, 10.5, 10.0, 14.0, 6.5);
            stem.min(flag)
        }
        _ => {
            let hat = dist_to_arc(x, y, 14.0, 11.0, 4.7, -PI, 0.35);
            let slant = dist_to_segment(x, y, 18.3, 12.6, 8.5, 21.0);
            let base = dist_to_segment(x, y, 8.5, 21.0, 19.5, 21.0);
            hat.min(slant).min(base)
        }
    }
}

fn render_glyph(digit: u8, jit: &Jitter, noise: &mut impl FnMut() -> f64) -> Vec<u8> {
    let c = GLYPH_SIDE as f64 / 2.0;
    let (sin_r, cos_r) = jit.rot.sin_cos();
    let s_norm = 0.5 * (jit.scale_x + jit.scale_y);
    let mut out = Vec::with_capacity(GLYPH_SIDE * GLYPH_SIDE);
    for row in 0..GLYPH_SIDE {
        for col in 0..GLYPH_SIDE {
            // Map the output pixel back into the canonical glyph frame:
            // shift, rotation, slant, and per-axis scale.
            let (px, py) = (col as f64 - c - jit.dx, row as f64 - c - jit.dy);
            let (rx, ry) = (px * cos_r + py * sin_r, -px * sin_r + py * cos_r);
            let sx = rx - jit.shear * ry;
            let (mut gx, mut gy) = (sx / jit.scale_x + c, ry / jit.scale_y + c);
            // Low-frequency wobble bends the strokes like relaxed handwriting.
            gx += jit.warp_amp * (gy * jit.warp_fy + jit.warp_py).sin();
            gy += jit.warp_amp * (gx * jit.warp_fx + jit.warp_px).sin();
            let d = glyph_distance(digit, gx, gy) * s_norm;
            let ink = ((jit.thickness - d) / 1.2 + 0.5).clamp(0.0, 1.0) * jit.ink;
            let v = (ink + noise()).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

/// Procedural digit dataset: `n_per_class` samples each of digits 0, 1, 2 as
/// 28x28 byte images, deterministically jittered from `seed`.
pub fn synthetic_digits(n_per_class: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = rng_from_seed(seed);
    let mut images = Vec::with_capacity(3 * n_per_class);
    let mut labels = Vec::with_capacity(3 * n_per_class);
    for digit in 0u8..3 {
        for _ in 0..n_per_class {
            let jit = Jitter {
                dx: rng.gen_range(-2.2..2.2),
                dy: rng.gen_range(-2.2..2.2),
                scale_x: rng.gen_range(0.78..1.12),
                scale_y: rng.gen_range(0.78..1.12),
                rot: rng.gen_range(-0.22..0.22),
                shear: rng.gen_range(-0.28..0.28),
                thickness: rng.gen_range(1.3..2.5),
                ink: rng.gen_range(0.8..1.0),
                warp_amp: rng.gen_range(0.0..1.3),
                warp_fx: rng.gen_range(0.25..0.6),
                warp_fy: rng.gen_range(0.25..0.6),
                warp_px: rng.gen_range(0.0..2.0 * PI),
                warp_py: rng.gen_range(0.0..2.0 * PI),
            };
            let mut noise_rng = rng.clone();
            let mut noise = || noise_rng.gen_range(-0.07..0.07);
            images.push(render_glyph(digit, &jit, &mut noise));
            // Keep the outer stream aligned with the noise samples drawn.
            rng = noise_rng;
            labels.push(digit);
        }
    }
    (images, labels)
}

/// Write a fresh synthetic digit set as an IDX pair and load it back.
pub fn synthetic_digit_dataset(n_per_class: usize, seed: u64, dir: &Path) -> Result<LabeledDataset> {
    let (images, labels) = synthetic_digits(n_per_class, seed);
    let images_path = dir.join("digits-images-idx3-ubyte");
    let labels_path = dir.join("digits-labels-idx1-ubyte");
    write_idx_images(&images_path, &images, GLYPH_SIDE, GLYPH_SIDE)?;
    write_idx_labels(&labels_path, &labels)?;
    load_idx(&images_path, &labels_path)
}
