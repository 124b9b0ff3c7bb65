//! Dataset handling: IDX and CIFAR-10 binary loaders, pixel
//! normalization to [-1, 1], deterministic subset selection, and a
//! built-in synthetic glyph dataset for fully offline runs.
//!
//! The synthetic set contains ten 28x28 grayscale shape classes with
//! per-sample rotation, scale, translation, stroke width, and additive
//! noise, all drawn from a seeded stream. It is written in IDX format
//! with the conventional file names, so the same loader path serves
//! real and generated data.

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};
use rand::Rng;
use std::fs;
use std::path::Path;

/// Conventional IDX file names inside a dataset directory.
pub const IDX_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const IDX_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const IDX_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const IDX_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// In-memory split with images already normalized to [-1, 1].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub n: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
}

impl Dataset {
    fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let l = self.sample_len();
        &self.images[i * l..(i + 1) * l]
    }

    /// Assemble the samples at `indices` into a batch tensor plus label
    /// vector, in the given order.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor4, Vec<usize>)> {
        let l = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * l);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::Config(format!(
                    "sample index {i} out of range for dataset of {}",
                    self.n
                )));
            }
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i] as usize);
        }
        let t = Tensor4::from_vec(
            Shape4::new(indices.len(), self.channels, self.height, self.width),
            data,
        )?;
        Ok((t, labels))
    }

    /// Copy out the subset at `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let l = self.sample_len();
        let mut images = Vec::with_capacity(indices.len() * l);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::Config(format!(
                    "sample index {i} out of range for dataset of {}",
                    self.n
                )));
            }
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            images,
            labels,
            n: indices.len(),
            channels: self.channels,
            height: self.height,
            width: self.width,
            classes: self.classes,
        })
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.classes];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// Train and test splits of one dataset.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
}

/// Choose `k` distinct sample indices out of `n`, deterministically in
/// the stream; returned sorted ascending.
pub fn subset_indices(n: usize, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::Config(format!(
            "subset of {k} requested from {n} samples"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    Ok(out)
}

fn normalize(pixels: &[u8]) -> Vec<f32> {
    pixels.iter().map(|&p| p as f32 / 127.5 - 1.0).collect()
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format(format!(
            "{}: truncated at byte {offset}, expected 4 more bytes",
            path.display()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

fn load_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != 0x0000_0803 {
        return Err(Error::Format(format!(
            "{}: bad image magic {magic:#010x} at byte 0 (expected 0x00000803)",
            path.display()
        )));
    }
    let n = read_u32_be(&bytes, 4, path)? as usize;
    let h = read_u32_be(&bytes, 8, path)? as usize;
    let w = read_u32_be(&bytes, 12, path)? as usize;
    let expect = 16 + n * h * w;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{}: {} bytes but header {n}x{h}x{w} implies {expect}",
            path.display(),
            bytes.len()
        )));
    }
    Ok((bytes[16..].to_vec(), n, h, w))
}

fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != 0x0000_0801 {
        return Err(Error::Format(format!(
            "{}: bad label magic {magic:#010x} at byte 0 (expected 0x00000801)",
            path.display()
        )));
    }
    let n = read_u32_be(&bytes, 4, path)? as usize;
    let expect = 8 + n;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "{}: {} bytes but header implies {expect}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Load one IDX image/label file pair into a normalized split.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<Dataset> {
    let (pixels, n, h, w) = load_idx_images(images)?;
    let lab = load_idx_labels(labels)?;
    if lab.len() != n {
        return Err(Error::Format(format!(
            "{} has {n} images but {} has {} labels",
            images.display(),
            labels.display(),
            lab.len()
        )));
    }
    let classes = lab
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m as usize + 1)
        .max(10);
    Ok(Dataset {
        images: normalize(&pixels),
        labels: lab,
        n,
        channels: 1,
        height: h,
        width: w,
        classes,
    })
}

/// Load a directory holding the four conventional IDX files.
pub fn load_idx_dir(dir: &Path) -> Result<DatasetHandle> {
    let train = load_idx_pair(&dir.join(IDX_TRAIN_IMAGES), &dir.join(IDX_TRAIN_LABELS))?;
    let test = load_idx_pair(&dir.join(IDX_TEST_IMAGES), &dir.join(IDX_TEST_LABELS))?;
    Ok(DatasetHandle {
        name: dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "idx".into()),
        train,
        test,
    })
}

const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

fn load_cifar_file(path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let bytes = fs::read(path)?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::Format(format!(
            "{}: {} bytes is not a multiple of the {CIFAR_RECORD}-byte record",
            path.display(),
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD - 1));
    for r in 0..n {
        let rec = &bytes[r * CIFAR_RECORD..(r + 1) * CIFAR_RECORD];
        if rec[0] > 9 {
            return Err(Error::Format(format!(
                "{}: label {} at byte {} out of range 0-9",
                path.display(),
                rec[0],
                r * CIFAR_RECORD
            )));
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok((pixels, labels))
}

/// Load the CIFAR-10 binary layout: `data_batch_1..5.bin` for training
/// and `test_batch.bin` for testing.
pub fn load_cifar10_dir(dir: &Path) -> Result<DatasetHandle> {
    let mut train_pixels = Vec::new();
    let mut train_labels = Vec::new();
    for i in 1..=5 {
        let path = dir.join(format!("data_batch_{i}.bin"));
        if !path.exists() {
            if i == 1 {
                return Err(Error::Format(format!(
                    "{}: no data_batch_1.bin present",
                    dir.display()
                )));
            }
            break;
        }
        let (p, l) = load_cifar_file(&path)?;
        train_pixels.extend_from_slice(&p);
        train_labels.extend_from_slice(&l);
    }
    let (test_pixels, test_labels) = load_cifar_file(&dir.join("test_batch.bin"))?;
    let make = |pixels: Vec<u8>, labels: Vec<u8>| Dataset {
        n: labels.len(),
        images: normalize(&pixels),
        labels,
        channels: 3,
        height: 32,
        width: 32,
        classes: 10,
    };
    Ok(DatasetHandle {
        name: "cifar10".into(),
        train: make(train_pixels, train_labels),
        test: make(test_pixels, test_labels),
    })
}

/// Detect the layout of a dataset directory and load it.
pub fn load_auto(dir: &Path) -> Result<DatasetHandle> {
    if dir.join(IDX_TRAIN_IMAGES).exists() {
        load_idx_dir(dir)
    } else if dir.join("data_batch_1.bin").exists() {
        load_cifar10_dir(dir)
    } else {
        Err(Error::Config(format!(
            "{}: neither IDX files nor CIFAR-10 batches found",
            dir.display()
        )))
    }
}

// --- synthetic glyph dataset -------------------------------------------

const GLYPH_SIZE: usize = 28;
const GLYPH_CLASSES: usize = 10;

/// Signed test whether canonical point (x, y) in [-1,1]^2 lies on the
/// stroke of glyph `class` with half-width `t`.
fn glyph_hit(class: usize, x: f32, y: f32, t: f32) -> bool {
    let vbar = |cx: f32| (x - cx).abs() < t && y.abs() < 0.7;
    let hbar = |cy: f32| (y - cy).abs() < t && x.abs() < 0.7;
    match class {
        // Ring.
        0 => ((x * x + y * y).sqrt() - 0.55).abs() < t,
        // Vertical bar.
        1 => vbar(0.0),
        // Horizontal bar.
        2 => hbar(0.0),
        // Plus.
        3 => vbar(0.0) || hbar(0.0),
        // X.
        4 => ((x - y).abs() < t * 1.4 || (x + y).abs() < t * 1.4) && x.abs() < 0.7 && y.abs() < 0.7,
        // Square outline.
        5 => {
            let m = x.abs().max(y.abs());
            (m - 0.55).abs() < t
        }
        // Single diagonal.
        6 => (x - y).abs() < t * 1.4 && x.abs() < 0.7 && y.abs() < 0.7,
        // T shape.
        7 => hbar(-0.5) || (x.abs() < t && (-0.5..0.7).contains(&y)),
        // Two vertical bars.
        8 => vbar(-0.35) || vbar(0.35),
        // Four dots.
        9 => {
            let r = t + 0.12;
            [(-0.4f32, -0.4f32), (-0.4, 0.4), (0.4, -0.4), (0.4, 0.4)]
                .iter()
                .any(|&(cx, cy)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < r)
        }
        _ => false,
    }
}

/// Render one glyph with the given affine jitter into a 28x28 byte
/// image, 2x2 supersampled.
fn render_glyph(
    class: usize,
    angle: f32,
    scale: f32,
    tx: f32,
    ty: f32,
    stroke: f32,
    noise: &mut impl FnMut() -> f32,
) -> Vec<u8> {
    let (sin, cos) = angle.sin_cos();
    let mut out = vec![0u8; GLYPH_SIZE * GLYPH_SIZE];
    let half = GLYPH_SIZE as f32 / 2.0;
    for py in 0..GLYPH_SIZE {
        for px in 0..GLYPH_SIZE {
            let mut acc = 0.0f32;
            for sy in 0..2 {
                for sx in 0..2 {
                    // Pixel center in [-1, 1] canvas coordinates.
                    let cx = (px as f32 + 0.25 + 0.5 * sx as f32 - half) / half;
                    let cy = (py as f32 + 0.25 + 0.5 * sy as f32 - half) / half;
                    // Invert the sample transform: untranslate, unrotate,
                    // unscale back into canonical glyph space.
                    let ux = cx - tx;
                    let uy = cy - ty;
                    let gx = (cos * ux + sin * uy) / scale;
                    let gy = (-sin * ux + cos * uy) / scale;
                    if glyph_hit(class, gx, gy, stroke) {
                        acc += 0.25;
                    }
                }
            }
            let v = (acc + noise()).clamp(0.0, 1.0);
            out[py * GLYPH_SIZE + px] = (v * 255.0).round() as u8;
        }
    }
    out
}

fn gen_split(n: usize, rng: &mut impl Rng) -> (Vec<u8>, Vec<u8>) {
    let mut pixels = Vec::with_capacity(n * GLYPH_SIZE * GLYPH_SIZE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % GLYPH_CLASSES;
        let angle = rng.gen_range(-0.45f32..0.45);
        let scale = rng.gen_range(0.65f32..1.1);
        let tx = rng.gen_range(-0.18f32..0.18);
        let ty = rng.gen_range(-0.18f32..0.18);
        let stroke = rng.gen_range(0.09f32..0.2);
        let sigma = 0.18f32;
        // Box-Muller pairs for the additive pixel noise.
        let mut spare: Option<f32> = None;
        let mut noise = || {
            if let Some(z) = spare.take() {
                return z * sigma;
            }
            let u1: f32 = rng.gen_range(f32::EPSILON..1.0);
            let u2: f32 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f32::consts::PI * u2).sin_cos();
            spare = Some(r * s);
            r * c * sigma
        };
        pixels.extend_from_slice(&render_glyph(
            class, angle, scale, tx, ty, stroke, &mut noise,
        ));
        labels.push(class as u8);
    }
    (pixels, labels)
}

fn write_idx_images(path: &Path, pixels: &[u8], n: usize) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    bytes.extend_from_slice(&(n as u32).to_be_bytes());
    bytes.extend_from_slice(&(GLYPH_SIZE as u32).to_be_bytes());
    bytes.extend_from_slice(&(GLYPH_SIZE as u32).to_be_bytes());
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes)?;
    Ok(())
}

fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes)?;
    Ok(())
}

/// Generate the synthetic glyph dataset into `dir` using the standard
/// IDX file names. Both splits come from the one stream, train first,
/// so a given seed always produces the same bytes.
pub fn generate_glyphs(
    dir: &Path,
    train_n: usize,
    test_n: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (train_pixels, train_labels) = gen_split(train_n, rng);
    let (test_pixels, test_labels) = gen_split(test_n, rng);
    write_idx_images(&dir.join(IDX_TRAIN_IMAGES), &train_pixels, train_n)?;
    write_idx_labels(&dir.join(IDX_TRAIN_LABELS), &train_labels)?;
    write_idx_images(&dir.join(IDX_TEST_IMAGES), &test_pixels, test_n)?;
    write_idx_labels(&dir.join(IDX_TEST_LABELS), &test_labels)?;
    Ok(())
}
