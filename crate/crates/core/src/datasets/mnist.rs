//! IDX binary reader for the MNIST image/label files.
//!
//! Big-endian container: u32 magic (0x00000803 for images, 0x00000801 for
//! labels), u32 item count, then for images two u32 spatial dims followed by
//! raw bytes. Pixels are scaled to [0, 1].

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Labeled image batch: `images` is N x 1 x 28 x 28 in [0, 1], one class
/// index in [0, 10) per image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub images: Tensor<f32>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One image as a 1 x 1 x 28 x 28 f32 tensor.
    pub fn image(&self, i: usize) -> Tensor<f32> {
        let px = IMAGE_SIDE * IMAGE_SIDE;
        Tensor::new(
            vec![1, 1, IMAGE_SIDE, IMAGE_SIDE],
            self.images.as_slice()[i * px..(i + 1) * px].to_vec(),
        )
        .expect("image slice has fixed size")
    }

    /// Gathers a batch of images/labels by sample index.
    pub fn batch(&self, idxs: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let px = IMAGE_SIDE * IMAGE_SIDE;
        let mut data = Vec::with_capacity(idxs.len() * px);
        let mut labels = Vec::with_capacity(idxs.len());
        for &i in idxs {
            data.extend_from_slice(&self.images.as_slice()[i * px..(i + 1) * px]);
            labels.push(self.labels[i] as usize);
        }
        (
            Tensor::new(vec![idxs.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data)
                .expect("batch assembly is shape-consistent"),
            labels,
        )
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("offset {}", self.pos),
                "truncated while reading u32",
            ));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("offset {}", self.pos),
                format!("truncated: need {n} more bytes"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parses an IDX image/label file pair into a labeled image set.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<LabeledImageSet> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let img_bytes = fs::read(images_path)?;
    let lbl_bytes = fs::read(labels_path)?;
    let img_name = images_path.to_string_lossy();
    let lbl_name = labels_path.to_string_lossy();

    let mut r = Reader { bytes: &img_bytes, pos: 0, path: &img_name };
    let magic = r.u32()?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            &img_name,
            "offset 0",
            format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let n = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(Error::format(
            &img_name,
            "offset 8",
            format!("expected 28x28 images, got {rows}x{cols}"),
        ));
    }
    let pixels = r.take(n * rows * cols)?;

    let mut r = Reader { bytes: &lbl_bytes, pos: 0, path: &lbl_name };
    let magic = r.u32()?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            &lbl_name,
            "offset 0",
            format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let n_labels = r.u32()? as usize;
    if n_labels != n {
        return Err(Error::format(
            &lbl_name,
            "offset 4",
            format!("{n_labels} labels but {n} images"),
        ));
    }
    let labels = r.take(n)?.to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::format(&lbl_name, "label payload", format!("label {bad} outside [0, 10)")));
    }

    let data: Vec<f32> = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Ok(LabeledImageSet {
        images: Tensor::new(vec![n, 1, IMAGE_SIDE, IMAGE_SIDE], data)
            .expect("pixel count checked above"),
        labels,
        split,
    })
}
