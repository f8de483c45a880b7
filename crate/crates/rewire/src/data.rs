//! Dataset ingestion (IDX image/label files), batching, label permutation,
//! and synthetic teacher-generated tasks for fast tests.

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::mlp;
use crate::num::Scalar;
use crate::rng::RngStream;
use crate::store::DenseNet;
use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use std::io::Read;
use std::path::Path;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A labeled dataset: one row per sample, pixel values scaled to [0, 1].
#[derive(Clone, Debug)]
pub struct Dataset<F> {
    pub inputs: Matrix<F>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(inputs: Matrix<F>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Contract(format!(
                "{} input rows vs {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Contract(format!(
                "label {l} outside [0, {classes})"
            )));
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Split at sample `n`: (first n, rest).
    pub fn split(&self, n: usize) -> (Dataset<F>, Dataset<F>) {
        let n = n.min(self.len());
        let cols = self.inputs.cols();
        let tail = Dataset {
            inputs: Matrix::from_vec(
                self.len() - n,
                cols,
                self.inputs.data()[n * cols..].to_vec(),
            )
            .unwrap(),
            labels: self.labels[n..].to_vec(),
            classes: self.classes,
        };
        (self.head(n), tail)
    }

    /// First `n` samples, for subsampled evaluation.
    pub fn head(&self, n: usize) -> Dataset<F> {
        let n = n.min(self.len());
        let cols = self.inputs.cols();
        let data = self.inputs.data()[..n * cols].to_vec();
        Dataset {
            inputs: Matrix::from_vec(n, cols, data).unwrap(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }
}

fn read_u32(r: &mut impl Read, field: &str) -> Result<u32> {
    r.read_u32::<BigEndian>().map_err(|e| Error::Format {
        field: field.to_string(),
        message: e.to_string(),
    })
}

/// Parse a pair of IDX files into a dataset. Pixel bytes are scaled by
/// 1/255; dimensions are cross-checked between the two headers.
pub fn load_idx<F: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<F>> {
    let (images, rows, cols) = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.len() / (rows * cols) != labels.len() {
        return Err(Error::Format {
            field: "item count".to_string(),
            message: format!(
                "{} images vs {} labels",
                images.len() / (rows * cols),
                labels.len()
            ),
        });
    }
    let n = labels.len();
    let scale = F::from_f64_lossy(1.0 / 255.0);
    let data: Vec<F> = images
        .iter()
        .map(|&b| F::from_f64_lossy(b as f64) * scale)
        .collect();
    let inputs = Matrix::from_vec(n, rows * cols, data)?;
    let labels: Vec<usize> = labels.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(inputs, labels, classes)
}

fn load_idx_images(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let mut f = std::fs::File::open(path)?;
    let magic = read_u32(&mut f, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            field: format!("image magic in {}", path.display()),
            message: format!("expected {IMAGE_MAGIC:#010x}, got {magic:#010x}"),
        });
    }
    let n = read_u32(&mut f, "image count")? as usize;
    let rows = read_u32(&mut f, "image rows")? as usize;
    let cols = read_u32(&mut f, "image cols")? as usize;
    let mut data = vec![0u8; n * rows * cols];
    f.read_exact(&mut data).map_err(|_| Error::Format {
        field: format!("image payload in {}", path.display()),
        message: format!("truncated: expected {} bytes", n * rows * cols),
    })?;
    Ok((data, rows, cols))
}

fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path)?;
    let magic = read_u32(&mut f, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            field: format!("label magic in {}", path.display()),
            message: format!("expected {LABEL_MAGIC:#010x}, got {magic:#010x}"),
        });
    }
    let n = read_u32(&mut f, "label count")? as usize;
    let mut data = vec![0u8; n];
    f.read_exact(&mut data).map_err(|_| Error::Format {
        field: format!("label payload in {}", path.display()),
        message: format!("truncated: expected {n} bytes"),
    })?;
    Ok(data)
}

/// Serialize a dataset back to IDX bytes (images as a rows*cols = features x 1
/// grid per sample). Values are rounded to the nearest byte after the 1/255
/// scaling is undone, so byte-sourced datasets round-trip bit-exactly.
pub fn write_idx<F: Scalar>(
    dataset: &Dataset<F>,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    let mut img = Vec::new();
    img.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    img.write_u32::<BigEndian>(dataset.len() as u32)?;
    img.write_u32::<BigEndian>(dataset.inputs.cols() as u32)?;
    img.write_u32::<BigEndian>(1)?;
    for v in dataset.inputs.iter() {
        let byte = (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8;
        img.push(byte);
    }
    std::fs::write(images_path, img)?;

    let mut lab = Vec::new();
    lab.write_u32::<BigEndian>(LABEL_MAGIC)?;
    lab.write_u32::<BigEndian>(dataset.len() as u32)?;
    for &l in &dataset.labels {
        lab.push(l as u8);
    }
    std::fs::write(labels_path, lab)?;
    Ok(())
}

/// Epoch iterator: one uniform shuffle, then contiguous batches; the final
/// short batch is emitted.
pub fn batches<F: Scalar>(
    dataset: &Dataset<F>,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<(Matrix<F>, Vec<usize>)>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    rng.shuffle(&mut order);
    let cols = dataset.inputs.cols();
    let mut out = Vec::with_capacity(dataset.len().div_ceil(batch_size));
    for chunk in order.chunks(batch_size) {
        let mut data = Vec::with_capacity(chunk.len() * cols);
        let mut labels = Vec::with_capacity(chunk.len());
        for &i in chunk {
            data.extend_from_slice(dataset.inputs.row(i));
            labels.push(dataset.labels[i]);
        }
        out.push((Matrix::from_vec(chunk.len(), cols, data)?, labels));
    }
    Ok(out)
}

/// A bijection on class indices, drawn fresh per epoch in the task-swap
/// experiment.
#[derive(Clone, Debug)]
pub struct LabelPermutation {
    pub epoch: usize,
    perm: Vec<usize>,
}

impl LabelPermutation {
    pub fn identity(classes: usize) -> Self {
        LabelPermutation {
            epoch: 0,
            perm: (0..classes).collect(),
        }
    }

    pub fn random(classes: usize, epoch: usize, rng: &mut RngStream) -> Self {
        let mut perm: Vec<usize> = (0..classes).collect();
        rng.shuffle(&mut perm);
        LabelPermutation { epoch, perm }
    }

    pub fn map(&self, label: usize) -> usize {
        self.perm[label]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        LabelPermutation {
            epoch: self.epoch,
            perm: inv,
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        for &p in &self.perm {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }
}

/// Map every label through the permutation; inputs are untouched.
pub fn shuffle_labels<F: Scalar>(
    dataset: &Dataset<F>,
    permutation: &LabelPermutation,
) -> Result<Dataset<F>> {
    if permutation.perm.len() != dataset.classes {
        return Err(Error::Contract(format!(
            "permutation over {} classes applied to {}-class dataset",
            permutation.perm.len(),
            dataset.classes
        )));
    }
    Dataset::new(
        dataset.inputs.clone(),
        dataset.labels.iter().map(|&l| permutation.map(l)).collect(),
        dataset.classes,
    )
}

/// Labels produced by a fixed random teacher network; deterministic per seed.
pub fn synthetic_task<F: Scalar>(
    teacher_seed: u64,
    samples: usize,
    input_dim: usize,
    classes: usize,
) -> Result<Dataset<F>> {
    use crate::rng::StreamTag;
    let mut init = RngStream::new(teacher_seed, StreamTag::Init);
    let teacher = DenseNet::<F>::init(&[input_dim, 2 * input_dim.max(4), classes], &mut init);
    let mut data_rng = RngStream::new(teacher_seed, StreamTag::DataShuffle);
    let inputs = Matrix::from_vec(samples, input_dim, data_rng.gauss(samples * input_dim))?;
    let trace = mlp::forward(&teacher, &inputs)?;
    let labels: Vec<usize> = (0..samples)
        .map(|b| {
            let row = trace.probabilities.row(b);
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    Dataset::new(inputs, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamTag;
    use std::collections::HashMap;

    fn tiny_dataset() -> Dataset<f64> {
        // 2 samples of 2x2 "pixels": bytes 0,1,2,3 and 255,254,253,252
        Dataset::new(
            Matrix::from_vec(
                2,
                4,
                vec![
                    0.0,
                    1.0 / 255.0,
                    2.0 / 255.0,
                    3.0 / 255.0,
                    1.0,
                    254.0 / 255.0,
                    253.0 / 255.0,
                    252.0 / 255.0,
                ],
            )
            .unwrap(),
            vec![1, 0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn idx_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        let d = tiny_dataset();
        write_idx(&d, &img, &lab).unwrap();
        let back: Dataset<f64> = load_idx(&img, &lab).unwrap();
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.inputs.rows(), 2);
        assert_eq!(back.inputs.cols(), 4);
        for (a, b) in back.inputs.iter().zip(d.inputs.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // and the files themselves re-serialize identically
        let img2 = dir.path().join("imgs2");
        let lab2 = dir.path().join("labs2");
        write_idx(&back, &img2, &lab2).unwrap();
        assert_eq!(std::fs::read(&img).unwrap(), std::fs::read(&img2).unwrap());
        assert_eq!(std::fs::read(&lab).unwrap(), std::fs::read(&lab2).unwrap());
    }

    #[test]
    fn synthetic_idx_bytes_parse_to_expected_values() {
        // hand-built: 2 images of 2x2, then 2 labels
        let mut img = Vec::new();
        for w in [IMAGE_MAGIC, 2, 2, 2] {
            img.extend_from_slice(&w.to_be_bytes());
        }
        img.extend_from_slice(&[0, 1, 2, 3, 255, 128, 64, 32]);
        let mut lab = Vec::new();
        for w in [LABEL_MAGIC, 2] {
            lab.extend_from_slice(&w.to_be_bytes());
        }
        lab.extend_from_slice(&[7, 3]);
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        std::fs::write(&ip, &img).unwrap();
        std::fs::write(&lp, &lab).unwrap();
        let d: Dataset<f64> = load_idx(&ip, &lp).unwrap();
        assert_eq!((d.inputs.rows(), d.inputs.cols()), (2, 4));
        assert_eq!(d.inputs.get(0, 0), 0.0);
        assert_eq!(d.inputs.get(0, 1), 1.0 / 255.0);
        assert_eq!(d.inputs.get(1, 0), 1.0);
        assert_eq!(d.labels, vec![7, 3]);
        assert_eq!(d.classes, 8);
    }

    #[test]
    fn wrong_magic_is_a_format_error_naming_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        let d = tiny_dataset();
        write_idx(&d, &ip, &lp).unwrap();
        // images file passed where labels are expected
        let err = load_idx::<f64>(&ip, &ip).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("label magic"), "{msg}");
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        let d = tiny_dataset();
        write_idx(&d, &ip, &lp).unwrap();
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 2]).unwrap();
        let err = load_idx::<f64>(&ip, &lp).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn count_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("i");
        let lp = dir.path().join("l");
        let lp3 = dir.path().join("l3");
        let d = tiny_dataset();
        write_idx(&d, &ip, &lp).unwrap();
        let three = Dataset::new(
            Matrix::from_vec(3, 1, vec![0.0, 0.0, 0.0]).unwrap(),
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        write_idx(&three, &dir.path().join("i3"), &lp3).unwrap();
        let err = load_idx::<f64>(&ip, &lp3).unwrap_err();
        assert!(err.to_string().contains("item count"), "{err}");
    }

    #[test]
    fn batches_sizes_and_coverage() {
        let inputs = Matrix::from_vec(25, 1, (0..25).map(|i| i as f64).collect()).unwrap();
        let labels: Vec<usize> = (0..25).map(|i| i % 5).collect();
        let d = Dataset::new(inputs, labels, 5).unwrap();
        let mut rng = RngStream::new(1, StreamTag::DataShuffle);
        let bs = batches(&d, 10, &mut rng).unwrap();
        assert_eq!(
            bs.iter().map(|(m, _)| m.rows()).collect::<Vec<_>>(),
            vec![10, 10, 5]
        );
        // every sample appears exactly once per epoch
        let mut seen: Vec<f64> = bs
            .iter()
            .flat_map(|(m, _)| m.iter().copied().collect::<Vec<_>>())
            .collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, (0..25).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn batches_are_deterministic_per_seed() {
        let d = tiny_dataset();
        let mut a = RngStream::new(9, StreamTag::DataShuffle);
        let mut b = RngStream::new(9, StreamTag::DataShuffle);
        let ba = batches(&d, 1, &mut a).unwrap();
        let bb = batches(&d, 1, &mut b).unwrap();
        for ((ma, la), (mb, lb)) in ba.iter().zip(&bb) {
            assert_eq!(la, lb);
            assert_eq!(ma.data(), mb.data());
        }
    }

    #[test]
    fn label_permutation_group_properties() {
        let d = tiny_dataset();
        let id = LabelPermutation::identity(2);
        let same = shuffle_labels(&d, &id).unwrap();
        assert_eq!(same.labels, d.labels);

        let mut rng = RngStream::new(3, StreamTag::LabelShuffle);
        let p = LabelPermutation::random(10, 1, &mut rng);
        assert!(p.is_valid());
        let inputs = Matrix::from_vec(10, 1, vec![0.0; 10]).unwrap();
        let big = Dataset::new(inputs, (0..10).collect(), 10).unwrap();
        let shuffled = shuffle_labels(&big, &p).unwrap();
        let back = shuffle_labels(&shuffled, &p.inverse()).unwrap();
        assert_eq!(back.labels, big.labels);

        // multiset of labels preserved
        let mut hist = HashMap::new();
        for &l in &shuffled.labels {
            *hist.entry(l).or_insert(0usize) += 1;
        }
        assert_eq!(hist.len(), 10);
        assert!(hist.values().all(|&c| c == 1));
    }

    #[test]
    fn synthetic_task_is_deterministic_and_non_degenerate() {
        let a: Dataset<f64> = synthetic_task(5, 200, 4, 3).unwrap();
        let b: Dataset<f64> = synthetic_task(5, 200, 4, 3).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inputs.data(), b.inputs.data());
        for c in 0..3 {
            assert!(a.labels.iter().any(|&l| l == c), "class {c} missing");
        }
    }

    #[test]
    fn head_takes_a_prefix() {
        let d = tiny_dataset();
        let h = d.head(1);
        assert_eq!(h.len(), 1);
        assert_eq!(h.labels, vec![1]);
        assert_eq!(h.inputs.row(0), d.inputs.row(0));
    }
}
