//! Bit-exact binary checkpoints: model parameters plus the exact position of
//! every RNG stream, so a resumed run replays the uninterrupted one.

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::{RngStream, StreamTag};
use crate::store::{ConnectionStore, DenseNet, ParamSource, SoftStore};
use crate::Real;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: u32 = 0x5257_4348; // "RWCH"
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub enum ModelState {
    Hard(ConnectionStore<Real>),
    Soft(SoftStore<Real>),
    Dense(DenseNet<Real>),
}

impl ModelState {
    fn kind(&self) -> u8 {
        match self {
            ModelState::Hard(_) => 0,
            ModelState::Soft(_) => 1,
            ModelState::Dense(_) => 2,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        match self {
            ModelState::Hard(s) => s.layer_sizes(),
            ModelState::Soft(s) => s.layer_sizes(),
            ModelState::Dense(n) => n.layer_sizes(),
        }
    }
}

/// Serializable position of one RNG stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub tag: StreamTag,
    pub seed: u64,
    pub counter: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn of(stream: &RngStream) -> Self {
        RngState {
            tag: stream.tag(),
            seed: stream.seed(),
            counter: stream.counter(),
            word_pos: stream.word_pos(),
        }
    }

    pub fn restore(&self) -> RngStream {
        RngStream::restore(self.seed, self.tag, self.counter, self.word_pos)
    }
}

fn tag_from_u8(b: u8) -> Result<StreamTag> {
    Ok(match b {
        0 => StreamTag::Init,
        1 => StreamTag::Noise,
        2 => StreamTag::Rewire,
        3 => StreamTag::DataShuffle,
        4 => StreamTag::LabelShuffle,
        other => {
            return Err(Error::Format {
                field: "rng tag".into(),
                message: format!("unknown tag {other}"),
            })
        }
    })
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub iteration: u64,
    pub epoch: u64,
    pub model: ModelState,
    pub rng: Vec<RngState>,
}

fn write_f64s(w: &mut impl Write, xs: &[Real]) -> Result<()> {
    w.write_u64::<LittleEndian>(xs.len() as u64)?;
    for &x in xs {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read) -> Result<Vec<Real>> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(r.read_f64::<LittleEndian>()?);
    }
    Ok(out)
}

fn write_biases(w: &mut impl Write, biases: &[Vec<Real>]) -> Result<()> {
    w.write_u32::<LittleEndian>(biases.len() as u32)?;
    for b in biases {
        write_f64s(w, b)?;
    }
    Ok(())
}

fn read_biases(r: &mut impl Read) -> Result<Vec<Vec<Real>>> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    (0..n).map(|_| read_f64s(r)).collect()
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_u32::<LittleEndian>(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(ckpt.model.kind())?;
    let sizes = ckpt.model.layer_sizes();
    w.write_u32::<LittleEndian>(sizes.len() as u32)?;
    for s in &sizes {
        w.write_u32::<LittleEndian>(*s as u32)?;
    }
    w.write_u64::<LittleEndian>(ckpt.iteration)?;
    w.write_u64::<LittleEndian>(ckpt.epoch)?;
    w.write_u8(ckpt.rng.len() as u8)?;
    for r in &ckpt.rng {
        w.write_u8(r.tag as u8)?;
        w.write_u64::<LittleEndian>(r.seed)?;
        w.write_u64::<LittleEndian>(r.counter)?;
        w.write_u64::<LittleEndian>(r.word_pos as u64)?;
        w.write_u64::<LittleEndian>((r.word_pos >> 64) as u64)?;
    }
    match &ckpt.model {
        ModelState::Hard(s) => {
            w.write_u64::<LittleEndian>(s.budget() as u64)?;
            let theta: Vec<Real> = (0..s.m()).map(|k| s.theta(k)).collect();
            write_f64s(&mut w, &theta)?;
            for k in 0..s.m() {
                w.write_i8(s.sign(k))?;
            }
            w.write_u64::<LittleEndian>(s.active().len() as u64)?;
            for &k in s.active() {
                w.write_u64::<LittleEndian>(k as u64)?;
            }
            write_biases(&mut w, s.bias_vectors())?;
        }
        ModelState::Soft(s) => {
            w.write_f64::<LittleEndian>(s.theta_min())?;
            let theta: Vec<Real> = (0..s.m()).map(|k| s.theta(k)).collect();
            write_f64s(&mut w, &theta)?;
            for k in 0..s.m() {
                w.write_i8(s.sign(k))?;
            }
            write_biases(&mut w, s.bias_vectors())?;
        }
        ModelState::Dense(n) => {
            w.write_u32::<LittleEndian>(n.weight_matrices().len() as u32)?;
            for m in n.weight_matrices() {
                w.write_u32::<LittleEndian>(m.rows() as u32)?;
                w.write_u32::<LittleEndian>(m.cols() as u32)?;
                write_f64s(&mut w, m.data())?;
            }
            write_biases(&mut w, n.bias_vectors())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let magic = r.read_u32::<LittleEndian>()?;
    if magic != MAGIC {
        return Err(Error::Format {
            field: "checkpoint magic".into(),
            message: format!("expected {MAGIC:#010x}, got {magic:#010x}"),
        });
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format {
            field: "checkpoint version".into(),
            message: format!("unsupported version {version}"),
        });
    }
    let kind = r.read_u8()?;
    let n_sizes = r.read_u32::<LittleEndian>()? as usize;
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(r.read_u32::<LittleEndian>()? as usize);
    }
    let iteration = r.read_u64::<LittleEndian>()?;
    let epoch = r.read_u64::<LittleEndian>()?;
    let n_rng = r.read_u8()? as usize;
    let mut rng = Vec::with_capacity(n_rng);
    for _ in 0..n_rng {
        let tag = tag_from_u8(r.read_u8()?)?;
        let seed = r.read_u64::<LittleEndian>()?;
        let counter = r.read_u64::<LittleEndian>()?;
        let lo = r.read_u64::<LittleEndian>()? as u128;
        let hi = r.read_u64::<LittleEndian>()? as u128;
        rng.push(RngState {
            tag,
            seed,
            counter,
            word_pos: lo | (hi << 64),
        });
    }
    let model = match kind {
        0 => {
            let budget = r.read_u64::<LittleEndian>()? as usize;
            let theta = read_f64s(&mut r)?;
            let m = theta.len();
            let mut sign = Vec::with_capacity(m);
            for _ in 0..m {
                sign.push(r.read_i8()?);
            }
            let n_active = r.read_u64::<LittleEndian>()? as usize;
            let mut active = Vec::with_capacity(n_active);
            for _ in 0..n_active {
                active.push(r.read_u64::<LittleEndian>()? as usize);
            }
            let biases = read_biases(&mut r)?;
            ModelState::Hard(ConnectionStore::from_raw(
                &sizes, budget, theta, sign, &active, biases,
            )?)
        }
        1 => {
            let theta_min = r.read_f64::<LittleEndian>()?;
            let theta = read_f64s(&mut r)?;
            let m = theta.len();
            let mut sign = Vec::with_capacity(m);
            for _ in 0..m {
                sign.push(r.read_i8()?);
            }
            let biases = read_biases(&mut r)?;
            ModelState::Soft(SoftStore::from_raw(&sizes, theta_min, theta, sign, biases)?)
        }
        2 => {
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                let rows = r.read_u32::<LittleEndian>()? as usize;
                let cols = r.read_u32::<LittleEndian>()? as usize;
                let data = read_f64s(&mut r)?;
                weights.push(Matrix::from_vec(rows, cols, data)?);
            }
            let biases = read_biases(&mut r)?;
            ModelState::Dense(DenseNet::from_raw(&sizes, weights, biases)?)
        }
        other => {
            return Err(Error::Format {
                field: "checkpoint model kind".into(),
                message: format!("unknown kind {other}"),
            })
        }
    };
    Ok(Checkpoint {
        iteration,
        epoch,
        model,
        rng,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStream, StreamTag};

    fn rng_states() -> Vec<RngState> {
        let mut a = RngStream::new(5, StreamTag::Noise);
        a.gauss::<f64>(17);
        let mut b = RngStream::new(9, StreamTag::Rewire);
        b.uniform_index(4).unwrap();
        vec![RngState::of(&a), RngState::of(&b)]
    }

    #[test]
    fn hard_store_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck");
        let mut init = RngStream::new(1, StreamTag::Init);
        let mut store =
            ConnectionStore::<f64>::init_connectivity(&[6, 5, 3], &[0.4, 0.6], &mut init)
                .unwrap();
        store.bias_mut(0)[2] = 0.125;
        let ckpt = Checkpoint {
            iteration: 1234,
            epoch: 2,
            model: ModelState::Hard(store.clone()),
            rng: rng_states(),
        };
        write_checkpoint(&path, &ckpt).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.iteration, 1234);
        assert_eq!(back.epoch, 2);
        assert_eq!(back.rng, ckpt.rng);
        let ModelState::Hard(s2) = &back.model else {
            panic!("wrong kind")
        };
        assert_eq!(s2.active(), store.active());
        for k in 0..store.m() {
            assert_eq!(s2.theta(k).to_bits(), store.theta(k).to_bits());
            assert_eq!(s2.sign(k), store.sign(k));
        }
        assert_eq!(s2.bias_vectors(), store.bias_vectors());
        // file bytes themselves round-trip
        let path2 = dir.path().join("ck2");
        write_checkpoint(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn soft_and_dense_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut init = RngStream::new(2, StreamTag::Init);
        let soft =
            SoftStore::<f64>::init_connectivity(&[4, 3, 2], &[0.5, 0.5], -0.2, &mut init)
                .unwrap();
        let p = dir.path().join("soft");
        write_checkpoint(
            &p,
            &Checkpoint {
                iteration: 7,
                epoch: 0,
                model: ModelState::Soft(soft.clone()),
                rng: vec![],
            },
        )
        .unwrap();
        let back = read_checkpoint(&p).unwrap();
        let ModelState::Soft(s2) = &back.model else {
            panic!("wrong kind")
        };
        for k in 0..soft.m() {
            assert_eq!(s2.theta(k).to_bits(), soft.theta(k).to_bits());
        }
        assert_eq!(s2.active_count(), soft.active_count());

        let dense = DenseNet::<f64>::init(&[4, 3, 2], &mut init);
        let p = dir.path().join("dense");
        write_checkpoint(
            &p,
            &Checkpoint {
                iteration: 0,
                epoch: 0,
                model: ModelState::Dense(dense.clone()),
                rng: vec![],
            },
        )
        .unwrap();
        let back = read_checkpoint(&p).unwrap();
        let ModelState::Dense(n2) = &back.model else {
            panic!("wrong kind")
        };
        for (a, b) in n2.weight_matrices().iter().zip(dense.weight_matrices()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn restored_rng_replays() {
        let mut s = RngStream::new(42, StreamTag::Noise);
        s.gauss::<f64>(100);
        let state = RngState::of(&s);
        let expected = s.gauss::<f64>(5);
        let mut restored = state.restore();
        assert_eq!(restored.gauss::<f64>(5), expected);
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, b"not a checkpoint").unwrap();
        assert!(read_checkpoint(&p).is_err());
    }
}
