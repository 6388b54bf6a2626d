//! Binary training checkpoints.
//!
//! Layout under a checkpoint root: `epoch_<N>/state.bin` plus readable
//! copies of the config and history, and a `latest` file naming the newest
//! epoch directory. `state.bin` is a magic line, a version number, a
//! little-endian payload and a trailing SHA-256 of everything before it.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::history::{EpochRecord, MetricsHistory};
use super::TrainState;
use crate::error::{Error, Result};
use crate::metrics::{write_metric_report, Split};
use crate::model::{ArchSpec, Discriminator, Generator};
use crate::nn::{Optimizer, OptimizerKind};
use crate::objectives::{LatentDistribution, LatentSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::ConditionalGenerator;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PIXCKPT\n";
const STATE_FILE: &str = "state.bin";
const LATEST: &str = "latest";

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub config: TrainConfig,
    pub state: TrainState<T>,
    pub history: MetricsHistory,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn tensors<T: Scalar>(&mut self, ts: &[Tensor<T>]) {
        self.u64(ts.len() as u64);
        for t in ts {
            for d in t.shape() {
                self.u64(d as u64);
            }
            for v in t.data() {
                self.f64(v.f64());
            }
        }
    }

    fn optimizer<T: Scalar>(&mut self, o: &Optimizer<T>) {
        match o.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.u64(0);
                self.f64(beta1);
                self.f64(beta2);
                self.f64(eps);
            }
            OptimizerKind::Sgd => self.u64(1),
        }
        self.f64(o.lr);
        self.u64(o.step);
        self.tensors(&o.m);
        self.tensors(&o.v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Checkpoint {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| self.fail(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| self.fail(format!("count {v} out of range")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let b = self.bytes(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.fail("invalid utf-8 string"))
    }

    fn tensors<T: Scalar>(&mut self) -> Result<Vec<Tensor<T>>> {
        let n = self.usize()?;
        let mut out = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let mut shape = [0usize; 4];
            for d in shape.iter_mut() {
                *d = self.usize()?;
            }
            let len = shape.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
            let len = len.ok_or_else(|| self.fail("tensor size overflows"))?;
            if len.saturating_mul(8) > self.buf.len() - self.pos {
                return Err(self.fail("tensor larger than the file"));
            }
            let data = (0..len).map(|_| self.f64().map(T::of)).collect::<Result<Vec<T>>>()?;
            out.push(Tensor::from_vec(shape, data)?);
        }
        Ok(out)
    }

    fn optimizer<T: Scalar>(&mut self) -> Result<Optimizer<T>> {
        let kind = match self.u64()? {
            0 => OptimizerKind::Adam {
                beta1: self.f64()?,
                beta2: self.f64()?,
                eps: self.f64()?,
            },
            1 => OptimizerKind::Sgd,
            k => return Err(self.fail(format!("unknown optimizer tag {k}"))),
        };
        Ok(Optimizer {
            kind,
            lr: self.f64()?,
            step: self.u64()?,
            m: self.tensors()?,
            v: self.tensors()?,
        })
    }
}

fn encode<T: Scalar>(ckpt: &Checkpoint<T>) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    w.str(T::NAME);
    w.str(&ckpt.config.to_text());

    let h = &ckpt.history;
    w.str(h.split.name());
    w.str(&h.backend);
    w.u64(h.len() as u64);
    for r in h.records() {
        w.u64(r.epoch as u64);
        w.f64(r.fid);
        w.f64(r.mse);
        w.u64(r.aux.len() as u64);
        for (k, &v) in &r.aux {
            w.str(k);
            w.f64(v);
        }
    }

    let s = &ckpt.state;
    w.u64(s.epoch as u64);
    w.u64(s.iteration as u64);

    let g = s.generator.network();
    w.str(&g.spec().to_text());
    w.u64(g.context().image_channels as u64);
    let lat = s.generator.latent();
    for v in [lat.channels, lat.height, lat.width] {
        w.u64(v as u64);
    }
    w.str(lat.distribution.name());
    w.tensors(g.params());
    w.tensors(g.buffers());

    let d = s.discriminator.network();
    let ctx = d.context();
    w.str(&d.spec().to_text());
    w.u64(ctx.image_channels as u64);
    w.u64(ctx.conditional as u64);
    w.u64(ctx.pack as u64);
    w.tensors(d.params());
    w.tensors(d.buffers());

    w.optimizer(&s.g_opt);
    w.optimizer(&s.d_opt);

    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

fn overwrite<T: Scalar>(r: &Reader<'_>, what: &str, dst: &mut [Tensor<T>], src: Vec<Tensor<T>>) -> Result<()> {
    if dst.len() != src.len() {
        return Err(r.fail(format!("{what}: expected {} tensors, found {}", dst.len(), src.len())));
    }
    for (i, (d, s)) in dst.iter_mut().zip(src).enumerate() {
        if d.shape() != s.shape() {
            return Err(r.fail(format!("{what} {i}: shape {:?} does not match {:?}", s.shape(), d.shape())));
        }
        *d = s;
    }
    Ok(())
}

fn decode<T: Scalar>(buf: &[u8], path: &Path) -> Result<Checkpoint<T>> {
    let mut r = Reader { buf, pos: 0, path };
    if r.bytes(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(r.fail("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(r.bytes(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    if buf.len() < r.pos + 32 {
        return Err(r.fail("truncated file"));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(r.fail("checksum mismatch (file is corrupt)"));
    }
    r.buf = body;
    let _scalar = r.str()?;
    let config = TrainConfig::from_text(&r.str()?)?;

    let split_name = r.str()?;
    let split = Split::parse(&split_name).ok_or_else(|| r.fail(format!("unknown split `{split_name}`")))?;
    let mut history = MetricsHistory::new(split, r.str()?);
    for _ in 0..r.usize()? {
        let mut rec = EpochRecord::new(r.usize()?, r.f64()?, r.f64()?);
        for _ in 0..r.usize()? {
            let k = r.str()?;
            rec.aux.insert(k, r.f64()?);
        }
        history.push(rec)?;
    }

    let epoch = r.usize()?;
    let iteration = r.usize()?;

    let g_spec = ArchSpec::parse(&r.str()?, "checkpoint generator")?;
    let g_channels = r.usize()?;
    let (lc, lh, lw) = (r.usize()?, r.usize()?, r.usize()?);
    let dist_name = r.str()?;
    let dist =
        LatentDistribution::parse(&dist_name).ok_or_else(|| r.fail(format!("unknown distribution `{dist_name}`")))?;
    let mut generator = Generator::build(&g_spec, g_channels, LatentSpec::new(lc, lh, lw, dist), 0)?;
    let gp = r.tensors()?;
    overwrite(&r, "generator parameter", generator.network_mut().params_mut(), gp)?;
    let gbuf = r.tensors()?;
    overwrite(&r, "generator buffer", generator.network_mut().buffers_mut(), gbuf)?;

    let d_spec = ArchSpec::parse(&r.str()?, "checkpoint discriminator")?;
    let d_channels = r.usize()?;
    let conditional = r.u64()? != 0;
    let pack = r.usize()?;
    let mut discriminator = Discriminator::build(&d_spec, d_channels, conditional, pack, 0)?;
    let dp = r.tensors()?;
    overwrite(&r, "discriminator parameter", discriminator.network_mut().params_mut(), dp)?;
    let dbuf = r.tensors()?;
    overwrite(&r, "discriminator buffer", discriminator.network_mut().buffers_mut(), dbuf)?;

    let g_opt = r.optimizer()?;
    let d_opt = r.optimizer()?;
    if r.pos != r.buf.len() {
        return Err(r.fail(format!("{} trailing bytes", r.buf.len() - r.pos)));
    }
    Ok(Checkpoint {
        config,
        state: TrainState {
            generator,
            discriminator,
            g_opt,
            d_opt,
            epoch,
            iteration,
        },
        history,
    })
}

pub fn to_bytes<T: Scalar>(ckpt: &Checkpoint<T>) -> Vec<u8> {
    encode(ckpt)
}

pub fn from_bytes<T: Scalar>(buf: &[u8], path: &Path) -> Result<Checkpoint<T>> {
    decode(buf, path)
}

/// Writes `root/epoch_<N>/` for the state's completed epoch and points
/// `root/latest` at it. Returns the epoch directory.
pub fn persist_state<T: Scalar>(root: &Path, ckpt: &Checkpoint<T>) -> Result<PathBuf> {
    let name = format!("epoch_{}", ckpt.state.epoch);
    let dir = root.join(&name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let write = |file: &str, bytes: &[u8]| {
        let p = dir.join(file);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write(STATE_FILE, &encode(ckpt))?;
    write("config.txt", ckpt.config.to_text().as_bytes())?;
    let mut report = Vec::new();
    write_metric_report(&ckpt.history.to_records(), &mut report).map_err(|e| Error::io(dir.join("history.txt"), e))?;
    write("history.txt", &report)?;
    let latest = root.join(LATEST);
    fs::write(&latest, format!("{name}\n")).map_err(|e| Error::io(latest, e))?;
    Ok(dir)
}

fn resolve_file(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else if path.join(STATE_FILE).is_file() {
        Ok(path.join(STATE_FILE))
    } else if path.join(LATEST).is_file() {
        let p = path.join(LATEST);
        let name = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(path.join(name.trim()).join(STATE_FILE))
    } else {
        Err(Error::Checkpoint {
            path: path.to_path_buf(),
            msg: "no checkpoint found".into(),
        })
    }
}

/// Accepts a `state.bin` file, an epoch directory, or a checkpoint root
/// (resolved through its `latest` pointer).
pub fn restore_state<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let file = resolve_file(path)?;
    let buf = fs::read(&file).map_err(|e| Error::io(&file, e))?;
    decode(&buf, &file)
}

/// Scalar type name (`f32` or `f64`) a checkpoint was written with.
pub fn checkpoint_scalar(path: &Path) -> Result<String> {
    let file = resolve_file(path)?;
    let buf = fs::read(&file).map_err(|e| Error::io(&file, e))?;
    let mut r = Reader { buf: &buf, pos: 0, path: &file };
    if r.bytes(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(r.fail("not a checkpoint file (bad magic)"));
    }
    r.bytes(4)?;
    r.str()
}
