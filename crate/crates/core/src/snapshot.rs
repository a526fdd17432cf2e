//! Binary estimator snapshots.
//!
//! Layout: 8-byte magic `RDDSNAP\0`, `u16` format version, `u8` estimator
//! tag, then the estimator body. All integers and floats are little-endian;
//! every real is stored as an `f64` regardless of the in-memory scalar type.

use thiserror::Error;

use crate::estimator::EstimatorKind;
use crate::nn::{Activation, AdamConfig, AdamState, DenseLayer, DenseNet, Gradients};
use crate::rng::{Rng, RngState};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"RDDSNAP\0";
pub const VERSION: u16 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("not an estimator snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown estimator tag {0}")]
    UnknownTag(u8),
    #[error("snapshot holds a {found} estimator, expected {expected}")]
    WrongKind {
        expected: EstimatorKind,
        found: EstimatorKind,
    },
    #[error("snapshot truncated")]
    Truncated,
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, SnapshotError>;

pub fn peek_kind(bytes: &[u8]) -> Result<EstimatorKind> {
    let mut r = SnapshotReader { bytes, at: 0 };
    r.header()
}

pub struct SnapshotWriter {
    buf: Vec<u8>,
}

impl SnapshotWriter {
    pub fn new(kind: EstimatorKind) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(kind.tag());
        Self { buf }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn real<T: Scalar>(&mut self, v: T) {
        self.f64(v.as_f64());
    }

    pub fn reals<T: Scalar>(&mut self, vs: &[T]) {
        self.u64(vs.len() as u64);
        vs.iter().for_each(|v| self.real(*v));
    }

    pub fn rng(&mut self, rng: &Rng) {
        let s = rng.state();
        self.u64(s.seed);
        self.u64(s.stream);
        self.u64(s.word_pos as u64);
        self.u64((s.word_pos >> 64) as u64);
    }

    pub fn net<T: Scalar>(&mut self, net: &DenseNet<T>) {
        self.u64(net.layers().len() as u64);
        for l in net.layers() {
            self.u64(l.in_dim() as u64);
            self.u64(l.out_dim() as u64);
            self.u8(l.activation.tag());
            self.reals(&l.weights);
            self.reals(&l.bias);
        }
    }

    fn grads<T: Scalar>(&mut self, g: &Gradients<T>) {
        g.weights.iter().zip(&g.biases).for_each(|(w, b)| {
            self.reals(w);
            self.reals(b);
        });
    }

    pub fn adam<T: Scalar>(&mut self, state: &AdamState<T>) {
        self.u64(state.step);
        self.real(state.config.lr);
        self.real(state.config.beta1);
        self.real(state.config.beta2);
        self.real(state.config.eps);
        self.grads(&state.m);
        self.grads(&state.v);
    }
}

pub struct SnapshotReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> SnapshotReader<'a> {
    /// Validates the header and checks the estimator tag.
    pub fn open(bytes: &'a [u8], expected: EstimatorKind) -> Result<Self> {
        let mut r = Self { bytes, at: 0 };
        let found = r.header()?;
        if found != expected {
            return Err(SnapshotError::WrongKind { expected, found });
        }
        Ok(r)
    }

    fn header(&mut self) -> Result<EstimatorKind> {
        if self.take(8).map_err(|_| SnapshotError::BadMagic)? != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let tag = self.u8()?;
        EstimatorKind::from_tag(tag).ok_or(SnapshotError::UnknownTag(tag))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).ok_or(SnapshotError::Truncated)?;
        let out = self
            .bytes
            .get(self.at..end)
            .ok_or(SnapshotError::Truncated)?;
        self.at = end;
        Ok(out)
    }

    pub fn is_exhausted(&self) -> bool {
        self.at == self.bytes.len()
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| SnapshotError::Corrupt("length overflow".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn real<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::of(self.f64()?))
    }

    pub fn reals<T: Scalar>(&mut self) -> Result<Vec<T>> {
        let n = self.usize()?;
        if n > (self.bytes.len() - self.at) / 8 {
            return Err(SnapshotError::Truncated);
        }
        (0..n).map(|_| self.real()).collect()
    }

    pub fn rng(&mut self) -> Result<Rng> {
        let seed = self.u64()?;
        let stream = self.u64()?;
        let lo = self.u64()? as u128;
        let hi = self.u64()? as u128;
        Ok(Rng::from_state(RngState {
            seed,
            stream,
            word_pos: lo | (hi << 64),
        }))
    }

    pub fn net<T: Scalar>(&mut self) -> Result<DenseNet<T>> {
        let n = self.usize()?;
        let mut layers = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let in_dim = self.usize()?;
            let out_dim = self.usize()?;
            let tag = self.u8()?;
            let act = Activation::from_tag(tag)
                .ok_or_else(|| SnapshotError::Corrupt(format!("activation tag {tag}")))?;
            let w = self.reals()?;
            let b = self.reals()?;
            layers.push(
                DenseLayer::from_parts(in_dim, out_dim, w, b, act)
                    .map_err(|e| SnapshotError::Corrupt(e.to_string()))?,
            );
        }
        DenseNet::from_layers(layers).map_err(|e| SnapshotError::Corrupt(e.to_string()))
    }

    fn grads<T: Scalar>(&mut self, net: &DenseNet<T>) -> Result<Gradients<T>> {
        let mut g = Gradients::zeros_like(net);
        for k in 0..net.layers().len() {
            let w = self.reals()?;
            let b = self.reals()?;
            if w.len() != g.weights[k].len() || b.len() != g.biases[k].len() {
                return Err(SnapshotError::Corrupt(
                    "optimizer moments do not match network".into(),
                ));
            }
            g.weights[k] = w;
            g.biases[k] = b;
        }
        Ok(g)
    }

    pub fn adam<T: Scalar>(&mut self, net: &DenseNet<T>) -> Result<AdamState<T>> {
        let step = self.u64()?;
        let config = AdamConfig {
            lr: self.real()?,
            beta1: self.real()?,
            beta2: self.real()?,
            eps: self.real()?,
        };
        let m = self.grads(net)?;
        let v = self.grads(net)?;
        Ok(AdamState { config, m, v, step })
    }
}
