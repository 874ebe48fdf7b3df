use crate::error::{Error, Result};
use crate::kernel::PartialAttn;
use crate::scalar::Scalar;
use crate::tensor::{DenseMatrix, RealVector};

/// One array inside a message.
#[derive(Debug, Clone, PartialEq)]
pub enum Part<T> {
    Matrix(DenseMatrix<T>),
    Vector(RealVector<T>),
}

/// Shape of a [`Part`], used to check that both ends of an exchange agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartShape {
    Matrix(usize, usize),
    Vector(usize),
}

impl<T: Scalar> Part<T> {
    pub fn words(&self) -> usize {
        match self {
            Part::Matrix(m) => m.len(),
            Part::Vector(v) => v.len(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Part::Matrix(m) => m.rows(),
            Part::Vector(v) => v.len(),
        }
    }

    pub fn shape(&self) -> PartShape {
        match self {
            Part::Matrix(m) => PartShape::Matrix(m.rows(), m.cols()),
            Part::Vector(v) => PartShape::Vector(v.len()),
        }
    }

    fn select_rows(&self, idx: &[usize]) -> Self {
        match self {
            Part::Matrix(m) => Part::Matrix(m.select_rows(idx)),
            Part::Vector(v) => Part::Vector(v.select(idx)),
        }
    }
}

/// The unit of transfer: an ordered list of matrices and vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload<T>(pub Vec<Part<T>>);

impl<T: Scalar> Default for Payload<T> {
    fn default() -> Self {
        Self(Vec::new())
    }
}

impl<T: Scalar> Payload<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn matrix(mut self, m: DenseMatrix<T>) -> Self {
        self.0.push(Part::Matrix(m));
        self
    }

    pub fn vector(mut self, v: RealVector<T>) -> Self {
        self.0.push(Part::Vector(v));
        self
    }

    /// Total scalar count.
    pub fn words(&self) -> usize {
        self.0.iter().map(Part::words).sum()
    }

    pub fn shape(&self) -> Vec<PartShape> {
        self.0.iter().map(Part::shape).collect()
    }

    pub fn reader(self) -> PayloadReader<T> {
        PayloadReader {
            parts: self.0.into_iter(),
        }
    }
}

/// Takes parts back out of a payload in the order they were added.
pub struct PayloadReader<T> {
    parts: std::vec::IntoIter<Part<T>>,
}

impl<T: Scalar> PayloadReader<T> {
    pub fn matrix(&mut self) -> Result<DenseMatrix<T>> {
        match self.parts.next() {
            Some(Part::Matrix(m)) => Ok(m),
            other => Err(Error::shape(
                "payload",
                format!("expected a matrix, found {:?}", other.map(|p| p.shape())),
            )),
        }
    }

    pub fn vector(&mut self) -> Result<RealVector<T>> {
        match self.parts.next() {
            Some(Part::Vector(v)) => Ok(v),
            other => Err(Error::shape(
                "payload",
                format!("expected a vector, found {:?}", other.map(|p| p.shape())),
            )),
        }
    }

    pub fn finish(mut self) -> Result<()> {
        match self.parts.next() {
            None => Ok(()),
            Some(p) => Err(Error::shape(
                "payload",
                format!("unexpected trailing part {:?}", p.shape()),
            )),
        }
    }
}

/// Data that collectives can slice by rows and move through the fabric.
pub trait Shardable<T: Scalar>: Sized + Clone {
    fn rows(&self) -> usize;
    fn select_rows(&self, idx: &[usize]) -> Self;
    fn into_payload(self) -> Payload<T>;
    fn from_payload(payload: Payload<T>) -> Result<Self>;
}

impl<T: Scalar> Shardable<T> for Payload<T> {
    fn rows(&self) -> usize {
        self.0.first().map_or(0, Part::rows)
    }

    fn select_rows(&self, idx: &[usize]) -> Self {
        Payload(self.0.iter().map(|p| p.select_rows(idx)).collect())
    }

    fn into_payload(self) -> Payload<T> {
        self
    }

    fn from_payload(payload: Payload<T>) -> Result<Self> {
        Ok(payload)
    }
}

impl<T: Scalar> Shardable<T> for DenseMatrix<T> {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }

    fn select_rows(&self, idx: &[usize]) -> Self {
        DenseMatrix::select_rows(self, idx)
    }

    fn into_payload(self) -> Payload<T> {
        Payload::new().matrix(self)
    }

    fn from_payload(payload: Payload<T>) -> Result<Self> {
        let mut r = payload.reader();
        let m = r.matrix()?;
        r.finish()?;
        Ok(m)
    }
}

impl<T: Scalar> Shardable<T> for PartialAttn<T> {
    fn rows(&self) -> usize {
        PartialAttn::rows(self)
    }

    fn select_rows(&self, idx: &[usize]) -> Self {
        PartialAttn::select_rows(self, idx)
    }

    fn into_payload(self) -> Payload<T> {
        Payload::new().vector(self.m).matrix(self.n).vector(self.d)
    }

    fn from_payload(payload: Payload<T>) -> Result<Self> {
        let mut r = payload.reader();
        let (m, n, d) = (r.vector()?, r.matrix()?, r.vector()?);
        r.finish()?;
        PartialAttn::new(m, n, d)
    }
}
