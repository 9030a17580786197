//! State points and flat point sets.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A single finite state (or parameter) vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePoint<T: Scalar = f64>(Vec<T>);

impl<T: Scalar> StatePoint<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("state point"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("state point"));
        }
        Ok(Self(coords))
    }

    pub fn scalar(v: T) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T: Scalar> AsRef<[T]> for StatePoint<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Scalar> Serialize for StatePoint<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for StatePoint<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<T>::deserialize(d)?;
        StatePoint::new(v).map_err(D::Error::custom)
    }
}

/// Row-major collection of points sharing one dimension.
///
/// May be empty; operations that need points check for that themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T: Scalar = f64> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> PointSet<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("point dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point set"));
        }
        Ok(Self { dim, data })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim > 0, "point dimension must be >= 1");
        Self {
            dim,
            data: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("point set"))?;
        let dim = first.as_ref().len();
        let mut out = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            out.extend_from_slice(r);
        }
        Self::new(dim, out)
    }

    pub fn from_points(points: &[StatePoint<T>]) -> Result<Self> {
        Self::from_rows(points)
    }

    /// Appends a row; panics on a dimension mismatch or non-finite entry.
    pub fn push(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.dim, "row dimension");
        assert!(row.iter().all(|c| c.is_finite()), "non-finite row");
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn to_points(&self) -> Vec<StatePoint<T>> {
        self.rows().map(|r| StatePoint(r.to_vec())).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Componentwise sample mean.
    pub fn mean(&self) -> Result<Vec<T>> {
        if self.is_empty() {
            return Err(Error::Empty("point set"));
        }
        let mut m = vec![T::zero(); self.dim];
        for r in self.rows() {
            for (acc, &v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = T::from_usize_lossy(self.len());
        m.iter_mut().for_each(|v| *v /= n);
        Ok(m)
    }
}

impl<T: Scalar> Serialize for PointSet<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for PointSet<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        PointSet::from_rows(&rows).map_err(D::Error::custom)
    }
}
