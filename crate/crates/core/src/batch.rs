use crate::error::{Error, Result};

/// An `N x d` row-major matrix of sample points.
///
/// Rows are points in data or feature space. Constructors reject empty
/// batches and non-finite entries; the `*_unchecked` paths are for buffers
/// produced internally from already validated inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleBatch {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Empty("sample batch has no rows"));
        }
        if dim == 0 {
            return Err(Error::Shape("sample dimension must be positive".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{dim} batch",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "sample batch".into(),
                step: 0,
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("sample batch has no rows"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub(crate) fn from_vec_unchecked(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * dim);
        Self { rows, dim, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Returns a copy with `shift` added to every row.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        self.ensure_dim(shift.len())?;
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            for (v, s) in row.iter_mut().zip(shift) {
                *v += s;
            }
        }
        Ok(out)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for row in self.iter_rows() {
            for (acc, v) in c.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n = self.rows as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Mean Euclidean distance over distinct pairs; 0 for a single row.
    pub fn mean_pairwise_distance(&self) -> f64 {
        if self.rows < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.rows {
                total += euclidean(self.row(i), self.row(j));
            }
        }
        total / (self.rows * (self.rows - 1) / 2) as f64
    }

    pub(crate) fn ensure_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
