use crate::error::{Error, Result};

/// Dense row-major tensor of 32-bit floats.
///
/// Every constructor checks that `dims` multiply out to the data length and
/// that every value is finite, so a `TensorF32` in hand is always well formed.
/// A tensor with no dims is a scalar holding exactly one value.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = checked_volume(&dims)?;
        if expected != data.len() {
            return Err(Error::shape(format!("dims {dims:?} hold {expected} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { dims, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f32>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn scalar(value: f32) -> Result<Self> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![0.0; n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::matrix(rows.len(), cols, data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_matrix(&self) -> bool {
        self.dims.len() == 2
    }

    /// `(rows, cols)` of a 2-D tensor.
    pub fn shape2(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [r, c] => Ok((*r, *c)),
            d => Err(Error::shape(format!("expected a matrix, got dims {d:?}"))),
        }
    }

    pub fn rows(&self) -> usize {
        self.dims.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.dims.len() < 2 {
            return self.data.len();
        }
        self.dims[1..].iter().product()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f32]> {
        let c = self.cols().max(1);
        self.data.chunks_exact(c)
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        let n = checked_volume(&dims)?;
        if n != self.data.len() {
            return Err(Error::shape(format!("cannot reshape {:?} into {dims:?}", self.dims)));
        }
        Ok(Self { dims, data: self.data })
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.shape2()?;
        let mut out = vec![0.0f32; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self { dims: vec![c, r], data: out })
    }

    /// Gathers the listed rows (in the given order) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.rows();
        let c = self.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            if r >= n {
                return Err(Error::OutOfRange { index: r, len: n });
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(Self { dims: vec![rows.len(), c], data })
    }

    /// Contiguous row range `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        let n = self.rows();
        if start > end || end > n {
            return Err(Error::OutOfRange { index: end, len: n });
        }
        let c = self.cols();
        Ok(Self { dims: vec![end - start, c], data: self.data[start * c..end * c].to_vec() })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::new(self.dims.clone(), data)
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }
}

pub(crate) fn checked_volume(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::ExtentOverflow(dims.iter().map(|&d| d as u64).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_volume() {
        assert!(matches!(TensorF32::new(vec![2, 3], vec![0.0; 5]), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let err = TensorF32::new(vec![3], vec![0.0, f32::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(1)));
        assert!(TensorF32::vector(vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn scalar_has_one_value() {
        let s = TensorF32::scalar(2.5).unwrap();
        assert_eq!(s.ndim(), 0);
        assert_eq!(s.data(), &[2.5]);
    }

    #[test]
    fn transpose_and_select() {
        let m = TensorF32::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let t = m.transpose().unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let s = m.select_rows(&[1, 0]).unwrap();
        assert_eq!(s.data(), &[4.0, 5.0, 6.0, 1.0, 2.0, 3.0]);
        assert!(m.select_rows(&[2]).is_err());
    }
}
