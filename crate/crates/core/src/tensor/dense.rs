use super::Matrix;
use crate::error::{Error, Result};

/// Dense 4-way array stored row-major (last index fastest).
///
/// For a cohort the modes are `(node, node, modality, subject)`; hidden
/// representations reuse the type as `(node, feature, modality, subject)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

/// Dense 3-way array `(node, feature, subject)` holding pooled embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::shape(format!("tensor has a zero dimension {dims:?}")));
    }
    Ok(())
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::shape(format!(
                "tensor {dims:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("tensor contains non-finite entries".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        check_dims(&dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        })
    }

    pub(crate) fn from_raw(dims: [usize; 4], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Self { dims, data }
    }

    /// Builds a tensor slice by slice; every slice must be `dims[0] x dims[1]`.
    pub fn from_slices(
        dims: [usize; 4],
        mut slice: impl FnMut(usize, usize) -> Matrix,
    ) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        for m in 0..dims[2] {
            for s in 0..dims[3] {
                t.set_slice(m, s, &slice(m, s))?;
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, m: usize, s: usize) -> usize {
        let [_, d1, d2, d3] = self.dims;
        ((i * d1 + j) * d2 + m) * d3 + s
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, m: usize, s: usize) -> f64 {
        self.data[self.offset(i, j, m, s)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, m: usize, s: usize, v: f64) {
        let o = self.offset(i, j, m, s);
        self.data[o] = v;
    }

    /// Frontal slice `X(:, :, m, s)`.
    pub fn slice(&self, m: usize, s: usize) -> Matrix {
        Matrix::from_fn(self.dims[0], self.dims[1], |i, j| self.get(i, j, m, s))
    }

    pub fn set_slice(&mut self, m: usize, s: usize, mat: &Matrix) -> Result<()> {
        if mat.shape() != (self.dims[0], self.dims[1]) {
            return Err(Error::shape(format!(
                "slice is {}x{}, tensor expects {}x{}",
                mat.rows(),
                mat.cols(),
                self.dims[0],
                self.dims[1]
            )));
        }
        if m >= self.dims[2] || s >= self.dims[3] {
            return Err(Error::shape(format!(
                "slice index ({m}, {s}) outside {:?}",
                self.dims
            )));
        }
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                self.set(i, j, m, s, mat.get(i, j));
            }
        }
        Ok(())
    }

    /// Mode-n product `t ×_mode m`: contracts `mode` against the columns of
    /// `m`, so `result(.., r, ..) = Σ_k m[r, k] · t(.., k, ..)`.
    pub fn mode_n_product(&self, m: &Matrix, mode: usize) -> Result<Tensor4> {
        if mode > 3 {
            return Err(Error::invalid(format!("mode {mode} out of range 0..=3")));
        }
        let contracted = self.dims[mode];
        if m.cols() != contracted {
            return Err(Error::shape(format!(
                "mode-{mode} product needs a matrix with {contracted} columns \
                 (tensor dim {contracted}), got {}x{} (matrix cols {})",
                m.rows(),
                m.cols(),
                m.cols()
            )));
        }
        let outer: usize = self.dims[..mode].iter().product();
        let inner: usize = self.dims[mode + 1..].iter().product();
        let rows = m.rows();
        let mut dims = self.dims;
        dims[mode] = rows;

        let mut out = vec![0.0; outer * rows * inner];
        for o in 0..outer {
            let src = &self.data[o * contracted * inner..(o + 1) * contracted * inner];
            let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
            for r in 0..rows {
                let dst_row = &mut dst[r * inner..(r + 1) * inner];
                for (k, &w) in m.row(r).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src_row = &src[k * inner..(k + 1) * inner];
                    for (d, &x) in dst_row.iter_mut().zip(src_row) {
                        *d += w * x;
                    }
                }
            }
        }
        Ok(Tensor4::from_raw(dims, out))
    }

    /// Mode-n unfolding: mode-`mode` fibers become rows, the remaining modes
    /// index columns in ascending order (last fastest).
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        if mode > 3 {
            return Err(Error::invalid(format!("mode {mode} out of range 0..=3")));
        }
        let outer: usize = self.dims[..mode].iter().product();
        let inner: usize = self.dims[mode + 1..].iter().product();
        let rows = self.dims[mode];
        let cols = outer * inner;
        let mut out = vec![0.0; rows * cols];
        for o in 0..outer {
            for r in 0..rows {
                let src = &self.data[(o * rows + r) * inner..(o * rows + r + 1) * inner];
                out[r * cols + o * inner..r * cols + (o + 1) * inner].copy_from_slice(src);
            }
        }
        Ok(Matrix::from_raw(rows, cols, out))
    }

    /// Inverse of [`Tensor4::unfold`].
    pub fn refold(unfolded: &Matrix, mode: usize, dims: [usize; 4]) -> Result<Tensor4> {
        if mode > 3 {
            return Err(Error::invalid(format!("mode {mode} out of range 0..=3")));
        }
        check_dims(&dims)?;
        let outer: usize = dims[..mode].iter().product();
        let inner: usize = dims[mode + 1..].iter().product();
        let rows = dims[mode];
        if unfolded.shape() != (rows, outer * inner) {
            return Err(Error::shape(format!(
                "unfolding {}x{} does not match dims {dims:?} at mode {mode}",
                unfolded.rows(),
                unfolded.cols()
            )));
        }
        let cols = outer * inner;
        let src = unfolded.data();
        let mut out = vec![0.0; rows * cols];
        for o in 0..outer {
            for r in 0..rows {
                out[(o * rows + r) * inner..(o * rows + r + 1) * inner]
                    .copy_from_slice(&src[r * cols + o * inner..r * cols + (o + 1) * inner]);
            }
        }
        Ok(Tensor4::from_raw(dims, out))
    }

    /// Sub-tensor keeping the listed subjects, in the given order.
    pub fn select_subjects(&self, subjects: &[usize]) -> Result<Tensor4> {
        self.select(3, subjects)
    }

    /// Sub-tensor keeping the listed modalities, in the given order.
    pub fn select_modalities(&self, modalities: &[usize]) -> Result<Tensor4> {
        self.select(2, modalities)
    }

    fn select(&self, mode: usize, keep: &[usize]) -> Result<Tensor4> {
        if keep.is_empty() {
            return Err(Error::shape("selection is empty"));
        }
        if let Some(&bad) = keep.iter().find(|&&k| k >= self.dims[mode]) {
            return Err(Error::shape(format!(
                "index {bad} out of range for mode {mode} of size {}",
                self.dims[mode]
            )));
        }
        let outer: usize = self.dims[..mode].iter().product();
        let inner: usize = self.dims[mode + 1..].iter().product();
        let n = self.dims[mode];
        let mut dims = self.dims;
        dims[mode] = keep.len();
        let mut out = Vec::with_capacity(outer * keep.len() * inner);
        for o in 0..outer {
            for &k in keep {
                let start = (o * n + k) * inner;
                out.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        Ok(Tensor4::from_raw(dims, out))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor4 {
        Tensor4::from_raw(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Drops a singleton modality mode.
    pub(crate) fn squeeze_modality(self) -> Result<Tensor3> {
        if self.dims[2] != 1 {
            return Err(Error::shape(format!(
                "cannot squeeze modality mode of size {}",
                self.dims[2]
            )));
        }
        Ok(Tensor3 {
            dims: [self.dims[0], self.dims[1], self.dims[3]],
            data: self.data,
        })
    }
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::shape(format!(
                "tensor {dims:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, d: usize, s: usize) -> f64 {
        self.data[(i * self.dims[1] + d) * self.dims[2] + s]
    }

    /// `F(:, :, s)` flattened row-major (node-major, feature fastest).
    pub fn subject_vector(&self, s: usize) -> Vec<f64> {
        let [n, d, _] = self.dims;
        let mut v = Vec::with_capacity(n * d);
        for i in 0..n {
            for k in 0..d {
                v.push(self.get(i, k, s));
            }
        }
        v
    }

    pub fn subject_matrix(&self, s: usize) -> Matrix {
        Matrix::from_fn(self.dims[0], self.dims[1], |i, k| self.get(i, k, s))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sym_eig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = dims.iter().product();
        Tensor4::new(dims, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_product_is_noop() {
        let x = random_tensor([5, 5, 2, 3], 1);
        assert_eq!(x.mode_n_product(&Matrix::identity(5), 0).unwrap(), x);
    }

    #[test]
    fn two_by_two_row_scaling() {
        let x = Tensor4::new([2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let y = x.mode_n_product(&m, 0).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 9.0, 12.0]);
    }

    #[test]
    fn mode0_product_matches_slice_loop() {
        let x = random_tensor([6, 6, 2, 3], 2);
        let u = random_matrix(4, 6, 3);
        let y = x.mode_n_product(&u, 0).unwrap();
        assert_eq!(y.dims(), [4, 6, 2, 3]);
        for m in 0..2 {
            for s in 0..3 {
                let expected = u.matmul(&x.slice(m, s)).unwrap();
                assert!(y.slice(m, s).max_abs_diff(&expected) < 1e-14);
            }
        }
    }

    #[test]
    fn mode1_product_matches_right_multiplication() {
        let x = random_tensor([4, 5, 2, 2], 4);
        let w = random_matrix(3, 5, 5);
        let y = x.mode_n_product(&w, 1).unwrap();
        for m in 0..2 {
            for s in 0..2 {
                let expected = x.slice(m, s).matmul(&w.transpose()).unwrap();
                assert!(y.slice(m, s).max_abs_diff(&expected) < 1e-14);
            }
        }
    }

    #[test]
    fn mode2_product_combines_modalities() {
        let x = random_tensor([3, 3, 3, 2], 6);
        let alpha = Matrix::new(1, 3, vec![0.2, -0.5, 1.5]).unwrap();
        let y = x.mode_n_product(&alpha, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for s in 0..2 {
                    let e: f64 = (0..3).map(|m| alpha.get(0, m) * x.get(i, j, m, s)).sum();
                    assert!((y.get(i, j, 0, s) - e).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mismatched_product_names_both_dims() {
        let x = random_tensor([4, 4, 1, 1], 7);
        let err = x.mode_n_product(&Matrix::identity(3), 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('4') && msg.contains('3'), "{msg}");
        assert!(x.mode_n_product(&Matrix::identity(4), 4).is_err());
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(Tensor4::zeros([0, 3, 1, 1]).is_err());
        assert!(Tensor4::new([2, 2, 0, 1], vec![]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Tensor4::new([1, 1, 1, 1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn unfold_shape_and_gram_psd() {
        let x = random_tensor([5, 5, 2, 4], 8);
        let u = x.unfold(0).unwrap();
        assert_eq!(u.shape(), (5, 40));
        let e = sym_eig(&u.gram()).unwrap();
        assert!(e.values.iter().all(|&l| l >= -1e-10));
        assert!(x.unfold(4).is_err());
    }

    #[test]
    fn unfold_column_ordering() {
        // Column index for mode 1 runs over (i, m, s) ascending, last fastest.
        let x = random_tensor([2, 3, 2, 2], 9);
        let u = x.unfold(1).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for m in 0..2 {
                    for s in 0..2 {
                        assert_eq!(u.get(j, (i * 2 + m) * 2 + s), x.get(i, j, m, s));
                    }
                }
            }
        }
    }

    #[test]
    fn select_subjects_and_modalities() {
        let x = random_tensor([3, 3, 2, 4], 10);
        let y = x.select_subjects(&[3, 1]).unwrap();
        assert_eq!(y.slice(1, 0), x.slice(1, 3));
        assert_eq!(y.slice(0, 1), x.slice(0, 1));
        let z = x.select_modalities(&[1]).unwrap();
        assert_eq!(z.dims(), [3, 3, 1, 4]);
        assert_eq!(z.slice(0, 2), x.slice(1, 2));
        assert!(x.select_subjects(&[4]).is_err());
        assert!(x.select_subjects(&[]).is_err());
    }

    fn dims_strategy() -> impl Strategy<Value = [usize; 4]> {
        (1usize..5, 1usize..5, 1usize..4, 1usize..4).prop_map(|(a, b, c, d)| [a, b, c, d])
    }

    proptest! {
        #[test]
        fn unfold_refold_roundtrip(dims in dims_strategy(), mode in 0usize..4, seed in any::<u64>()) {
            let x = random_tensor(dims, seed);
            let back = Tensor4::refold(&x.unfold(mode).unwrap(), mode, dims).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn distinct_mode_products_commute(dims in dims_strategy(), r0 in 1usize..4, r2 in 1usize..4, seed in any::<u64>()) {
            let x = random_tensor(dims, seed);
            let a = random_matrix(r0, dims[0], seed ^ 1);
            let b = random_matrix(r2, dims[2], seed ^ 2);
            let left = x.mode_n_product(&a, 0).unwrap().mode_n_product(&b, 2).unwrap();
            let right = x.mode_n_product(&b, 2).unwrap().mode_n_product(&a, 0).unwrap();
            let scale = left.frobenius_norm().max(1e-300);
            prop_assert!(left.max_abs_diff(&right) <= 1e-12 * scale);
        }
    }
}
