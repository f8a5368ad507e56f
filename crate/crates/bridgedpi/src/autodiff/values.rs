//! Flat row-major tensor storage and the dense kernels used by the tape ops.
//!
//! Everything is stored as `f64`; the training CLI's 32-bit mode rounds
//! parameters to `f32` after each optimizer step (see `train`), so sums and
//! products always accumulate at 64-bit precision.

use std::fmt;

/// An n-dimensional array of `f64` in row-major order.
#[derive(Clone, PartialEq)]
pub struct Values {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Values {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 8 {
            write!(f, "Values{:?}{:?}", self.shape, self.data)
        } else {
            write!(
                f,
                "Values{:?}[{}, {}, ... ({} values)]",
                self.shape,
                self.data[0],
                self.data[1],
                self.data.len()
            )
        }
    }
}

impl Values {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match {} values",
            shape,
            data.len()
        );
        Values { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Values { shape, data: vec![0.0; n] }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Values { shape, data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Values { shape: vec![1], data: vec![value] }
    }

    /// 1-D vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Values { shape: vec![data.len()], data }
    }

    /// 2-D matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Sole element of a scalar (length-1) tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar {:?}", self.shape);
        self.data[0]
    }

    /// Number of rows when interpreted as a 2-D matrix ([n] counts as [n,1]... no: [r,c] only).
    pub fn rows(&self) -> usize {
        assert_eq!(self.ndim(), 2, "rows() on shape {:?}", self.shape);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.ndim(), 2, "cols() on shape {:?}", self.shape);
        self.shape[1]
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn set2(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.shape[1] + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[self.ndim() - 1];
        &self.data[r * c..(r + 1) * c]
    }

    /// Reinterpret with a new shape of the same total length.
    pub fn reshaped(&self, shape: Vec<usize>) -> Values {
        Values::new(shape, self.data.clone())
    }

    /// Round every entry to the nearest f32 and widen back.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }
}

/// C = A * B for row-major matrices (ikj loop order for cache locality).
pub fn matmul(a: &Values, b: &Values) -> Values {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &bd[p * n..(p + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Values::matrix(m, n, out)
}

/// C = A * B^T.
pub fn matmul_nt(a: &Values, b: &Values) -> Values {
    let (m, k) = (a.rows(), a.cols());
    let (n, k2) = (b.rows(), b.cols());
    assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        let a_row = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &bd[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (av, bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            out[i * n + j] = acc;
        }
    }
    Values::matrix(m, n, out)
}

/// C = A^T * B.
pub fn matmul_tn(a: &Values, b: &Values) -> Values {
    let (k, m) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for p in 0..k {
        let a_row = &ad[p * m..(p + 1) * m];
        let b_row = &bd[p * n..(p + 1) * n];
        for i in 0..m {
            let aip = a_row[i];
            if aip == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Values::matrix(m, n, out)
}

/// Accumulate `src` into `dst` element-wise.
pub fn accumulate(dst: &mut Values, src: &Values) {
    assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Values::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Values::matrix(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let a = Values::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 5.0, -6.0]);
        let b = Values::matrix(4, 3, vec![7.0, 8.0, 9.0, 1.0, -1.0, 2.0, 0.0, 3.0, 1.0, 2.0, 2.0, 2.0]);
        // a * b^T via matmul_nt must equal matmul against an explicitly transposed b.
        let mut bt = Values::zeros(vec![3, 4]);
        for r in 0..4 {
            for c in 0..3 {
                bt.set2(c, r, b.at2(r, c));
            }
        }
        assert_eq!(matmul_nt(&a, &b).data(), matmul(&a, &bt).data());

        let c = Values::matrix(2, 4, vec![1.0; 8]);
        let mut at = Values::zeros(vec![3, 2]);
        for r in 0..2 {
            for q in 0..3 {
                at.set2(q, r, a.at2(r, q));
            }
        }
        assert_eq!(matmul_tn(&a, &c).data(), matmul(&at, &c).data());
    }

    #[test]
    fn f32_rounding_is_idempotent() {
        let mut v = Values::vector(vec![0.1, 1.0 / 3.0, -2.5e-8]);
        v.round_to_f32();
        let once = v.clone();
        v.round_to_f32();
        assert_eq!(v, once);
    }
}
