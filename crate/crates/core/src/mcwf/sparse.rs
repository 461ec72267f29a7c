//! Compressed sparse row matrices over `Complex64`.

use num_complex::Complex64;

/// Square or rectangular CSR matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(d: &[Complex64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, Complex64)> = entries.into_iter().collect();
        t.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < n_rows && c < n_cols, "entry ({r}, {c}) outside {n_rows}x{n_cols}");
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        let mut row_ptr = vec![0; n_rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (o, span) in out.iter_mut().zip(self.row_ptr.windows(2)) {
            let (cols, vals) = (&self.col_idx[span[0]..span[1]], &self.values[span[0]..span[1]]);
            let (mut re, mut im) = (0.0, 0.0);
            for (&c, v) in cols.iter().zip(vals) {
                let xc = x[c];
                re += v.re * xc.re - v.im * xc.im;
                im += v.re * xc.im + v.im * xc.re;
            }
            *o = Complex64::new(re, im);
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n_cols, rhs.n_rows);
        let mut entries = Vec::new();
        for (r, c, v) in self.triplets() {
            for k in rhs.row_ptr[c]..rhs.row_ptr[c + 1] {
                entries.push((r, rhs.col_idx[k], v * rhs.values[k]));
            }
        }
        Self::from_triplets(self.n_rows, rhs.n_cols, entries)
    }

    pub fn adjoint(&self) -> CsrMatrix {
        Self::from_triplets(
            self.n_cols,
            self.n_rows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn scale(&self, s: Complex64) -> CsrMatrix {
        Self::from_triplets(self.n_rows, self.n_cols, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    /// `sum_i s_i M_i` over matrices of equal shape.
    pub fn linear_combination(terms: &[(Complex64, &CsrMatrix)]) -> CsrMatrix {
        let (n_rows, n_cols) = terms.first().map_or((0, 0), |(_, m)| (m.n_rows, m.n_cols));
        let entries = terms.iter().flat_map(|(s, m)| {
            assert_eq!((m.n_rows, m.n_cols), (n_rows, n_cols));
            m.triplets().map(move |(r, c, v)| (r, c, v * s))
        });
        Self::from_triplets(n_rows, n_cols, entries.collect::<Vec<_>>())
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &CsrMatrix) -> CsrMatrix {
        let mut entries = Vec::with_capacity(self.nnz() * rhs.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in rhs.triplets() {
                entries.push((r1 * rhs.n_rows + r2, c1 * rhs.n_cols + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.n_rows * rhs.n_rows, self.n_cols * rhs.n_cols, entries)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        let diff = Self::linear_combination(&[(Complex64::new(1.0, 0.0), self), (Complex64::new(-1.0, 0.0), other)]);
        diff.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `<x|y>`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// `<x|M|x>`, using `scratch` for `M x`.
pub fn expectation(m: &CsrMatrix, x: &[Complex64], scratch: &mut [Complex64]) -> Complex64 {
    m.mul_vec_into(x, scratch);
    inner(x, scratch)
}
