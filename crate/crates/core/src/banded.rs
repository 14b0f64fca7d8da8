//! Row-major band storage and a partially pivoted band LU factorization.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a factorization is rejected.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Entry `(i, j)` with `-kl <= j - i <= ku` is stored at
/// `i * (kl + ku + 1) + (j + kl - i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            n: diag.len(),
            kl: 0,
            ku: 0,
            data: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    /// # Panics
    ///
    /// If `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band (kl = {}, ku = {})",
            self.kl,
            self.ku
        );
        let w = self.width();
        self.data[i * w + j + self.kl - i] += value;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j));
        let w = self.width();
        self.data[i * w + j + self.kl - i] = value;
    }

    /// Column range of row `i` inside the band.
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_range(i).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Copy with at least the requested bandwidths.
    pub fn widened(&self, kl: usize, ku: usize) -> Self {
        let mut out = Self::zeros(self.n, kl.max(self.kl), ku.max(self.ku));
        for i in 0..self.n {
            for j in self.row_range(i) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// `alpha * self + beta * other`, with the union of both bands.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.row_range(i) {
                out.add(i, j, alpha * self.get(i, j));
            }
            for j in other.row_range(i) {
                out.add(i, j, beta * other.get(i, j));
            }
        }
        out
    }

    /// Matrix product; bandwidths add.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_range(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.row_range(k) {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        let w = self.width();
        for (i, &di) in d.iter().enumerate() {
            for entry in &mut out.data[i * w..(i + 1) * w] {
                *entry *= di;
            }
        }
        out
    }

    /// `self * diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for i in 0..self.n {
            for j in self.row_range(i) {
                out.set(i, j, self.get(i, j) * d[j]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row_range(i)
                .all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol)
        })
    }

    pub fn factor(&self) -> Result<BandLu> {
        BandLu::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }
}

/// LU factors of a band matrix with row interchanges. The upper band of `U`
/// grows to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    // upper bandwidth of U
    ku: usize,
    // row-major, column j of row i at i * width + j + kl - i
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn new(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.kl + a.ku;
        let width = kl + ku + 1;
        let mut data = vec![0.0; n * width];
        let mut scale = vec![0.0f64; n];
        for i in 0..n {
            for j in a.row_range(i) {
                let value = a.get(i, j);
                data[i * width + j + kl - i] = value;
                scale[i] = scale[i].max(value.abs());
            }
        }
        let idx = |i: usize, j: usize| i * width + j + kl - i;
        let mut pivots = Vec::with_capacity(n);

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[idx(k, k)].abs();
            for i in k + 1..=last_row {
                let cand = data[idx(i, k)].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            let row_scale = if scale[p] > 0.0 { scale[p] } else { 1.0 };
            if !(best > PIVOT_TOLERANCE * row_scale) {
                return Err(Error::LinearSolveFailure {
                    row: k,
                    pivot: best,
                    dtau_dx2: None,
                });
            }
            pivots.push(p);
            let last_col = (k + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    data.swap(idx(k, j), idx(p, j));
                }
                scale.swap(k, p);
            }
            let pivot = data[idx(k, k)];
            for i in k + 1..=last_row {
                let l = data[idx(i, k)] / pivot;
                data[idx(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        data[idx(i, j)] -= l * data[idx(k, j)];
                    }
                }
            }
        }

        Ok(Self {
            n,
            kl,
            ku,
            data,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let width = self.kl + self.ku + 1;
        let idx = |i: usize, j: usize| i * width + j + self.kl - i;
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.data[idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                acc -= self.data[idx(k, j)] * b[j];
            }
            b[k] = acc / self.data[idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
