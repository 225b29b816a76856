//! Small dense and banded linear algebra.
//!
//! The state dimensions in this toolkit are tiny (n <= 4 for the models,
//! a few thousand unknowns for the finite-difference solves), so everything
//! here is written directly rather than pulled from a linear-algebra crate:
//! a row-major dense matrix, an LU solve with partial pivoting, a
//! scaling-and-squaring Padé matrix exponential, and a banded LU used by the
//! elliptic generator solves.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self[(i, j)] * x[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Max row sum of absolute values.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Solve A x = b by LU with partial pivoting. A is consumed as a copy.
pub fn solve_dense(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut lu = a.data.clone();
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut piv = col;
        let mut best = lu[perm[col] * n + col].abs();
        for r in col + 1..n {
            let v = lu[perm[r] * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Solver(format!("singular matrix at pivot column {col}")));
        }
        perm.swap(col, piv);
        let prow = perm[col];
        let d = lu[prow * n + col];
        for r in col + 1..n {
            let row = perm[r];
            let f = lu[row * n + col] / d;
            lu[row * n + col] = f;
            for c in col + 1..n {
                lu[row * n + c] -= f * lu[prow * n + c];
            }
        }
    }
    // Forward substitution on the permuted rows.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = perm[i];
        let mut s = x[row];
        for j in 0..i {
            s -= lu[row * n + j] * y[j];
        }
        y[i] = s;
    }
    // Back substitution.
    for i in (0..n).rev() {
        let row = perm[i];
        let mut s = y[i];
        for j in i + 1..n {
            s -= lu[row * n + j] * x[j];
        }
        x[i] = s / lu[row * n + i];
    }
    Ok(x)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé (6,6)
/// approximant. exp of the zero matrix is exactly the identity.
pub fn matexp(a: &Mat) -> Mat {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    // Padé (6,6) coefficients: 1, 1/2, 5/44, 1/66, 1/792, 1/15840, 1/665280.
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let norm = a.norm_inf();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(0.5f64.powi(s as i32));

    let mut num = Mat::zeros(n, n);
    let mut den = Mat::zeros(n, n);
    let mut power = Mat::identity(n);
    for (k, &ck) in C.iter().enumerate() {
        num = num.add(&power.scale(ck));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        den = den.add(&power.scale(sign * ck));
        if k + 1 < C.len() {
            power = power.matmul(&scaled);
        }
    }
    // Solve den * X = num column by column.
    let mut x = Mat::zeros(n, n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| num[(i, j)]).collect();
        let sol = solve_dense(&den, &col).expect("Padé denominator is nonsingular");
        for i in 0..n {
            x[(i, j)] = sol[i];
        }
    }
    for _ in 0..s {
        x = x.matmul(&x);
    }
    x
}

/// Banded matrix stored by diagonals: `band[i][kl + (j - i)]` holds A[i][j]
/// for |j - i| <= bandwidth. Used for the finite-difference generator solves,
/// which are narrow-banded and (after upwinding) diagonally dominant, so LU
/// without pivoting is stable.
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    rows: Vec<Vec<f64>>,
}

impl Banded {
    pub fn new(n: usize, kl: usize) -> Self {
        Banded { n, kl, rows: vec![vec![0.0; 2 * kl + 1]; n] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize;
        assert!(off.unsigned_abs() <= self.kl, "entry outside band");
        self.rows[i][(off + self.kl as isize) as usize] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize;
        if off.unsigned_abs() > self.kl {
            return 0.0;
        }
        self.rows[i][(off + self.kl as isize) as usize]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.kl);
            let jhi = (i + self.kl).min(self.n - 1);
            let mut s = 0.0;
            for j in jlo..=jhi {
                s += self.get(i, j) * x[j];
            }
            out[i] = s;
        }
        out
    }

    /// In-place banded LU without pivoting followed by the solve.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let mut rows = self.rows.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let d = rows[col][kl];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "zero or non-finite pivot at row {col} in banded factorization"
                )));
            }
            let rhi = (col + kl).min(n - 1);
            for r in col + 1..=rhi {
                // Entry A[r][col] lives at offset col - r.
                let off = (col as isize - r as isize + kl as isize) as usize;
                let f = rows[r][off] / d;
                if f == 0.0 {
                    continue;
                }
                rows[r][off] = f;
                for j in col + 1..=(col + kl).min(n - 1) {
                    let upper = rows[col][(j as isize - col as isize + kl as isize) as usize];
                    if upper != 0.0 {
                        rows[r][(j as isize - r as isize + kl as isize) as usize] -= f * upper;
                    }
                }
            }
        }
        // Forward substitution (unit lower factor).
        for i in 0..n {
            let jlo = i.saturating_sub(kl);
            let mut s = x[i];
            for j in jlo..i {
                s -= rows[i][(j as isize - i as isize + kl as isize) as usize] * x[j];
            }
            x[i] = s;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let jhi = (i + kl).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=jhi {
                s -= rows[i][(j as isize - i as isize + kl as isize) as usize] * x[j];
            }
            x[i] = s / rows[i][kl];
        }
        Ok(x)
    }

    /// Gauss-Seidel iteration, used instead of the direct factorization when
    /// the system is too large for in-band fill storage.
    pub fn solve_gauss_seidel(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.n;
        let mut x = vec![0.0; n];
        let bnorm = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        for _ in 0..max_iter {
            for i in 0..n {
                let jlo = i.saturating_sub(self.kl);
                let jhi = (i + self.kl).min(n - 1);
                let mut s = b[i];
                let mut diag = 0.0;
                for j in jlo..=jhi {
                    let a = self.get(i, j);
                    if j == i {
                        diag = a;
                    } else {
                        s -= a * x[j];
                    }
                }
                if diag == 0.0 {
                    return Err(Error::Solver(format!("zero diagonal at row {i}")));
                }
                x[i] = s / diag;
            }
            let r = self.matvec(&x);
            let res = r
                .iter()
                .zip(b)
                .map(|(ri, bi)| (ri - bi).abs())
                .fold(0.0, f64::max);
            if res <= tol * bnorm {
                return Ok(x);
            }
        }
        Err(Error::Solver(format!(
            "Gauss-Seidel did not reach tolerance {tol} in {max_iter} iterations"
        )))
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}
