//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! and closed-form 2×2 spectra.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(mut self) -> Result<Lu<T>> {
        assert_eq!(self.rows, self.cols, "LU requires a square matrix");
        let n = self.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, &v| m.max(v.abs()))
            .max(T::min_positive_value());
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, self[(i, k)].abs()))
                .fold((k, -T::one()), |acc, c| if c.1 > acc.1 { c } else { acc });
            if !(pmax > scale * T::epsilon() * T::lit(1e-3)) {
                return Err(Error::Singular);
            }
            if piv != k {
                for j in 0..n {
                    self.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let d = self[(k, k)];
            for i in k + 1..n {
                let l = self[(i, k)] / d;
                self[(i, k)] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let t = self[(k, j)];
                        self[(i, j)] -= l * t;
                    }
                }
            }
        }
        Ok(Lu { lu: self, perm })
    }

    pub fn solve(self, b: &[T]) -> Result<Vec<T>> {
        Ok(self.lu()?.solve(b))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let x = self.solve(&b.column(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// LU factors of a fixed-size square matrix, kept on the stack.
#[derive(Debug, Clone, Copy)]
pub struct FixedLu<T, const N: usize> {
    lu: [[T; N]; N],
    perm: [usize; N],
}

impl<T: Real, const N: usize> FixedLu<T, N> {
    pub fn new(mut a: [[T; N]; N]) -> Option<Self> {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let mut piv = k;
            let mut best = a[k][k].abs();
            for (i, row) in a.iter().enumerate().skip(k + 1) {
                if row[k].abs() > best {
                    best = row[k].abs();
                    piv = i;
                }
            }
            if !(best > T::zero()) || !best.is_finite() {
                return None;
            }
            if piv != k {
                a.swap(k, piv);
                perm.swap(k, piv);
            }
            let d = a[k][k];
            for i in k + 1..N {
                let l = a[i][k] / d;
                a[i][k] = l;
                for j in k + 1..N {
                    let t = a[k][j];
                    a[i][j] -= l * t;
                }
            }
        }
        Some(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[T; N]) -> [T; N] {
        let mut x = [T::zero(); N];
        for i in 0..N {
            x[i] = b[self.perm[i]];
        }
        for i in 0..N {
            for j in 0..i {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

pub type Mat2<T> = [[T; 2]; 2];

#[inline]
pub fn det2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn trace2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] + m[1][1]
}

#[inline]
pub fn mul2<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn mul2v<T: Real>(a: &Mat2<T>, v: [T; 2]) -> [T; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn inv2<T: Real>(m: &Mat2<T>) -> Result<Mat2<T>> {
    let d = det2(m);
    if d == T::zero() || !d.is_finite() {
        return Err(Error::Singular);
    }
    Ok([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Eigenvalues of a 2×2 matrix from its trace and determinant, ordered with
/// the larger real part (or positive imaginary part) first.
pub fn eig2_from_invariants<T: Real>(trace: T, det: T) -> [Complex<T>; 2] {
    let half = trace / T::lit(2.0);
    let disc = half * half - det;
    if disc >= T::zero() {
        let r = disc.sqrt();
        // Avoid cancellation in the smaller root.
        let big = if half >= T::zero() { half + r } else { half - r };
        let small = if big != T::zero() { det / big } else { T::zero() };
        let (a, b) = if big >= small { (big, small) } else { (small, big) };
        [Complex::new(a, T::zero()), Complex::new(b, T::zero())]
    } else {
        let w = (-disc).sqrt();
        [Complex::new(half, w), Complex::new(half, -w)]
    }
}

pub fn eig2<T: Real>(m: &Mat2<T>) -> [Complex<T>; 2] {
    eig2_from_invariants(trace2(m), det2(m))
}

/// Eigenvector for the eigenvalue `mu + i*omega` (omega > 0) of a 2×2 matrix.
/// Returns (real part, imaginary part).
pub fn complex_eigenvector<T: Real>(m: &Mat2<T>, lambda: Complex<T>) -> ([T; 2], [T; 2]) {
    // (A - λI) q = 0; pick the better-conditioned row.
    let a = Complex::new(m[0][0], T::zero()) - lambda;
    let b = m[0][1];
    let c = m[1][0];
    let d = Complex::new(m[1][1], T::zero()) - lambda;
    let (q0, q1) = if b.abs() >= c.abs() {
        // a q0 + b q1 = 0  ->  q = (b, -a)
        (Complex::new(b, T::zero()), -a)
    } else {
        // c q0 + d q1 = 0  ->  q = (-d, c)
        (-d, Complex::new(c, T::zero()))
    };
    ([q0.re, q1.re], [q0.im, q1.im])
}

#[inline]
pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
