//! Dense exact rational matrices.
//!
//! Everything the constructions need is here: products, transposes, Gaussian
//! elimination (rank, solve, inverse, null space), and the block operations
//! used to assemble amalgams. Shape mismatches are programming errors and
//! panic; operator-level APIs validate shapes before reaching this layer.

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| crate::rational::format_rational(self.get(i, j)))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
        }
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// A matrix with the given shape even when one dimension is zero.
    pub fn from_rows_shaped(rows: usize, cols: usize, entries: Vec<Vec<Rational>>) -> Self {
        if rows == 0 || cols == 0 {
            return Matrix::zeros(rows, cols);
        }
        assert_eq!(entries.len(), rows);
        let m = Matrix::from_rows(entries);
        assert_eq!(m.cols, cols);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j) + a * b;
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: &Rational) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        assert_eq!(x.len(), self.cols, "shape mismatch in apply");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vconcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Rational::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    if i == j {
                        self.get(i, j).is_one()
                    } else {
                        self.get(i, j).is_zero()
                    }
                })
            })
    }

    /// True for the block form `[I; 0]`: the first-coordinates inclusion.
    pub fn is_coordinate_inclusion(&self) -> bool {
        if self.cols > self.rows {
            return false;
        }
        (0..self.rows).all(|i| {
            (0..self.cols).all(|j| {
                if i == j {
                    self.get(i, j).is_one()
                } else {
                    self.get(i, j).is_zero()
                }
            })
        })
    }

    /// Row-reduce in place; returns the pivot column of each pivot row.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self.get(r, c).recip();
            for j in 0..self.cols {
                let v = self.get(r, j) * &inv;
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i != r && !self.get(i, c).is_zero() {
                    let f = self.get(i, c).clone();
                    for j in 0..self.cols {
                        let v = self.get(i, j) - &f * self.get(r, j);
                        self.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// One solution of `self * x = b`, or None when inconsistent.
    pub fn solve(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        assert_eq!(b.len(), self.rows);
        let rhs = Matrix::from_rows_shaped(self.rows, 1, b.iter().map(|v| vec![v.clone()]).collect());
        let sol = self.solve_matrix(&rhs)?;
        Some(sol.col(0))
    }

    /// One solution of `self * X = B`, or None when inconsistent.
    pub fn solve_matrix(&self, b: &Matrix) -> Option<Matrix> {
        assert_eq!(self.rows, b.rows());
        let mut aug = self.hconcat(b);
        let pivots = aug.rref();
        // Inconsistent iff a pivot lands in the appended block.
        if pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        let mut x = Matrix::zeros(self.cols, b.cols());
        for (r, &c) in pivots.iter().enumerate() {
            for j in 0..b.cols() {
                x.set(c, j, aug.get(r, self.cols + j).clone());
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Matrix> {
        if self.rows != self.cols {
            return None;
        }
        let inv = self.solve_matrix(&Matrix::identity(self.rows))?;
        if self.mul(&inv).is_identity() {
            Some(inv)
        } else {
            None
        }
    }

    /// Columns form a basis of `{ x : self * x = 0 }`, in the canonical
    /// reduced-echelon parameterization.
    pub fn nullspace(&self) -> Matrix {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Matrix::zeros(self.cols, free.len());
        for (k, &fc) in free.iter().enumerate() {
            basis.set(fc, k, Rational::one());
            for (r, &pc) in pivots.iter().enumerate() {
                basis.set(pc, k, -m.get(r, fc).clone());
            }
        }
        basis
    }

    /// Extends the (independent) columns of `self` to a basis of the full
    /// space using the earliest standard basis vectors that keep the rank
    /// growing. Returns a square invertible matrix whose leading columns are
    /// the columns of `self`.
    pub fn extend_to_basis(&self) -> Matrix {
        let n = self.rows;
        let mut cols: Vec<Vec<Rational>> = (0..self.cols).map(|j| self.col(j)).collect();
        assert_eq!(
            self.rank(),
            self.cols,
            "extend_to_basis requires independent columns"
        );
        let mut current = self.clone();
        for i in 0..n {
            if cols.len() == n {
                break;
            }
            let mut e = vec![Rational::zero(); n];
            e[i] = Rational::one();
            let candidate = current.hconcat(&Matrix::from_rows_shaped(
                n,
                1,
                e.iter().map(|v| vec![v.clone()]).collect(),
            ));
            if candidate.rank() == cols.len() + 1 {
                cols.push(e);
                current = candidate;
            }
        }
        assert_eq!(cols.len(), n, "could not extend to a basis");
        let rows: Vec<Vec<Rational>> = (0..n)
            .map(|i| cols.iter().map(|c| c[i].clone()).collect())
            .collect();
        Matrix::from_rows_shaped(n, n, rows)
    }

    /// Largest reduced denominator over all entries (1 for an empty matrix).
    pub fn max_denominator(&self) -> num_bigint::BigInt {
        self.data
            .iter()
            .map(|x| x.denom().clone())
            .max()
            .unwrap_or_else(num_bigint::BigInt::one)
    }

    /// Largest |numerator| over all entries (0 for an empty matrix).
    pub fn max_abs_numerator(&self) -> num_bigint::BigInt {
        self.data
            .iter()
            .map(|x| x.numer().abs())
            .max()
            .unwrap_or_else(num_bigint::BigInt::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn m(rows: &[&[i64]]) -> Matrix {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| int(v)).collect())
                .collect(),
        )
    }

    #[test]
    fn mul_and_identity() {
        let a = m(&[&[1, 2], &[3, 4]]);
        let i = Matrix::identity(2);
        assert_eq!(a.mul(&i), a);
        let b = m(&[&[0, 1], &[1, 0]]);
        assert_eq!(a.mul(&b), m(&[&[2, 1], &[4, 3]]));
    }

    #[test]
    fn solve_and_inverse() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let x = a.solve(&[int(3), int(2)]).unwrap();
        assert_eq!(x, vec![int(1), int(1)]);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).is_identity());
        let singular = m(&[&[1, 2], &[2, 4]]);
        assert!(singular.inverse().is_none());
        assert!(singular.solve(&[int(1), int(3)]).is_none());
        assert_eq!(singular.solve(&[int(1), int(2)]).unwrap().len(), 2);
    }

    #[test]
    fn nullspace_of_inclusion_difference() {
        // D^T = [1 0 -1 0] has a 3-dimensional null space.
        let d_t = m(&[&[1, 0, -1, 0]]);
        let ns = d_t.nullspace();
        assert_eq!(ns.cols(), 3);
        assert_eq!(d_t.mul(&ns).is_zero(), true);
        assert_eq!(ns.rank(), 3);
    }

    #[test]
    fn rank_and_rref() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(a.rank(), 2);
        assert_eq!(Matrix::zeros(3, 3).rank(), 0);
        assert_eq!(Matrix::identity(4).rank(), 4);
    }

    #[test]
    fn extend_to_basis_prefers_early_axes() {
        let cols = Matrix::from_rows(vec![
            vec![int(1), int(0)],
            vec![int(1), int(1)],
            vec![int(0), int(1)],
        ]);
        let basis = cols.extend_to_basis();
        assert_eq!(basis.rank(), 3);
        // leading columns are untouched
        assert_eq!(basis.col(0), cols.col(0));
        assert_eq!(basis.col(1), cols.col(1));
    }

    #[test]
    fn coordinate_inclusion_shape() {
        let incl = Matrix::from_rows(vec![
            vec![int(1), int(0)],
            vec![int(0), int(1)],
            vec![int(0), int(0)],
        ]);
        assert!(incl.is_coordinate_inclusion());
        assert!(Matrix::identity(3).is_coordinate_inclusion());
        let skew = m(&[&[1, 0], &[1, 1], &[0, 0]]);
        assert!(!skew.is_coordinate_inclusion());
        assert!(!rat_matrix().is_coordinate_inclusion());
    }

    fn rat_matrix() -> Matrix {
        Matrix::from_rows(vec![vec![rat(1, 2)], vec![int(0)]])
    }

    #[test]
    fn zero_dimensional_shapes() {
        let e = Matrix::zeros(0, 3);
        let f = Matrix::zeros(3, 0);
        // 0x3 * 3x0 is the (vacuous) 0x0 identity.
        assert!(e.mul(&f).is_identity());
        let prod = f.mul(&e); // 3x3 zero
        assert!(prod.is_zero());
        let id0 = Matrix::identity(0);
        assert!(id0.is_identity());
        assert_eq!(e.apply(&[int(1), int(2), int(3)]).len(), 0);
    }
}
