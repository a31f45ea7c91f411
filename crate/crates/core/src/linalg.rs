//! Dense exact linear algebra over the scalar tower.
//!
//! Everything here is crate-internal plumbing shared by the Fredholm
//! calculus, the ε-class computations and the global de Rham solver.
//! Elimination always pivots on *unit* entries, which is correct both over
//! the fields `ℚ`, `ℚ(x)` and over the local Artinian extensions
//! `·[ε]/(ε^N)` (where an element is invertible iff its ε⁰ part is).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalars::{Ring, Scalar};

/// Row-major dense matrix over [`Scalar`].
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SMat {
    pub ring: Ring,
    pub rows: usize,
    pub cols: usize,
    data: Vec<Scalar>,
}

impl SMat {
    pub fn zeros(ring: Ring, rows: usize, cols: usize) -> SMat {
        SMat {
            ring,
            rows,
            cols,
            data: vec![Scalar::zero(ring); rows * cols],
        }
    }

    pub fn identity(ring: Ring, n: usize) -> SMat {
        let mut m = SMat::zeros(ring, n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one(ring));
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        debug_assert_eq!(v.ring(), self.ring);
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &SMat) -> Result<SMat> {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matrix product");
        let ring = self.ring.join(other.ring)?;
        let mut out = SMat::zeros(ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                let a = a.promote_to(ring)?;
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let v = out.get(i, j).add(&a.mul(&b.promote_to(ring)?)?)?;
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Rank over a field ring; errors on nilpotent coefficient rings where
    /// rank is not well-defined.
    pub fn rank(&self) -> Result<usize> {
        if self.ring.nil_order().is_some() {
            return Err(Error::DomainViolation(
                "rank over a nilpotent coefficient ring is not defined".into(),
            ));
        }
        let mut m = self.clone();
        let mut rank = 0usize;
        let mut row = 0usize;
        for col in 0..m.cols {
            if row >= m.rows {
                break;
            }
            let pivot = (row..m.rows).find(|&r| !m.get(r, col).is_zero());
            let Some(p) = pivot else { continue };
            m.swap_rows(row, p);
            let inv = m.get(row, col).inv()?;
            for c in col..m.cols {
                let v = m.get(row, c).mul(&inv)?;
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r == row || m.get(r, col).is_zero() {
                    continue;
                }
                let factor = m.get(r, col).clone();
                for c in col..m.cols {
                    let v = m.get(r, c).sub(&factor.mul(m.get(row, c))?)?;
                    m.set(r, c, v);
                }
            }
            row += 1;
            rank += 1;
        }
        Ok(rank)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Determinant by unit-pivot elimination.  Over a field a stalled
    /// column means a zero determinant; over a local ring a stall with
    /// nonzero (necessarily nilpotent) entries falls back to cofactor
    /// expansion on the remaining minor.
    pub fn det(&self) -> Result<Scalar> {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let mut m = self.clone();
        let n = m.rows;
        let mut acc = Scalar::one(m.ring);
        let mut negate = false;
        for col in 0..n {
            let pivot = (col..n).find(|&r| m.get(r, col).is_unit());
            let Some(p) = pivot else {
                if (col..n).all(|r| (col..n).all(|c| m.get(r, c).is_zero())) {
                    return Ok(Scalar::zero(m.ring));
                }
                if (col..n).all(|r| m.get(r, col).is_zero()) {
                    return Ok(Scalar::zero(m.ring));
                }
                // Nilpotent residue: cofactor expansion on the minor.
                let minor = m.submatrix(col, n);
                let d = minor.det_cofactor()?;
                let d = if negate { d.neg() } else { d };
                return acc.mul(&d);
            };
            m.swap_rows(col, p);
            if p != col {
                negate = !negate;
            }
            let piv = m.get(col, col).clone();
            acc = acc.mul(&piv)?;
            let inv = piv.inv()?;
            for r in col + 1..n {
                if m.get(r, col).is_zero() {
                    continue;
                }
                let factor = m.get(r, col).mul(&inv)?;
                for c in col..n {
                    let v = m.get(r, c).sub(&factor.mul(m.get(col, c))?)?;
                    m.set(r, c, v);
                }
            }
        }
        Ok(if negate { acc.neg() } else { acc })
    }

    fn submatrix(&self, from: usize, to: usize) -> SMat {
        let k = to - from;
        let mut out = SMat::zeros(self.ring, k, k);
        for r in 0..k {
            for c in 0..k {
                out.set(r, c, self.get(from + r, from + c).clone());
            }
        }
        out
    }

    fn det_cofactor(&self) -> Result<Scalar> {
        let n = self.rows;
        if n > 12 {
            return Err(Error::DomainViolation(
                "determinant stalled on a large nilpotent block".into(),
            ));
        }
        if n == 0 {
            return Ok(Scalar::one(self.ring));
        }
        if n == 1 {
            return Ok(self.get(0, 0).clone());
        }
        let mut acc = Scalar::zero(self.ring);
        for r in 0..n {
            let a = self.get(r, 0);
            if a.is_zero() {
                continue;
            }
            let mut minor = SMat::zeros(self.ring, n - 1, n - 1);
            let mut rr = 0;
            for r2 in 0..n {
                if r2 == r {
                    continue;
                }
                for c2 in 1..n {
                    minor.set(rr, c2 - 1, self.get(r2, c2).clone());
                }
                rr += 1;
            }
            let term = a.mul(&minor.det_cofactor()?)?;
            acc = if r % 2 == 0 {
                acc.add(&term)?
            } else {
                acc.sub(&term)?
            };
        }
        Ok(acc)
    }

    /// Solves `self · X = rhs` for square `self` by Gauss–Jordan with unit
    /// pivots (valid over fields and local rings).
    pub fn solve_square(&self, rhs: &SMat) -> Result<SMat> {
        assert_eq!(self.rows, self.cols, "solve_square needs a square matrix");
        assert_eq!(self.rows, rhs.rows, "dimension mismatch in solve");
        let ring = self.ring.join(rhs.ring)?;
        let n = self.rows;
        let mut a = SMat::zeros(ring, n, n);
        for r in 0..n {
            for c in 0..n {
                a.set(r, c, self.get(r, c).promote_to(ring)?);
            }
        }
        let mut b = SMat::zeros(ring, n, rhs.cols);
        for r in 0..n {
            for c in 0..rhs.cols {
                b.set(r, c, rhs.get(r, c).promote_to(ring)?);
            }
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| a.get(r, col).is_unit());
            let Some(p) = pivot else {
                return Err(Error::NotInvertible(
                    "no unit pivot during linear solve".into(),
                ));
            };
            a.swap_rows(col, p);
            b.swap_rows(col, p);
            let inv = a.get(col, col).inv()?;
            for c in 0..n {
                let v = a.get(col, c).mul(&inv)?;
                a.set(col, c, v);
            }
            for c in 0..b.cols {
                let v = b.get(col, c).mul(&inv)?;
                b.set(col, c, v);
            }
            for r in 0..n {
                if r == col || a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col).clone();
                for c in 0..n {
                    let v = a.get(r, c).sub(&factor.mul(a.get(col, c))?)?;
                    a.set(r, c, v);
                }
                for c in 0..b.cols {
                    let v = b.get(r, c).sub(&factor.mul(b.get(col, c))?)?;
                    b.set(r, c, v);
                }
            }
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: i64) -> Scalar {
        Scalar::from_int(Ring::Q, v)
    }

    #[test]
    fn rank_and_det() {
        let mut m = SMat::zeros(Ring::Q, 2, 2);
        m.set(0, 0, s(1));
        m.set(0, 1, s(2));
        m.set(1, 0, s(3));
        m.set(1, 1, s(4));
        assert_eq!(m.rank().unwrap(), 2);
        assert_eq!(m.det().unwrap(), s(-2));

        let mut sing = SMat::zeros(Ring::Q, 2, 2);
        sing.set(0, 0, s(1));
        sing.set(0, 1, s(2));
        sing.set(1, 0, s(2));
        sing.set(1, 1, s(4));
        assert_eq!(sing.rank().unwrap(), 1);
        assert!(sing.det().unwrap().is_zero());
    }

    #[test]
    fn det_with_nilpotent_stall() {
        let ring = Ring::QNil(2);
        let eps = Scalar::eps(ring).unwrap();
        // [[ε, 1], [0, ε]] has det ε² = 0; [[ε]] has det ε.
        let mut m = SMat::zeros(ring, 2, 2);
        m.set(0, 0, eps.clone());
        m.set(0, 1, Scalar::one(ring));
        m.set(1, 1, eps.clone());
        assert!(m.det().unwrap().is_zero());
        let mut m1 = SMat::zeros(ring, 1, 1);
        m1.set(0, 0, eps.clone());
        assert_eq!(m1.det().unwrap(), eps);
    }

    #[test]
    fn solve_recovers_inverse() {
        let ring = Ring::QNil(2);
        let eps = Scalar::eps(ring).unwrap();
        let mut a = SMat::zeros(ring, 2, 2);
        a.set(0, 0, Scalar::one(ring));
        a.set(0, 1, eps.clone());
        a.set(1, 0, Scalar::from_int(ring, 2));
        a.set(1, 1, Scalar::one(ring).add(&eps).unwrap());
        let x = a.solve_square(&SMat::identity(ring, 2)).unwrap();
        let prod = a.mul(&x).unwrap();
        assert_eq!(prod, SMat::identity(ring, 2));
    }
}
