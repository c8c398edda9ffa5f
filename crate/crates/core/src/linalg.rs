//! Small dense linear algebra over exact rationals (Gaussian elimination).

use num_traits::{One, Zero};

use crate::Rational;

pub type Matrix = Vec<Vec<Rational>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveError {
    /// The system has no solution.
    Inconsistent,
    /// The solution is not unique.
    Underdetermined,
}

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![Rational::zero(); cols]; rows]
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(Rational::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &Matrix, v: &[Rational]) -> Vec<Rational> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
        })
        .collect()
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(m: &mut Matrix, cols: usize) -> Vec<usize> {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot_row = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(pivot_row.iter()) {
                    *x = &*x - &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &Matrix) -> usize {
    let cols = m.first().map_or(0, |r| r.len());
    let mut work = m.clone();
    rref(&mut work, cols).len()
}

/// Solves `m x = rhs` exactly. Overdetermined systems are accepted as long
/// as they are consistent and the solution is unique.
pub fn solve(m: &Matrix, rhs: &[Rational]) -> Result<Vec<Rational>, SolveError> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut aug: Matrix = m
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug, cols);
    for row in aug.iter().skip(pivots.len()) {
        if !row[cols].is_zero() {
            return Err(SolveError::Inconsistent);
        }
    }
    if pivots.len() < cols {
        return Err(SolveError::Underdetermined);
    }
    Ok((0..cols).map(|i| aug[i][cols].clone()).collect())
}

pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let mut aug: Matrix = m
        .iter()
        .zip(identity(n))
        .map(|(row, id)| row.iter().cloned().chain(id).collect())
        .collect();
    let pivots = rref(&mut aug, n);
    if pivots.len() < n {
        return None;
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

pub fn determinant(m: &Matrix) -> Rational {
    let n = m.len();
    let mut a = m.clone();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det = &det * &a[c][c];
        let inv = a[c][c].recip();
        for i in (c + 1)..n {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] * &inv;
            let pivot_row = a[c].clone();
            for (x, y) in a[i].iter_mut().zip(pivot_row.iter()) {
                *x = &*x - &f * y;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    fn m(rows: &[&[i64]]) -> Matrix {
        rows.iter()
            .map(|r| r.iter().map(|&v| q(v, 1)).collect())
            .collect()
    }

    #[test]
    fn solve_square_and_overdetermined() {
        let a = m(&[&[2, 1], &[1, 3]]);
        let x = solve(&a, &[q(3, 1), q(5, 1)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);

        let over = m(&[&[1, 0], &[0, 1], &[1, 1]]);
        assert_eq!(
            solve(&over, &[q(1, 1), q(2, 1), q(3, 1)]).unwrap(),
            vec![q(1, 1), q(2, 1)]
        );
        assert_eq!(
            solve(&over, &[q(1, 1), q(2, 1), q(4, 1)]),
            Err(SolveError::Inconsistent)
        );
        let sing = m(&[&[1, 1], &[2, 2]]);
        assert_eq!(
            solve(&sing, &[q(1, 1), q(2, 1)]),
            Err(SolveError::Underdetermined)
        );
    }

    #[test]
    fn inverse_and_determinant() {
        let a = m(&[&[0, 1], &[1, 0]]);
        assert_eq!(inverse(&a).unwrap(), a);
        assert_eq!(determinant(&a), q(-1, 1));
        let b = m(&[&[1, 2, 3], &[0, 1, 4], &[5, 6, 0]]);
        assert_eq!(determinant(&b), q(1, 1));
        let inv = inverse(&b).unwrap();
        assert_eq!(mat_mul(&b, &inv), identity(3));
        assert!(inverse(&m(&[&[1, 2], &[2, 4]])).is_none());
        assert_eq!(rank(&m(&[&[1, 2], &[2, 4]])), 1);
    }
}
