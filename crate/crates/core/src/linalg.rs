//! Small dense linear algebra over F_p. Matrices are row-major `Vec<Vec<u64>>`.

use crate::arith::{invmod, mulmod};

pub type Mat = Vec<Vec<u64>>;

/// Reduced row echelon form; returns the nonzero rows and pivot columns.
pub fn rref(m: &Mat, p: u64) -> (Mat, Vec<usize>) {
    let mut a: Mat = m
        .iter()
        .map(|r| r.iter().map(|x| x % p).collect())
        .collect();
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| a[i][c] != 0) else {
            continue;
        };
        a.swap(r, piv);
        let inv = invmod(a[r][c], p).unwrap();
        for x in a[r].iter_mut() {
            *x = mulmod(*x, inv, p);
        }
        for i in 0..rows {
            if i != r && a[i][c] != 0 {
                let f = a[i][c];
                for j in 0..cols {
                    let t = mulmod(f, a[r][j], p);
                    a[i][j] = (a[i][j] + p - t) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

pub fn rank(m: &Mat, p: u64) -> usize {
    rref(m, p).1.len()
}

/// Basis of `{ v : m v = 0 }`, one vector per free column.
pub fn kernel(m: &Mat, cols: usize, p: u64) -> Mat {
    let (r, pivots) = rref(m, p);
    let mut out = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u64; cols];
        v[free] = 1;
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = (p - r[i][free]) % p;
        }
        out.push(v);
    }
    out
}

/// Row-space basis of the given vectors.
pub fn span(vs: &Mat, p: u64) -> Mat {
    if vs.is_empty() {
        return Vec::new();
    }
    rref(vs, p).0
}

/// Coefficients `c` with `sum c_i rows_i = target`, if target lies in the span.
pub fn solve_combination(rows: &Mat, target: &[u64], p: u64) -> Option<Vec<u64>> {
    let n = rows.len();
    let dim = target.len();
    // Columns are the rows; augmented with the target.
    let m: Mat = (0..dim)
        .map(|j| {
            let mut r: Vec<u64> = rows.iter().map(|row| row[j] % p).collect();
            r.push(target[j] % p);
            r
        })
        .collect();
    let (r, pivots) = rref(&m, p);
    if pivots.contains(&n) {
        return None;
    }
    let mut c = vec![0u64; n];
    for (i, &pc) in pivots.iter().enumerate() {
        c[pc] = r[i][n];
    }
    Some(c)
}

pub fn mat_vec(m: &Mat, v: &[u64], p: u64) -> Vec<u64> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(0, |acc, (&a, &b)| (acc + mulmod(a, b, p)) % p)
        })
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat, p: u64) -> Mat {
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    row.iter()
                        .zip(b)
                        .fold(0, |acc, (&x, br)| (acc + mulmod(x, br[j], p)) % p)
                })
                .collect()
        })
        .collect()
}

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
        .collect()
}

pub fn transpose(m: &Mat) -> Mat {
    let cols = m.first().map_or(0, |r| r.len());
    (0..cols)
        .map(|j| m.iter().map(|r| r[j]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_annihilated() {
        let p = 7;
        let m = vec![vec![1, 2, 3, 4], vec![0, 1, 2, 3]];
        let k = kernel(&m, 4, p);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(mat_vec(&m, v, p).iter().all(|&x| x == 0));
        }
        let c = solve_combination(&m, &[1, 3, 5, 0], p).unwrap();
        assert_eq!(c, vec![1, 1]);
    }
}
