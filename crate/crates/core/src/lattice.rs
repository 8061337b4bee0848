//! LLL reduction and Fincke-Pohst enumeration for rank-4 sublattices of
//! O_F under the exact integer T2 form.

pub type Vec4 = [i128; 4];

fn form(g: &[[i128; 4]; 4], x: &Vec4, y: &Vec4) -> i128 {
    let mut s = 0i128;
    for i in 0..4 {
        if x[i] == 0 {
            continue;
        }
        for j in 0..4 {
            s += x[i] * g[i][j] * y[j];
        }
    }
    s
}

fn gram_of(basis: &[Vec4], g: &[[i128; 4]; 4]) -> Vec<Vec<f64>> {
    basis
        .iter()
        .map(|x| basis.iter().map(|y| form(g, x, y) as f64).collect())
        .collect()
}

fn add_mul(x: &Vec4, y: &Vec4, c: i128) -> Vec4 {
    std::array::from_fn(|i| x[i] + c * y[i])
}

/// LLL-reduces `basis` (rows) with respect to the form `g`, delta = 0.99.
pub fn lll(mut basis: Vec<Vec4>, g: &[[i128; 4]; 4]) -> Vec<Vec4> {
    let n = basis.len();
    let mut k = 1;
    let mut guard = 0;
    while k < n {
        guard += 1;
        if guard > 100_000 {
            break;
        }
        let (mu, bstar) = gso(&basis, g);
        for j in (0..k).rev() {
            let m = mu[k][j].round();
            if m != 0.0 {
                basis[k] = add_mul(&basis[k], &basis[j], -(m as i128));
            }
        }
        let (mu, _) = gso(&basis, g);
        if bstar[k] >= (0.99 - mu[k][k - 1] * mu[k][k - 1]) * bstar[k - 1] {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    basis
}

fn gso(basis: &[Vec4], g: &[[i128; 4]; 4]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = basis.len();
    let a = gram_of(basis, g);
    let mut mu = vec![vec![0.0; n]; n];
    let mut bstar = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= mu[j][k] * mu[i][k] * bstar[k];
            }
            mu[i][j] = s / bstar[j];
        }
        let mut s = a[i][i];
        for k in 0..i {
            s -= mu[i][k] * mu[i][k] * bstar[k];
        }
        bstar[i] = s;
    }
    (mu, bstar)
}

/// All nonzero lattice vectors x (ambient coordinates) with x^T g x <= bound.
/// Returns `None` if more than `cap` vectors would be produced.
pub fn short_vectors(
    basis: &[Vec4],
    g: &[[i128; 4]; 4],
    bound: i128,
    cap: usize,
) -> Option<Vec<Vec4>> {
    let basis = lll(basis.to_vec(), g);
    let n = basis.len();
    let a = gram_of(&basis, g);
    // Cholesky-style decomposition Q(x) = sum q_ii (x_i + sum_{j>i} q_ij x_j)^2
    let mut qm = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            qm[i][j] = a[i][j];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            qm[j][i] = qm[i][j];
            qm[i][j] /= qm[i][i];
        }
        for k in i + 1..n {
            for l in k..n {
                qm[k][l] -= qm[k][i] * qm[i][l];
            }
        }
    }
    let slack = 1e-6 * (bound as f64).max(1.0);
    let mut out = Vec::new();
    let mut x = vec![0i128; n];
    let ok = enumerate(
        &qm,
        n,
        n,
        bound as f64 + slack,
        &mut x,
        &mut |coeffs: &[i128]| {
            if coeffs.iter().all(|&c| c == 0) {
                return true;
            }
            let mut v = [0i128; 4];
            for (c, b) in coeffs.iter().zip(&basis) {
                for t in 0..4 {
                    v[t] += c * b[t];
                }
            }
            if form(g, &v, &v) <= bound {
                out.push(v);
            }
            out.len() <= cap
        },
    );
    if ok {
        Some(out)
    } else {
        None
    }
}

fn enumerate(
    qm: &[Vec<f64>],
    n: usize,
    level: usize,
    remaining: f64,
    x: &mut Vec<i128>,
    emit: &mut dyn FnMut(&[i128]) -> bool,
) -> bool {
    if level == 0 {
        return emit(x);
    }
    let i = level - 1;
    let center: f64 = -(i + 1..n).map(|j| qm[i][j] * x[j] as f64).sum::<f64>();
    let radius = (remaining.max(0.0) / qm[i][i]).sqrt();
    let lo = (center - radius).ceil() as i128;
    let hi = (center + radius).floor() as i128;
    for xi in lo..=hi {
        x[i] = xi;
        let t = xi as f64 - center;
        let rest = remaining - qm[i][i] * t * t;
        if rest < -1e-9 * remaining.abs().max(1.0) {
            continue;
        }
        if !enumerate(qm, n, i, rest, x, emit) {
            return false;
        }
    }
    x[i] = 0;
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_all_short_vectors_of_z4() {
        let id = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];
        let basis = vec![[1, 3, 0, 0], [0, 1, 0, 0], [0, 0, 1, 7], [0, 0, 0, 1]];
        let v = short_vectors(&basis, &id, 2, 10_000).unwrap();
        // vectors with squared length 1 or 2: 8 + 24
        assert_eq!(v.len(), 32);
    }
}
