#![allow(dead_code)]

use symnmf_core::DenseMat;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DenseMat) -> Vec<f64> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn symmetrize(m: &DenseMat) -> DenseMat {
    DenseMat::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
}

/// `T(δ)` assembled entry by entry from its block definition, indices `m N + i`.
pub fn dense_t(x: &DenseMat, z: &DenseMat, delta: f64) -> DenseMat {
    let (n, k) = x.shape();
    let zs = symmetrize(z);
    DenseMat::from_fn(n * k, n * k, |a, b| {
        let (m, i) = (a / n, a % n);
        let (nn, j) = (b / n, b % n);
        let dot: f64 = (0..n).map(|r| x.get(r, m) * x.get(r, nn)).sum();
        let cn: f64 = (0..n).map(|r| x.get(r, nn) * x.get(r, nn)).sum();
        let mut v = x.get(i, nn) * x.get(j, m);
        if i == j {
            v += dot - delta * cn;
        }
        if m == nn {
            v += (0..k).map(|c| x.get(i, c) * x.get(j, c)).sum::<f64>() - zs.get(i, j);
        }
        v
    })
}

/// `X X^T - (Z + Z^T)/2`.
pub fn dense_s(x: &DenseMat, z: &DenseMat) -> DenseMat {
    let zs = symmetrize(z);
    let n = x.rows();
    DenseMat::from_fn(n, n, |i, j| {
        x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum::<f64>() - zs.get(i, j)
    })
}
