//! Independent reference computations shared by integration tests.

#![allow(dead_code)]

/// Minimizes `<q, loss> + KL(q || p) / eta` over the simplex by damped
/// Newton iteration on the free coordinates `q_1..q_{n-1}`, with
/// `q_n = 1 - sum`. Does not use the multiplicative closed form.
pub fn omd_newton(p: &[f64], loss: &[f64], eta: f64) -> Vec<f64> {
    let n = p.len();
    let full = |x: &[f64]| -> Vec<f64> {
        let mut q = x.to_vec();
        q.push(1.0 - x.iter().sum::<f64>());
        q
    };
    let objective = |q: &[f64]| -> f64 {
        q.iter()
            .zip(p)
            .zip(loss)
            .map(|((&qi, &pi), &li)| qi * li + qi * (qi / pi).ln() / eta)
            .sum()
    };
    let mut x: Vec<f64> = p[..n - 1].to_vec();
    for _ in 0..200 {
        let q = full(&x);
        let last = (q[n - 1] / p[n - 1]).ln() / eta + loss[n - 1];
        let grad: Vec<f64> = (0..n - 1)
            .map(|j| loss[j] + (q[j] / p[j]).ln() / eta - last)
            .collect();
        if grad.iter().all(|g| g.abs() < 1e-14) {
            break;
        }
        // Hessian: diag(1/q_j)/eta + (1/q_n)/eta * ones
        let mut h = vec![vec![1.0 / (q[n - 1] * eta); n - 1]; n - 1];
        for j in 0..n - 1 {
            h[j][j] += 1.0 / (q[j] * eta);
        }
        let step = solve(h, grad.iter().map(|g| -g).collect());
        let f0 = objective(&q);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let qc = full(&cand);
            if qc.iter().all(|&v| v > 0.0) && objective(&qc) <= f0 + 1e-15 {
                x = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return full(&x);
            }
        }
    }
    full(&x)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
