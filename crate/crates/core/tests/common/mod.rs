//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random 0/1 matrix in which every product (row) has at least one 1.
pub fn random_indicator(rng: &mut ChaCha8Rng, m: usize, n: usize, p: f64) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(m, n, |_, _| if rng.random_bool(p) { 1.0 } else { 0.0 });
    for i in 0..m {
        if x.row(i).sum() == 0.0 {
            let j = rng.random_range(0..n);
            x[(i, j)] = 1.0;
        }
    }
    x
}

/// As `random_indicator`, but every country also has at least one 1.
pub fn random_full_support(rng: &mut ChaCha8Rng, m: usize, n: usize, p: f64) -> DMatrix<f64> {
    let mut x = random_indicator(rng, m, n, p);
    for j in 0..n {
        if x.column(j).sum() == 0.0 {
            let i = rng.random_range(0..m);
            x[(i, j)] = 1.0;
        }
    }
    x
}

pub struct ScalarProductSpace {
    pub c: Vec<Vec<f64>>,
    pub c_min: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

/// `c_pq = k_pq / s_p`, `c_min = min(c_pq, c_qp)` and density as explicit sums.
pub fn scalar_product_space(x: &DMatrix<f64>, include_diagonal: bool) -> ScalarProductSpace {
    let (m, n) = x.shape();
    let mut s = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            s[i] += x[(i, j)];
        }
    }
    let mut c = vec![vec![0.0; m]; m];
    for p in 0..m {
        for q in 0..m {
            let mut k = 0.0;
            for j in 0..n {
                k += x[(p, j)] * x[(q, j)];
            }
            c[p][q] = k / s[p];
        }
    }
    let mut c_min = vec![vec![0.0; m]; m];
    for p in 0..m {
        for q in 0..m {
            c_min[p][q] = if c[p][q] < c[q][p] { c[p][q] } else { c[q][p] };
        }
    }
    let mut d = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..m {
                if k == i && !include_diagonal {
                    continue;
                }
                num += c_min[i][k] * x[(k, j)];
                den += c_min[i][k];
            }
            d[i][j] = num / den;
        }
    }
    ScalarProductSpace { c, c_min, d }
}

/// Second eigenvector of a row-stochastic matrix `mat` with stationary
/// weights `pi`, by power iteration after deflating the unit eigenpair.
///
/// Returns `None` when the iteration does not settle.
pub fn second_eigenvector(mat: &DMatrix<f64>, pi: &[f64]) -> Option<(f64, Vec<f64>)> {
    let k = mat.nrows();
    let total: f64 = pi.iter().sum();
    // M − 1 πᵀ / Σπ removes the constant right eigenvector
    let defl = DMatrix::from_fn(k, k, |a, b| mat[(a, b)] - pi[b] / total);
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.37 * i as f64 + 0.11 * (i * i) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let mut w = vec![0.0; k];
        for a in 0..k {
            for b in 0..k {
                w[a] += defl[(a, b)] * v[b];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let dot: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let next_lambda = norm * dot.signum();
        let change = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - dot.signum() * b).abs())
            .fold(0.0, f64::max);
        v = w;
        if change < 1e-14 && (next_lambda - lambda).abs() < 1e-14 {
            return Some((next_lambda, v));
        }
        lambda = next_lambda;
    }
    None
}

/// Country matrix `Q⁻¹ Xᵀ S⁻¹ X` and product matrix `S⁻¹ X Q⁻¹ Xᵀ` as loops.
pub fn reflection_matrices(x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let (m, n) = x.shape();
    let q: Vec<f64> = (0..n).map(|j| (0..m).map(|i| x[(i, j)]).sum()).collect();
    let s: Vec<f64> = (0..m).map(|i| (0..n).map(|j| x[(i, j)]).sum()).collect();
    let mut mc = DMatrix::zeros(n, n);
    for j in 0..n {
        for jj in 0..n {
            let mut acc = 0.0;
            for i in 0..m {
                acc += x[(i, j)] * x[(i, jj)] / s[i];
            }
            mc[(j, jj)] = acc / q[j];
        }
    }
    let mut mp = DMatrix::zeros(m, m);
    for i in 0..m {
        for ii in 0..m {
            let mut acc = 0.0;
            for j in 0..n {
                acc += x[(i, j)] * x[(ii, j)] / q[j];
            }
            mp[(i, ii)] = acc / s[i];
        }
    }
    (mc, mp, q, s)
}

pub fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - mu) / sd).collect()
}

/// Largest absolute difference between `a` and `±b`, whichever sign fits better.
pub fn max_diff_up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

pub fn logit_loglik(beta: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (row, &yi) in x.iter().zip(y) {
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        // log(1 + e^η) computed stably
        let log1pexp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        ll += yi * eta - log1pexp;
    }
    ll
}

/// Derivative-free Nelder–Mead minimization with restarts.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: f64) -> Vec<f64> {
    let k = start.len();
    let mut best = start.to_vec();
    for restart in 0..8 {
        let scale = step / (1 << restart.min(4)) as f64;
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for d in 0..k {
            let mut p = best.clone();
            p[d] += scale;
            simplex.push(p);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=k).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            if (vals[k] - vals[0]).abs() < 1e-15 * (1.0 + vals[0].abs()) {
                let spread = (0..k)
                    .map(|d| simplex.iter().map(|p| p[d]).fold(f64::MIN, f64::max) - simplex.iter().map(|p| p[d]).fold(f64::MAX, f64::min))
                    .fold(0.0, f64::max);
                if spread < 1e-10 {
                    break;
                }
            }
            let centroid: Vec<f64> = (0..k).map(|d| simplex[..k].iter().map(|p| p[d]).sum::<f64>() / k as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..k).map(|d| centroid[d] + t * (simplex[k][d] - centroid[d])).collect() };
            let r = along(-1.0);
            let fr = f(&r);
            if fr < vals[0] {
                let e = along(-2.0);
                let fe = f(&e);
                if fe < fr {
                    simplex[k] = e;
                    vals[k] = fe;
                } else {
                    simplex[k] = r;
                    vals[k] = fr;
                }
            } else if fr < vals[k - 1] {
                simplex[k] = r;
                vals[k] = fr;
            } else {
                let c = if fr < vals[k] { along(-0.5) } else { along(0.5) };
                let fc = f(&c);
                if fc < vals[k].min(fr) {
                    simplex[k] = c;
                    vals[k] = fc;
                } else {
                    for i in 1..=k {
                        simplex[i] = (0..k).map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d])).collect();
                        vals[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let i = (0..=k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        best = simplex[i].clone();
    }
    best
}

/// Least squares through the normal equations `XᵀX β = Xᵀy`, Gaussian elimination.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += row[r] * row[c];
            }
            a[r][p] += row[r] * yi;
        }
    }
    solve_augmented(a)
}

fn solve_augmented(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let p = a.len();
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|r| a[r][p] / a[r][r]).collect()
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Local linear fit at `x0`: the intercept of weighted least squares on `(1, x − x0)`.
pub fn wls_local_linear(x: &[f64], y: &[f64], x0: f64, h: f64) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut support = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        let w = epanechnikov((xi - x0) / h);
        if w > 0.0 {
            support += 1;
        }
        let dx = xi - x0;
        s0 += w;
        s1 += w * dx;
        s2 += w * dx * dx;
        t0 += w * yi;
        t1 += w * dx * yi;
    }
    if support < 2 {
        return None;
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() < 1e-300 {
        return None;
    }
    Some((s2 * t0 - s1 * t1) / det)
}
