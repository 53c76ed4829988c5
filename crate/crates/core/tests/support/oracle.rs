//! Reference solutions computed without the library.
//!
//! The barycenter of Diracs `m_i delta_{x_i}` restricted to atoms on a finite set
//! of positions `y_j` is the convex problem
//! `min_{s >= 0} sum_i lambda_i (m_i + sum_j s_j - 2 sqrt(m_i sum_j s_j C_ij))`,
//! `C_ij = Cos^2|x_i - y_j|`, whose dual is
//! `max_u sum_i m_i (lambda_i - lambda_i^2 / u_i)` subject to `sum_i u_i C_ij <= 1`.
//! The dual has one variable per marginal and is solved by a log-barrier Newton
//! method; the barrier multipliers `mu / slack_j` give the primal masses.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

pub fn cos2(x: &[f64], y: &[f64]) -> f64 {
    let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if d >= FRAC_PI_2 {
        0.0
    } else {
        d.cos().powi(2)
    }
}

/// Squared HK distance between two weighted Diracs, written out directly.
pub fn hk2_dirac(x1: &[f64], m1: f64, x2: &[f64], m2: f64) -> f64 {
    let d = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let c = if d >= FRAC_PI_2 { 0.0 } else { d.cos() };
    m1 + m2 - 2.0 * (m1 * m2).sqrt() * c
}

pub struct Oracle {
    pub value: f64,
    /// Optimal dual variables `u_i`, i.e. `chi_i`.
    pub chi: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    /// Primal mass on each candidate position.
    pub mass: Vec<f64>,
}

fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
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
    Some(x)
}

/// Barycenter value restricted to atoms at `ys`.
pub fn grid_barycenter(x: &[Vec<f64>], m: &[f64], l: &[f64], ys: &[Vec<f64>]) -> Oracle {
    let n = x.len();
    let c: Vec<Vec<f64>> = ys.iter().map(|y| x.iter().map(|xi| cos2(xi, y)).collect()).collect();
    let obj = |u: &[f64]| -> f64 { (0..n).map(|i| m[i] * (l[i] - l[i] * l[i] / u[i])).sum() };
    let slack = |u: &[f64]| -> Vec<f64> { c.iter().map(|row| 1.0 - row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()).collect() };
    let phi = |u: &[f64], mu: f64| -> f64 {
        let s = slack(u);
        if s.iter().any(|&v| v <= 0.0) || u.iter().any(|&v| v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        obj(u) + mu * s.iter().map(|v| v.ln()).sum::<f64>()
    };
    let worst = c.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let mut u = vec![0.5 / worst.max(1e-12); n];
    let mut mu = 1.0;
    while mu > 1e-14 {
        for _ in 0..100 {
            let s = slack(&u);
            let mut g: Vec<f64> = (0..n).map(|i| m[i] * l[i] * l[i] / (u[i] * u[i])).collect();
            let mut h = vec![vec![0.0; n]; n];
            for i in 0..n {
                h[i][i] = -2.0 * m[i] * l[i] * l[i] / (u[i] * u[i] * u[i]);
            }
            for (row, &sj) in c.iter().zip(&s) {
                for i in 0..n {
                    g[i] -= mu * row[i] / sj;
                    for k in 0..n {
                        h[i][k] -= mu * row[i] * row[k] / (sj * sj);
                    }
                }
            }
            let mut neg: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
            let Some(d) = solve(&mut neg, &mut g.clone()) else { break };
            let dec: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if dec < 1e-15 * (1.0 + obj(&u).abs()) {
                break;
            }
            let f0 = phi(&u, mu);
            let mut t = 1.0;
            loop {
                let cand: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if phi(&cand, mu) >= f0 + 0.25 * t * dec {
                    u = cand;
                    break;
                }
                t *= 0.5;
                if t < 1e-20 {
                    break;
                }
            }
            if t < 1e-20 {
                break;
            }
        }
        mu *= 0.2;
        if mu <= 1e-14 {
            break;
        }
    }
    let mu_last = mu / 0.2;
    let s = slack(&u);
    let mass = s.iter().map(|&v| mu_last / v).collect();
    Oracle { value: obj(&u), chi: u, ys: ys.to_vec(), mass }
}

/// Optimal support of three Diracs on a line, by the shape of the primal masses
/// on a `1e-3` grid over `[x_1, x_3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Atoms(usize),
    Interval,
    Ambiguous,
}

pub fn line_grid(x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = ((hi - lo) / h).ceil() as usize;
    let mut ys: Vec<f64> = (0..=k).map(|j| (lo + j as f64 * h).min(hi)).collect();
    ys.extend_from_slice(x);
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    ys.into_iter().map(|y| vec![y]).collect()
}

/// Runs of candidate positions carrying mass, on a sorted 1D grid.
pub fn support_1d(o: &Oracle) -> Support {
    let total: f64 = o.mass.iter().sum();
    let on: Vec<bool> = o.mass.iter().map(|&s| s > 1e-4 * total).collect();
    let mut runs = Vec::new();
    let mut start = None;
    for (j, &b) in on.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                runs.push((o.ys[s][0], o.ys[j - 1][0]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((o.ys[s][0], o.ys[on.len() - 1][0]));
    }
    let widest = runs.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    if widest > 0.05 {
        Support::Interval
    } else if widest > 0.01 {
        Support::Ambiguous
    } else {
        Support::Atoms(runs.len())
    }
}
