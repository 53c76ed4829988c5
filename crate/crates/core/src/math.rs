//! Small numerical helpers shared by the solvers.

use alloc::vec;
use alloc::vec::Vec;

pub use core::f64::consts::{FRAC_PI_2, PI};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}
#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}
#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    sqrt(s)
}

/// `log(sum(exp(v)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = v.map(|x| exp(x - m)).sum();
    m + ln(s)
}

/// Solves `a x = b` for a dense row-major `n x n` matrix with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() <= 1e-300 * scale || m[piv * n + col].abs() < 1e-15 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let p = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[col * n + c] * x[c];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

/// Nonnegative least squares `min |A w - u|, w >= 0` by the Lawson-Hanson
/// active set method. `cols[k]` is the k-th column of `A`.
pub fn nnls(cols: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let n = u.len();
    let mut w = vec![0.0; k];
    let mut passive = vec![false; k];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let resid = |w: &[f64]| {
        let mut r = u.to_vec();
        for (j, c) in cols.iter().enumerate() {
            if w[j] != 0.0 {
                for i in 0..n {
                    r[i] -= w[j] * c[i];
                }
            }
        }
        r
    };
    let unorm = sqrt(dot(u, u)).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * unorm * (1.0 + k as f64);
    for _outer in 0..(3 * k + 10) {
        let r = resid(&w);
        let mut best = None;
        let mut best_g = tol;
        for j in 0..k {
            if !passive[j] {
                let g = dot(&cols[j], &r);
                if g > best_g {
                    best_g = g;
                    best = Some(j);
                }
            }
        }
        let Some(j) = best else { break };
        passive[j] = true;
        for _inner in 0..(3 * k + 10) {
            let z = ls_on(cols, u, &passive);
            let all_pos = (0..k).all(|i| !passive[i] || z[i] > 0.0);
            if all_pos {
                w = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..k {
                if passive[i] && z[i] <= 0.0 {
                    let a = w[i] / (w[i] - z[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for i in 0..k {
                if passive[i] {
                    w[i] += alpha * (z[i] - w[i]);
                    if w[i] <= 1e-300 {
                        w[i] = 0.0;
                        passive[i] = false;
                    }
                }
            }
        }
    }
    w
}

fn ls_on(cols: &[Vec<f64>], u: &[f64], passive: &[bool]) -> Vec<f64> {
    let idx: Vec<usize> = (0..cols.len()).filter(|&j| passive[j]).collect();
    let p = idx.len();
    let mut g = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for (a, &ja) in idx.iter().enumerate() {
        for (b, &jb) in idx.iter().enumerate() {
            g[a * p + b] = cols[ja].iter().zip(&cols[jb]).map(|(x, y)| x * y).sum();
        }
        rhs[a] = cols[ja].iter().zip(u).map(|(x, y)| x * y).sum();
    }
    let ridge = 1e-14 * (0..p).map(|a| g[a * p + a]).fold(0.0, f64::max);
    for a in 0..p {
        g[a * p + a] += ridge;
    }
    let sol = solve_dense(&g, &rhs, p).unwrap_or_else(|| vec![0.0; p]);
    let mut z = vec![0.0; cols.len()];
    for (a, &j) in idx.iter().enumerate() {
        z[j] = sol[a];
    }
    z
}

/// Maximizes a function of one variable on `[lo, hi]` by golden section search.
/// The function is assumed unimodal on the bracket.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (sqrt(5.0) - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for (x, v) in [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Nelder-Mead maximization of `f` inside the box `[lo, hi]`, starting at `x0`.
pub fn nelder_mead_max(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let clamp = |p: &mut Vec<f64>| {
        for k in 0..d {
            p[k] = p[k].clamp(lo[k], hi[k]);
        }
    };
    // Flat axes (degenerate box) are kept fixed.
    let free: Vec<usize> = (0..d).filter(|&k| hi[k] > lo[k]).collect();
    if free.is_empty() {
        let v = f(x0);
        return (x0.to_vec(), v);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(free.len() + 1);
    let mut p0 = x0.to_vec();
    clamp(&mut p0);
    let v0 = f(&p0);
    simplex.push((p0.clone(), v0));
    for &k in &free {
        let mut p = p0.clone();
        let s = step.min(hi[k] - lo[k]);
        p[k] = if p[k] + s <= hi[k] { p[k] + s } else { p[k] - s };
        clamp(&mut p);
        let v = f(&p);
        simplex.push((p, v));
    }
    let n = simplex.len();
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
        let spread = simplex[0].1 - simplex[n - 1].1;
        let size = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| dist(p, &simplex[0].0))
            .fold(0.0, f64::max);
        if size < 1e-11 || (spread.abs() < 1e-16 && size < 1e-8) {
            break;
        }
        let mut cen = vec![0.0; d];
        for (p, _) in simplex.iter().take(n - 1) {
            for k in 0..d {
                cen[k] += p[k] / (n - 1) as f64;
            }
        }
        let worst = simplex[n - 1].clone();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..d).map(|k| cen[k] + t * (worst.0[k] - cen[k])).collect();
            clamp(&mut p);
            p
        };
        let pr = along(-1.0);
        let vr = f(&pr);
        if vr > simplex[0].1 {
            let pe = along(-2.0);
            let ve = f(&pe);
            simplex[n - 1] = if ve > vr { (pe, ve) } else { (pr, vr) };
        } else if vr > simplex[n - 2].1 {
            simplex[n - 1] = (pr, vr);
        } else {
            let pc = if vr > worst.1 { along(-0.5) } else { along(0.5) };
            let vc = f(&pc);
            if vc > worst.1.max(vr) {
                simplex[n - 1] = (pc, vc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = (0..d).map(|k| best[k] + 0.5 * (s.0[k] - best[k])).collect();
                    clamp(&mut p);
                    let v = f(&p);
                    *s = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}

/// Anderson acceleration (type II) for a fixed-point iteration `x <- G(x)`.
pub struct Anderson {
    memory: usize,
    xs: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
}

impl Anderson {
    pub fn new(memory: usize) -> Self {
        Anderson { memory, xs: Vec::new(), gs: Vec::new() }
    }

    pub fn reset(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }

    /// Given the current iterate `x` and its image `g = G(x)`, returns the next iterate.
    pub fn step(&mut self, x: &[f64], g: &[f64]) -> Vec<f64> {
        if self.memory == 0 {
            return g.to_vec();
        }
        self.xs.push(x.to_vec());
        self.gs.push(g.to_vec());
        if self.xs.len() > self.memory + 1 {
            self.xs.remove(0);
            self.gs.remove(0);
        }
        let k = self.xs.len();
        if k < 2 {
            return g.to_vec();
        }
        let n = x.len();
        let res = |j: usize, i: usize| self.gs[j][i] - self.xs[j][i];
        let m = k - 1;
        // Columns: differences of consecutive residuals.
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        let mut diag_max = 0.0f64;
        for a in 0..m {
            for b in a..m {
                let mut s = 0.0;
                for i in 0..n {
                    s += (res(a + 1, i) - res(a, i)) * (res(b + 1, i) - res(b, i));
                }
                gram[a * m + b] = s;
                gram[b * m + a] = s;
            }
            diag_max = diag_max.max(gram[a * m + a]);
            let mut s = 0.0;
            for i in 0..n {
                s += (res(a + 1, i) - res(a, i)) * res(k - 1, i);
            }
            rhs[a] = s;
        }
        if !(diag_max > 0.0) || !diag_max.is_finite() {
            self.reset();
            return g.to_vec();
        }
        for a in 0..m {
            gram[a * m + a] += 1e-12 * diag_max;
        }
        let Some(gamma) = solve_dense(&gram, &rhs, m) else {
            self.reset();
            return g.to_vec();
        };
        let mut out = self.gs[k - 1].clone();
        for a in 0..m {
            for i in 0..n {
                out[i] -= gamma[a] * (self.gs[a + 1][i] - self.gs[a][i]);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            self.reset();
            return g.to_vec();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_handles_neg_inf() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY; 3].into_iter()), f64::NEG_INFINITY);
        let v = log_sum_exp([0.0, f64::NEG_INFINITY, 0.0].into_iter());
        assert!((v - ln(2.0)).abs() < 1e-15);
    }

    #[test]
    fn dense_solve_3x3() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let x = solve_dense(&a, &[3.0, 5.0, 5.0], 3).unwrap();
        for (xi, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((xi - e).abs() < 1e-14);
        }
        assert!(solve_dense(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn nnls_recovers_nonnegative_combination() {
        let cols = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]];
        let u = [0.5, 2.0, 2.5];
        let w = nnls(&cols, &u);
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 2.0).abs() < 1e-12 && w[2].abs() < 1e-12);
        let w = nnls(&cols, &[-1.0, -1.0, -1.0]);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn golden_and_nelder_mead_find_maxima() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9 && v.abs() < 1e-16);
        let f = |p: &[f64]| -(p[0] - 0.2) * (p[0] - 0.2) - 2.0 * (p[1] + 0.1) * (p[1] + 0.1);
        let (p, _) = nelder_mead_max(&f, &[0.9, 0.9], 0.3, &[-1.0, -1.0], &[1.0, 1.0], 2000);
        assert!((p[0] - 0.2).abs() < 1e-7 && (p[1] + 0.1).abs() < 1e-7);
    }

    #[test]
    fn anderson_accelerates_slow_linear_map() {
        // x <- A x + b with spectral radius 0.999 converges in a few steps.
        let g = |x: &[f64]| vec![0.999 * x[0] + 0.001, 0.5 * x[1] + 0.1 * x[0]];
        let mut aa = Anderson::new(4);
        let mut x = vec![0.0, 0.0];
        for _ in 0..20 {
            let gx = g(&x);
            x = aa.step(&x, &gx);
        }
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 0.2).abs() < 1e-9);
    }
}
