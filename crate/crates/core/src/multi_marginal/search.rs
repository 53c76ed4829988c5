//! Global maximization over the bounding box of a point configuration.
//!
//! Every objective handed to this module is a sum of nonincreasing functions of
//! `|x_i - y|`, so projecting `y` onto the convex hull of the `x_i` never lowers
//! it. The maximum over the bounding box therefore equals the maximum over the
//! hull, and the box is searched directly.

use alloc::vec;
use alloc::vec::Vec;

use crate::hk::cos_trunc;
use crate::math::{atan2, cos, dist, floor, golden_max, hypot, nelder_mead_max, sin, FRAC_PI_2, PI};

const GRID_1D: usize = 2048;
const GRID_ND: usize = 32;
const REFINE: usize = 8;
const RESTARTS: usize = 6;
const MEAN_SHIFT_ITER: usize = 20_000;

pub(crate) struct BoxSearch {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSearch {
    pub fn new(coords: &[f64], dim: usize) -> BoxSearch {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks(dim) {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        BoxSearch { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn axis_samples(&self, k: usize, n: usize) -> usize {
        if self.hi[k] > self.lo[k] {
            n
        } else {
            1
        }
    }

    /// Lattice points of the box, `n` per non-flat axis, row-major.
    pub fn lattice(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let counts: Vec<usize> = (0..d).map(|k| self.axis_samples(k, n)).collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut r = flat;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                let i = r % counts[k];
                r /= counts[k];
                p[k] = if counts[k] == 1 {
                    self.lo[k]
                } else {
                    self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (counts[k] - 1) as f64
                };
            }
            out.push(p);
        }
        out
    }

    /// Refined local maxima of `f`, best first, with near-duplicates removed.
    pub fn local_maxima(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<(Vec<f64>, f64)> {
        self.local_maxima_seeded(f, &[])
    }

    /// As [`BoxSearch::local_maxima`], also refining from each of `seeds`.
    pub fn local_maxima_seeded(&self, f: &dyn Fn(&[f64]) -> f64, seeds: &[Vec<f64>]) -> Vec<(Vec<f64>, f64)> {
        if self.dim() == 1 {
            self.local_maxima_1d(f)
        } else {
            self.local_maxima_nd(f, seeds)
        }
    }

    pub fn maximize(&self, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
        let mut best = self.local_maxima(f);
        best.swap_remove(0)
    }

    fn local_maxima_1d(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<(Vec<f64>, f64)> {
        let (lo, hi) = (self.lo[0], self.hi[0]);
        if hi <= lo {
            return vec![(vec![lo], f(&[lo]))];
        }
        let n = GRID_1D;
        let h = (hi - lo) / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|k| lo + h * k as f64).collect();
        let vs: Vec<f64> = ys.iter().map(|&y| f(&[y])).collect();
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&k| (k == 0 || vs[k] >= vs[k - 1]) && (k + 1 == n || vs[k] >= vs[k + 1]))
            .collect();
        peaks.sort_by(|&a, &b| vs[b].partial_cmp(&vs[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        for &k in peaks.iter().take(4 * REFINE) {
            let a = if k == 0 { lo } else { ys[k - 1] };
            let b = if k + 1 == n { hi } else { ys[k + 1] };
            let (y, v) = golden_max(|y| f(&[y]), a, b, 1e-12 * (1.0 + hi - lo));
            let (y, v) = if v >= vs[k] { (y, v) } else { (ys[k], vs[k]) };
            push_unique(&mut out, vec![y], v, 1e-7 * (hi - lo));
            if out.len() >= REFINE {
                break;
            }
        }
        sort_desc(&mut out);
        out
    }

    fn local_maxima_nd(&self, f: &dyn Fn(&[f64]) -> f64, seeds: &[Vec<f64>]) -> Vec<(Vec<f64>, f64)> {
        let d = self.dim();
        let counts: Vec<usize> = (0..d).map(|k| self.axis_samples(k, GRID_ND)).collect();
        let pts = self.lattice(GRID_ND);
        let vs: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let step: f64 = (0..d)
            .map(|k| if counts[k] > 1 { (self.hi[k] - self.lo[k]) / (counts[k] - 1) as f64 } else { 0.0 })
            .fold(0.0, f64::max);
        // Grid points not beaten by any of their 3^d - 1 neighbours.
        let mut peaks = Vec::new();
        for flat in 0..pts.len() {
            let idx = unflatten(flat, &counts);
            let mut is_peak = true;
            let mut off = vec![-1isize; d];
            'nb: loop {
                if off.iter().any(|&o| o != 0) {
                    let mut nflat = 0usize;
                    let mut ok = true;
                    for k in 0..d {
                        let j = idx[k] as isize + off[k];
                        if j < 0 || j >= counts[k] as isize {
                            ok = false;
                            break;
                        }
                        nflat = nflat * counts[k] + j as usize;
                    }
                    if ok && vs[nflat] > vs[flat] {
                        is_peak = false;
                        break 'nb;
                    }
                }
                let mut k = d;
                loop {
                    if k == 0 {
                        break 'nb;
                    }
                    k -= 1;
                    if off[k] < 1 {
                        off[k] += 1;
                        break;
                    }
                    off[k] = -1;
                }
            }
            if is_peak {
                peaks.push(flat);
            }
        }
        peaks.sort_by(|&a, &b| vs[b].partial_cmp(&vs[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        let diam = dist(&self.lo, &self.hi);
        // A secondary maximum on a ridge is no lattice peak; the best lattice
        // points climb to it from its side of the ridge.
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| vs[b].partial_cmp(&vs[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut starts: Vec<usize> = peaks.iter().take(4 * REFINE).cloned().collect();
        for &k in order.iter().take(2 * REFINE) {
            if !starts.contains(&k) {
                starts.push(k);
            }
        }
        for &k in &starts {
            let (p, v) = self.refine(f, pts[k].clone(), vs[k], 0.5 * step);
            push_unique(&mut out, p, v, 1e-7 * diam);
        }
        for s in seeds {
            let (p, v) = self.refine(f, s.clone(), f(s), 0.5 * step);
            push_unique(&mut out, p, v, 1e-7 * diam);
        }
        sort_desc(&mut out);
        out
    }

    fn refine(&self, f: &dyn Fn(&[f64]) -> f64, mut p: Vec<f64>, mut v: f64, step: f64) -> (Vec<f64>, f64) {
        // Clamping to the box can flatten the simplex onto a face; restarting
        // from the best point with a fresh simplex recovers interior maxima.
        let mut s = step;
        for _ in 0..RESTARTS {
            let (q, w) = nelder_mead_max(f, &p, s, &self.lo, &self.hi, 4000);
            let gain = w - v;
            if w >= v {
                (p, v) = (q, w);
            }
            if !(gain > 1e-15) {
                break;
            }
            s *= 0.25;
        }
        (p, v)
    }
}

/// Candidate maxima of `f(y) = sum_i chi_i Cos^2|x_i - y|` on `[min x, max x]`,
/// best first. Between consecutive breakpoints `x_i +- pi/2` the set of points
/// within `pi/2` of `y` is fixed and `f = A/2 + Re(W e^{-2iy})/2` with
/// `A = sum chi_i`, `W = sum chi_i e^{2 i x_i}` over that set, so its maxima are
/// the stationary points `arg(W)/2 + k pi` and the breakpoints themselves.
pub(crate) fn cos2_maxima_1d(x: &[f64], chi: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f = |y: f64| -> f64 {
        x.iter()
            .zip(chi)
            .map(|(&xi, &c)| {
                let k = cos_trunc((xi - y).abs());
                c * k * k
            })
            .sum()
    };
    let mut br = vec![lo, hi];
    for &xi in x {
        for b in [xi - FRAC_PI_2, xi + FRAC_PI_2] {
            if b > lo && b < hi {
                br.push(b);
            }
        }
    }
    br.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    br.dedup();
    let mut cands = br.clone();
    for w in br.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        let (mut re, mut im) = (0.0, 0.0);
        for (&xi, &c) in x.iter().zip(chi) {
            if (xi - mid).abs() < FRAC_PI_2 {
                re += c * cos(2.0 * (xi - mid));
                im += c * sin(2.0 * (xi - mid));
            }
        }
        if hypot(re, im) == 0.0 {
            continue;
        }
        let y0 = mid + 0.5 * atan2(im, re);
        let kmin = -floor((y0 - p) / PI);
        let kmax = floor((q - y0) / PI);
        let mut k = kmin;
        while k <= kmax {
            cands.push(y0 + k * PI);
            k += 1.0;
        }
    }
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for y in cands {
        let y = y.clamp(lo, hi);
        push_unique(&mut out, vec![y], f(y), 1e-12 * (1.0 + hi - lo));
    }
    sort_desc(&mut out);
    out.truncate(4 * REFINE);
    out
}

/// Radial profile of an objective `sum_i a_i k(|x_i - y|)`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Kernel {
    /// `k = Cos`
    Cos,
    /// `k = Cos^2`
    Cos2,
}

/// Mean-shift ascent for `sum_i a_i k(|x_i - y|)` from `y`. Both kernels have
/// convex profiles in `|x - y|^2`, so every step is an ascent step and the
/// iterates stay in the convex hull of the points.
pub(crate) fn mean_shift(x: &[f64], dim: usize, a: &[f64], kernel: Kernel, y: &[f64]) -> Vec<f64> {
    let mut y = y.to_vec();
    for _ in 0..MEAN_SHIFT_ITER {
        let mut next = vec![0.0; dim];
        let mut total = 0.0;
        for (p, &ai) in x.chunks(dim).zip(a) {
            let d = dist(p, &y);
            if !(ai > 0.0) || d >= FRAC_PI_2 {
                continue;
            }
            let w = ai * match kernel {
                Kernel::Cos => sinc(d),
                Kernel::Cos2 => sinc(2.0 * d),
            };
            total += w;
            for k in 0..dim {
                next[k] += w * p[k];
            }
        }
        if !(total > 0.0) {
            return y;
        }
        for v in next.iter_mut() {
            *v /= total;
        }
        let step = dist(&next, &y);
        y = next;
        if !(step > 1e-15 * (1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs())))) {
            break;
        }
    }
    y
}

fn sinc(d: f64) -> f64 {
    if d < 1e-8 {
        1.0
    } else {
        sin(d) / d
    }
}

fn unflatten(flat: usize, counts: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; counts.len()];
    let mut r = flat;
    for k in (0..counts.len()).rev() {
        idx[k] = r % counts[k];
        r /= counts[k];
    }
    idx
}

fn push_unique(out: &mut Vec<(Vec<f64>, f64)>, p: Vec<f64>, v: f64, tol: f64) {
    if let Some(e) = out.iter_mut().find(|(q, _)| dist(q, &p) <= tol) {
        if v > e.1 {
            *e = (p, v);
        }
    } else {
        out.push((p, v));
    }
}

fn sort_desc(out: &mut [(Vec<f64>, f64)]) {
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_both_peaks_in_1d() {
        let s = BoxSearch::new(&[0.0, 3.0], 1);
        let f = |y: &[f64]| cos(2.0 * (y[0] - 0.7)) + 0.5 * y[0];
        let m = s.local_maxima(&f);
        assert!(m.len() >= 2);
        let g = s.maximize(&f);
        assert!(m.iter().all(|(_, v)| *v <= g.1));
    }

    #[test]
    fn piecewise_maxima_match_dense_scan() {
        let x = [0.0, 0.9, 2.3, 2.5];
        let chi = [0.7, 0.2, 0.5, 0.4];
        let best = cos2_maxima_1d(&x, &chi)[0].1;
        let mut scan = 0.0f64;
        for k in 0..=250_000 {
            let y = 2.5 * k as f64 / 250_000.0;
            let v: f64 = x
                .iter()
                .zip(&chi)
                .map(|(&xi, &c)| {
                    let q = cos_trunc((xi - y).abs());
                    c * q * q
                })
                .sum();
            scan = scan.max(v);
        }
        assert!(best >= scan - 1e-12 && best - scan < 1e-9, "{best} vs {scan}");
    }

    #[test]
    fn finds_peak_in_2d() {
        let s = BoxSearch::new(&[0.0, 0.0, 1.0, 2.0], 2);
        let f = |p: &[f64]| -((p[0] - 0.3) * (p[0] - 0.3) + (p[1] - 1.2) * (p[1] - 1.2));
        let (p, v) = s.maximize(&f);
        assert!(v > -1e-12 && (p[0] - 0.3).abs() < 1e-6 && (p[1] - 1.2).abs() < 1e-6);
    }
}
