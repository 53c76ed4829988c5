//! Translation-invariant cost stencil on a regular grid.
//!
//! On a regular grid the transport cost between two nodes only depends on their
//! index offset, so the kernel is stored once per offset instead of per pair.

use alloc::vec;
use alloc::vec::Vec;

use crate::hk::hk_kl_cost_dist;
use crate::math::{exp, ln, sqrt};
use crate::measures::GridMeasure;

pub(crate) struct Stencil {
    shape: Vec<usize>,
    offsets: Vec<isize>,
    cost: Vec<f64>,
}

impl Stencil {
    /// Offsets whose physical length is below `cutoff`.
    pub fn new(grid: &GridMeasure, cutoff: f64) -> Stencil {
        let shape = grid.shape().to_vec();
        let h = grid.spacing();
        let d = shape.len();
        let mut offsets = Vec::new();
        let mut cost = Vec::new();
        let mut o: Vec<isize> = shape.iter().map(|&n| -(n as isize - 1)).collect();
        loop {
            let len2: f64 = (0..d).map(|k| (o[k] as f64 * h[k]) * (o[k] as f64 * h[k])).sum();
            let len = sqrt(len2);
            if len < cutoff {
                let c = hk_kl_cost_dist(len);
                if c.is_finite() {
                    offsets.extend_from_slice(&o);
                    cost.push(c);
                }
            }
            let mut k = d;
            loop {
                if k == 0 {
                    return Stencil { shape, offsets, cost };
                }
                k -= 1;
                if o[k] < shape[k] as isize - 1 {
                    o[k] += 1;
                    break;
                }
                o[k] = -(shape[k] as isize - 1);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    #[inline]
    fn target(&self, src: &[usize], e: usize) -> Option<usize> {
        let d = self.shape.len();
        let o = &self.offsets[e * d..(e + 1) * d];
        let mut flat = 0usize;
        for k in 0..d {
            let t = src[k] as isize + o[k];
            if t < 0 || t >= self.shape[k] as isize {
                return None;
            }
            flat = flat * self.shape[k] + t as usize;
        }
        Some(flat)
    }

    fn multi(&self, flat: usize) -> Vec<usize> {
        let d = self.shape.len();
        let mut idx = vec![0; d];
        let mut r = flat;
        for k in (0..d).rev() {
            idx[k] = r % self.shape[k];
            r /= self.shape[k];
        }
        idx
    }

    /// Visits every stencil edge `(s, t, cost)` leaving the cells in `support`.
    pub fn for_each_edge(&self, support: &[usize], mut f: impl FnMut(usize, usize, f64)) {
        for &s in support {
            let ms = self.multi(s);
            for e in 0..self.len() {
                if let Some(t) = self.target(&ms, e) {
                    f(s, t, self.cost[e]);
                }
            }
        }
    }

    /// `out[s] = log sum_t exp(v[t] - C(s,t)/eps)` for each `s` in `support`.
    pub fn gather(&self, support: &[usize], v: &[f64], eps: f64, out: &mut [f64]) {
        let inv = 1.0 / eps;
        for &s in support {
            let ms = self.multi(s);
            let mut m = f64::NEG_INFINITY;
            for e in 0..self.len() {
                if let Some(t) = self.target(&ms, e) {
                    let a = v[t] - self.cost[e] * inv;
                    if a > m {
                        m = a;
                    }
                }
            }
            if m == f64::NEG_INFINITY {
                out[s] = m;
                continue;
            }
            let mut sum = 0.0;
            for e in 0..self.len() {
                if let Some(t) = self.target(&ms, e) {
                    sum += exp(v[t] - self.cost[e] * inv - m);
                }
            }
            out[s] = m + ln(sum);
        }
    }

    /// `out[t] = log sum_{s in support} exp(u[s] - C(s,t)/eps)` for every cell `t`.
    pub fn scatter(&self, support: &[usize], u: &[f64], eps: f64, out: &mut [f64]) {
        let inv = 1.0 / eps;
        let mut mx = vec![f64::NEG_INFINITY; out.len()];
        self.for_each_edge(support, |s, t, c| {
            let a = u[s] - c * inv;
            if a > mx[t] {
                mx[t] = a;
            }
        });
        let mut sum = vec![0.0; out.len()];
        self.for_each_edge(support, |s, t, c| {
            if mx[t] > f64::NEG_INFINITY {
                sum[t] += exp(u[s] - c * inv - mx[t]);
            }
        });
        for t in 0..out.len() {
            out[t] = if mx[t] == f64::NEG_INFINITY { mx[t] } else { mx[t] + ln(sum[t]) };
        }
    }
}

/// Cells carrying positive mass.
pub(crate) fn support(values: &[f64]) -> Vec<usize> {
    (0..values.len()).filter(|&i| values[i] > 0.0).collect()
}

/// Entrywise `log`, with `log 0 = -inf`.
pub(crate) fn log_vec(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| if v > 0.0 { ln(v) } else { f64::NEG_INFINITY }).collect()
}
