//! Convex hull of the multi-marginal cost in the masses.
//!
//! `c_mm**(m) = sup { psi . m : psi in Q_MM }`. In the coordinates
//! `chi_i = lambda_i^2 / (lambda_i - psi_i)` the constraint of `Q_MM` reads
//! `sum_i chi_i Cos^2|x_i - y| <= 1` for every `y` in the hull, which is linear
//! in `chi`, while `psi . m = sum_i m_i (lambda_i - lambda_i^2 / chi_i)` is
//! concave. The supremum is therefore a convex program. It is solved by a
//! log-barrier Newton method over a finite set of `y` constraints that grows by
//! adding the most violated positions until none is violated.
//!
//! At the optimum every active `y` carries a part `m^y` with
//! `m^y_i ~ chi_i^2 Cos^2|x_i - y| / lambda_i^2`, and these parts sum to `m`.
//! The weights of the parts are recovered by nonnegative least squares.

use alloc::vec;
use alloc::vec::Vec;

use super::{c_mm, chi_to_psi, Decomposition, DualVector, PointConfig};
use crate::hk::{cos_trunc, ConePoint};
use crate::math::{dist, ln, solve_dense};
use crate::multi_marginal::{cos2_maxima_1d, mean_shift, BoxSearch, Kernel};

/// Result of the convex hull computation.
#[derive(Debug, Clone, PartialEq)]
pub struct HullSolution {
    /// `sum_j c_mm(m^j)` of the returned decomposition.
    pub value: f64,
    /// `psi . m` for the returned dual certificate; a lower bound on the hull value.
    pub dual_value: f64,
    pub decomposition: Decomposition,
    /// Pointwise barycenter `(y_j, s_j)` of each part.
    pub atoms: Vec<ConePoint>,
    /// Supporting dual vector, `-inf` on marginals without mass.
    pub psi: DualVector,
    /// Whether the dual solve and the decomposition recovery both succeeded.
    pub converged: bool,
}

const VIOLATION_TOL: f64 = 1e-11;
const ACTIVE_TOL: f64 = 1e-6;
const POLISH_ROUNDS: usize = 50;
const MERGE_TOL: f64 = 1e-6;
const ACTIVE_MULT: f64 = 1e-7;
const KKT_ITER: usize = 30;
const CANDIDATE_TOL: f64 = 1e-3;
/// Relative primal-dual gap accepted as converged.
const GAP_TOL: f64 = 1e-8;

struct Sub {
    dim: usize,
    x: Vec<f64>,
    lam: Vec<f64>,
    m: Vec<f64>,
}

impl Sub {
    fn n(&self) -> usize {
        self.lam.len()
    }
    fn row(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let c = cos_trunc(dist(&self.x[i * self.dim..(i + 1) * self.dim], y));
                c * c
            })
            .collect()
    }
    fn f(&self, chi: &[f64], y: &[f64]) -> f64 {
        self.row(y).iter().zip(chi).map(|(a, c)| a * c).sum()
    }
    /// Local maxima of `y -> f(chi, y)`, best first; exact in 1D.
    fn maxima(&self, search: &BoxSearch, chi: &[f64]) -> Vec<(Vec<f64>, f64)> {
        if self.dim == 1 {
            cos2_maxima_1d(&self.x, chi)
        } else {
            let seeds: Vec<Vec<f64>> = self.x.chunks(self.dim).map(|p| p.to_vec()).collect();
            let mut out = search.local_maxima_seeded(&|y: &[f64]| self.f(chi, y), &seeds);
            for (y, v) in out.iter_mut() {
                let z = mean_shift(&self.x, self.dim, chi, Kernel::Cos2, y);
                let w = self.f(chi, &z);
                if w >= *v {
                    (*y, *v) = (z, w);
                }
            }
            out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
            out
        }
    }
}

pub fn c_mm_hull(cfg: &PointConfig) -> HullSolution {
    let n = cfg.len();
    let lam = cfg.lambdas();
    let m = cfg.masses();
    let act: Vec<usize> = (0..n).filter(|&i| m[i] > 0.0).collect();
    let expand = |sub: &[f64], fill: f64| {
        let mut v = vec![fill; n];
        for (k, &i) in act.iter().enumerate() {
            v[i] = sub[k];
        }
        v
    };

    if act.is_empty() {
        return HullSolution {
            value: 0.0,
            dual_value: 0.0,
            decomposition: Decomposition { parts: Vec::new() },
            atoms: Vec::new(),
            psi: DualVector::new(vec![0.0; n]),
            converged: true,
        };
    }
    if act.len() == 1 {
        let i = act[0];
        let v = lam[i] * (1.0 - lam[i]) * m[i];
        let mut psi = vec![f64::NEG_INFINITY; n];
        psi[i] = lam[i] - lam[i] * lam[i];
        return HullSolution {
            value: v,
            dual_value: v,
            decomposition: Decomposition::trivial(m),
            atoms: vec![ConePoint { position: cfg.position(i).to_vec(), mass: lam[i] * lam[i] * m[i] }],
            psi: DualVector::new(psi),
            converged: true,
        };
    }

    let total: f64 = act.iter().map(|&i| m[i]).sum();
    let sub = Sub {
        dim: cfg.dim(),
        x: act.iter().flat_map(|&i| cfg.position(i).iter().cloned()).collect(),
        lam: act.iter().map(|&i| lam[i]).collect(),
        m: act.iter().map(|&i| m[i] / total).collect(),
    };
    let search = BoxSearch::new(&sub.x, sub.dim);
    let (chi, solved) = solve_dual(&sub, &search);

    // Certificate: scale chi onto the feasible set.
    let maxima = sub.maxima(&search, &chi);
    let sup = maxima[0].1;
    let chi_c: Vec<f64> = chi.iter().map(|c| c / sup.max(1.0)).collect();
    let psi_sub: Vec<f64> = chi_c.iter().zip(&sub.lam).map(|(&c, &l)| chi_to_psi(c, l)).collect();
    let psi = DualVector::new(expand(&psi_sub, f64::NEG_INFINITY));
    let dual_value = psi.dot(m);

    let trivial = c_mm(cfg);
    let mut best = HullSolution {
        value: trivial.value,
        dual_value,
        decomposition: Decomposition::trivial(m),
        atoms: vec![trivial.minimizer.clone()],
        psi,
        converged: false,
    };
    let evaluate = |parts: Vec<Vec<f64>>| -> (f64, Vec<Vec<f64>>, Vec<ConePoint>) {
        let mut value = 0.0;
        let mut atoms = Vec::with_capacity(parts.len());
        for p in &parts {
            let c = c_mm(&cfg.with_masses(p.clone()).expect("parts are valid masses"));
            value += c.value;
            atoms.push(c.minimizer);
        }
        (value, parts, atoms)
    };
    let consider = |best: &mut HullSolution, parts: Vec<Vec<f64>>| {
        if parts.len() < 2 {
            return;
        }
        let (value, parts, atoms) = evaluate(parts);
        let (value, parts, atoms) = polish(cfg, &sub, total, &expand, value, parts, atoms);
        if value < best.value {
            best.value = value;
            best.decomposition = Decomposition { parts };
            best.atoms = atoms;
        }
    };
    let gap_ok = |b: &HullSolution| b.value - b.dual_value <= GAP_TOL * b.value.abs().max(f64::MIN_POSITIVE);
    let top = maxima[0].1;
    let active: Vec<Vec<f64>> = maxima.iter().filter(|(_, v)| *v >= top - ACTIVE_TOL).map(|(y, _)| y.clone()).collect();
    if let Some(parts) = support_parts(&sub, &active) {
        let parts = parts.iter().map(|p| expand(&p.iter().map(|v| v * total).collect::<Vec<_>>(), 0.0)).collect();
        consider(&mut best, parts);
    }
    if !gap_ok(&best) {
        // Flat ridges of maxima need atoms spread along them, which the isolated
        // maxima miss; retry with every near-active lattice point as a candidate.
        let cands = candidates(&sub, &search, &chi_c, &maxima);
        if let Some(parts) = support_parts(&sub, &cands) {
            let parts = parts.iter().map(|p| expand(&p.iter().map(|v| v * total).collect::<Vec<_>>(), 0.0)).collect();
            consider(&mut best, parts);
        }
    }
    best.converged = solved && gap_ok(&best);
    best
}

/// Maxima of `f` plus lattice points near the top, each also moved uphill.
fn candidates(sub: &Sub, search: &BoxSearch, chi: &[f64], maxima: &[(Vec<f64>, f64)]) -> Vec<Vec<f64>> {
    let top = maxima[0].1;
    let mut ys: Vec<Vec<f64>> = maxima.iter().map(|(y, _)| y.clone()).collect();
    let per_axis = if sub.dim == 1 { 513 } else { 32 };
    for y in search.lattice(per_axis) {
        if sub.f(chi, &y) >= top - CANDIDATE_TOL {
            if sub.dim > 1 {
                ys.push(mean_shift(&sub.x, sub.dim, chi, Kernel::Cos2, &y));
            }
            ys.push(y);
        }
    }
    ys
}

/// Optimal parts when the barycenter is restricted to atoms at `ys`, in the
/// normalized masses of `sub`; `None` when some marginal reaches no atom.
fn support_parts(sub: &Sub, ys: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = sub.n();
    let cuts: Vec<Vec<f64>> = ys.iter().map(|y| sub.row(y)).collect();
    if (0..n).any(|i| cuts.iter().all(|r| r[i] <= 0.0)) {
        return None;
    }
    let c: Vec<f64> = (0..n).map(|i| sub.m[i] * sub.lam[i] * sub.lam[i]).collect();
    let worst = cuts.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let (chi, mut w) = barrier_solve(&cuts, &c, &vec![0.5 / worst; n]);
    // Multipliers of inactive cuts are of order 1/t; drop them before the
    // support is reduced and the active system is solved exactly.
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    for v in w.iter_mut() {
        if *v <= ACTIVE_MULT * wmax {
            *v = 0.0;
        }
    }
    caratheodory(&cuts, &mut w);
    let chi = match kkt_newton(&cuts, &c, &chi, &w) {
        Some((chi_k, w_k)) => {
            w = w_k;
            chi_k
        }
        None => chi,
    };
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let mut parts: Vec<Vec<f64>> = Vec::new();
    for (j, r) in cuts.iter().enumerate() {
        if w[j] > 1e-12 * wmax {
            parts.push((0..n).map(|i| w[j] * chi[i] * chi[i] * r[i] / (sub.lam[i] * sub.lam[i])).collect());
        }
    }
    for i in 0..n {
        let s: f64 = parts.iter().map(|p| p[i]).sum();
        if !(s > 0.0) {
            return None;
        }
        for p in parts.iter_mut() {
            p[i] *= sub.m[i] / s;
        }
    }
    parts.retain(|p| p.iter().any(|&v| v > 0.0));
    Some(parts)
}

/// Newton's method on the optimality system of the fixed-support dual with the
/// cuts carrying weight treated as equalities:
/// `c_i / chi_i^2 = sum_j w_j a_ji` and `a_j . chi = 1`. The multipliers from the
/// barrier lose their digits to the cancellation in `1 - a_j . chi`.
fn kkt_newton(cuts: &[Vec<f64>], c: &[f64], chi: &[f64], w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = c.len();
    let act: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    let a = act.len();
    if a == 0 || a > n {
        return None;
    }
    let k = n + a;
    let mut z: Vec<f64> = chi.iter().cloned().chain(act.iter().map(|&j| w[j])).collect();
    let resid = |z: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; k];
        for i in 0..n {
            r[i] = c[i] / (z[i] * z[i]) - act.iter().enumerate().map(|(q, &j)| z[n + q] * cuts[j][i]).sum::<f64>();
        }
        for (q, &j) in act.iter().enumerate() {
            r[n + q] = dot(&cuts[j], &z[..n]) - 1.0;
        }
        r
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = resid(&z);
    for _ in 0..KKT_ITER {
        if norm(&r) <= 1e-15 {
            break;
        }
        let mut jac = vec![0.0; k * k];
        for i in 0..n {
            jac[i * k + i] = -2.0 * c[i] / (z[i] * z[i] * z[i]);
            for (q, &j) in act.iter().enumerate() {
                jac[i * k + n + q] = -cuts[j][i];
                jac[(n + q) * k + i] = cuts[j][i];
            }
        }
        let step = solve_dense(&jac, &r, k)?;
        let next: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a - b).collect();
        let rn = resid(&next);
        if !(norm(&rn) < norm(&r)) {
            break;
        }
        (z, r) = (next, rn);
    }
    if norm(&r) > 1e-10 || z.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut w_out = vec![0.0; w.len()];
    for (q, &j) in act.iter().enumerate() {
        w_out[j] = z[n + q];
    }
    Some((z[..n].to_vec(), w_out))
}

/// Moves `w >= 0` to at most `n` nonzeros (the row count of the `cols`)
/// while keeping `sum_j w_j cols_j` fixed.
fn caratheodory(cols: &[Vec<f64>], w: &mut [f64]) {
    let n = cols.first().map_or(0, |c| c.len());
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    for v in w.iter_mut() {
        if *v <= 1e-14 * wmax {
            *v = 0.0;
        }
    }
    loop {
        let supp: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
        if supp.len() <= n {
            return;
        }
        let Some(v) = null_vector(&supp[..n + 1].iter().map(|&j| cols[j].clone()).collect::<Vec<_>>()) else { return };
        // Step along v until a weight hits zero; flip v so that one decreases.
        let v = if v.iter().any(|&a| a > 0.0) { v } else { v.iter().map(|a| -a).collect() };
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for (k, &j) in supp[..n + 1].iter().enumerate() {
            if v[k] > 0.0 && w[j] / v[k] < t {
                t = w[j] / v[k];
                hit = k;
            }
        }
        for (k, &j) in supp[..n + 1].iter().enumerate() {
            w[j] = (w[j] - t * v[k]).max(0.0);
        }
        w[supp[hit]] = 0.0;
    }
}

/// A nonzero `v` with `sum_k v_k cols_k = 0`, for `n + 1` columns of length `n`.
fn null_vector(cols: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = cols.len();
    let n = k - 1;
    // Row-reduce the n x k matrix with partial pivoting.
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..k {
        if row == n {
            break;
        }
        let p = (row..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(core::cmp::Ordering::Equal))?;
        if a[p][col].abs() <= 1e-13 * scale {
            continue;
        }
        a.swap(row, p);
        let d = a[row][col];
        for v in a[row].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != row {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..k {
                        a[r][c] -= f * a[row][c];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..k).find(|c| !pivots.contains(c))?;
    let mut v = vec![0.0; k];
    v[free] = 1.0;
    for (r, &pc) in pivots.iter().enumerate() {
        v[pc] = -a[r][free];
    }
    Some(v)
}

/// Local improvement of a decomposition: alternates optimal masses on fixed
/// atom positions with optimal positions for fixed parts, and merges the two
/// closest atoms whenever that does not raise the value.
fn polish(
    cfg: &PointConfig,
    sub: &Sub,
    total: f64,
    expand: &dyn Fn(&[f64], f64) -> Vec<f64>,
    value: f64,
    parts: Vec<Vec<f64>>,
    atoms: Vec<ConePoint>,
) -> (f64, Vec<Vec<f64>>, Vec<ConePoint>) {
    let evaluate = |parts: Vec<Vec<f64>>| -> (f64, Vec<Vec<f64>>, Vec<ConePoint>) {
        let mut v = 0.0;
        let mut at = Vec::with_capacity(parts.len());
        for p in &parts {
            let cm = c_mm(&cfg.with_masses(p.clone()).expect("parts are valid masses"));
            v += cm.value;
            at.push(cm.minimizer);
        }
        (v, parts, at)
    };
    let mut best = alternate(sub, total, expand, &evaluate, (value, parts, atoms));
    while best.1.len() > 1 {
        let at = &best.2;
        let mut pair = (0, 1);
        let mut closest = f64::INFINITY;
        for i in 0..at.len() {
            for j in i + 1..at.len() {
                let d = dist(&at[i].position, &at[j].position);
                if d < closest {
                    closest = d;
                    pair = (i, j);
                }
            }
        }
        let mut merged: Vec<Vec<f64>> = Vec::with_capacity(best.1.len() - 1);
        for (k, p) in best.1.iter().enumerate() {
            if k != pair.0 && k != pair.1 {
                merged.push(p.clone());
            }
        }
        merged.push(best.1[pair.0].iter().zip(&best.1[pair.1]).map(|(a, b)| a + b).collect());
        let cand = alternate(sub, total, expand, &evaluate, evaluate(merged));
        if cand.0 <= best.0 {
            best = cand;
        } else {
            break;
        }
    }
    best
}

type Candidate = (f64, Vec<Vec<f64>>, Vec<ConePoint>);

/// Alternates optimal masses on the current atom positions with optimal
/// positions for the resulting parts. Neither step raises the value.
fn alternate(
    sub: &Sub,
    total: f64,
    expand: &dyn Fn(&[f64], f64) -> Vec<f64>,
    evaluate: &dyn Fn(Vec<Vec<f64>>) -> Candidate,
    start: Candidate,
) -> Candidate {
    let (mut value, mut parts, mut atoms) = start;
    let scale = sub.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..POLISH_ROUNDS {
        // Atoms at one position merge without raising the value.
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(atoms.len());
        for a in &atoms {
            if ys.iter().all(|y| dist(y, &a.position) > MERGE_TOL * (1.0 + scale)) {
                ys.push(a.position.clone());
            }
        }
        let Some(next) = support_parts(sub, &ys) else { break };
        let next: Vec<Vec<f64>> = next.iter().map(|p| expand(&p.iter().map(|v| v * total).collect::<Vec<_>>(), 0.0)).collect();
        let (v, next_parts, at) = evaluate(next);
        let gain = value - v;
        if gain > 0.0 {
            (value, parts, atoms) = (v, next_parts, at);
        }
        if !(gain > 1e-15 * value.abs()) {
            break;
        }
    }
    (value, parts, atoms)
}

/// Cutting-plane loop around the barrier solver. Returns `chi` for the active
/// marginals and whether the separation test passed.
fn solve_dual(sub: &Sub, search: &BoxSearch) -> (Vec<f64>, bool) {
    let n = sub.n();
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        cuts.push(sub.row(&sub.x[i * sub.dim..(i + 1) * sub.dim]));
    }
    let per_axis = if sub.dim == 1 { 65 } else { 9 };
    for y in search.lattice(per_axis) {
        cuts.push(sub.row(&y));
    }
    let c: Vec<f64> = (0..n).map(|i| sub.m[i] * sub.lam[i] * sub.lam[i]).collect();
    let mut chi = vec![0.5 / n as f64; n];
    for _round in 0..80 {
        chi = barrier_max(&cuts, &c, &chi);
        let maxima = sub.maxima(search, &chi);
        if maxima[0].1 <= 1.0 + VIOLATION_TOL {
            return (chi, true);
        }
        for (y, v) in maxima {
            if v > 1.0 + VIOLATION_TOL {
                cuts.push(sub.row(&y));
            }
        }
        // Warm start strictly inside the enlarged constraint set.
        let worst = cuts.iter().map(|a| dot(a, &chi)).fold(0.0, f64::max);
        if worst >= 1.0 {
            for v in chi.iter_mut() {
                *v *= (1.0 - 1e-3) / worst;
            }
        }
    }
    (chi, false)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn barrier_max(cuts: &[Vec<f64>], c: &[f64], start: &[f64]) -> Vec<f64> {
    barrier_solve(cuts, c, start).0
}

/// Maximizes `-sum_i c_i / chi_i` subject to `a_k . chi <= 1` by a log-barrier
/// path-following Newton method, starting from a strictly feasible `start`.
/// Also returns the multipliers of the cuts.
fn barrier_solve(cuts: &[Vec<f64>], c: &[f64], start: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = c.len();
    let mut chi = start.to_vec();
    let k = cuts.len() as f64 + n as f64;
    let phi = |chi: &[f64], t: f64| -> f64 {
        let mut v = 0.0;
        for i in 0..n {
            if chi[i] <= 0.0 {
                return f64::NEG_INFINITY;
            }
            v += -t * c[i] / chi[i] + ln(chi[i]);
        }
        for a in cuts {
            let s = 1.0 - dot(a, chi);
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            v += ln(s);
        }
        v
    };
    let mut t = 1.0;
    loop {
        for _newton in 0..100 {
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                g[i] = t * c[i] / (chi[i] * chi[i]) + 1.0 / chi[i];
                h[i * n + i] = 2.0 * t * c[i] / (chi[i] * chi[i] * chi[i]) + 1.0 / (chi[i] * chi[i]);
            }
            for a in cuts {
                let s = 1.0 - dot(a, &chi);
                for i in 0..n {
                    g[i] -= a[i] / s;
                    for j in 0..n {
                        h[i * n + j] += a[i] * a[j] / (s * s);
                    }
                }
            }
            let Some(step) = solve_dense(&h, &g, n) else { break };
            let dec = dot(&g, &step);
            if !(dec > 1e-20) {
                break;
            }
            let base = phi(&chi, t);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..n).map(|i| chi[i] + alpha * step[i]).collect();
                let v = phi(&trial, t);
                // Near the center the barrier value carries too few digits for
                // the Armijo test; a feasible full Newton step is taken instead.
                let near = dec < 1e-3 && alpha == 1.0;
                if v.is_finite() && (near || v >= base + 0.25 * alpha * dec) {
                    chi = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if k / t < 1e-12 {
            let mult = cuts.iter().map(|a| 1.0 / (t * (1.0 - dot(a, &chi)))).collect();
            return (chi, mult);
        }
        t *= 8.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Weights;
    use crate::multi_marginal::q_mm_contains;

    fn cfg1(x: &[f64], m: &[f64], l: &[f64]) -> PointConfig {
        let pos: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        PointConfig::new(&pos, m.to_vec(), Weights::new(l.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn two_close_points_need_no_split() {
        let c = cfg1(&[0.2, 1.3], &[1.0, 2.0], &[0.4, 0.6]);
        let h = c_mm_hull(&c);
        assert_eq!(h.decomposition.len(), 1);
        assert!((h.value - c_mm(&c).value).abs() < 1e-12);
        assert!((h.dual_value - h.value).abs() < 1e-8);
    }

    #[test]
    fn two_far_points_split_into_singletons() {
        let c = cfg1(&[0.0, 2.0], &[1.0, 1.0], &[0.5, 0.5]);
        let h = c_mm_hull(&c);
        assert!((h.value - 0.5).abs() < 1e-9, "{}", h.value);
        assert_eq!(h.decomposition.len(), 2);
        for p in &h.decomposition.parts {
            assert_eq!(p.iter().filter(|v| **v > 1e-9).count(), 1);
        }
        assert!(q_mm_contains(&c, &h.psi, 1e-8).contained);
        assert!((h.dual_value - 0.5).abs() < 1e-8);
    }

    #[test]
    fn zero_masses_are_dropped() {
        let c = cfg1(&[0.0, 0.5, 3.0], &[1.0, 0.0, 0.0], &[0.3, 0.3, 0.4]);
        let h = c_mm_hull(&c);
        assert!((h.value - 0.3 * 0.7).abs() < 1e-15);
        assert_eq!(h.psi.dot(c.masses()), h.value);
    }
}
