//! Exact HK barycenters of Dirac marginals `mu_i = m_i delta_{x_i}`.
//!
//! Two marginals in any dimension and three marginals on a line are solved by
//! case analysis on the pairwise distances. Other configurations go through the
//! convex hull decomposition of the multi-marginal cost.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::hk::{cos_trunc, hk_dirac_discrete_sq, ConePoint};
use crate::math::{atan2, cos, dist, floor, hypot, sin, solve_dense, sqrt, FRAC_PI_2, PI};
use crate::measures::{DiscreteMeasure, Domain, Weights};
use crate::multi_marginal::{c_mm_hull, chi_to_psi, f_constraint, q_mm_contains, DualVector, PointConfig};

/// Distances within this of `pi/2` count as lying on a regime boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Largest number of marginals accepted by [`barycenter_diracs`].
pub const MAX_DIRACS: usize = 6;

const MEMBERSHIP_TOL: f64 = 1e-9;
const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// One atom.
    Single,
    /// Several atoms, at least one of them shared by two or more marginals.
    Split,
    /// The optimal support is not unique; a representative is returned.
    Diffuse,
    /// One atom at each `x_i` with mass `lambda_i^2 m_i`.
    FarProduct,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::Split => "split",
            Regime::Diffuse => "diffuse",
            Regime::FarProduct => "far-product",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracBarycenter {
    pub atoms: Vec<ConePoint>,
    /// `parts[j][i]` is the mass of marginal `i` transported to atom `j`.
    pub parts: Vec<Vec<f64>>,
    pub regime: Regime,
    /// Supporting dual vector; `psi . m` equals the optimal value.
    pub certificate: DualVector,
    /// `sum_i lambda_i HK^2(m_i delta_{x_i}, nu)` of the returned atoms.
    pub value: f64,
    /// Some pairwise distance lies within `BOUNDARY_TOL` of `pi/2`.
    pub boundary: bool,
    /// Interval on which the support of a diffuse barycenter may lie.
    pub support: Option<(f64, f64)>,
    /// The certificate lies in `Q_MM` and matches the value.
    pub valid: bool,
}

impl DiracBarycenter {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn to_measure(&self, domain: Domain) -> Result<DiscreteMeasure> {
        let coords = self.atoms.iter().flat_map(|a| a.position.iter().cloned()).collect();
        let masses = self.atoms.iter().map(|a| a.mass).collect();
        DiscreteMeasure::new(domain, coords, masses)
    }
}

/// `sum_i lambda_i HK^2(m_i delta_{x_i}, sum_j s_j delta_{y_j})`.
pub fn objective(cfg: &PointConfig, atoms: &[ConePoint]) -> f64 {
    let nu: Vec<(Vec<f64>, f64)> = atoms.iter().map(|a| (a.position.clone(), a.mass)).collect();
    (0..cfg.len())
        .map(|i| cfg.lambdas()[i] * hk_dirac_discrete_sq(cfg.position(i), cfg.masses()[i], &nu))
        .sum()
}

fn on_boundary(d: f64) -> bool {
    (d - FRAC_PI_2).abs() <= BOUNDARY_TOL
}

fn close(d: f64) -> bool {
    d <= FRAC_PI_2 + BOUNDARY_TOL
}

fn any_boundary(cfg: &PointConfig) -> bool {
    (0..cfg.len()).any(|i| (i + 1..cfg.len()).any(|j| on_boundary(dist(cfg.position(i), cfg.position(j)))))
}

/// Fills in the value and checks the certificate.
fn finish(
    cfg: &PointConfig,
    check: &PointConfig,
    atoms: Vec<ConePoint>,
    parts: Vec<Vec<f64>>,
    regime: Regime,
    psi: Vec<f64>,
    support: Option<(f64, f64)>,
) -> DiracBarycenter {
    let certificate = DualVector::new(psi);
    let value = objective(cfg, &atoms);
    let dual = certificate.dot(cfg.masses());
    let valid = (value - dual).abs() <= CERTIFICATE_TOL * (1.0 + value)
        && q_mm_contains(check, &certificate, CERTIFICATE_TOL).contained;
    let (atoms, parts) = atoms.into_iter().zip(parts).filter(|(a, _)| a.mass > 0.0).unzip();
    DiracBarycenter { atoms, parts, regime, certificate, value, boundary: any_boundary(cfg), support, valid }
}

/// Barycenter of `m1 delta_{x1}` and `m2 delta_{x2}` with weights `(1 - t, t)`,
/// which is the point at time `t` on the HK geodesic.
pub fn barycenter_n2(x1: &[f64], m1: f64, x2: &[f64], m2: f64, t: f64) -> Result<DiracBarycenter> {
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid("t must lie in (0, 1)"));
    }
    if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
        return Err(invalid("masses must be positive"));
    }
    if x1.len() != x2.len() {
        return Err(invalid("positions must have the same dimension"));
    }
    let w = Weights::new(vec![1.0 - t, t])?;
    let cfg = PointConfig::new(&[x1.to_vec(), x2.to_vec()], vec![m1, m2], w.clone())?;
    let l = [1.0 - t, t];
    let d = dist(x1, x2);
    // The certificate only depends on the distance, so check it on a segment.
    let line = PointConfig::new(&[vec![0.0], vec![d]], vec![m1, m2], w)?;
    if close(d) {
        let (theta, s) = merge(&[(0.0, l[0] * sqrt(m1)), (d, l[1] * sqrt(m2))]);
        let y = if d > 0.0 {
            x1.iter().zip(x2).map(|(a, b)| a + theta / d * (b - a)).collect()
        } else {
            x1.to_vec()
        };
        let c = cos(d);
        let psi = vec![
            l[0] - l[0] * l[0] - l[0] * l[1] * sqrt(m2 / m1) * c,
            l[1] - l[1] * l[1] - l[0] * l[1] * sqrt(m1 / m2) * c,
        ];
        let regime = if on_boundary(d) { Regime::Diffuse } else { Regime::Single };
        let support = on_boundary(d).then_some((0.0, d));
        Ok(finish(&cfg, &line, vec![ConePoint { position: y, mass: s }], vec![vec![m1, m2]], regime, psi, support))
    } else {
        Ok(far(&cfg, &line))
    }
}

fn far(cfg: &PointConfig, check: &PointConfig) -> DiracBarycenter {
    let n = cfg.len();
    let l = cfg.lambdas();
    let m = cfg.masses();
    let atoms = (0..n).map(|i| ConePoint { position: cfg.position(i).to_vec(), mass: l[i] * l[i] * m[i] }).collect();
    let parts = (0..n)
        .map(|i| {
            let mut p = vec![0.0; n];
            p[i] = m[i];
            p
        })
        .collect();
    let psi = l.iter().map(|&li| li - li * li).collect();
    finish(cfg, check, atoms, parts, Regime::FarProduct, psi, None)
}

/// The barycenter `sum_i lambda_i^2 m_i delta_{x_i}` if it is optimal, which is
/// the case exactly when `psi_i = lambda_i - lambda_i^2` lies in `Q_MM`.
pub fn far_product(cfg: &PointConfig) -> Option<DiracBarycenter> {
    let l = cfg.lambdas();
    let psi = DualVector::new(l.iter().map(|&li| li - li * li).collect());
    if !q_mm_contains(cfg, &psi, MEMBERSHIP_TOL).contained {
        return None;
    }
    let r = far(cfg, cfg);
    r.valid.then_some(r)
}

/// `(arg z, |z|^2)` for `z = sum a_k e^{i x_k}`, the argument taken relative to
/// the first position. Falls back to the first position when `z = 0`.
fn merge(terms: &[(f64, f64)]) -> (f64, f64) {
    let x0 = terms[0].0;
    let (mut re, mut im) = (0.0, 0.0);
    for &(x, a) in terms {
        re += a * cos(x - x0);
        im += a * sin(x - x0);
    }
    let s = re * re + im * im;
    (if s == 0.0 { x0 } else { x0 + atan2(im, re) }, s)
}

/// `psi_i = lambda_i - sum_j lambda_i lambda_j sqrt(m_j / m_i) cos(x_i - x_j)` over
/// `group`, the gradient of the single-atom cost of that group.
fn group_gradient(x: &[f64], m: &[f64], l: &[f64], group: &[usize], psi: &mut [f64]) {
    for &i in group {
        let s: f64 = group.iter().map(|&j| l[j] * sqrt(m[j] / m[i]) * cos(x[i] - x[j])).sum();
        psi[i] = l[i] - l[i] * s;
    }
}

/// Exact barycenter of three Diracs on a line.
pub fn barycenter_n3_1d(cfg: &PointConfig) -> Result<DiracBarycenter> {
    if cfg.dim() != 1 || cfg.len() != 3 {
        return Err(invalid("barycenter_n3_1d needs three points in one dimension"));
    }
    if cfg.masses().iter().any(|&m| !(m > 0.0)) {
        return Err(invalid("masses must be positive"));
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| cfg.position(a)[0].partial_cmp(&cfg.position(b)[0]).unwrap_or(core::cmp::Ordering::Equal));
    let x: Vec<f64> = order.iter().map(|&i| cfg.position(i)[0]).collect();
    let m: Vec<f64> = order.iter().map(|&i| cfg.masses()[i]).collect();
    let l: Vec<f64> = order.iter().map(|&i| cfg.lambdas()[i]).collect();
    let sorted = PointConfig::new(&[vec![x[0]], vec![x[1]], vec![x[2]]], m.clone(), Weights::new(l.clone())?)?;
    let r = n3_sorted(&sorted, &x, &m, &l);
    // Back to the caller's order.
    let unsort = |v: &[f64]| {
        let mut out = vec![0.0; 3];
        for (k, &i) in order.iter().enumerate() {
            out[i] = v[k];
        }
        out
    };
    Ok(DiracBarycenter {
        parts: r.parts.iter().map(|p| unsort(p)).collect(),
        certificate: DualVector::new(unsort(&r.certificate.psi)),
        ..r
    })
}

fn n3_sorted(cfg: &PointConfig, x: &[f64], m: &[f64], l: &[f64]) -> DiracBarycenter {
    let (d12, d23, d13) = (x[1] - x[0], x[2] - x[1], x[2] - x[0]);
    let a: Vec<f64> = (0..3).map(|i| l[i] * sqrt(m[i])).collect();
    let far_psi = |i: usize| l[i] - l[i] * l[i];
    let atom = |y: f64, s: f64| ConePoint { position: vec![y], mass: s };

    let single = || {
        let (y, s) = merge(&[(x[0], a[0]), (x[1], a[1]), (x[2], a[2])]);
        let mut psi = vec![0.0; 3];
        group_gradient(x, m, l, &[0, 1, 2], &mut psi);
        (vec![atom(y, s)], vec![m.to_vec()], psi)
    };

    if close(d13) {
        let (atoms, parts, psi) = single();
        return finish(cfg, cfg, atoms, parts, Regime::Single, psi, None);
    }
    if !close(d12) && !close(d23) {
        return far(cfg, cfg);
    }
    if close(d12) != close(d23) {
        // Two close points merge, the far one stands alone.
        let (pair, lone) = if close(d12) { ([0, 1], 2) } else { ([1, 2], 0) };
        let (y, s) = merge(&[(x[pair[0]], a[pair[0]]), (x[pair[1]], a[pair[1]])]);
        let mut psi = vec![0.0; 3];
        group_gradient(x, m, l, &pair, &mut psi);
        psi[lone] = far_psi(lone);
        let mut p0 = m.to_vec();
        p0[lone] = 0.0;
        let mut p1 = vec![0.0; 3];
        p1[lone] = m[lone];
        let atoms = vec![atom(y, s), atom(x[lone], l[lone] * l[lone] * m[lone])];
        return finish(cfg, cfg, atoms, vec![p0, p1], Regime::Split, psi, None);
    }

    // Intermediate case: both neighbours close, outer pair far.
    let contains = |psi: &[f64]| q_mm_contains(cfg, &DualVector::new(psi.to_vec()), MEMBERSHIP_TOL).contained;

    let (atoms, parts, psi) = single();
    if contains(&psi) {
        return finish(cfg, cfg, atoms, parts, Regime::Single, psi, None);
    }

    // The middle mass splits between the two outer points:
    // value = sum (lambda - lambda^2) m - 2 lambda_2 sqrt(m_2) S,
    // S = sqrt(lambda_1^2 m_1 cos^2 d12 + lambda_3^2 m_3 cos^2 d23), r = (lambda_1 sqrt(m_1) cos d12 / S)^2.
    let (c12, c23) = (cos(d12), cos(d23));
    let (p, q) = (a[0] * c12, a[2] * c23);
    let s = hypot(p, q);
    if s > 0.0 {
        let r = p * p / (s * s);
        let psi = vec![
            far_psi(0) - a[1] * l[0] * l[0] * c12 * c12 / s,
            far_psi(1) - l[1] * s / sqrt(m[1]),
            far_psi(2) - a[1] * l[2] * l[2] * c23 * c23 / s,
        ];
        if contains(&psi) {
            let (y1, s1) = merge(&[(x[0], a[0]), (x[1], l[1] * sqrt(r * m[1]))]);
            let (y2, s2) = merge(&[(x[2], a[2]), (x[1], l[1] * sqrt((1.0 - r) * m[1]))]);
            let parts = vec![vec![m[0], r * m[1], 0.0], vec![0.0, (1.0 - r) * m[1], m[2]]];
            return finish(cfg, cfg, vec![atom(y1, s1), atom(y2, s2)], parts, Regime::Split, psi, None);
        }
    }

    diffuse(cfg, x, m, l)
}

/// `chi` with `sum chi_i e^{2 i x_i} = 0` and `sum chi_i = 2`; phases relative to `x_2`.
fn diffuse_chi(x: &[f64]) -> Option<Vec<f64>> {
    let mut a = vec![0.0; 9];
    for i in 0..3 {
        a[i] = cos(2.0 * (x[i] - x[1]));
        a[3 + i] = sin(2.0 * (x[i] - x[1]));
        a[6 + i] = 1.0;
    }
    solve_dense(&a, &[0.0, 0.0, 2.0], 3)
}

/// Diffuse regime: the certificate is the vertex of `Q_MM` where `f(psi, .) = 1` on
/// all of `[a, b] = [x_3 - pi/2, x_1 + pi/2]`. Any `m` in its normal cone splits as
/// `m_i lambda_i^2 / chi_i^2 = sum_y w_y cos^2(x_i - y)` over `y` in `[a, b]`, and two
/// positions suffice: `a` and the point where the ray from `v(a)` through `u`
/// leaves the cone, `v(y) = (cos^2(x_i - y))_i`.
fn diffuse(cfg: &PointConfig, x: &[f64], m: &[f64], l: &[f64]) -> DiracBarycenter {
    let (a, b) = (x[2] - FRAC_PI_2, x[0] + FRAC_PI_2);
    let chi = diffuse_chi(x).unwrap_or_else(|| vec![2.0 / 3.0; 3]);
    let psi: Vec<f64> = (0..3).map(|i| chi_to_psi(chi[i], l[i])).collect();
    let u: Vec<f64> = (0..3).map(|i| if chi[i] > 0.0 { m[i] * l[i] * l[i] / (chi[i] * chi[i]) } else { 0.0 }).collect();
    let v = |y: f64| -> Vec<f64> {
        (0..3)
            .map(|i| {
                let c = cos_trunc((x[i] - y).abs());
                c * c
            })
            .collect()
    };

    // det[u, v(a), v(y)] = (alpha + beta cos 2(y - x2) + gamma sin 2(y - x2)) / 2 vanishes at
    // y = a and at one more point of the period.
    let va = v(a);
    let cs: Vec<f64> = (0..3).map(|i| cos(2.0 * (x[i] - x[1]))).collect();
    let sn: Vec<f64> = (0..3).map(|i| sin(2.0 * (x[i] - x[1]))).collect();
    let beta = det3(&u, &va, &cs);
    let gamma = det3(&u, &va, &sn);
    let phi = 0.5 * atan2(gamma, beta);
    let mut ystar = x[1] + 2.0 * phi - (a - x[1]);
    ystar -= PI * floor((ystar - a) / PI);
    if ystar <= a + 1e-12 {
        ystar += PI;
    }
    let ystar = ystar.clamp(a, b);
    let mut ys = vec![a, ystar];
    let mut w = crate::math::nnls(&[va.clone(), v(ystar)], &u);
    if residual(&[va, v(ystar)], &w, &u) > 1e-9 * norm(&u) {
        // Off the exact construction (numerically near a regime boundary): fit
        // weights over a fine set of positions in [a, b] instead.
        ys = (0..=256).map(|k| a + (b - a) * k as f64 / 256.0).collect();
        let cols: Vec<Vec<f64>> = ys.iter().map(|&y| v(y)).collect();
        w = crate::math::nnls(&cols, &u);
    }

    let mut parts: Vec<Vec<f64>> = Vec::new();
    let mut pos = Vec::new();
    for (k, &y) in ys.iter().enumerate() {
        if w[k] > 0.0 {
            let vy = v(y);
            parts.push((0..3).map(|i| w[k] * chi[i] * chi[i] * vy[i] / (l[i] * l[i])).collect());
            pos.push(y);
        }
    }
    // Rescale rows so the parts add up to m exactly.
    for i in 0..3 {
        let t: f64 = parts.iter().map(|p| p[i]).sum();
        if t > 0.0 {
            for p in parts.iter_mut() {
                p[i] *= m[i] / t;
            }
        }
    }
    let atoms = parts
        .iter()
        .zip(&pos)
        .map(|(p, &y)| {
            let e: f64 = (0..3).map(|i| l[i] * sqrt(p[i]) * cos_trunc((x[i] - y).abs())).sum();
            ConePoint { position: vec![y], mass: e * e }
        })
        .collect();
    finish(cfg, cfg, atoms, parts, Regime::Diffuse, psi, Some((a, b)))
}

fn det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|a| a * a).sum())
}

fn residual(cols: &[Vec<f64>], w: &[f64], u: &[f64]) -> f64 {
    let r: Vec<f64> = (0..u.len()).map(|i| u[i] - cols.iter().zip(w).map(|(c, wk)| c[i] * wk).sum::<f64>()).collect();
    norm(&r)
}

/// Membership test for three sorted points in the intermediate case
/// (`|x1 - x2|, |x2 - x3| < pi/2 < |x1 - x3|`) in the `chi` coordinates.
///
/// With `W = sum chi_i e^{2 i x_i}` and `delta = arg(W) / 2` taken within `pi/2`
/// of `x_2`: if `delta` lies in `[x_3 - pi/2, x_1 + pi/2]` the full quadratic
/// inequality (with `sum chi <= 2`) applies, otherwise the two pairwise
/// inequalities of the neighbouring points. When `W = 0` the test is `sum chi <= 2`.
pub fn q_mm_transition_1d(x: &[f64; 3], chi: &[f64; 3]) -> bool {
    if chi.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return false;
    }
    let total: f64 = chi.iter().sum();
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..3 {
        re += chi[i] * cos(2.0 * (x[i] - x[1]));
        im += chi[i] * sin(2.0 * (x[i] - x[1]));
    }
    let pair = |j: usize, k: usize| {
        let s = sin(x[j] - x[k]);
        chi[j] + chi[k] - chi[j] * chi[k] * s * s
    };
    if hypot(re, im) <= 1e-14 * total {
        return 0.5 * total <= 1.0;
    }
    let delta = x[1] + 0.5 * atan2(im, re);
    if delta >= x[2] - FRAC_PI_2 && delta <= x[0] + FRAC_PI_2 {
        total <= 2.0 && total - chi[0] * chi[1] * sq(sin(x[0] - x[1])) - chi[1] * chi[2] * sq(sin(x[1] - x[2])) - chi[0] * chi[2] * sq(sin(x[0] - x[2])) <= 1.0
    } else {
        pair(0, 1) <= 1.0 && pair(1, 2) <= 1.0
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

/// Barycenter of up to six Diracs in up to three dimensions via the convex hull
/// decomposition: each part of the optimal mass splitting becomes one atom.
pub fn barycenter_diracs(cfg: &PointConfig) -> Result<DiracBarycenter> {
    if cfg.len() > MAX_DIRACS {
        return Err(invalid("barycenter_diracs handles at most six marginals"));
    }
    if cfg.masses().iter().any(|&m| !(m > 0.0)) {
        return Err(invalid("masses must be positive"));
    }
    let hull = c_mm_hull(cfg);
    let n = cfg.len();
    let atoms = hull.atoms.clone();
    let parts = hull.decomposition.parts.clone();
    let singleton = |j: usize| {
        let p = &parts[j];
        let nz: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0).collect();
        nz.len() == 1 && dist(&atoms[j].position, cfg.position(nz[0])) <= 1e-9
    };
    let mut regime = if atoms.len() == 1 {
        Regime::Single
    } else if atoms.len() == n && (0..atoms.len()).all(singleton) {
        Regime::FarProduct
    } else {
        Regime::Split
    };
    // The active set of the certificate containing a segment between two atoms
    // means other supports are optimal too.
    'outer: for j in 0..atoms.len() {
        for k in j + 1..atoms.len() {
            let (p, q) = (&atoms[j].position, &atoms[k].position);
            if dist(p, q) < PI {
                let flat = [0.25, 0.5, 0.75].iter().all(|&s| {
                    let y: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + s * (b - a)).collect();
                    f_constraint(cfg, &hull.psi, &y) >= 1.0 - 1e-7
                });
                if flat {
                    regime = Regime::Diffuse;
                    break 'outer;
                }
            }
        }
    }
    let r = finish(cfg, cfg, atoms, parts, regime, hull.psi.psi.clone(), None);
    let valid = r.valid && hull.converged && (r.value - hull.dual_value).abs() <= 1e-6 * (1.0 + r.value);
    Ok(DiracBarycenter { valid, ..r })
}

/// Exact barycenter by the most specific solver that applies: the closed forms
/// for two marginals and for three on a line, the hull route up to
/// [`MAX_DIRACS`], and beyond that the far-product barycenter if it is optimal.
pub fn barycenter_exact(cfg: &PointConfig) -> Result<DiracBarycenter> {
    let n = cfg.len();
    if cfg.masses().iter().any(|&m| !(m > 0.0)) {
        return Err(invalid("masses must be positive"));
    }
    match n {
        2 => barycenter_n2(cfg.position(0), cfg.masses()[0], cfg.position(1), cfg.masses()[1], cfg.lambdas()[1]),
        3 if cfg.dim() == 1 => barycenter_n3_1d(cfg),
        _ if n <= MAX_DIRACS => barycenter_diracs(cfg),
        _ => far_product(cfg).ok_or_else(|| {
            invalid("more than six marginals are solved exactly only when the far-product barycenter is optimal")
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_dispatch() {
        let two = cfg1(&[0.3, 0.5], &[2.0, 2.0], &[0.5, 0.5]);
        assert_eq!(barycenter_exact(&two).unwrap(), barycenter_n2(&[0.3], 2.0, &[0.5], 2.0, 0.5).unwrap());
        let far = cfg1(&[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0], &[1.0; 7], &[1.0 / 7.0; 7]);
        let r = barycenter_exact(&far).unwrap();
        assert_eq!(r.regime, Regime::FarProduct);
        let close = cfg1(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6], &[1.0; 7], &[1.0 / 7.0; 7]);
        assert!(barycenter_exact(&close).is_err());
    }

    fn cfg1(x: &[f64], m: &[f64], l: &[f64]) -> PointConfig {
        let pos: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        PointConfig::new(&pos, m.to_vec(), Weights::new(l.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn n2_close_midpoint() {
        let r = barycenter_n2(&[0.0], 1.0, &[1.0], 1.0, 0.5).unwrap();
        assert_eq!(r.regime, Regime::Single);
        assert!(r.valid);
        assert!((r.atoms[0].position[0] - 0.5).abs() < 1e-14);
        assert!((r.atoms[0].mass - cos(0.5) * cos(0.5)).abs() < 1e-14);
    }

    #[test]
    fn n2_far_keeps_both_points() {
        let r = barycenter_n2(&[0.0, 0.0], 3.0, &[2.0, 0.0], 5.0, 0.5).unwrap();
        assert_eq!(r.regime, Regime::FarProduct);
        assert!(r.valid);
        assert!((r.atoms[0].mass - 0.75).abs() < 1e-15 && (r.atoms[1].mass - 1.25).abs() < 1e-15);
    }

    #[test]
    fn n2_boundary_is_flagged() {
        let r = barycenter_n2(&[0.0], 1.0, &[FRAC_PI_2], 1.0, 0.5).unwrap();
        assert!(r.boundary);
        assert_eq!(r.regime, Regime::Diffuse);
        assert_eq!(r.atoms.len(), 1);
        assert!(r.valid);
    }

    #[test]
    fn n2_rejects_bad_input() {
        assert!(barycenter_n2(&[0.0], 1.0, &[1.0], 1.0, 1.0).is_err());
        assert!(barycenter_n2(&[0.0], 0.0, &[1.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn n3_all_far() {
        let t = 1.0 / 3.0;
        let r = barycenter_n3_1d(&cfg1(&[4.0, 0.0, 2.0], &[9.0, 9.0, 9.0], &[t, 1.0 - 2.0 * t, t])).unwrap();
        assert_eq!(r.regime, Regime::FarProduct);
        assert!(r.valid);
        for a in &r.atoms {
            assert!((a.mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn n3_two_close_one_far() {
        let l = [0.2, 0.3, 0.5];
        let r = barycenter_n3_1d(&cfg1(&[0.0, 0.8, 3.0], &[1.0, 2.0, 1.5], &l)).unwrap();
        assert_eq!(r.regime, Regime::Split);
        assert!(r.valid, "{r:?}");
        let pair = barycenter_n2(&[0.0], 1.0, &[0.8], 2.0, 0.6).unwrap();
        // Renormalized weights (0.4, 0.6) give the same position.
        assert!((r.atoms[0].position[0] - pair.atoms[0].position[0]).abs() < 1e-12);
        assert!((r.atoms[1].mass - 0.25 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn n3_intermediate_regimes_follow_middle_mass() {
        let x = [0.0, 1.0, 2.0];
        let l = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let heavy = barycenter_n3_1d(&cfg1(&x, &[1.0, 50.0, 1.0], &l)).unwrap();
        assert_eq!(heavy.regime, Regime::Single);
        let light = barycenter_n3_1d(&cfg1(&x, &[1.0, 0.01, 1.0], &l)).unwrap();
        assert_eq!(light.regime, Regime::Split);
        for r in [&heavy, &light] {
            assert!(r.valid, "{r:?}");
        }
        let seen: Vec<Regime> = (0..60)
            .map(|k| barycenter_n3_1d(&cfg1(&x, &[1.0, 50.0 * 0.85f64.powi(k), 1.0], &l)).unwrap())
            .map(|r| {
                assert!(r.valid, "{r:?}");
                r.regime
            })
            .collect();
        assert!(seen.contains(&Regime::Diffuse));
    }

    #[test]
    fn diffuse_representative_is_optimal() {
        let x = [0.0, 1.0, 2.0];
        let l = [1.0 / 3.0; 3];
        let mut hits = 0;
        for k in 0..80 {
            let m2 = 0.05 * 1.08f64.powi(k);
            let r = barycenter_n3_1d(&cfg1(&x, &[1.0, m2, 1.0], &l)).unwrap();
            if r.regime == Regime::Diffuse {
                assert!(r.valid, "{r:?}");
                assert!(r.atoms.len() <= 2, "{r:?}");
                let (a, b) = r.support.unwrap();
                assert!(r.atoms.iter().all(|p| p.position[0] >= a - 1e-12 && p.position[0] <= b + 1e-12));
                hits += 1;
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn transition_test_matches_exact_sup() {
        let x = [0.0, 1.0, 2.0];
        let cfg = cfg1(&x, &[1.0, 1.0, 1.0], &[1.0 / 3.0; 3]);
        let mut k = 0u64;
        for i in 1..20 {
            for j in 1..20 {
                for h in 1..20 {
                    let chi = [i as f64 / 20.0, j as f64 / 20.0, h as f64 / 20.0];
                    let psi = DualVector::from_chi(&chi, cfg.lambdas());
                    let mem = q_mm_contains(&cfg, &psi, 0.0);
                    if (mem.sup - 1.0).abs() > 1e-9 {
                        assert_eq!(q_mm_transition_1d(&x, &chi), mem.contained, "{chi:?} sup {}", mem.sup);
                        k += 1;
                    }
                }
            }
        }
        assert!(k > 1000);
    }

    #[test]
    fn general_route_matches_n2() {
        let c = PointConfig::new(&[vec![0.0, 0.0], vec![0.6, 0.8]], vec![1.0, 2.0], Weights::new(vec![0.3, 0.7]).unwrap()).unwrap();
        let g = barycenter_diracs(&c).unwrap();
        let e = barycenter_n2(&[0.0, 0.0], 1.0, &[0.6, 0.8], 2.0, 0.7).unwrap();
        assert!(g.valid);
        assert!((g.value - e.value).abs() < 1e-8);
        assert!(dist(&g.atoms[0].position, &e.atoms[0].position) < 1e-6);
    }
}
