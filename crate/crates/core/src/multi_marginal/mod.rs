//! Multi-marginal cost of N weighted Diracs, its convex hull in the masses,
//! and the dual set `Q_MM` that certifies optimality.
//!
//! Notation: `Cos(s) = cos(min(s, pi/2))`, weights `lambda`, and the scaled dual
//! coordinates `chi_i = lambda_i / (1 - psi_i / lambda_i)`, inverse
//! `psi_i = lambda_i - lambda_i^2 / chi_i`.

mod hull;
mod search;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::hk::{cos_trunc, ConePoint};
use crate::math::{atan2, cos, dist, sin, sqrt, FRAC_PI_2};
use crate::measures::Weights;

pub use hull::{c_mm_hull, HullSolution};
pub(crate) use search::{cos2_maxima_1d, mean_shift, BoxSearch, Kernel};

/// Largest dimension handled by the multi-marginal routines.
pub const MAX_DIM: usize = 3;

/// Slack on the width of a window when deciding that points fit in `pi/2`.
pub const WINDOW_TOL: f64 = 1e-12;

/// Dirac positions, masses and weights `(x, m, lambda)` of N marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    dim: usize,
    coords: Vec<f64>,
    masses: Vec<f64>,
    weights: Weights,
}

impl PointConfig {
    pub fn new(positions: &[Vec<f64>], masses: Vec<f64>, weights: Weights) -> Result<Self> {
        let dim = positions.first().map(|p| p.len()).unwrap_or(0);
        if positions.iter().any(|p| p.len() != dim) {
            return Err(invalid("all positions must have the same dimension"));
        }
        Self::from_flat(dim, positions.concat(), masses, weights)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>, masses: Vec<f64>, weights: Weights) -> Result<Self> {
        let n = masses.len();
        if n < 2 {
            return Err(invalid("a point configuration needs at least two marginals"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!("dimension {dim} not supported (1..={MAX_DIM})")));
        }
        if coords.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, got: coords.len() });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(invalid("positions must be finite"));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(invalid("masses must be finite and nonnegative"));
        }
        Ok(PointConfig { dim, coords, masses, weights })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn weights(&self) -> &Weights {
        &self.weights
    }
    pub fn lambdas(&self) -> &[f64] {
        self.weights.as_slice()
    }

    /// Same positions and weights with new masses.
    pub fn with_masses(&self, masses: Vec<f64>) -> Result<PointConfig> {
        PointConfig::from_flat(self.dim, self.coords.clone(), masses, self.weights.clone())
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(dist(self.position(i), self.position(j)));
            }
        }
        d
    }

    /// Whether this is a 1D configuration inside a window of width `pi/2`.
    pub fn in_quarter_window(&self) -> bool {
        self.dim == 1 && self.diameter() <= FRAC_PI_2 + WINDOW_TOL
    }

    pub(crate) fn search(&self) -> BoxSearch {
        BoxSearch::new(&self.coords, self.dim)
    }
}

/// A dual vector `psi` tested against `Q_MM`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub psi: Vec<f64>,
}

impl DualVector {
    pub fn new(psi: Vec<f64>) -> Self {
        DualVector { psi }
    }

    /// `chi_i = lambda_i^2 / (lambda_i - psi_i)`; `+inf` once `psi_i >= lambda_i - 1e-14`.
    pub fn chi(&self, lambdas: &[f64]) -> Vec<f64> {
        self.psi.iter().zip(lambdas).map(|(&p, &l)| psi_to_chi(p, l)).collect()
    }

    pub fn from_chi(chi: &[f64], lambdas: &[f64]) -> Self {
        DualVector { psi: chi.iter().zip(lambdas).map(|(&c, &l)| chi_to_psi(c, l)).collect() }
    }

    /// `sum_i psi_i m_i`, with `psi_i = -inf` against `m_i = 0` contributing nothing.
    pub fn dot(&self, m: &[f64]) -> f64 {
        self.psi.iter().zip(m).map(|(&p, &mi)| if mi == 0.0 { 0.0 } else { p * mi }).sum()
    }
}

pub fn psi_to_chi(psi: f64, lambda: f64) -> f64 {
    if psi == f64::NEG_INFINITY {
        0.0
    } else if psi < lambda - 1e-14 {
        lambda * lambda / (lambda - psi)
    } else {
        f64::INFINITY
    }
}

pub fn chi_to_psi(chi: f64, lambda: f64) -> f64 {
    if chi <= 0.0 {
        f64::NEG_INFINITY
    } else {
        lambda - lambda * lambda / chi
    }
}

/// Mass splitting `m = sum_j m^j` of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub parts: Vec<Vec<f64>>,
}

impl Decomposition {
    pub fn trivial(m: &[f64]) -> Self {
        Decomposition { parts: vec![m.to_vec()] }
    }
    pub fn len(&self) -> usize {
        self.parts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
    /// Componentwise sum of the parts.
    pub fn total(&self) -> Vec<f64> {
        let n = self.parts.first().map(|p| p.len()).unwrap_or(0);
        (0..n).map(|i| self.parts.iter().map(|p| p[i]).sum()).collect()
    }
}

/// Value of `c_mm` together with its minimizing cone point `(y, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmmValue {
    pub value: f64,
    pub minimizer: ConePoint,
}

/// `sum_i lambda_i sqrt(m_i) Cos|x_i - y|`.
fn eta(cfg: &PointConfig, y: &[f64]) -> f64 {
    let l = cfg.lambdas();
    (0..cfg.len())
        .map(|i| {
            let m = cfg.masses[i];
            if m > 0.0 {
                l[i] * sqrt(m) * cos_trunc(dist(cfg.position(i), y))
            } else {
                0.0
            }
        })
        .sum()
}

fn weighted_mass(cfg: &PointConfig) -> f64 {
    cfg.lambdas().iter().zip(&cfg.masses).map(|(l, m)| l * m).sum()
}

/// Auxiliary cost at a fixed barycenter position:
/// `sum_i lambda_i m_i - (sum_i lambda_i sqrt(m_i) Cos|x_i - y|)^2`.
pub fn c_mm_aux(cfg: &PointConfig, y: &[f64]) -> f64 {
    let e = eta(cfg, y);
    (weighted_mass(cfg) - e * e).max(0.0)
}

/// Analytic gradient of `c_mm_aux` in the masses (entries with `m_i = 0` are `-inf`
/// when `Cos > 0`).
pub fn c_mm_aux_grad(cfg: &PointConfig, y: &[f64]) -> Vec<f64> {
    let e = eta(cfg, y);
    let l = cfg.lambdas();
    (0..cfg.len())
        .map(|i| {
            let c = cos_trunc(dist(cfg.position(i), y));
            let m = cfg.masses[i];
            if c == 0.0 {
                l[i]
            } else if m > 0.0 {
                l[i] - e * l[i] * c / sqrt(m)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Multi-marginal cost: the minimum of `c_mm_aux` over the convex hull of the
/// positions. Uses the closed form in 1D when the points fit in a `pi/2` window.
pub fn c_mm(cfg: &PointConfig) -> CmmValue {
    if cfg.in_quarter_window() {
        if let Ok(v) = c_mm_1d_closed(cfg) {
            return v;
        }
    }
    c_mm_search(cfg)
}

/// `c_mm` by global search over the hull, without the 1D closed form.
pub fn c_mm_search(cfg: &PointConfig) -> CmmValue {
    let f = |y: &[f64]| eta(cfg, y);
    let (mut y, mut e) = cfg.search().maximize(&f);
    if cfg.dim > 1 {
        let l = cfg.lambdas();
        let a: Vec<f64> = (0..cfg.len()).map(|i| l[i] * sqrt(cfg.masses[i].max(0.0))).collect();
        let z = mean_shift(&cfg.coords, cfg.dim, &a, Kernel::Cos, &y);
        let ez = f(&z);
        if ez >= e {
            (y, e) = (z, ez);
        }
    }
    let e = e.max(0.0);
    CmmValue {
        value: (weighted_mass(cfg) - e * e).max(0.0),
        minimizer: ConePoint { position: y, mass: e * e },
    }
}

/// Closed form of `c_mm` for 1D points inside a `pi/2` window.
///
/// With `z = sum_i lambda_i sqrt(m_i) e^{i x_i}` the minimizer is `y = arg z`,
/// `s = |z|^2`, and the value is
/// `sum_i lambda_i m_i - sum_{i,j} lambda_i lambda_j sqrt(m_i m_j) cos(x_i - x_j)`.
/// When `z = 0` the position falls back to the first point.
pub fn c_mm_1d_closed(cfg: &PointConfig) -> Result<CmmValue> {
    if cfg.dim != 1 {
        return Err(invalid("c_mm_1d_closed needs d = 1"));
    }
    if !cfg.in_quarter_window() {
        return Err(invalid("c_mm_1d_closed needs all positions within a pi/2 window"));
    }
    let l = cfg.lambdas();
    let x: Vec<f64> = (0..cfg.len()).map(|i| cfg.position(i)[0]).collect();
    // Phases relative to the first point keep the argument inside (-pi/2, pi/2].
    let x0 = x[0];
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..cfg.len() {
        let a = l[i] * sqrt(cfg.masses[i]);
        re += a * cos(x[i] - x0);
        im += a * sin(x[i] - x0);
    }
    let s = re * re + im * im;
    let y = if s == 0.0 { x0 } else { x0 + atan2(im, re) };
    let mut double = 0.0;
    for i in 0..cfg.len() {
        for j in 0..cfg.len() {
            double += l[i] * l[j] * sqrt(cfg.masses[i] * cfg.masses[j]) * cos(x[i] - x[j]);
        }
    }
    Ok(CmmValue { value: (weighted_mass(cfg) - double).max(0.0), minimizer: ConePoint { position: vec![y], mass: s } })
}

/// `sum_i lambda_i Cos^2|x_i - y| / (1 - psi_i / lambda_i)` with the conventions
/// `psi_i > lambda_i -> +inf`, and at `psi_i = lambda_i` a term of `+inf` when
/// `Cos > 0` and `0` when `Cos = 0`.
pub fn f_constraint(cfg: &PointConfig, psi: &DualVector, y: &[f64]) -> f64 {
    let l = cfg.lambdas();
    let mut s = 0.0;
    for i in 0..cfg.len() {
        let p = psi.psi[i];
        if p > l[i] {
            return f64::INFINITY;
        }
        let c = cos_trunc(dist(cfg.position(i), y));
        let chi = psi_to_chi(p, l[i]);
        if chi == f64::INFINITY {
            if c > 0.0 {
                return f64::INFINITY;
            }
        } else {
            s += chi * c * c;
        }
    }
    s
}

/// Outcome of a `Q_MM` membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub contained: bool,
    /// Supremum of `f_constraint` over the hull.
    pub sup: f64,
    /// A position where the supremum is attained.
    pub worst_y: Vec<f64>,
}

/// Whether `psi` lies in `Q_MM(x)` up to `tol`.
///
/// Checks `psi_i <= lambda_i - lambda_i^2 + tol` and `sup_y f_constraint <= 1 + tol`.
/// In 1D the supremum is exact, since `f` is a piecewise sinusoid in `y`;
/// otherwise it is found by lattice search with local refinement.
pub fn q_mm_contains(cfg: &PointConfig, psi: &DualVector, tol: f64) -> Membership {
    let l = cfg.lambdas();
    let bound_ok = (0..cfg.len()).all(|i| psi.psi[i] <= l[i] - l[i] * l[i] + tol);
    let (worst_y, sup) = sup_f(cfg, psi);
    Membership { contained: bound_ok && sup <= 1.0 + tol, sup, worst_y }
}

pub(crate) fn sup_f(cfg: &PointConfig, psi: &DualVector) -> (Vec<f64>, f64) {
    let chi = psi.chi(cfg.lambdas());
    // An infinite chi_i makes f infinite at y = x_i already.
    if let Some(i) = chi.iter().position(|c| !c.is_finite()) {
        return (cfg.position(i).to_vec(), f64::INFINITY);
    }
    if cfg.dim == 1 {
        return cos2_maxima_1d(&cfg.coords, &chi).swap_remove(0);
    }
    let f = |y: &[f64]| f_constraint(cfg, psi, y);
    let seeds: Vec<Vec<f64>> = (0..cfg.len()).map(|i| cfg.position(i).to_vec()).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for (y, v) in cfg.search().local_maxima_seeded(&f, &seeds) {
        let z = mean_shift(&cfg.coords, cfg.dim, &chi, Kernel::Cos2, &y);
        let w = f(&z);
        let cand = if w >= v { (z, w) } else { (y, v) };
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Quadratic membership test for 1D points in a `pi/2` window:
/// `chi in (0,1]^N`, `sum chi <= 2` and
/// `sum_i chi_i - sum_{j<k} chi_j chi_k sin^2(x_j - x_k) <= 1`.
///
/// The quadratic inequality alone describes two branches of a hyperboloid; the
/// bound `sum chi <= 2` selects the one bounding `Q_MM`. For two points it
/// already follows from `chi <= 1`.
pub fn q_mm_quadratic_1d(cfg: &PointConfig, chi: &[f64]) -> bool {
    if cfg.dim != 1 || chi.len() != cfg.len() || !cfg.in_quarter_window() {
        return false;
    }
    if chi.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return false;
    }
    let total: f64 = chi.iter().sum();
    if total > 2.0 {
        return false;
    }
    let mut q = 0.0;
    for j in 0..chi.len() {
        for k in j + 1..chi.len() {
            let s = sin(cfg.position(j)[0] - cfg.position(k)[0]);
            q += chi[j] * chi[k] * s * s;
        }
    }
    total - q <= 1.0
}

/// The unique minimizer `(y, s)` of the pointwise barycenter problem for a
/// configuration whose cost equals its convex hull value.
pub fn pointwise_barycenter(cfg: &PointConfig) -> Result<ConePoint> {
    if cfg.masses.iter().all(|&m| m == 0.0) {
        return Err(invalid("pointwise_barycenter needs nonzero masses"));
    }
    let direct = c_mm(cfg);
    let hull = c_mm_hull(cfg);
    if direct.value - hull.value > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "configuration is not in S: c_mm = {} exceeds its convex hull {}",
            direct.value, hull.value
        )));
    }
    Ok(direct.minimizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hk::hk_dirac_sq;

    fn cfg1(x: &[f64], m: &[f64], l: &[f64]) -> PointConfig {
        let pos: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        PointConfig::new(&pos, m.to_vec(), Weights::new(l.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn aux_cost_example() {
        let c = cfg1(&[0.0, FRAC_PI_2], &[1.0, 1.0], &[0.5, 0.5]);
        assert!((c_mm_aux(&c, &[0.0]) - 0.75).abs() < 1e-15);
        let z = cfg1(&[0.0, 1.0], &[0.0, 0.0], &[0.5, 0.5]);
        assert_eq!(c_mm_aux(&z, &[0.3]), 0.0);
    }

    #[test]
    fn equal_positions() {
        let c = cfg1(&[0.4, 0.4, 0.4], &[1.0, 4.0, 9.0], &[0.2, 0.3, 0.5]);
        let e: f64 = 0.2 * 1.0 + 0.3 * 2.0 + 0.5 * 3.0;
        let v = c_mm(&c);
        assert!((v.value - (0.2 + 1.2 + 4.5 - e * e)).abs() < 1e-12);
        assert!((v.minimizer.position[0] - 0.4).abs() < 1e-12);
        assert!((v.minimizer.mass - e * e).abs() < 1e-12);
    }

    #[test]
    fn two_points_close_is_weighted_cone_cost() {
        let t = 0.3;
        let c = cfg1(&[0.1, 1.2], &[0.7, 1.9], &[1.0 - t, t]);
        let v = c_mm(&c).value;
        let expect = (1.0 - t) * t * hk_dirac_sq(&[0.1], 0.7, &[1.2], 1.9);
        assert!((v - expect).abs() < 1e-12);
        let s = c_mm_search(&c).value;
        assert!((s - expect).abs() < 1e-10);
    }

    #[test]
    fn closed_form_midpoint() {
        let th = 1.1;
        let c = cfg1(&[0.0, th], &[1.0, 1.0], &[0.5, 0.5]);
        let v = c_mm_1d_closed(&c).unwrap();
        assert!((v.minimizer.position[0] - th / 2.0).abs() < 1e-14);
        assert!((v.minimizer.mass - cos(th / 2.0) * cos(th / 2.0)).abs() < 1e-14);
        assert!((c_mm_aux(&c, &v.minimizer.position) - v.value).abs() < 1e-12);
        assert!(c_mm_1d_closed(&cfg1(&[0.0, 2.0], &[1.0, 1.0], &[0.5, 0.5])).is_err());
    }

    #[test]
    fn f_constraint_conventions() {
        let c = cfg1(&[0.0, 2.0], &[1.0, 1.0], &[0.5, 0.5]);
        let zero = DualVector::new(vec![0.0, 0.0]);
        assert!(f_constraint(&c, &zero, &[0.5]) <= 1.0);
        let single = DualVector::new(vec![0.25, 0.0]);
        assert!((f_constraint(&c, &single, &[0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(f_constraint(&c, &DualVector::new(vec![0.6, 0.0]), &[0.0]), f64::INFINITY);
        // psi_i = lambda_i where Cos vanishes contributes nothing.
        assert!((f_constraint(&c, &DualVector::new(vec![0.0, 0.5]), &[0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(f_constraint(&c, &DualVector::new(vec![0.0, 0.5]), &[1.0]), f64::INFINITY);
    }

    #[test]
    fn quadratic_test_needs_branch_bound() {
        // Passes the quadratic inequality with equality, yet f = 2 at y = pi/4.
        let c = cfg1(&[0.0, FRAC_PI_2 / 2.0, FRAC_PI_2], &[1.0; 3], &[1.0 / 3.0; 3]);
        assert!(!q_mm_quadratic_1d(&c, &[1.0, 1.0, 1.0]));
        let psi = DualVector::from_chi(&[1.0, 1.0, 1.0], c.lambdas());
        let m = q_mm_contains(&c, &psi, 1e-9);
        assert!(!m.contained && (m.sup - 2.0).abs() < 1e-12);
        let c2 = cfg1(&[0.0, 1.0], &[1.0; 2], &[0.5; 2]);
        let s = sin(1.0) * sin(1.0);
        assert!(q_mm_quadratic_1d(&c2, &[1.0, 1.0 - 1e-9]) == (2.0 - 1e-9 - (1.0 - 1e-9) * s <= 1.0));
    }

    #[test]
    fn nonpositive_psi_is_contained() {
        let c = cfg1(&[0.0, 0.7, 2.5], &[1.0; 3], &[0.2, 0.3, 0.5]);
        let m = q_mm_contains(&c, &DualVector::new(vec![-0.1, 0.0, -2.0]), 1e-9);
        assert!(m.contained);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = cfg1(&[0.0, 0.9, 1.4], &[0.8, 1.3, 0.5], &[0.3, 0.3, 0.4]);
        let y = [0.6];
        let g = c_mm_aux_grad(&c, &y);
        for i in 0..3 {
            let h = 1e-6;
            let mut mp = c.masses().to_vec();
            let mut mm = mp.clone();
            mp[i] += h;
            mm[i] -= h;
            let fd = (c_mm_aux(&c.with_masses(mp).unwrap(), &y) - c_mm_aux(&c.with_masses(mm).unwrap(), &y)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5);
        }
    }
}
