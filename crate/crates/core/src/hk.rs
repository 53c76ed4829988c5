//! The HK cone cost, closed forms for Dirac measures, and the entropic
//! soft-marginal distance solver on grids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{cos, dist, ln, sqrt, Anderson, FRAC_PI_2};
use crate::measures::GridMeasure;
use crate::stencil::{log_vec, support, Stencil};

/// A point `(x, m)` of the cone over the domain: a Dirac of mass `m` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub position: Vec<f64>,
    pub mass: f64,
}

impl ConePoint {
    pub fn new(position: Vec<f64>, mass: f64) -> Result<Self> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(invalid(format!("cone point mass {mass} must be finite and nonnegative")));
        }
        Ok(ConePoint { position, mass })
    }
}

/// `cos(min(s, pi/2))`.
pub fn cos_trunc(s: f64) -> f64 {
    if s >= FRAC_PI_2 {
        0.0
    } else {
        cos(s)
    }
}

/// Squared HK distance between two weighted Diracs.
pub fn cone_cost(p: &ConePoint, q: &ConePoint) -> f64 {
    hk_dirac_sq(&p.position, p.mass, &q.position, q.mass)
}

/// `HK^2(m1 delta_x1, m2 delta_x2) = m1 + m2 - 2 sqrt(m1 m2) Cos|x1 - x2|`.
pub fn hk_dirac_sq(x1: &[f64], m1: f64, x2: &[f64], m2: f64) -> f64 {
    let v = m1 + m2 - 2.0 * sqrt(m1 * m2) * cos_trunc(dist(x1, x2));
    v.max(0.0)
}

/// `HK^2(m delta_x, sum_j s_j delta_{y_j})`.
///
/// Transport from a single Dirac is optimal when the source mass is split in
/// proportion to `s_j Cos^2|x - y_j|`, which gives
/// `m + sum s_j - 2 sqrt(m sum_j s_j Cos^2|x - y_j|)`.
pub fn hk_dirac_discrete_sq(x: &[f64], m: f64, atoms: &[(Vec<f64>, f64)]) -> f64 {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let w: f64 = atoms
        .iter()
        .map(|(y, s)| {
            let c = cos_trunc(dist(x, y));
            s * c * c
        })
        .sum();
    (m + total - 2.0 * sqrt(m * w)).max(0.0)
}

/// Lower bound `(sqrt|mu1| - sqrt|mu2|)^2` on `HK^2(mu1, mu2)`.
pub fn mass_lower_bound(m1: f64, m2: f64) -> f64 {
    let d = sqrt(m1) - sqrt(m2);
    d * d
}

/// `sum_k nu_k phi(mu_k / nu_k)` with `phi(s) = s log s - s + 1`.
pub fn kl_divergence(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    if mu.shape() != nu.shape() {
        return Err(invalid("kl_divergence: incompatible grids"));
    }
    Ok(kl_values(mu.values(), nu.values()))
}

pub(crate) fn kl_values(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * ln(a / b) - a + b;
        } else {
            s += b;
        }
    }
    s
}

/// Soft-marginal transport cost `-2 log cos|x1 - x2|`, infinite from `pi/2` on.
pub fn hk_kl_cost(x1: &[f64], x2: &[f64]) -> f64 {
    hk_kl_cost_dist(dist(x1, x2))
}

pub fn hk_kl_cost_dist(d: f64) -> f64 {
    if d >= FRAC_PI_2 {
        return f64::INFINITY;
    }
    let c = cos(d);
    if c <= 0.0 {
        f64::INFINITY
    } else {
        -2.0 * ln(c)
    }
}

/// Parameters of the entropic scaling iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    pub epsilon_decay: f64,
    pub max_iter_per_epsilon: usize,
    /// Stop an epsilon stage once the relative change of the plan marginals
    /// between two iterations falls below this value.
    pub marginal_tol: f64,
    pub cost_cutoff: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon_start: 1.0,
            epsilon_final: 1e-4,
            epsilon_decay: 0.5,
            max_iter_per_epsilon: 2000,
            marginal_tol: 1e-9,
            cost_cutoff: FRAC_PI_2 - 1e-9,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.epsilon_start) || !pos(self.epsilon_final) {
            return Err(invalid("epsilon_start and epsilon_final must be positive"));
        }
        if self.epsilon_final > self.epsilon_start {
            return Err(invalid("epsilon_final must not exceed epsilon_start"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(invalid("epsilon_decay must lie in (0, 1)"));
        }
        if self.max_iter_per_epsilon == 0 {
            return Err(invalid("max_iter_per_epsilon must be at least 1"));
        }
        if !pos(self.marginal_tol) {
            return Err(invalid("marginal_tol must be positive"));
        }
        if !(pos(self.cost_cutoff) && self.cost_cutoff < FRAC_PI_2) {
            return Err(invalid("cost_cutoff must lie in (0, pi/2)"));
        }
        Ok(())
    }

    /// The geometric epsilon schedule, ending exactly at `epsilon_final`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.epsilon_start];
        let mut e = self.epsilon_start;
        while e > self.epsilon_final {
            e = (e * self.epsilon_decay).max(self.epsilon_final);
            out.push(e);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HkSolution {
    /// Transport cost plus both KL penalties of the final plan (entropy excluded).
    pub value: f64,
    pub marginals: (GridMeasure, GridMeasure),
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn check_same_grid(a: &GridMeasure, b: &GridMeasure) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DomainMismatch);
    }
    let tol = 1e-12 * (1.0 + a.domain().diameter());
    let same = a
        .domain()
        .lower()
        .iter()
        .chain(a.domain().upper())
        .zip(b.domain().lower().iter().chain(b.domain().upper()))
        .all(|(x, y)| (x - y).abs() <= tol);
    if same {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// Entropic approximation of `HK^2(mu1, mu2)` through the soft-marginal
/// formulation with cost `-2 log cos|x - y|` and KL marginal penalties.
///
/// Potentials are kept in the log domain throughout. Each stage of the
/// epsilon schedule alternates the two KL-proximal scaling updates, with
/// Anderson acceleration on the first potential.
pub fn hk_distance_sq(mu1: &GridMeasure, mu2: &GridMeasure, cfg: &SinkhornConfig) -> Result<HkSolution> {
    cfg.validate()?;
    check_same_grid(mu1, mu2)?;
    let n = mu1.len();
    let m1 = mu1.total_mass();
    let m2 = mu2.total_mass();
    if m1 <= 0.0 && m2 <= 0.0 {
        return Err(invalid("hk_distance_sq needs at least one nonzero measure"));
    }
    let zero = mu1.with_values(vec![0.0; n])?;
    if m1 <= 0.0 || m2 <= 0.0 {
        return Ok(HkSolution { value: m1 + m2, marginals: (zero.clone(), zero), converged: true, iterations: 0 });
    }

    let stencil = Stencil::new(mu1, cfg.cost_cutoff);
    let lmu1 = log_vec(mu1.values());
    let lmu2 = log_vec(mu2.values());
    let s2 = support(mu2.values());
    // Sources that can reach some target: rows of the others stay empty.
    let s1: Vec<usize> = {
        let mut reach = vec![false; n];
        stencil.for_each_edge(&s2, |_, t, _| reach[t] = true);
        support(mu1.values()).into_iter().filter(|&s| reach[s]).collect()
    };
    if s1.is_empty() {
        return Ok(HkSolution { value: m1 + m2, marginals: (zero.clone(), zero), converged: true, iterations: 0 });
    }

    let mut f = vec![0.0; s1.len()];
    let mut u = vec![f64::NEG_INFINITY; n];
    let mut v = vec![f64::NEG_INFINITY; n];
    let mut buf = vec![f64::NEG_INFINITY; n];
    let mut iterations = 0;
    let mut converged = false;

    let g_step = |u: &[f64], v: &mut [f64], buf: &mut [f64], eps: f64| {
        stencil.scatter(&s1, u, eps, buf);
        for &t in &s2 {
            v[t] = if buf[t].is_finite() { (lmu2[t] - buf[t]) / (1.0 + eps) } else { f64::NEG_INFINITY };
        }
    };

    let schedule = cfg.schedule();
    for &eps in &schedule {
        let mut aa = Anderson::new(6);
        converged = false;
        for _ in 0..cfg.max_iter_per_epsilon {
            iterations += 1;
            for (k, &s) in s1.iter().enumerate() {
                u[s] = f[k] / eps;
            }
            g_step(&u, &mut v, &mut buf, eps);
            stencil.gather(&s1, &v, eps, &mut buf);
            let fnew: Vec<f64> = s1.iter().map(|&s| eps * (lmu1[s] - buf[s]) / (1.0 + eps)).collect();
            let change = fnew.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / eps;
            f = aa.step(&f, &fnew);
            if change < cfg.marginal_tol {
                f = fnew;
                converged = true;
                break;
            }
        }
    }

    let eps = *schedule.last().unwrap_or(&cfg.epsilon_final);
    for (k, &s) in s1.iter().enumerate() {
        u[s] = f[k] / eps;
    }
    g_step(&u, &mut v, &mut buf, eps);
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut transport = 0.0;
    stencil.for_each_edge(&s1, |s, t, c| {
        let lg = u[s] + v[t] - c / eps;
        if lg > f64::NEG_INFINITY {
            let gam = crate::math::exp(lg);
            p1[s] += gam;
            p2[t] += gam;
            transport += gam * c;
        }
    });
    let value = transport + kl_values(&p1, mu1.values()) + kl_values(&p2, mu2.values());
    Ok(HkSolution {
        value,
        marginals: (mu1.with_values(p1)?, mu2.with_values(p2)?),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Domain;

    fn grid1(n: usize, lo: f64, hi: f64, cells: &[(usize, f64)]) -> GridMeasure {
        let mut v = vec![0.0; n];
        for &(k, m) in cells {
            v[k] += m;
        }
        GridMeasure::new(Domain::new(vec![lo], vec![hi]).unwrap(), vec![n], v).unwrap()
    }

    #[test]
    fn cone_cost_examples() {
        assert_eq!(cos_trunc(0.0), 1.0);
        assert_eq!(cos_trunc(FRAC_PI_2), 0.0);
        assert_eq!(cos_trunc(3.0), 0.0);
        assert!((hk_dirac_sq(&[0.0], 1.0, &[2.0], 1.0) - 2.0).abs() < 1e-15);
        let pi3 = core::f64::consts::PI / 3.0;
        assert!((hk_dirac_sq(&[0.0], 1.0, &[pi3], 4.0) - 3.0).abs() < 1e-12);
        assert!((hk_dirac_sq(&[0.3], 1.0, &[0.3], 4.0) - 1.0).abs() < 1e-15);
        assert_eq!(hk_dirac_sq(&[0.3], 2.5, &[1.0], 0.0), 2.5);
    }

    #[test]
    fn kl_and_log_cost_examples() {
        let nu = grid1(4, 0.0, 1.0, &[(0, 0.5), (1, 0.25), (2, 0.25)]);
        let mu = nu.with_values(nu.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!(kl_divergence(&nu, &nu).unwrap().abs() < 1e-15);
        assert!((kl_divergence(&mu, &nu).unwrap() - (2.0 * ln(2.0) - 1.0)).abs() < 1e-14);
        let bad = nu.with_values(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(kl_divergence(&bad, &nu).unwrap(), f64::INFINITY);
        let pi3 = core::f64::consts::PI / 3.0;
        assert!((hk_kl_cost(&[0.0], &[pi3]) - 2.0 * ln(2.0)).abs() < 1e-12);
        assert_eq!(hk_kl_cost(&[0.0], &[FRAC_PI_2]), f64::INFINITY);
        assert_eq!(hk_kl_cost(&[0.4], &[0.4]), 0.0);
    }

    #[test]
    fn dirac_to_discrete_matches_single_atom() {
        let a = hk_dirac_discrete_sq(&[0.1], 2.0, &[(vec![0.7], 0.5)]);
        assert!((a - hk_dirac_sq(&[0.1], 2.0, &[0.7], 0.5)).abs() < 1e-14);
    }

    #[test]
    fn entropic_two_diracs_close_to_closed_form() {
        // Nodes at k * 0.025; cells 20 and 60 are exactly 1.0 apart.
        let a = grid1(161, 0.0, 4.0, &[(20, 1.0)]);
        let b = grid1(161, 0.0, 4.0, &[(60, 1.0)]);
        let r = hk_distance_sq(&a, &b, &SinkhornConfig::default()).unwrap();
        let exact = 2.0 - 2.0 * cos(1.0);
        assert!(r.converged);
        assert!((r.value - exact).abs() < 0.02 * exact, "{} vs {}", r.value, exact);
        let r2 = hk_distance_sq(&b, &a, &SinkhornConfig::default()).unwrap();
        assert!((r.value - r2.value).abs() < 1e-6);
    }

    #[test]
    fn entropic_identical_and_zero_measures() {
        let a = grid1(101, 0.0, 2.0, &[(10, 0.3), (40, 0.5), (41, 0.2)]);
        let r = hk_distance_sq(&a, &a, &SinkhornConfig::default()).unwrap();
        assert!(r.value < 1e-3 && r.value >= 0.0);
        let z = a.with_values(vec![0.0; 101]).unwrap();
        let r = hk_distance_sq(&a, &z, &SinkhornConfig::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }
}
