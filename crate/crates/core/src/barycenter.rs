//! Entropic HK barycenter of gridded measures.
//!
//! Each marginal `mu_i` gets its own entropic plan `gamma_i` whose first
//! marginal is KL-penalized toward `mu_i` and whose second marginal is
//! KL-penalized toward the shared barycenter `nu`. Eliminating `nu` from the
//! dual leaves the constraint `sum_i lambda_i exp(-g_i) <= 1`, and maximizing
//! over `(g_1, ..., g_N)` jointly gives
//!
//! ```text
//! nu = (sum_i lambda_i q_i^p)^(1/p),   p = eps / (1 + eps),
//! g_i / eps = (log nu - log q_i) / (1 + eps),
//! ```
//!
//! where `q_i = K^T a_i` is the pressure of plan `i` on the barycenter grid.
//! As `eps -> 0` the power mean tends to the weighted geometric mean.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::hk::{check_same_grid, kl_values, SinkhornConfig};
use crate::math::{exp, ln, log_sum_exp, Anderson};
use crate::measures::{GridMeasure, Weights};
use crate::stencil::{log_vec, support, Stencil};

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterConfig {
    pub weights: Weights,
    pub sinkhorn: SinkhornConfig,
    /// Stop an epsilon stage once successive barycenters differ by less than
    /// this in total variation (together with the marginal test).
    pub barycenter_update_tol: f64,
    /// Cap on the total number of iterations over all epsilon stages.
    pub outer_max_iter: usize,
}

impl BarycenterConfig {
    pub fn new(weights: Weights) -> Self {
        BarycenterConfig {
            weights,
            sinkhorn: SinkhornConfig::default(),
            barycenter_update_tol: 1e-9,
            outer_max_iter: 20_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sinkhorn.validate()?;
        if !(self.barycenter_update_tol.is_finite() && self.barycenter_update_tol > 0.0) {
            return Err(invalid("barycenter_update_tol must be positive"));
        }
        if self.outer_max_iter == 0 {
            return Err(invalid("outer_max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBarycenter {
    pub nu: GridMeasure,
    /// `sum_i lambda_i (transport_i + KL(gamma_i1 | mu_i) + KL(gamma_i2 | nu))`.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

struct Marginal {
    lmu: Vec<f64>,
    support: Vec<usize>,
    lambda: f64,
}

struct State {
    lq: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    lnu: Vec<f64>,
}

pub fn barycenter_grid(marginals: &[GridMeasure], cfg: &BarycenterConfig) -> Result<GridBarycenter> {
    cfg.validate()?;
    if marginals.is_empty() {
        return Err(invalid("barycenter_grid needs at least one marginal"));
    }
    if marginals.len() != cfg.weights.len() {
        return Err(invalid("number of weights differs from number of marginals"));
    }
    for m in &marginals[1..] {
        check_same_grid(&marginals[0], m)?;
    }
    let n = marginals[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|k| marginals.iter().map(|m| m.values()[k]).sum::<f64>() / marginals.len() as f64)
        .collect();
    if mean.iter().all(|&v| v <= 0.0) {
        return Err(invalid("barycenter_grid needs at least one nonzero marginal"));
    }

    let stencil = Stencil::new(&marginals[0], cfg.sinkhorn.cost_cutoff);
    let ms: Vec<Marginal> = marginals
        .iter()
        .zip(cfg.weights.as_slice())
        .map(|(m, &lambda)| Marginal { lmu: log_vec(m.values()), support: support(m.values()), lambda })
        .collect();
    let nm = ms.len();
    let offsets: Vec<usize> = ms
        .iter()
        .scan(0, |acc, m| {
            let o = *acc;
            *acc += m.support.len();
            Some(o)
        })
        .collect();
    let total: usize = ms.iter().map(|m| m.support.len()).sum();

    // Plans start from unit scalings and the barycenter from the mean marginal.
    let mut f = vec![0.0; total];
    let mut nu_prev = mean.clone();
    let mut st = State { lq: vec![vec![f64::NEG_INFINITY; n]; nm], v: vec![vec![f64::NEG_INFINITY; n]; nm], lnu: vec![0.0; n] };
    let mut u = vec![vec![f64::NEG_INFINITY; n]; nm];
    let mut buf = vec![0.0; n];

    let g_step = |f: &[f64], u: &mut [Vec<f64>], st: &mut State, eps: f64| {
        let p = eps / (1.0 + eps);
        for (i, m) in ms.iter().enumerate() {
            for (k, &s) in m.support.iter().enumerate() {
                u[i][s] = f[offsets[i] + k] / eps;
            }
            stencil.scatter(&m.support, &u[i], eps, &mut st.lq[i]);
        }
        for t in 0..n {
            let terms = ms.iter().enumerate().filter_map(|(i, m)| {
                let q = st.lq[i][t];
                (q.is_finite() && m.lambda > 0.0).then(|| ln(m.lambda) + p * q)
            });
            st.lnu[t] = log_sum_exp(terms) / p;
        }
        for i in 0..nm {
            for t in 0..n {
                let q = st.lq[i][t];
                st.v[i][t] = if q.is_finite() && st.lnu[t].is_finite() {
                    (st.lnu[t] - q) / (1.0 + eps)
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    let schedule = cfg.sinkhorn.schedule();
    let mut eps = schedule[0];
    'stages: for &e in &schedule {
        eps = e;
        let mut aa = Anderson::new(6);
        converged = false;
        for _ in 0..cfg.sinkhorn.max_iter_per_epsilon {
            if iterations >= cfg.outer_max_iter {
                break 'stages;
            }
            iterations += 1;
            g_step(&f, &mut u, &mut st, eps);
            let mut fnew = vec![0.0; total];
            for (i, m) in ms.iter().enumerate() {
                stencil.gather(&m.support, &st.v[i], eps, &mut buf);
                for (k, &s) in m.support.iter().enumerate() {
                    fnew[offsets[i] + k] = eps * (m.lmu[s] - buf[s]) / (1.0 + eps);
                }
            }
            let change = fnew.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / eps;
            let tv: f64 = st.lnu.iter().zip(&nu_prev).map(|(l, p)| (exp(*l) - p).abs()).sum();
            nu_prev = st.lnu.iter().map(|&l| exp(l)).collect();
            f = aa.step(&f, &fnew);
            if change < cfg.sinkhorn.marginal_tol && tv < cfg.barycenter_update_tol {
                f = fnew;
                converged = true;
                break;
            }
        }
    }

    // Final g-step makes nu exactly the weighted mean of the second marginals.
    g_step(&f, &mut u, &mut st, eps);
    let nu: Vec<f64> = st.lnu.iter().map(|&l| if l.is_finite() { exp(l) } else { 0.0 }).collect();
    let mut value = 0.0;
    for (i, m) in ms.iter().enumerate() {
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        let mut transport = 0.0;
        let (ui, vi) = (&u[i], &st.v[i]);
        stencil.for_each_edge(&m.support, |s, t, c| {
            let lg = ui[s] + vi[t] - c / eps;
            if lg > f64::NEG_INFINITY {
                let g = exp(lg);
                p1[s] += g;
                p2[t] += g;
                transport += g * c;
            }
        });
        value += m.lambda * (transport + kl_values(&p1, marginals[i].values()) + kl_values(&p2, &nu));
    }
    Ok(GridBarycenter { nu: marginals[0].with_values(nu)?, value, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::cos;
    use crate::measures::Domain;

    fn dirac_grid(n: usize, hi: f64, k: usize, m: f64) -> GridMeasure {
        let mut v = vec![0.0; n];
        v[k] = m;
        GridMeasure::new(Domain::new(vec![0.0], vec![hi]).unwrap(), vec![n], v).unwrap()
    }

    #[test]
    fn two_close_diracs_meet_in_the_middle() {
        // spacing 0.025, cells 40 and 80 are 1.0 apart
        let a = dirac_grid(201, 5.0, 40, 1.0);
        let b = dirac_grid(201, 5.0, 80, 1.0);
        let cfg = BarycenterConfig::new(Weights::uniform(2).unwrap());
        let r = barycenter_grid(&[a, b], &cfg).unwrap();
        assert!(r.converged);
        let c = r.nu.centroid().unwrap()[0];
        assert!((c - 1.5).abs() <= 0.025, "centroid {c}");
        let s = cos(0.5) * cos(0.5);
        assert!((r.nu.total_mass() - s).abs() < 0.03 * s);
        // Exact value: (1/4) HK^2(delta_x1, delta_x2).
        let exact = 0.25 * (2.0 - 2.0 * cos(1.0));
        assert!(r.value >= exact - 1e-9 && r.value < 1.03 * exact, "{} vs {}", r.value, exact);
    }

    #[test]
    fn identical_marginals_are_a_fixed_point() {
        let mut v = vec![0.0; 101];
        v[30] = 0.5;
        v[31] = 0.3;
        v[70] = 0.2;
        let g = GridMeasure::new(Domain::new(vec![0.0], vec![3.0]).unwrap(), vec![101], v).unwrap();
        let mut cfg = BarycenterConfig::new(Weights::uniform(3).unwrap());
        cfg.sinkhorn.epsilon_final = 1e-3;
        let r = barycenter_grid(&[g.clone(), g.clone(), g.clone()], &cfg).unwrap();
        assert!(r.value < 1e-2);
        assert!((r.nu.total_mass() - 1.0).abs() < 1e-2);
    }
}
