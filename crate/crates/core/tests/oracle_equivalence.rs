#[path = "support/oracle.rs"]
mod oracle;

use hkb_core::dirac::{barycenter_diracs, barycenter_exact, barycenter_n3_1d, Regime};
use hkb_core::measures::Weights;
use hkb_core::multi_marginal::{c_mm_hull, pointwise_barycenter, PointConfig};
use oracle::{grid_barycenter, line_grid, support_1d, Support};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

fn make(pos: &[Vec<f64>], m: &[f64], w: &[f64]) -> PointConfig {
    PointConfig::new(pos, m.to_vec(), Weights::normalized(w.to_vec()).unwrap()).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Positions, masses and weights of `n` Diracs on a line, with every pairwise
/// distance kept `margin` away from `pi/2`.
fn random_line(rng: &mut ChaCha8Rng, n: usize, span: f64, margin: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..span)).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (x[j] - x[i]).abs() > 0.05 && ((x[j] - x[i]).abs() - FRAC_PI_2).abs() > margin));
        if ok {
            let m = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let w = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
            return (x.into_iter().map(|v| vec![v]).collect(), m, w);
        }
    }
}

#[test]
fn three_diracs_on_a_line_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let (pos, m, w) = random_line(&mut rng, 3, 3.5, 1e-3);
        let cfg = make(&pos, &m, &w);
        let r = barycenter_n3_1d(&cfg).unwrap();
        let x: Vec<f64> = pos.iter().map(|p| p[0]).collect();
        let o = grid_barycenter(&pos, &m, cfg.lambdas(), &line_grid(&x, 1e-3));
        assert!((r.value - o.value).abs() <= 1e-6 * (1.0 + o.value), "{x:?}: {} vs {}", r.value, o.value);
        match (support_1d(&o), r.regime) {
            (Support::Interval, Regime::Diffuse) | (Support::Ambiguous, _) => {}
            (Support::Atoms(k), Regime::Single | Regime::Split | Regime::FarProduct) => assert_eq!(k, r.atoms.len(), "{x:?}"),
            (s, g) => panic!("{x:?}: oracle {s:?}, solver {g:?}"),
        }
    }
}

#[test]
fn hull_value_matches_the_oracle_for_three_points_on_a_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (pos, m, w) = random_line(&mut rng, 3, 3.5, 1e-3);
        let cfg = make(&pos, &m, &w);
        let x: Vec<f64> = pos.iter().map(|p| p[0]).collect();
        let o = grid_barycenter(&pos, &m, cfg.lambdas(), &line_grid(&x, 1e-3));
        let h = c_mm_hull(&cfg);
        assert!(h.converged);
        assert!((h.value - o.value).abs() <= 1e-6 * (1.0 + o.value), "{x:?}: {} vs {}", h.value, o.value);
    }
}

#[test]
fn four_diracs_on_a_line_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let (pos, m, w) = random_line(&mut rng, 4, 4.0, 1e-3);
        let cfg = make(&pos, &m, &w);
        let r = barycenter_diracs(&cfg).unwrap();
        assert!(r.valid);
        let x: Vec<f64> = pos.iter().map(|p| p[0]).collect();
        let o = grid_barycenter(&pos, &m, cfg.lambdas(), &line_grid(&x, 1e-3));
        assert!((r.value - o.value).abs() <= 1e-6 * (1.0 + o.value), "{x:?}: {} vs {}", r.value, o.value);
    }
}

#[test]
fn general_route_reduces_to_the_line_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 15 {
        let (pos, m, w) = random_line(&mut rng, 3, 3.5, 1e-2);
        let cfg = make(&pos, &m, &w);
        let line = barycenter_n3_1d(&cfg).unwrap();
        if line.regime == Regime::Diffuse {
            continue;
        }
        let general = barycenter_diracs(&cfg).unwrap();
        assert!((general.value - line.value).abs() <= 1e-6 * (1.0 + line.value));
        let mut a: Vec<(f64, f64)> = general.atoms.iter().map(|p| (p.position[0], p.mass)).collect();
        let mut b: Vec<(f64, f64)> = line.atoms.iter().map(|p| (p.position[0], p.mass)).collect();
        a.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        b.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        assert_eq!(a.len(), b.len(), "{pos:?}");
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0 - q.0).abs() <= 1e-4 && (p.1 - q.1).abs() <= 1e-4 * (1.0 + q.1), "{p:?} vs {q:?}");
        }
        checked += 1;
    }
}

#[test]
fn planar_barycenters_are_bracketed_by_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..4 {
        let pos: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let m: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..2.0)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..1.0)).collect();
        let cfg = make(&pos, &m, &w);
        let r = barycenter_exact(&cfg).unwrap();
        let n = 161;
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(n * n + 3);
        for i in 0..n {
            for j in 0..n {
                ys.push(vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64]);
            }
        }
        ys.extend(pos.iter().cloned());
        let o = grid_barycenter(&pos, &m, cfg.lambdas(), &ys);
        // Restricting the atoms to a grid can only raise the value.
        assert!(o.value >= r.value - 1e-9, "{} below {}", o.value, r.value);
        assert!(o.value - r.value <= 1e-3 * (1.0 + r.value), "{} vs {}", o.value, r.value);
        assert!((r.certificate.dot(&m) - r.value).abs() <= 1e-6);
    }
}

#[test]
fn pointwise_barycenter_moves_continuously_with_the_masses() {
    let pos = vec![vec![0.0, 0.0], vec![0.6, 0.1], vec![0.2, 0.5]];
    let m = vec![1.0, 0.8, 1.2];
    let cfg = make(&pos, &m, &[0.3, 0.3, 0.4]);
    let p = pointwise_barycenter(&cfg).unwrap();
    for i in 0..3 {
        let mut q = m.clone();
        q[i] += 1e-6;
        let r = pointwise_barycenter(&cfg.with_masses(q).unwrap()).unwrap();
        assert!(dist(&p.position, &r.position) < 1e-4 && (p.mass - r.mass).abs() < 1e-4);
    }
}
