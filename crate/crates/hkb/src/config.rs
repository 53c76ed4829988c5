//! Run parameters from an optional JSON file, overridden by flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hkb_core::hk::SinkhornConfig;
use hkb_core::tree::{ScaleSweep, Spacing, TreeOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

/// Seeded isotropic Gaussian mixture; sample `k` is drawn from component
/// `k mod K`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
    pub points: usize,
    pub seed: u64,
    #[serde(default = "unit")]
    pub mass: f64,
}

fn unit() -> f64 {
    1.0
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let dim = self.means.first().map_or(0, Vec::len);
        if dim == 0 || self.means.iter().any(|m| m.len() != dim) {
            bail!("mixture.means: need at least one mean, all of the same nonzero length");
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            bail!("mixture.means: values must be finite");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            bail!("mixture.sigma: must be a nonnegative number");
        }
        if self.points == 0 {
            bail!("mixture.points: must be positive");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            bail!("mixture.mass: must be positive");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Sample points, row-major.
    pub fn sample(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (0..self.points)
            .map(|k| self.means[k % self.means.len()].iter().map(|&m| m + self.sigma * normal.sample(&mut rng)).collect())
            .collect()
    }
}

/// Parses `tmin:tmax:num[:log|lin]`.
pub fn parse_scales(s: &str) -> Result<ScaleSweep> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 && parts.len() != 4 {
        bail!("scales: expected tmin:tmax:num[:log|lin], got {s:?}");
    }
    let t_min: f64 = parts[0].trim().parse().with_context(|| format!("scales: bad tmin {:?}", parts[0]))?;
    let t_max: f64 = parts[1].trim().parse().with_context(|| format!("scales: bad tmax {:?}", parts[1]))?;
    let num: usize = parts[2].trim().parse().with_context(|| format!("scales: bad count {:?}", parts[2]))?;
    let spacing = match parts.get(3).map(|p| p.trim()) {
        None | Some("log") => Spacing::Log,
        Some("lin") | Some("linear") => Spacing::Linear,
        Some(o) => bail!("scales: spacing must be log or lin, got {o:?}"),
    };
    ScaleSweep::new(t_min, t_max, num, spacing).with_context(|| format!("scales: {s:?}"))
}

/// Every tunable of every subcommand. Fields a subcommand does not use are
/// ignored by it.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Option<Vec<PathBuf>>,
    pub weights: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub eps_final: Option<f64>,
    pub eps_decay: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub bary_tol: Option<f64>,
    pub outer_max_iter: Option<usize>,
    pub grid: Option<usize>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub scales: Option<String>,
    pub threshold: Option<f64>,
    pub merge_radius: Option<f64>,
    pub mixture: Option<MixtureSpec>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Reads a config file. Relative input paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(inputs) = &mut cfg.inputs {
            for p in inputs.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Fields set in `flags` win.
    pub fn overridden_by(mut self, flags: &RunConfig) -> RunConfig {
        overlay!(self, flags; inputs, weights, epsilon, eps_final, eps_decay, max_iter, tol, bary_tol,
            outer_max_iter, grid, lower, upper, scales, threshold, merge_radius, mixture);
        self
    }

    /// Checks every field that is set, naming the first bad one.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => bail!("{name}: must be a positive number, got {x}"),
                _ => Ok(()),
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("eps_final", self.eps_final)?;
        positive("tol", self.tol)?;
        positive("bary_tol", self.bary_tol)?;
        if let Some(d) = self.eps_decay {
            if !(d > 0.0 && d < 1.0) {
                bail!("eps_decay: must lie in (0, 1), got {d}");
            }
        }
        if let (Some(a), Some(b)) = (self.epsilon, self.eps_final) {
            if b > a {
                bail!("eps_final: must not exceed epsilon ({b} > {a})");
            }
        }
        if self.max_iter == Some(0) {
            bail!("max_iter: must be positive");
        }
        if self.outer_max_iter == Some(0) {
            bail!("outer_max_iter: must be positive");
        }
        if let Some(n) = self.grid {
            if n < 2 {
                bail!("grid: need at least 2 nodes per axis, got {n}");
            }
        }
        if let Some(w) = &self.weights {
            if w.is_empty() || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                bail!("weights: must be positive numbers");
            }
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                bail!("threshold: must lie in (0, 1), got {t}");
            }
        }
        if let Some(r) = self.merge_radius {
            if !(r >= 0.0 && r.is_finite()) {
                bail!("merge_radius: must be nonnegative, got {r}");
            }
        }
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => {
                if l.len() != u.len() || l.iter().zip(u).any(|(a, b)| !(a < b)) {
                    bail!("lower: must be below upper on every axis");
                }
            }
            (None, None) => {}
            _ => bail!("lower: lower and upper must be given together"),
        }
        if let Some(s) = &self.scales {
            parse_scales(s)?;
        }
        if let Some(m) = &self.mixture {
            m.validate()?;
        }
        Ok(())
    }

    pub fn sinkhorn(&self) -> SinkhornConfig {
        self.sinkhorn_from(SinkhornConfig::default())
    }

    fn sinkhorn_from(&self, mut s: SinkhornConfig) -> SinkhornConfig {
        if let Some(v) = self.epsilon {
            s.epsilon_start = v;
        }
        if let Some(v) = self.eps_final {
            s.epsilon_final = v;
        }
        if s.epsilon_final > s.epsilon_start {
            s.epsilon_start = s.epsilon_final;
        }
        if let Some(v) = self.eps_decay {
            s.epsilon_decay = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter_per_epsilon = v;
        }
        if let Some(v) = self.tol {
            s.marginal_tol = v;
        }
        s
    }

    pub fn tree_options(&self) -> TreeOptions {
        let d = TreeOptions::default();
        TreeOptions {
            grid_shape: None,
            sinkhorn: self.sinkhorn_from(d.sinkhorn.clone()),
            barycenter_update_tol: self.bary_tol.unwrap_or(d.barycenter_update_tol),
            outer_max_iter: self.outer_max_iter.unwrap_or(d.outer_max_iter),
            threshold_frac: self.threshold.unwrap_or(d.threshold_frac),
            merge_radius: self.merge_radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_parse() {
        let s = parse_scales("0.1:10:3").unwrap();
        assert_eq!(s.spacing, Spacing::Log);
        assert_eq!(s.scales().len(), 3);
        assert_eq!(parse_scales("1:2:5:lin").unwrap().spacing, Spacing::Linear);
        assert!(parse_scales("2:1:5").is_err());
        assert!(parse_scales("1:2").is_err());
        assert!(parse_scales("1:2:5:cubic").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = serde_json::from_str::<RunConfig>(r#"{"epsilonn": 1.0}"#).unwrap_err().to_string();
        assert!(e.contains("epsilonn"), "{e}");
    }

    #[test]
    fn diagnostics_name_the_field() {
        let c = RunConfig { eps_decay: Some(1.5), ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().starts_with("eps_decay"));
        let c = RunConfig { weights: Some(vec![1.0, -1.0]), ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().starts_with("weights"));
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig { epsilon: Some(0.5), grid: Some(32), ..Default::default() };
        let flags = RunConfig { grid: Some(64), ..Default::default() };
        let c = file.overridden_by(&flags);
        assert_eq!((c.epsilon, c.grid), (Some(0.5), Some(64)));
    }

    #[test]
    fn mixture_is_seeded() {
        let m = MixtureSpec { means: vec![vec![0.0], vec![5.0]], sigma: 0.3, points: 6, seed: 3, mass: 1.0 };
        assert_eq!(m.sample(), m.sample());
        let other = MixtureSpec { seed: 4, ..m.clone() };
        assert_ne!(m.sample(), other.sample());
        assert!((m.sample()[1][0] - 5.0).abs() < 3.0);
    }
}
