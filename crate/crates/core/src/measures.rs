//! Domains, discrete and gridded measures, barycentric weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math::{dist, floor};

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("domain bounds must be nonempty and of equal length"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(invalid(format!("bad domain interval [{l}, {u}]")));
            }
        }
        Ok(Domain { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn diameter(&self) -> f64 {
        dist(&self.lower, &self.upper)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-12 * (1.0 + self.diameter());
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - slack && *v <= u + slack)
    }

    /// Image under `x -> t x`.
    pub fn scaled(&self, t: f64) -> Domain {
        let (mut lo, mut hi): (Vec<f64>, Vec<f64>) =
            (self.lower.iter().map(|v| v * t).collect(), self.upper.iter().map(|v| v * t).collect());
        if t < 0.0 {
            core::mem::swap(&mut lo, &mut hi);
        }
        Domain { lower: lo, upper: hi }
    }
}

/// Finite sum of weighted Dirac masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    domain: Domain,
    coords: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// `coords` holds the atom positions back to back, `domain.dim()` numbers each.
    pub fn new(domain: Domain, coords: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let d = domain.dim();
        if coords.len() != d * masses.len() {
            return Err(Error::DimensionMismatch { expected: d * masses.len(), got: coords.len() });
        }
        for (i, m) in masses.iter().enumerate() {
            if !m.is_finite() || *m < 0.0 {
                return Err(invalid(format!("atom {i} has invalid mass {m}")));
            }
            let x = &coords[i * d..(i + 1) * d];
            if x.iter().any(|v| !v.is_finite()) || !domain.contains(x) {
                return Err(invalid(format!("atom {i} lies outside the domain")));
            }
        }
        Ok(DiscreteMeasure { domain, coords, masses })
    }

    pub fn dirac(domain: Domain, x: &[f64], mass: f64) -> Result<Self> {
        Self::new(domain, x.to_vec(), vec![mass])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Push-forward under `x -> t x`, masses unchanged.
    pub fn dilate(&self, t: f64) -> Result<DiscreteMeasure> {
        check_scale(t)?;
        Ok(DiscreteMeasure {
            domain: self.domain.scaled(t),
            coords: self.coords.iter().map(|v| v * t).collect(),
            masses: self.masses.clone(),
        })
    }
}

/// Measure carried by the nodes of a regular grid on its domain.
///
/// Node `k` on an axis with `n` nodes sits at `lower + k (upper - lower) / (n - 1)`.
/// Values are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    domain: Domain,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridMeasure {
    pub fn new(domain: Domain, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.len() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: shape.len() });
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(invalid("grid axes must have at least one node"));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("grid value {v} is not a finite nonnegative number")));
        }
        Ok(GridMeasure { domain, shape, values })
    }

    pub fn zeros(domain: Domain, shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(domain, shape, vec![0.0; n])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Node spacing along each axis (zero for single-node axes).
    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let n = self.shape[k];
                if n > 1 {
                    (self.domain.upper[k] - self.domain.lower[k]) / (n - 1) as f64
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut r = flat;
        for k in (0..self.dim()).rev() {
            idx[k] = r % self.shape[k];
            r /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.domain.lower[k] + i as f64 * h[k])
            .collect()
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let idx: Vec<usize> = (0..self.dim())
            .map(|k| {
                if h[k] == 0.0 {
                    0
                } else {
                    let r = floor((x[k] - self.domain.lower[k]) / h[k] + 0.5);
                    (r.max(0.0) as usize).min(self.shape[k] - 1)
                }
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Same values on the domain scaled by `t`.
    pub fn dilate(&self, t: f64) -> Result<GridMeasure> {
        check_scale(t)?;
        Ok(GridMeasure { domain: self.domain.scaled(t), shape: self.shape.clone(), values: self.values.clone() })
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<GridMeasure> {
        GridMeasure::new(self.domain.clone(), self.shape.clone(), values)
    }

    /// Mass-weighted mean position.
    pub fn centroid(&self) -> Option<Vec<f64>> {
        let m = self.total_mass();
        if m <= 0.0 {
            return None;
        }
        let mut c = vec![0.0; self.dim()];
        for (i, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                for (ck, xk) in c.iter_mut().zip(self.node(i)) {
                    *ck += v * xk / m;
                }
            }
        }
        Some(c)
    }
}

/// Positive barycentric weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("weights must be nonempty"));
        }
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(invalid("weights must be finite and positive"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {s}, expected 1")));
        }
        Ok(Weights(w))
    }

    /// Rescales nonnegative values to sum to one.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("weights must have a positive finite sum"));
        }
        Self::new(w.into_iter().map(|v| v / s).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::normalized(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Either kind of measure, for code that accepts both.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Grid(GridMeasure),
}

impl Measure {
    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Discrete(m) => m.total_mass(),
            Measure::Grid(g) => g.total_mass(),
        }
    }
    pub fn domain(&self) -> &Domain {
        match self {
            Measure::Discrete(m) => m.domain(),
            Measure::Grid(g) => g.domain(),
        }
    }
    pub fn dilate(&self, t: f64) -> Result<Measure> {
        Ok(match self {
            Measure::Discrete(m) => Measure::Discrete(m.dilate(t)?),
            Measure::Grid(g) => Measure::Grid(g.dilate(t)?),
        })
    }
}

fn check_scale(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("dilation factor must be positive, got {t}")))
    }
}

/// Assigns every atom's mass to its nearest grid node on the measure's domain.
pub fn rasterize(m: &DiscreteMeasure, shape: &[usize]) -> Result<GridMeasure> {
    if shape.iter().any(|&n| n < 2) {
        return Err(invalid("rasterize needs at least two nodes per axis"));
    }
    let mut g = GridMeasure::zeros(m.domain().clone(), shape.to_vec())?;
    for i in 0..m.len() {
        let k = g.nearest(m.position(i));
        g.values[k] += m.masses()[i];
    }
    Ok(g)
}

/// Default grid shape for a dimension: finer in 1D than in 2D or 3D.
pub fn default_shape(dim: usize) -> Vec<usize> {
    let n = match dim {
        1 => 256,
        2 => 64,
        _ => 24,
    };
    vec![n; dim]
}

/// Largest node spacing over the axes.
pub fn max_spacing(g: &GridMeasure) -> f64 {
    g.spacing().into_iter().fold(0.0, f64::max)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn dom1(a: f64, b: f64) -> Domain {
        Domain::new(vec![a], vec![b]).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Domain::new(vec![1.0], vec![0.0]).is_err());
        assert!(DiscreteMeasure::new(dom1(0.0, 1.0), vec![0.5], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(dom1(0.0, 1.0), vec![1.5], vec![1.0]).is_err());
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn rasterize_preserves_mass_and_dilation_scales_positions() {
        let m = DiscreteMeasure::new(dom1(0.0, 2.0), vec![0.1, 0.12, 1.9], vec![1.0, 2.0, 0.5]).unwrap();
        let g = rasterize(&m, &[11]).unwrap();
        assert!((g.total_mass() - 3.5).abs() < 1e-15);
        assert_eq!(g.values()[1], 3.0);
        let d = m.dilate(3.0).unwrap();
        assert!(m.dilate(0.0).is_err());
        assert!((d.position(2)[0] - 5.7).abs() < 1e-14);
        assert_eq!(d.domain().upper(), &[6.0]);
        assert_eq!(d.total_mass(), m.total_mass());
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = GridMeasure::zeros(Domain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(), vec![3, 5]).unwrap();
        for f in 0..15 {
            assert_eq!(g.flat_index(&g.multi_index(f)), f);
            assert_eq!(g.nearest(&g.node(f)), f);
        }
        assert_eq!(g.node(7), vec![0.5, 0.0]);
    }
}
