//! HK barycenter tree: barycenters of the marginals dilated by `x -> t x`,
//! pulled back to the original coordinates, over a range of scales `t`, with
//! the number of connected components `n0(t)` of each barycenter.

use alloc::vec;
use alloc::vec::Vec;

use crate::barycenter::{barycenter_grid, BarycenterConfig};
use crate::dirac::{barycenter_exact, far_product, Regime, MAX_DIRACS};
use crate::error::{invalid, Error, Result};
use crate::hk::{ConePoint, SinkhornConfig};
use crate::math::{dist, exp, floor, ln, log10};
use crate::measures::{default_shape, max_spacing, rasterize, DiscreteMeasure, Domain, GridMeasure, Measure, Weights};
use crate::multi_marginal::PointConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSweep {
    pub t_min: f64,
    pub t_max: f64,
    pub num_scales: usize,
    pub spacing: Spacing,
}

impl ScaleSweep {
    pub fn new(t_min: f64, t_max: f64, num_scales: usize, spacing: Spacing) -> Result<Self> {
        if !(t_min > 0.0 && t_min < t_max && t_max.is_finite()) {
            return Err(invalid("scales need 0 < t_min < t_max"));
        }
        if num_scales < 2 {
            return Err(invalid("a sweep needs at least two scales"));
        }
        Ok(ScaleSweep { t_min, t_max, num_scales, spacing })
    }

    /// Scales in increasing order, both ends included exactly.
    pub fn scales(&self) -> Vec<f64> {
        let n = self.num_scales;
        let mut out: Vec<f64> = (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Log => exp(ln(self.t_min) + s * (ln(self.t_max) - ln(self.t_min))),
                    Spacing::Linear => self.t_min + s * (self.t_max - self.t_min),
                }
            })
            .collect();
        out[0] = self.t_min;
        out[n - 1] = self.t_max;
        out
    }
}

/// How a barycenter was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ExactDirac,
    EntropicGrid,
}

impl Route {
    pub fn label(&self) -> &'static str {
        match self {
            Route::ExactDirac => "exact-dirac",
            Route::EntropicGrid => "entropic-grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeOptions {
    /// Grid for the entropic route when the marginals are not grids already.
    pub grid_shape: Option<Vec<usize>>,
    pub sinkhorn: SinkhornConfig,
    pub barycenter_update_tol: f64,
    pub outer_max_iter: usize,
    /// Grid cells below this fraction of the maximum are ignored by `n0`;
    /// so are atoms below this fraction of the heaviest atom.
    pub threshold_frac: f64,
    /// Components closer than this (original length units) are merged.
    /// Defaults to two grid cells, or `1e-6` of the domain diameter for atoms.
    pub merge_radius: Option<f64>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            grid_shape: None,
            sinkhorn: SinkhornConfig { epsilon_final: 1e-3, ..SinkhornConfig::default() },
            barycenter_update_tol: 1e-7,
            outer_max_iter: 20_000,
            threshold_frac: 0.01,
            merge_radius: None,
        }
    }
}

impl TreeOptions {
    pub fn validate(&self) -> Result<()> {
        self.sinkhorn.validate()?;
        if !(self.threshold_frac > 0.0 && self.threshold_frac < 1.0) {
            return Err(invalid("threshold_frac must lie in (0, 1)"));
        }
        if let Some(r) = self.merge_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(invalid("merge_radius must be nonnegative"));
            }
        }
        if let Some(s) = &self.grid_shape {
            if s.iter().any(|&n| n < 2) {
                return Err(invalid("grid_shape needs at least two nodes per axis"));
            }
        }
        Ok(())
    }

    fn barycenter_config(&self, weights: &Weights) -> BarycenterConfig {
        BarycenterConfig {
            weights: weights.clone(),
            sinkhorn: self.sinkhorn.clone(),
            barycenter_update_tol: self.barycenter_update_tol,
            outer_max_iter: self.outer_max_iter,
        }
    }
}

/// Barycenter at one scale, in original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleBarycenter {
    pub measure: Measure,
    pub route: Route,
    /// Regime of the exact solution, when the exact route was taken.
    pub regime: Option<Regime>,
    /// Objective value in dilated coordinates.
    pub value: f64,
    pub converged: bool,
}

fn union_domain(marginals: &[Measure]) -> Result<Domain> {
    let d = marginals[0].domain().dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for m in marginals {
        let dm = m.domain();
        if dm.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: dm.dim() });
        }
        for k in 0..d {
            lo[k] = lo[k].min(dm.lower()[k]);
            hi[k] = hi[k].max(dm.upper()[k]);
        }
    }
    Domain::new(lo, hi)
}

/// The single atom of a marginal that is one Dirac.
fn as_dirac(m: &Measure) -> Option<(&[f64], f64)> {
    match m {
        Measure::Discrete(d) => {
            let nz: Vec<usize> = (0..d.len()).filter(|&i| d.masses()[i] > 0.0).collect();
            (nz.len() == 1).then(|| (d.position(nz[0]), d.masses()[nz[0]]))
        }
        Measure::Grid(_) => None,
    }
}

/// Barycenter of the marginals dilated by `t`, mapped back by `1/t`.
///
/// All-Dirac inputs take the exact route when there are at most six of them, or
/// when the far-product barycenter is certified optimal; everything else is
/// rasterized (if needed) and solved entropically on a grid.
pub fn barycenter_at_scale(marginals: &[Measure], weights: &Weights, t: f64, opts: &TreeOptions) -> Result<ScaleBarycenter> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("scale t must be positive"));
    }
    if marginals.is_empty() {
        return Err(invalid("at least one marginal is needed"));
    }
    if marginals.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: marginals.len(), got: weights.len() });
    }
    opts.validate()?;
    let domain = union_domain(marginals)?;
    let diracs: Option<Vec<(&[f64], f64)>> = marginals.iter().map(as_dirac).collect();
    if let Some(diracs) = &diracs {
        if let Some(r) = exact_at_scale(diracs, weights, t, &domain)? {
            return Ok(r);
        }
    }
    entropic_at_scale(marginals, weights, t, &domain, opts)
}

fn exact_at_scale(diracs: &[(&[f64], f64)], weights: &Weights, t: f64, domain: &Domain) -> Result<Option<ScaleBarycenter>> {
    let n = diracs.len();
    if n == 1 {
        let (x, m) = diracs[0];
        let nu = DiscreteMeasure::new(domain.clone(), x.to_vec(), vec![m])?;
        return Ok(Some(ScaleBarycenter { measure: Measure::Discrete(nu), route: Route::ExactDirac, regime: Some(Regime::Single), value: 0.0, converged: true }));
    }
    let pos: Vec<Vec<f64>> = diracs.iter().map(|(x, _)| x.iter().map(|v| v * t).collect()).collect();
    let masses: Vec<f64> = diracs.iter().map(|d| d.1).collect();
    let cfg = PointConfig::new(&pos, masses, weights.clone())?;
    let r = if n > MAX_DIRACS {
        match far_product(&cfg) {
            Some(r) => r,
            None => return Ok(None),
        }
    } else {
        barycenter_exact(&cfg)?
    };
    let atoms: Vec<ConePoint> = r.atoms.clone();
    let mut coords = Vec::with_capacity(atoms.len() * cfg.dim());
    for a in &atoms {
        for (k, v) in a.position.iter().enumerate() {
            coords.push((v / t).clamp(domain.lower()[k], domain.upper()[k]));
        }
    }
    let nu = DiscreteMeasure::new(domain.clone(), coords, atoms.iter().map(|a| a.mass).collect())?;
    Ok(Some(ScaleBarycenter { measure: Measure::Discrete(nu), route: Route::ExactDirac, regime: Some(r.regime), value: r.value, converged: r.valid }))
}

fn entropic_at_scale(marginals: &[Measure], weights: &Weights, t: f64, domain: &Domain, opts: &TreeOptions) -> Result<ScaleBarycenter> {
    let shape = match marginals.iter().find_map(|m| if let Measure::Grid(g) = m { Some(g.shape().to_vec()) } else { None }) {
        Some(s) => s,
        None => opts.grid_shape.clone().unwrap_or_else(|| default_shape(domain.dim())),
    };
    let mut grids = Vec::with_capacity(marginals.len());
    for m in marginals {
        let g = match m {
            Measure::Grid(g) => g.clone(),
            Measure::Discrete(d) => {
                let on_domain = DiscreteMeasure::new(domain.clone(), d.coords().to_vec(), d.masses().to_vec())?;
                rasterize(&on_domain, &shape)?
            }
        };
        grids.push(g.dilate(t)?);
    }
    let r = barycenter_grid(&grids, &opts.barycenter_config(weights))?;
    Ok(ScaleBarycenter {
        measure: Measure::Grid(r.nu.dilate(1.0 / t)?),
        route: Route::EntropicGrid,
        regime: None,
        value: r.value,
        converged: r.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEntry {
    pub t: f64,
    pub barycenter: Measure,
    pub n0: usize,
    pub route: Route,
    pub regime: Option<Regime>,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeResult {
    /// Sorted by increasing `t`.
    pub entries: Vec<TreeEntry>,
    /// `ExactDirac` when every scale was solved exactly.
    pub mode: Route,
    pub num_marginals: usize,
}

/// Barycenter and component count at one scale.
pub fn tree_entry(marginals: &[Measure], weights: &Weights, t: f64, opts: &TreeOptions) -> Result<TreeEntry> {
    let b = barycenter_at_scale(marginals, weights, t, opts)?;
    let radius = opts.merge_radius.unwrap_or_else(|| default_merge_radius(&b.measure));
    let n0 = count_components(&b.measure, opts.threshold_frac, radius);
    Ok(TreeEntry { t, barycenter: b.measure, n0, route: b.route, regime: b.regime, value: b.value, converged: b.converged })
}

/// Sorts independently computed entries into a tree.
pub fn assemble(mut entries: Vec<TreeEntry>, num_marginals: usize) -> TreeResult {
    entries.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(core::cmp::Ordering::Equal));
    let mode = if entries.iter().all(|e| e.route == Route::ExactDirac) { Route::ExactDirac } else { Route::EntropicGrid };
    TreeResult { entries, mode, num_marginals }
}

/// Evaluates every scale of the sweep in turn.
pub fn sweep(marginals: &[Measure], weights: &Weights, scales: &ScaleSweep, opts: &TreeOptions) -> Result<TreeResult> {
    let entries = scales
        .scales()
        .into_iter()
        .map(|t| tree_entry(marginals, weights, t, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(entries, marginals.len()))
}

pub fn default_merge_radius(m: &Measure) -> f64 {
    match m {
        Measure::Grid(g) => 2.0 * max_spacing(g),
        Measure::Discrete(d) => 1e-6 * d.domain().diameter(),
    }
}

/// Number of connected components of a measure's support.
///
/// Grids are cut at `threshold_frac` times the largest value and the remaining
/// cells are joined to their axis neighbours and to any cell within
/// `merge_radius`. Atoms lighter than `threshold_frac` times the heaviest one are
/// dropped and the rest are joined by single linkage at `merge_radius`.
pub fn count_components(m: &Measure, threshold_frac: f64, merge_radius: f64) -> usize {
    match m {
        Measure::Grid(g) => count_grid(g, threshold_frac, merge_radius),
        Measure::Discrete(d) => count_atoms(d, threshold_frac, merge_radius),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
    fn roots(&mut self, members: &[usize]) -> usize {
        let mut r: Vec<usize> = members.iter().map(|&k| self.find(k)).collect();
        r.sort_unstable();
        r.dedup();
        r.len()
    }
}

fn count_atoms(d: &DiscreteMeasure, threshold_frac: f64, radius: f64) -> usize {
    let top = d.masses().iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    let keep: Vec<usize> = (0..d.len()).filter(|&i| d.masses()[i] >= threshold_frac * top).collect();
    let mut uf = UnionFind::new(d.len());
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[a + 1..] {
            if dist(d.position(i), d.position(j)) <= radius {
                uf.union(i, j);
            }
        }
    }
    uf.roots(&keep)
}

fn count_grid(g: &GridMeasure, threshold_frac: f64, radius: f64) -> usize {
    let top = g.values().iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    let cut = threshold_frac * top;
    let on: Vec<bool> = g.values().iter().map(|&v| v > 0.0 && v >= cut).collect();
    let d = g.dim();
    let h = g.spacing();
    // Neighbour offsets: axis neighbours plus everything within the radius.
    let reach: Vec<isize> = (0..d).map(|k| if h[k] > 0.0 { floor(radius / h[k]) as isize } else { 0 }.max(1)).collect();
    let widths: Vec<usize> = reach.iter().map(|&r| 2 * r as usize + 1).collect();
    let mut offsets: Vec<Vec<isize>> = Vec::new();
    for flat in 0..widths.iter().product::<usize>() {
        let mut r = flat;
        let mut o = vec![0isize; d];
        for k in (0..d).rev() {
            o[k] = (r % widths[k]) as isize - reach[k];
            r /= widths[k];
        }
        let len2: f64 = (0..d).map(|k| (o[k] as f64 * h[k]) * (o[k] as f64 * h[k])).sum();
        let axis = o.iter().filter(|&&v| v != 0).count() == 1 && o.iter().all(|&v| v.abs() <= 1);
        // Each unordered pair once.
        let forward = o.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0);
        if forward && (axis || len2 <= radius * radius) {
            offsets.push(o);
        }
    }
    let shape = g.shape();
    let mut uf = UnionFind::new(g.len());
    let members: Vec<usize> = (0..g.len()).filter(|&i| on[i]).collect();
    for &i in &members {
        let idx = g.multi_index(i);
        'off: for off in &offsets {
            let mut j = 0usize;
            for k in 0..d {
                let v = idx[k] as isize + off[k];
                if v < 0 || v >= shape[k] as isize {
                    continue 'off;
                }
                j = j * shape[k] + v as usize;
            }
            if on[j] {
                uf.union(i, j);
            }
        }
    }
    uf.roots(&members)
}

/// A maximal run of consecutive scales with the same `n0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub n0: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Number of scales in the run.
    pub scales: usize,
}

impl Plateau {
    /// `log10(t_end / t_start)`.
    pub fn decades(&self) -> f64 {
        log10(self.t_end / self.t_start)
    }
}

/// All maximal runs of equal `n0`, in order of `t`.
pub fn plateaus(result: &TreeResult) -> Vec<Plateau> {
    let mut out: Vec<Plateau> = Vec::new();
    for e in &result.entries {
        match out.last_mut() {
            Some(p) if p.n0 == e.n0 => {
                p.t_end = e.t;
                p.scales += 1;
            }
            _ => out.push(Plateau { n0: e.n0, t_start: e.t, t_end: e.t, scales: 1 }),
        }
    }
    out
}

/// The run spanning the most decades of `t`, ties going to the earlier run.
/// Runs at the trivial counts (`0`, `1` and one component per marginal) are
/// only considered when there is nothing else.
pub fn longest_plateau(result: &TreeResult) -> Option<Plateau> {
    let all = plateaus(result);
    let trivial = |p: &Plateau| p.n0 <= 1 || p.n0 == result.num_marginals;
    let pick = |c: &mut dyn Iterator<Item = &Plateau>| {
        c.fold(None::<&Plateau>, |best, p| match best {
            Some(b) if b.decades() >= p.decades() => Some(b),
            _ => Some(p),
        })
        .cloned()
    };
    pick(&mut all.iter().filter(|p| !trivial(p))).or_else(|| pick(&mut all.iter()))
}

/// Number of strict decreases of `n0` along increasing `t`, and of changes.
pub fn n0_decreases(result: &TreeResult) -> (usize, usize) {
    let mut down = 0;
    let mut changes = 0;
    for w in result.entries.windows(2) {
        if w[1].n0 != w[0].n0 {
            changes += 1;
            if w[1].n0 < w[0].n0 {
                down += 1;
            }
        }
    }
    (down, changes)
}
