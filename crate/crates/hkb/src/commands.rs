//! The subcommands, writing their report to `out`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hkb_core::barycenter::{barycenter_grid, BarycenterConfig};
use hkb_core::dirac::{barycenter_exact, DiracBarycenter};
use hkb_core::hk::{hk_dirac_sq, hk_distance_sq};
use hkb_core::measures::{default_shape, rasterize, DiscreteMeasure, Domain, GridMeasure, Measure, Weights};
use hkb_core::multi_marginal::{c_mm, c_mm_1d_closed, c_mm_hull, q_mm_contains, DualVector, PointConfig};
use hkb_core::tree::{longest_plateau, n0_decreases};
use serde::Deserialize;

use crate::config::{parse_scales, RunConfig};
use crate::io::{common_domain, json_num, num, read_input, write_measure, Input, PointCloud};
use crate::sweep::parallel_sweep;

/// A usage error: bad combination of flags or inputs.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn json_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| json_num(x)).collect::<Vec<_>>().join(", "))
}

fn text_list(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

fn read_inputs(paths: &[PathBuf]) -> Result<Vec<Input>> {
    if paths.is_empty() {
        return usage("no input files given");
    }
    let inputs = paths.iter().map(|p| read_input(p)).collect::<Result<Vec<_>>>()?;
    let dim = inputs[0].dim();
    if let Some(i) = inputs.iter().position(|m| m.dim() != dim) {
        bail!("{}: dimension {} differs from {}", paths[i].display(), inputs[i].dim(), dim);
    }
    Ok(inputs)
}

fn weights_for(cfg: &RunConfig, n: usize) -> Result<Weights> {
    match &cfg.weights {
        None => Ok(Weights::uniform(n)?),
        Some(w) if w.len() != n => bail!("weights: {} values for {} inputs", w.len(), n),
        Some(w) => Weights::normalized(w.clone()).context("weights"),
    }
}

fn point_domain(inputs: &[Input], cfg: &RunConfig) -> Result<Option<Domain>> {
    let clouds: Vec<&PointCloud> = inputs.iter().filter_map(|m| if let Input::Points(p) = m { Some(p) } else { None }).collect();
    if clouds.is_empty() {
        return Ok(None);
    }
    Ok(Some(common_domain(&clouds, cfg.lower.as_deref(), cfg.upper.as_deref())?))
}

/// Puts every input on one grid: that of the grid inputs if there are any,
/// otherwise `n` nodes per axis over the common point domain.
fn to_grids(inputs: &[Input], cfg: &RunConfig) -> Result<Vec<GridMeasure>> {
    let template = inputs.iter().find_map(|m| if let Input::Grid(g) = m { Some(g.clone()) } else { None });
    let (domain, shape) = match &template {
        Some(g) => {
            if let Some(n) = cfg.grid {
                if g.shape().iter().any(|&k| k != n) {
                    bail!("grid: {n} nodes per axis requested but the grid inputs have shape {:?}", g.shape());
                }
            }
            (g.domain().clone(), g.shape().to_vec())
        }
        None => {
            let d = point_domain(inputs, cfg)?.expect("point inputs");
            let shape = cfg.grid.map(|n| vec![n; d.dim()]).unwrap_or_else(|| default_shape(d.dim()));
            (d, shape)
        }
    };
    inputs
        .iter()
        .map(|m| match m {
            Input::Grid(g) => Ok(g.clone()),
            Input::Points(p) => Ok(rasterize(&p.on(&domain).context("point input outside the grid domain")?, &shape)?),
        })
        .collect()
}

fn single_atom(m: &Input) -> Option<(&[f64], f64)> {
    match m {
        Input::Points(p) if p.len() == 1 => Some((&p.coords[..], p.masses[0])),
        _ => None,
    }
}

pub fn dist(out: &mut dyn Write, a: &Path, b: &Path, cfg: &RunConfig, json: bool) -> Result<()> {
    let inputs = read_inputs(&[a.to_path_buf(), b.to_path_buf()])?;
    let (hk2, converged, method) = match (single_atom(&inputs[0]), single_atom(&inputs[1])) {
        (Some((x1, m1)), Some((x2, m2))) if cfg.grid.is_none() => (hk_dirac_sq(x1, m1, x2, m2), true, "closed-form"),
        _ => {
            let grids = to_grids(&inputs, cfg)?;
            let s = cfg.sinkhorn();
            s.validate()?;
            let r = hk_distance_sq(&grids[0], &grids[1], &s)?;
            (r.value, r.converged, "entropic-grid")
        }
    };
    let hk = hk2.max(0.0).sqrt();
    if json {
        writeln!(out, "{{\"hk2\": {}, \"hk\": {}, \"converged\": {converged}, \"method\": \"{method}\"}}", json_num(hk2), json_num(hk))?;
    } else {
        writeln!(out, "hk2 = {}\nhk = {}\nconverged = {converged}\nmethod = {method}", num(hk2), num(hk))?;
    }
    Ok(())
}

/// How `bary` should solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Auto,
    Exact,
    Grid,
}

fn exact_config(inputs: &[Input], paths: &[PathBuf], w: &Weights) -> Result<PointConfig> {
    let mut pos = Vec::new();
    let mut masses = Vec::new();
    for (m, p) in inputs.iter().zip(paths) {
        match single_atom(m) {
            Some((x, mass)) => {
                pos.push(x.to_vec());
                masses.push(mass);
            }
            None => return usage(format!("{}: the exact route needs a single-atom point cloud", p.display())),
        }
    }
    Ok(PointConfig::new(&pos, masses, w.clone())?)
}

fn exact(inputs: &[Input], paths: &[PathBuf], w: &Weights) -> Result<DiracBarycenter> {
    if inputs.len() < 2 {
        return usage("the exact route needs at least two inputs");
    }
    Ok(barycenter_exact(&exact_config(inputs, paths, w)?)?)
}

fn write_exact(r: &DiracBarycenter, domain: Domain, stem: &Path) -> Result<Vec<PathBuf>> {
    let nu = r.to_measure(domain).map_err(|e| anyhow!("barycenter atoms: {e}"))?;
    write_measure(stem, &Measure::Discrete(nu), false)
}

pub struct BaryArgs<'a> {
    pub inputs: &'a [PathBuf],
    pub route: Route,
    pub out: &'a Path,
    pub pgm: bool,
    pub json: bool,
}

pub fn bary(out: &mut dyn Write, a: &BaryArgs, cfg: &RunConfig) -> Result<()> {
    let inputs = read_inputs(a.inputs)?;
    let w = weights_for(cfg, inputs.len())?;
    let any_grid = inputs.iter().any(|m| matches!(m, Input::Grid(_)));
    let any_points = inputs.iter().any(|m| matches!(m, Input::Points(_)));
    if any_grid && any_points && a.route != Route::Grid {
        return usage("point-cloud and grid inputs can only be mixed with --grid");
    }
    let all_diracs = inputs.iter().all(|m| single_atom(m).is_some());
    let exact_route = match a.route {
        Route::Exact => true,
        Route::Grid => false,
        Route::Auto => all_diracs && inputs.len() >= 2 && inputs.len() <= hkb_core::dirac::MAX_DIRACS,
    };
    if exact_route {
        let r = exact(&inputs, a.inputs, &w)?;
        let domain = point_domain(&inputs, cfg)?.expect("point inputs");
        let files = write_exact(&r, domain, a.out)?;
        report_exact(out, &r, &files, a.json, false)?;
        return Ok(());
    }
    if inputs.len() == 1 {
        let m = match &inputs[0] {
            Input::Grid(g) => Measure::Grid(g.clone()),
            Input::Points(p) => Measure::Discrete(p.on(&point_domain(&inputs, cfg)?.expect("point input"))?),
        };
        let files = write_measure(a.out, &m, a.pgm)?;
        return report_grid(out, "identity", 0.0, true, 0, &files, a.json);
    }
    let grids = to_grids(&inputs, cfg)?;
    let mut bc = BarycenterConfig::new(w);
    bc.sinkhorn = cfg.sinkhorn();
    if let Some(v) = cfg.bary_tol {
        bc.barycenter_update_tol = v;
    }
    if let Some(v) = cfg.outer_max_iter {
        bc.outer_max_iter = v;
    }
    bc.validate()?;
    let r = barycenter_grid(&grids, &bc)?;
    let files = write_measure(a.out, &Measure::Grid(r.nu), a.pgm)?;
    report_grid(out, "entropic-grid", r.value, r.converged, r.iterations, &files, a.json)
}

fn file_list(files: &[PathBuf]) -> Vec<String> {
    files.iter().map(|p| p.display().to_string()).collect()
}

fn report_grid(out: &mut dyn Write, method: &str, value: f64, converged: bool, iters: usize, files: &[PathBuf], json: bool) -> Result<()> {
    let names = file_list(files);
    if json {
        let names: Vec<String> = names.iter().map(|n| serde_json::to_string(n).unwrap()).collect();
        writeln!(
            out,
            "{{\"method\": \"{method}\", \"value\": {}, \"converged\": {converged}, \"iterations\": {iters}, \"files\": [{}]}}",
            json_num(value),
            names.join(", ")
        )?;
    } else {
        writeln!(out, "method = {method}\nvalue = {}\nconverged = {converged}\niterations = {iters}", num(value))?;
        for n in names {
            writeln!(out, "wrote {n}")?;
        }
    }
    Ok(())
}

fn report_exact(out: &mut dyn Write, r: &DiracBarycenter, files: &[PathBuf], json: bool, detail: bool) -> Result<()> {
    let names = file_list(files);
    if json {
        let atoms: Vec<String> = r
            .atoms
            .iter()
            .map(|a| format!("{{\"position\": {}, \"mass\": {}}}", json_list(&a.position), json_num(a.mass)))
            .collect();
        let mut s = format!(
            "{{\"method\": \"exact-dirac\", \"value\": {}, \"regime\": \"{}\", \"valid\": {}, \"atoms\": [{}]",
            json_num(r.value),
            r.regime.label(),
            r.valid,
            atoms.join(", ")
        );
        if detail {
            let parts: Vec<String> = r.parts.iter().map(|p| json_list(p)).collect();
            let support = match r.support {
                Some((a, b)) => json_list(&[a, b]),
                None => "null".into(),
            };
            s += &format!(
                ", \"boundary\": {}, \"support\": {support}, \"certificate\": {}, \"parts\": [{}]",
                r.boundary,
                json_list(&r.certificate.psi),
                parts.join(", ")
            );
        }
        let names: Vec<String> = names.iter().map(|n| serde_json::to_string(n).unwrap()).collect();
        s += &format!(", \"files\": [{}]}}", names.join(", "));
        writeln!(out, "{s}")?;
        return Ok(());
    }
    writeln!(out, "method = exact-dirac\nvalue = {}\nregime = {}\nvalid = {}", num(r.value), r.regime.label(), r.valid)?;
    if detail {
        writeln!(out, "boundary = {}", r.boundary)?;
        match r.support {
            Some((a, b)) => writeln!(out, "support = [{}, {}]", num(a), num(b))?,
            None => writeln!(out, "support = none")?,
        }
        writeln!(out, "certificate = {}", text_list(&r.certificate.psi))?;
    }
    for (j, a) in r.atoms.iter().enumerate() {
        write!(out, "atom {j}: position = {} mass = {}", text_list(&a.position), num(a.mass))?;
        if detail {
            write!(out, " parts = {}", text_list(&r.parts[j]))?;
        }
        writeln!(out)?;
    }
    for n in names {
        writeln!(out, "wrote {n}")?;
    }
    Ok(())
}

/// `bary --exact` with the regime, boundary flag, support interval, dual
/// certificate and mass splitting reported.
pub fn dirac(out: &mut dyn Write, inputs: &[PathBuf], dest: &Path, cfg: &RunConfig, json: bool) -> Result<()> {
    let ins = read_inputs(inputs)?;
    let w = weights_for(cfg, ins.len())?;
    let r = exact(&ins, inputs, &w)?;
    let domain = point_domain(&ins, cfg)?.expect("point inputs");
    let files = write_exact(&r, domain, dest)?;
    report_exact(out, &r, &files, json, true)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Position {
    Scalar(f64),
    Point(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CmmFile {
    positions: Vec<Position>,
    masses: Vec<f64>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    psi: Option<Vec<f64>>,
}

/// Evaluates the multi-marginal cost, its convex hull and `Q_MM` membership
/// for the configuration in a JSON file.
pub fn cmm(out: &mut dyn Write, path: &Path, json: bool) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f: CmmFile = serde_json::from_str(&text).with_context(|| format!("{}: invalid cmm config", path.display()))?;
    let n = f.positions.len();
    if f.masses.len() != n {
        bail!("masses: {} values for {n} positions", f.masses.len());
    }
    let pos: Vec<Vec<f64>> = f
        .positions
        .into_iter()
        .map(|p| match p {
            Position::Scalar(x) => vec![x],
            Position::Point(v) => v,
        })
        .collect();
    let w = match f.weights {
        None => Weights::uniform(n)?,
        Some(w) if w.len() != n => bail!("weights: {} values for {n} positions", w.len()),
        Some(w) => Weights::normalized(w).context("weights")?,
    };
    let cfg = PointConfig::new(&pos, f.masses, w).context("positions")?;
    if let Some(p) = &f.psi {
        if p.len() != n {
            bail!("psi: {} values for {n} positions", p.len());
        }
    }
    let point = c_mm(&cfg);
    let closed = if cfg.dim() == 1 && cfg.in_quarter_window() { c_mm_1d_closed(&cfg).ok() } else { None };
    let hull = c_mm_hull(&cfg);
    let psi = f.psi.map(DualVector::new).unwrap_or_else(|| hull.psi.clone());
    let member = q_mm_contains(&cfg, &psi, 1e-9);
    if json {
        let closed = match &closed {
            Some(c) => json_num(c.value),
            None => "null".into(),
        };
        let parts: Vec<String> = hull.decomposition.parts.iter().map(|p| json_list(p)).collect();
        let atoms: Vec<String> = hull
            .atoms
            .iter()
            .map(|a| format!("{{\"position\": {}, \"mass\": {}}}", json_list(&a.position), json_num(a.mass)))
            .collect();
        writeln!(
            out,
            "{{\"c_mm\": {}, \"minimizer\": {{\"position\": {}, \"mass\": {}}}, \"c_mm_closed\": {closed}, \
             \"c_mm_hull\": {}, \"dual_value\": {}, \"hull_converged\": {}, \"hull_psi\": {}, \"parts\": [{}], \"atoms\": [{}], \
             \"psi\": {}, \"contained\": {}, \"sup\": {}, \"worst_y\": {}}}",
            json_num(point.value),
            json_list(&point.minimizer.position),
            json_num(point.minimizer.mass),
            json_num(hull.value),
            json_num(hull.dual_value),
            hull.converged,
            json_list(&hull.psi.psi),
            parts.join(", "),
            atoms.join(", "),
            json_list(&psi.psi),
            member.contained,
            json_num(member.sup),
            json_list(&member.worst_y)
        )?;
        return Ok(());
    }
    writeln!(out, "c_mm = {}", num(point.value))?;
    writeln!(out, "minimizer = {} mass {}", text_list(&point.minimizer.position), num(point.minimizer.mass))?;
    if let Some(c) = closed {
        writeln!(out, "c_mm closed form = {}", num(c.value))?;
    }
    writeln!(out, "c_mm_hull = {}\ndual value = {}\nhull converged = {}", num(hull.value), num(hull.dual_value), hull.converged)?;
    writeln!(out, "hull psi = {}", text_list(&hull.psi.psi))?;
    for (j, (p, a)) in hull.decomposition.parts.iter().zip(&hull.atoms).enumerate() {
        writeln!(out, "part {j}: masses = {} atom = {} mass {}", text_list(p), text_list(&a.position), num(a.mass))?;
    }
    writeln!(out, "psi = {}", text_list(&psi.psi))?;
    writeln!(out, "contained = {}\nsup f = {}\nworst y = {}", member.contained, num(member.sup), text_list(&member.worst_y))?;
    Ok(())
}

pub struct TreeArgs<'a> {
    pub out_dir: &'a Path,
    pub split_atoms: bool,
    pub pgm: bool,
}

/// Marginals for the tree: mixture samples, or the input files (each atom of
/// a single point cloud becoming a marginal with `split_atoms`).
fn tree_marginals(cfg: &RunConfig, split_atoms: bool) -> Result<Vec<Measure>> {
    if let Some(mix) = &cfg.mixture {
        if cfg.inputs.as_ref().is_some_and(|i| !i.is_empty()) {
            return usage("give either input files or a mixture, not both");
        }
        let pts = mix.sample();
        let cloud = PointCloud { dim: mix.dim(), coords: pts.concat(), masses: vec![mix.mass; pts.len()] };
        let domain = common_domain(&[&cloud], cfg.lower.as_deref(), cfg.upper.as_deref())?;
        return pts.iter().map(|p| Ok(Measure::Discrete(DiscreteMeasure::dirac(domain.clone(), p, mix.mass)?))).collect();
    }
    let paths = cfg.inputs.clone().unwrap_or_default();
    let inputs = read_inputs(&paths)?;
    if split_atoms {
        let [Input::Points(p)] = &inputs[..] else {
            return usage("--split-atoms needs exactly one point-cloud input");
        };
        let domain = common_domain(&[p], cfg.lower.as_deref(), cfg.upper.as_deref())?;
        return p
            .coords
            .chunks(p.dim)
            .zip(&p.masses)
            .map(|(x, &m)| Ok(Measure::Discrete(DiscreteMeasure::dirac(domain.clone(), x, m)?)))
            .collect();
    }
    let domain = point_domain(&inputs, cfg)?;
    inputs
        .iter()
        .map(|m| match m {
            Input::Grid(g) => Ok(Measure::Grid(g.clone())),
            Input::Points(p) => Ok(Measure::Discrete(p.on(domain.as_ref().expect("point inputs"))?)),
        })
        .collect()
}

pub fn tree(out: &mut dyn Write, a: &TreeArgs, cfg: &RunConfig) -> Result<()> {
    let scales = match &cfg.scales {
        Some(s) => parse_scales(s)?,
        None => return usage("scales: required (tmin:tmax:num[:log|lin])"),
    };
    let marginals = tree_marginals(cfg, a.split_atoms)?;
    let w = weights_for(cfg, marginals.len())?;
    let mut opts = cfg.tree_options();
    let dim = marginals[0].domain().dim();
    opts.grid_shape = cfg.grid.map(|n| vec![n; dim]);
    opts.validate()?;
    let result = parallel_sweep(&marginals, &w, &scales, &opts)?;
    fs::create_dir_all(a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut csv = String::from("t,n0,total_mass\n");
    for (k, e) in result.entries.iter().enumerate() {
        csv += &format!("{},{},{}\n", num(e.t), e.n0, num(e.barycenter.total_mass()));
        write_measure(&a.out_dir.join(format!("scale_{k:03}")), &e.barycenter, a.pgm)?;
    }
    let tree_csv = a.out_dir.join("tree.csv");
    fs::write(&tree_csv, csv).with_context(|| format!("writing {}", tree_csv.display()))?;
    writeln!(out, "marginals = {}\nmode = {}", result.num_marginals, result.mode.label())?;
    for e in &result.entries {
        let regime = e.regime.map_or("-", |r| r.label());
        writeln!(out, "t = {} n0 = {} route = {} regime = {regime} converged = {}", num(e.t), e.n0, e.route.label(), e.converged)?;
    }
    let (down, changes) = n0_decreases(&result);
    writeln!(out, "n0 decreases = {down} of {changes} changes")?;
    match longest_plateau(&result) {
        Some(p) => writeln!(
            out,
            "longest plateau: n0 = {} for t in [{}, {}] ({} scales, {:.3} decades)",
            p.n0,
            num(p.t_start),
            num(p.t_end),
            p.scales,
            p.decades()
        )?,
        None => writeln!(out, "longest plateau: none")?,
    }
    writeln!(out, "wrote {}", tree_csv.display())?;
    Ok(())
}
