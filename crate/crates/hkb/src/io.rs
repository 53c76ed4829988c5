//! Point-cloud CSV, grid sidecar files and PGM rasters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hkb_core::measures::{DiscreteMeasure, Domain, GridMeasure, Measure};
use serde::Deserialize;

/// Formats a number with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Like [`num`] but emits `null` for values JSON cannot represent.
pub fn json_num(v: f64) -> String {
    if v.is_finite() {
        num(v)
    } else {
        "null".into()
    }
}

/// Atoms read from a point-cloud file, before a domain is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub masses: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.coords.chunks(self.dim) {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
    pub fn on(&self, domain: &Domain) -> hkb_core::Result<DiscreteMeasure> {
        DiscreteMeasure::new(domain.clone(), self.coords.clone(), self.masses.clone())
    }
}

/// Parses `x_1,...,x_d,mass` rows. Lines starting with `#` are comments and a
/// first row that does not parse as numbers is taken as a header.
pub fn parse_points(text: &str, origin: &str) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut dim = None;
    let mut coords = Vec::new();
    let mut masses = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{origin}: malformed CSV"))?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if dim.is_none() && masses.is_empty() && row == 0 => continue,
            Err(e) => bail!("{origin}:{line}: {e}"),
        };
        if vals.len() < 2 {
            bail!("{origin}:{line}: expected at least one coordinate and a mass");
        }
        let d = vals.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(d0) if d0 != d => bail!("{origin}:{line}: expected {} columns, found {}", d0 + 1, d + 1),
            _ => {}
        }
        if vals.iter().any(|v| !v.is_finite()) {
            bail!("{origin}:{line}: values must be finite");
        }
        if vals[d] < 0.0 {
            bail!("{origin}:{line}: mass must be nonnegative");
        }
        coords.extend_from_slice(&vals[..d]);
        masses.push(vals[d]);
    }
    let dim = dim.ok_or_else(|| anyhow!("{origin}: no atoms"))?;
    Ok(PointCloud { dim, coords, masses })
}

pub fn read_points(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_points(&text, &path.display().to_string())
}

pub fn points_csv(m: &DiscreteMeasure) -> String {
    let d = m.dim();
    let mut s = String::new();
    let head: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["mass".to_string()]).collect();
    writeln!(s, "{}", head.join(",")).unwrap();
    for i in 0..m.len() {
        let row: Vec<String> = m.position(i).iter().map(|&v| num(v)).chain([num(m.masses()[i])]).collect();
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    dim: usize,
    shape: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default)]
    values: Option<String>,
}

/// Reads a grid from its JSON sidecar. The values file is named by the
/// sidecar's `values` field (relative to the sidecar) or defaults to the
/// sidecar path with a `.csv` extension.
pub fn read_grid(path: &Path) -> Result<GridMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let sc: Sidecar = serde_json::from_str(&text).with_context(|| format!("{}: bad grid sidecar", path.display()))?;
    if sc.shape.len() != sc.dim || sc.lower.len() != sc.dim || sc.upper.len() != sc.dim {
        bail!("{}: shape, lower and upper must all have length dim = {}", path.display(), sc.dim);
    }
    let vpath = match &sc.values {
        Some(v) => path.parent().unwrap_or(Path::new(".")).join(v),
        None => path.with_extension("csv"),
    };
    let vtext = fs::read_to_string(&vpath).with_context(|| format!("reading {}", vpath.display()))?;
    let origin = vpath.display().to_string();
    let mut values = Vec::new();
    for (i, line) in vtext.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for f in line.split(',') {
            let v: f64 = f.trim().parse().map_err(|e| anyhow!("{origin}:{}: {e}", i + 1))?;
            values.push(v);
        }
    }
    let domain = Domain::new(sc.lower, sc.upper).with_context(|| format!("{}: bad domain", path.display()))?;
    GridMeasure::new(domain, sc.shape, values).with_context(|| format!("{}: bad grid", path.display()))
}

/// Writes `stem.json` and `stem.csv`; the CSV holds one row per last-axis line.
pub fn write_grid(stem: &Path, g: &GridMeasure) -> Result<(PathBuf, PathBuf)> {
    let jpath = stem.with_extension("json");
    let cpath = stem.with_extension("csv");
    let list = |v: &[f64]| v.iter().map(|&x| json_num(x)).collect::<Vec<_>>().join(", ");
    let shape = g.shape().iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
    let vname = cpath.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let json = format!(
        "{{\n  \"dim\": {},\n  \"shape\": [{}],\n  \"lower\": [{}],\n  \"upper\": [{}],\n  \"values\": {}\n}}\n",
        g.dim(),
        shape,
        list(g.domain().lower()),
        list(g.domain().upper()),
        serde_json::to_string(&vname)?
    );
    let row = *g.shape().last().unwrap_or(&1);
    let mut csv = String::new();
    for chunk in g.values().chunks(row) {
        writeln!(csv, "{}", chunk.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")).unwrap();
    }
    fs::write(&jpath, json).with_context(|| format!("writing {}", jpath.display()))?;
    fs::write(&cpath, csv).with_context(|| format!("writing {}", cpath.display()))?;
    Ok((jpath, cpath))
}

/// Plain PGM with the largest value mapped to 255. A 1D grid is one row; a 3D
/// grid stacks its slices vertically.
pub fn pgm(g: &GridMeasure) -> String {
    let shape = g.shape();
    let width = *shape.last().unwrap_or(&1);
    let height = g.len() / width.max(1);
    let max = g.values().iter().cloned().fold(0.0, f64::max);
    let mut s = format!("P2\n{width} {height}\n255\n");
    for row in g.values().chunks(width) {
        let px: Vec<String> = row
            .iter()
            .map(|&v| if max > 0.0 { (255.0 * v.max(0.0) / max).round() as u8 } else { 0 }.to_string())
            .collect();
        writeln!(s, "{}", px.join(" ")).unwrap();
    }
    s
}

pub fn write_measure(stem: &Path, m: &Measure, with_pgm: bool) -> Result<Vec<PathBuf>> {
    match m {
        Measure::Discrete(d) => {
            let p = stem.with_extension("csv");
            fs::write(&p, points_csv(d)).with_context(|| format!("writing {}", p.display()))?;
            Ok(vec![p])
        }
        Measure::Grid(g) => {
            let (j, c) = write_grid(stem, g)?;
            let mut out = vec![j, c];
            if with_pgm {
                let p = stem.with_extension("pgm");
                fs::write(&p, pgm(g)).with_context(|| format!("writing {}", p.display()))?;
                out.push(p);
            }
            Ok(out)
        }
    }
}

/// An input file: a point cloud, or a grid when the path ends in `.json`.
#[derive(Debug, Clone)]
pub enum Input {
    Points(PointCloud),
    Grid(GridMeasure),
}

impl Input {
    pub fn dim(&self) -> usize {
        match self {
            Input::Points(p) => p.dim,
            Input::Grid(g) => g.dim(),
        }
    }
}

pub fn read_input(path: &Path) -> Result<Input> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Input::Grid(read_grid(path)?))
    } else {
        Ok(Input::Points(read_points(path)?))
    }
}

/// Bounding box of all point clouds, padded by 5% per side (0.5 on flat axes),
/// unless both bounds are given.
pub fn common_domain(clouds: &[&PointCloud], lower: Option<&[f64]>, upper: Option<&[f64]>) -> Result<Domain> {
    let dim = clouds.first().map(|c| c.dim).ok_or_else(|| anyhow!("no point clouds"))?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for c in clouds {
        if c.dim != dim {
            bail!("inputs have different dimensions ({} and {})", dim, c.dim);
        }
        let (a, b) = c.bounds();
        for k in 0..dim {
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(b[k]);
        }
    }
    for k in 0..dim {
        let pad = if hi[k] > lo[k] { 0.05 * (hi[k] - lo[k]) } else { 0.5 };
        lo[k] -= pad;
        hi[k] += pad;
    }
    let lo = lower.map(<[f64]>::to_vec).unwrap_or(lo);
    let hi = upper.map(<[f64]>::to_vec).unwrap_or(hi);
    if lo.len() != dim || hi.len() != dim {
        bail!("--lower/--upper need {dim} values");
    }
    Ok(Domain::new(lo, hi)?)
}
