//! Run configuration files.
//!
//! Line-oriented, sectioned `key = value` text. `#` starts a comment.
//! Vectors are whitespace-separated numbers; lists of vectors are separated
//! by `;`.
//!
//! ```text
//! [grid]            required
//! extents = 1 1 0.25
//! cells = 8 8 2
//!
//! [material]        required
//! ell_ex = 0.1
//! kappa = 0.02
//! alpha = 0.5
//! aniso_axis = 0 0 1
//! aniso_strength = 0.5
//! enable_aniso = true
//! enable_demag = false
//!
//! [initial]         required
//! kind = uniform | helix | skyrmion_seed | file
//! direction = 0 0 1           (uniform)
//! axis = 3                    (helix, 1..3)
//! wavenumber = 6.283          (helix)
//! center = 0.5 0.5 0.125      (skyrmion_seed)
//! radius = 0.3                (skyrmion_seed)
//! path = m0.txt               (file, relative to the config file)
//!
//! [field]           optional, default zero
//! kind = constant | ramp | rotating | tabulated
//! value = 0 0 1               (constant)
//! start = 0 0 0               (ramp)
//! rate = 0 0 0.1              (ramp)
//! bias = 0 0 1                (rotating)
//! amplitude = 0.1             (rotating)
//! omega = 2                   (rotating)
//! times = 0 1 2               (tabulated)
//! values = 0 0 1; 0 0 2; 0 0 3  (tabulated)
//!
//! [solver]          required
//! scheme = implicit_midpoint | projected_heun
//! dt = 0.01
//! t_end = 1
//! tolerance = 1e-12
//! max_iterations = 200
//!
//! [output]          optional
//! dir = out
//! stride = 10
//!
//! [verify]          optional
//! weak_tol = 1e-4
//! energy_tol = 1e-8
//! norm_tol = 1e-10
//!
//! [lab]             optional
//! eps = 1e-2 1e-3 1e-4
//! levels = 3
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dynamics::{Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, MagnetizationField, VectorField};
use crate::io::snapshot::read_snapshot;
use crate::lowerorder::{AppliedField, MaterialParams};
use crate::vec3::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Uniform(Vec3<f64>),
    /// Rotation in the plane normal to `axis` (0-based):
    /// `cos(q x_a) e_{a+1} + sin(q x_a) e_{a+2}`.
    Helix { axis: usize, wavenumber: f64 },
    /// Néel-type bubble pointing along `−e_z` at `center`, `+e_z` beyond
    /// `radius` (in-plane distance).
    SkyrmionSeed { center: Vec3<f64>, radius: f64 },
    File(PathBuf),
}

impl InitialCondition {
    /// Closed-form direction at `x` (not normalized); `None` for `File`.
    pub fn value_at(&self, x: Vec3<f64>) -> Option<Vec3<f64>> {
        Some(match self {
            InitialCondition::Uniform(v) => *v,
            InitialCondition::Helix { axis, wavenumber } => {
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                let ph = wavenumber * x[*axis];
                Vec3::unit(a) * ph.cos() + Vec3::unit(b) * ph.sin()
            }
            InitialCondition::SkyrmionSeed { center, radius } => {
                let (dx, dy) = (x.x() - center.x(), x.y() - center.y());
                let r = (dx * dx + dy * dy).sqrt();
                if r >= *radius {
                    return Some(Vec3::unit(2));
                }
                let theta = std::f64::consts::PI * (1.0 - r / radius);
                let phi = dy.atan2(dx);
                Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
            }
            InitialCondition::File(_) => return None,
        })
    }

    pub fn sample(&self, grid: &Grid<f64>) -> Result<MagnetizationField<f64>> {
        if let InitialCondition::File(path) = self {
            let m = read_snapshot(path)?;
            if m.grid() != grid {
                return Err(Error::Format(format!(
                    "{}: grid {:?} does not match configured grid {:?}",
                    path.display(),
                    m.grid().cells(),
                    grid.cells()
                )));
            }
            return Ok(m);
        }
        let field = VectorField::from_fn(*grid, |x| self.value_at(x).unwrap());
        MagnetizationField::project(field)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifySpec {
    pub weak_tol: f64,
    pub energy_tol: f64,
    pub norm_tol: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            weak_tol: 1e-4,
            energy_tol: 1e-8,
            norm_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabSpec {
    pub eps: Vec<f64>,
    pub levels: usize,
}

impl Default for LabSpec {
    fn default() -> Self {
        LabSpec {
            eps: vec![1e-2, 1e-3, 1e-4],
            levels: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid<f64>,
    pub params: MaterialParams<f64>,
    pub initial: InitialCondition,
    pub field: AppliedField<f64>,
    pub solver: SolverConfig<f64>,
    pub output: OutputSpec,
    pub verify: VerifySpec,
    pub lab: LabSpec,
}

impl RunConfig {
    /// Re-checks every numeric constraint (after command-line overrides).
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let mut s = self.solver;
        s.stride = self.output.stride;
        s.validate()
    }

    pub fn solver_with_stride(&self) -> SolverConfig<f64> {
        SolverConfig {
            stride: self.output.stride,
            ..self.solver
        }
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Document {
    sections: BTreeMap<String, Section>,
}

const SECTIONS: [&str; 8] = ["grid", "material", "initial", "field", "solver", "output", "verify", "lab"];

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Document> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            if let Some(prev) = sections.get(&name) {
                return Err(err(
                    line,
                    format!("duplicate section [{name}] (lines {} and {line})", prev.line),
                ));
            }
            sections.insert(
                name.clone(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, "expected 'key = value'"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(err(line, "empty key"));
        }
        let section = current
            .as_ref()
            .ok_or_else(|| err(line, format!("key '{key}' outside of any section")))?;
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if let Some(prev) = entries.get(&key) {
            return Err(err(
                line,
                format!("duplicate key '{key}' in [{section}] (lines {} and {line})", prev.line),
            ));
        }
        entries.insert(
            key,
            Entry {
                line,
                value,
                used: false,
            },
        );
    }
    Ok(Document { sections })
}

struct Reader<'a> {
    name: &'static str,
    section: Option<&'a mut Section>,
}

impl<'a> Reader<'a> {
    fn line(&self) -> usize {
        self.section.as_ref().map(|s| s.line).unwrap_or(0)
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        let e = self.section.as_mut()?.entries.get_mut(key)?;
        e.used = true;
        Some((e.line, e.value.clone()))
    }

    fn required(&mut self, key: &str) -> Result<(usize, String)> {
        let line = self.line();
        let name = self.name;
        self.raw(key)
            .ok_or_else(|| err(line, format!("[{name}] is missing required key '{key}'")))
    }

    fn parse_f64(line: usize, key: &str, s: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| err(line, format!("'{key}': expected a number, found '{s}'")))
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let (line, v) = self.required(key)?;
        Self::parse_f64(line, key, &v)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some((line, v)) => Self::parse_f64(line, key, &v),
            None => Ok(default),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| err(line, format!("'{key}': expected a non-negative integer, found '{v}'"))),
            None => Ok(default),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some((_, v)) if v == "true" => Ok(true),
            Some((_, v)) if v == "false" => Ok(false),
            Some((line, v)) => Err(err(line, format!("'{key}': expected true or false, found '{v}'"))),
            None => Ok(default),
        }
    }

    fn list(line: usize, key: &str, s: &str) -> Result<Vec<f64>> {
        s.split_whitespace().map(|t| Self::parse_f64(line, key, t)).collect()
    }

    fn vec3_at(line: usize, key: &str, s: &str) -> Result<Vec3<f64>> {
        match Self::list(line, key, s)?.as_slice() {
            [a, b, c] => Ok(Vec3::new(*a, *b, *c)),
            _ => Err(err(line, format!("'{key}': expected three numbers"))),
        }
    }

    fn vec3(&mut self, key: &str) -> Result<Vec3<f64>> {
        let (line, v) = self.required(key)?;
        Self::vec3_at(line, key, &v)
    }

    fn vec3_or(&mut self, key: &str, default: Vec3<f64>) -> Result<Vec3<f64>> {
        match self.raw(key) {
            Some((line, v)) => Self::vec3_at(line, key, &v),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(s) = self.section {
            if let Some((k, e)) = s.entries.iter().find(|(_, e)| !e.used) {
                return Err(err(e.line, format!("unknown key '{k}' in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

fn reader<'a>(doc: &'a mut Document, name: &'static str, required: bool) -> Result<Reader<'a>> {
    let section = doc.sections.get_mut(name);
    if required && section.is_none() {
        return Err(err(0, format!("missing section [{name}]")));
    }
    Ok(Reader { name, section })
}

/// Parses a configuration; relative file paths resolve against the
/// current directory.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, Path::new(""))
}

/// Parses a configuration; relative file paths resolve against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<RunConfig> {
    let mut doc = tokenize(text)?;

    let mut r = reader(&mut doc, "grid", true)?;
    let ext_line = r.line();
    let extents = r.vec3("extents")?;
    let (cl, cs) = r.required("cells")?;
    let cells: Vec<usize> = cs
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| err(cl, format!("'cells': bad integer '{t}'"))))
        .collect::<Result<_>>()?;
    let cells: [usize; 3] = cells
        .try_into()
        .map_err(|_| err(cl, "'cells': expected three integers"))?;
    r.finish()?;
    let grid = Grid::new(extents.0, cells).map_err(|e| err(ext_line, e.to_string()))?;

    let mut r = reader(&mut doc, "material", true)?;
    let mline = r.line();
    let d = MaterialParams::<f64>::default();
    let params = MaterialParams {
        ell_ex: r.f64("ell_ex")?,
        kappa: r.f64_or("kappa", d.kappa)?,
        alpha: r.f64("alpha")?,
        aniso_axis: r.vec3_or("aniso_axis", d.aniso_axis)?,
        aniso_strength: r.f64_or("aniso_strength", d.aniso_strength)?,
        enable_aniso: r.bool_or("enable_aniso", d.enable_aniso)?,
        enable_demag: r.bool_or("enable_demag", d.enable_demag)?,
    };
    r.finish()?;
    params.validate().map_err(|e| match e {
        Error::Param(msg) => err(mline, format!("constraint violated: {msg}")),
        other => other,
    })?;

    let mut r = reader(&mut doc, "initial", true)?;
    let (kl, kind) = r.required("kind")?;
    let initial = match kind.as_str() {
        "uniform" => {
            let v = r.vec3("direction")?;
            if v.normalized().is_none() {
                return Err(err(kl, "'direction' must be nonzero"));
            }
            InitialCondition::Uniform(v)
        }
        "helix" => {
            let (al, a) = r.required("axis")?;
            let axis = match a.as_str() {
                "1" => 0,
                "2" => 1,
                "3" => 2,
                _ => return Err(err(al, "'axis' must be 1, 2 or 3")),
            };
            InitialCondition::Helix {
                axis,
                wavenumber: r.f64("wavenumber")?,
            }
        }
        "skyrmion_seed" => {
            let center = r.vec3("center")?;
            let radius = r.f64("radius")?;
            if !(radius > 0.0) {
                return Err(err(kl, "constraint violated: radius > 0"));
            }
            InitialCondition::SkyrmionSeed { center, radius }
        }
        "file" => {
            let (pl, p) = r.required("path")?;
            let path = base.join(p);
            if !path.is_file() {
                return Err(err(pl, format!("initial file '{}' does not exist", path.display())));
            }
            InitialCondition::File(path)
        }
        other => {
            return Err(err(
                kl,
                format!("unknown initial kind '{other}' (uniform, helix, skyrmion_seed, file)"),
            ))
        }
    };
    r.finish()?;

    let mut r = reader(&mut doc, "field", false)?;
    let field = match r.raw("kind") {
        None => AppliedField::zero(),
        Some((kl, kind)) => match kind.as_str() {
            "constant" => AppliedField::Constant(r.vec3("value")?),
            "ramp" => AppliedField::Ramp {
                start: r.vec3("start")?,
                rate: r.vec3("rate")?,
            },
            "rotating" => AppliedField::Rotating {
                bias: r.vec3("bias")?,
                amplitude: r.f64("amplitude")?,
                omega: r.f64("omega")?,
            },
            "tabulated" => {
                let (tl, ts) = r.required("times")?;
                let times = Reader::list(tl, "times", &ts)?;
                let (vl, vs) = r.required("values")?;
                let values = vs
                    .split(';')
                    .map(|chunk| Reader::vec3_at(vl, "values", chunk))
                    .collect::<Result<Vec<_>>>()?;
                AppliedField::tabulated(times, values).map_err(|e| err(tl, e.to_string()))?
            }
            other => {
                return Err(err(
                    kl,
                    format!("unknown field kind '{other}' (constant, ramp, rotating, tabulated)"),
                ))
            }
        },
    };
    r.finish()?;

    let mut r = reader(&mut doc, "solver", true)?;
    let sline = r.line();
    let (schl, sch) = r.required("scheme")?;
    let scheme: Scheme = sch.parse().map_err(|e: Error| err(schl, e.to_string()))?;
    let mut solver = SolverConfig::new(r.f64("dt")?, r.f64("t_end")?, scheme);
    solver.tolerance = r.f64_or("tolerance", solver.tolerance)?;
    solver.max_iterations = r.usize_or("max_iterations", solver.max_iterations)?;
    r.finish()?;

    let mut r = reader(&mut doc, "output", false)?;
    let dir = r.raw("dir").map(|(_, v)| v).unwrap_or_else(|| "out".into());
    let output = OutputSpec {
        dir: PathBuf::from(dir),
        stride: r.usize_or("stride", 1)?,
    };
    r.finish()?;
    solver.stride = output.stride;
    solver.validate().map_err(|e| match e {
        Error::Param(msg) => err(sline, format!("constraint violated: {msg}")),
        other => other,
    })?;

    let mut r = reader(&mut doc, "verify", false)?;
    let dv = VerifySpec::default();
    let verify = VerifySpec {
        weak_tol: r.f64_or("weak_tol", dv.weak_tol)?,
        energy_tol: r.f64_or("energy_tol", dv.energy_tol)?,
        norm_tol: r.f64_or("norm_tol", dv.norm_tol)?,
    };
    r.finish()?;

    let mut r = reader(&mut doc, "lab", false)?;
    let dl = LabSpec::default();
    let eps = match r.raw("eps") {
        Some((l, v)) => {
            let e = Reader::list(l, "eps", &v)?;
            if e.is_empty() || e.iter().any(|x| !(*x >= 0.0)) {
                return Err(err(l, "constraint violated: eps >= 0"));
            }
            e
        }
        None => dl.eps,
    };
    let lab = LabSpec {
        eps,
        levels: r.usize_or("levels", dl.levels)?,
    };
    r.finish()?;

    Ok(RunConfig {
        grid,
        params,
        initial,
        field,
        solver,
        output,
        verify,
        lab,
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_in(&text, base)
}

fn vec3_text(v: Vec3<f64>) -> String {
    format!("{} {} {}", v.x(), v.y(), v.z())
}

/// Writes `cfg` in the configuration grammar; `parse_config` of the result
/// reproduces `cfg` exactly.
pub fn format_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    let [ex, ey, ez] = cfg.grid.extents();
    let [nx, ny, nz] = cfg.grid.cells();
    line("[grid]".into());
    line(format!("extents = {ex} {ey} {ez}"));
    line(format!("cells = {nx} {ny} {nz}"));
    let p = &cfg.params;
    line("\n[material]".into());
    line(format!("ell_ex = {}", p.ell_ex));
    line(format!("kappa = {}", p.kappa));
    line(format!("alpha = {}", p.alpha));
    line(format!("aniso_axis = {}", vec3_text(p.aniso_axis)));
    line(format!("aniso_strength = {}", p.aniso_strength));
    line(format!("enable_aniso = {}", p.enable_aniso));
    line(format!("enable_demag = {}", p.enable_demag));
    line("\n[initial]".into());
    match &cfg.initial {
        InitialCondition::Uniform(v) => {
            line("kind = uniform".into());
            line(format!("direction = {}", vec3_text(*v)));
        }
        InitialCondition::Helix { axis, wavenumber } => {
            line("kind = helix".into());
            line(format!("axis = {}", axis + 1));
            line(format!("wavenumber = {wavenumber}"));
        }
        InitialCondition::SkyrmionSeed { center, radius } => {
            line("kind = skyrmion_seed".into());
            line(format!("center = {}", vec3_text(*center)));
            line(format!("radius = {radius}"));
        }
        InitialCondition::File(path) => {
            line("kind = file".into());
            line(format!("path = {}", path.display()));
        }
    }
    line("\n[field]".into());
    match &cfg.field {
        AppliedField::Constant(v) => {
            line("kind = constant".into());
            line(format!("value = {}", vec3_text(*v)));
        }
        AppliedField::Ramp { start, rate } => {
            line("kind = ramp".into());
            line(format!("start = {}", vec3_text(*start)));
            line(format!("rate = {}", vec3_text(*rate)));
        }
        AppliedField::Rotating { bias, amplitude, omega } => {
            line("kind = rotating".into());
            line(format!("bias = {}", vec3_text(*bias)));
            line(format!("amplitude = {amplitude}"));
            line(format!("omega = {omega}"));
        }
        AppliedField::Tabulated { times, values } => {
            line("kind = tabulated".into());
            let t: Vec<String> = times.iter().map(|t| t.to_string()).collect();
            line(format!("times = {}", t.join(" ")));
            let v: Vec<String> = values.iter().map(|v| vec3_text(*v)).collect();
            line(format!("values = {}", v.join("; ")));
        }
    }
    let sv = &cfg.solver;
    line("\n[solver]".into());
    line(format!("scheme = {}", sv.scheme));
    line(format!("dt = {}", sv.dt));
    line(format!("t_end = {}", sv.t_end));
    line(format!("tolerance = {}", sv.tolerance));
    line(format!("max_iterations = {}", sv.max_iterations));
    line("\n[output]".into());
    line(format!("dir = {}", cfg.output.dir.display()));
    line(format!("stride = {}", cfg.output.stride));
    line("\n[verify]".into());
    line(format!("weak_tol = {}", cfg.verify.weak_tol));
    line(format!("energy_tol = {}", cfg.verify.energy_tol));
    line(format!("norm_tol = {}", cfg.verify.norm_tol));
    line("\n[lab]".into());
    let e: Vec<String> = cfg.lab.eps.iter().map(|e| e.to_string()).collect();
    line(format!("eps = {}", e.join(" ")));
    line(format!("levels = {}", cfg.lab.levels));
    s
}
