//! Run configuration: a line-oriented `key = value` grammar grouped in
//! `[section]` headers. `#` starts a comment. Lists are whitespace separated.
//!
//! ```text
//! [grid]
//! cells = 16            # or three counts
//! lengths = 1 1 1       # optional, default unit cube
//!
//! [sigma]
//! kind = sigmoid        # constant | sigmoid | table
//! sigma1 = 1            # sigmoid: lower plateau
//! sigma2 = 3            # sigmoid: upper plateau
//! center = 0
//! width = 1
//! # constant: value = 2
//! # table: points = 0:1 1:2 2:2.5
//!
//! [boundary]
//! mode = electric       # electric | tangential
//! u0 = 0                # a, or a b c d for a + b x + c y + d z
//! e = 0.1 0 0           # electric: uniform field
//! psi0 = 0              # electric: amplitude of prod sin(pi x_d / L_d)
//! # tangential: flux = g(x-) g(x+) g(y-) g(y+) g(z-) g(z+)
//! # tangential: h0 = swirl 1 | rotation wx wy wz
//! joule = divergence    # divergence | pointwise
//!
//! [picard]
//! tol = 1e-9
//! max_iter = 100
//! damping = 1
//! linear_tol = 1e-10
//! linear_max_iter = 2400
//!
//! [output]
//! vtk = true
//! raw = true
//!
//! [study]
//! case = smooth-nonlinear
//! grids = 8 16 32
//! scales = 0.01 0.1 1
//! perturbation = 0.1
//! alpha = 0.25
//! mu = 4
//! lattice = 8
//! random_pairs = 0
//! reconstruct_tol = 1e-10
//! seed = 0
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thermistor_core::boundary::SIDES;
use thermistor_core::verification::CATALOG;
use thermistor_core::{
    AppliedField, BoundaryFlux, ConductivityModel, Drive, Grid, JouleMode, NodeField,
    PicardControls, ProblemSpec, SolverControls,
};

/// One parse or validation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    /// `[section].key`, or `[section]` for section-level problems.
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum TangentialData {
    Sides([f64; 6]),
    Swirl(f64),
    Rotation([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryConfig {
    Electric { e: [f64; 3], psi0: f64 },
    Tangential(TangentialData),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub vtk: bool,
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub case: Option<String>,
    pub grids: Option<Vec<usize>>,
    pub scales: Vec<f64>,
    pub perturbation: f64,
    pub alpha: f64,
    pub mu: f64,
    pub lattice: usize,
    pub random_pairs: usize,
    pub reconstruct_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub sigma: ConductivityModel,
    pub boundary: BoundaryConfig,
    /// `a + b x + c y + d z`.
    pub u0: [f64; 4],
    pub joule: JouleMode,
    pub picard: PicardControls,
    pub output: OutputConfig,
    pub study: StudyConfig,
    pub seed: u64,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

const SECTIONS: [&str; 6] = ["grid", "sigma", "boundary", "picard", "output", "study"];
const REQUIRED: [&str; 3] = ["grid", "sigma", "boundary"];

struct Sections {
    map: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    diags: Vec<Diagnostic>,
}

fn key_name(section: &str, key: &str) -> String {
    format!("[{section}].{key}")
}

impl Sections {
    fn parse(text: &str) -> Self {
        let mut map: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
        let mut diags = vec![];
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    diags.push(Diagnostic {
                        line: Some(line),
                        key: body.to_string(),
                        message: "malformed section header".into(),
                    });
                    current = None;
                    continue;
                };
                let name = name.trim().to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    diags.push(Diagnostic {
                        line: Some(line),
                        key: format!("[{name}]"),
                        message: "unknown section".into(),
                    });
                    current = None;
                    continue;
                }
                if let Some((first, _)) = map.get(&name) {
                    diags.push(Diagnostic {
                        line: Some(line),
                        key: format!("[{name}]"),
                        message: format!("duplicate section, first defined on line {first}"),
                    });
                    current = None;
                    continue;
                }
                map.insert(name.clone(), (line, BTreeMap::new()));
                current = Some(name);
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                diags.push(Diagnostic {
                    line: Some(line),
                    key: body.to_string(),
                    message: "expected `key = value`".into(),
                });
                continue;
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            let Some(section) = &current else {
                diags.push(Diagnostic {
                    line: Some(line),
                    key: k,
                    message: "key outside of a known section".into(),
                });
                continue;
            };
            let entries = &mut map.get_mut(section).expect("section exists").1;
            if let Some(prev) = entries.get(&k) {
                diags.push(Diagnostic {
                    line: Some(line),
                    key: key_name(section, &k),
                    message: format!("duplicate key, first defined on line {}", prev.line),
                });
                continue;
            }
            if v.is_empty() {
                diags.push(Diagnostic {
                    line: Some(line),
                    key: key_name(section, &k),
                    message: "missing value".into(),
                });
                continue;
            }
            entries.insert(
                k,
                Entry {
                    line,
                    value: v,
                    used: false,
                },
            );
        }
        for s in REQUIRED {
            if !map.contains_key(s) {
                diags.push(Diagnostic {
                    line: None,
                    key: format!("[{s}]"),
                    message: "missing section".into(),
                });
            }
        }
        Self { map, diags }
    }

    fn error(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let line = self
            .map
            .get(section)
            .and_then(|(l, e)| e.get(key).map(|e| e.line).or(Some(*l)));
        self.diags.push(Diagnostic {
            line,
            key: key_name(section, key),
            message: message.into(),
        });
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<String> {
        let e = self.map.get_mut(section)?.1.get_mut(key)?;
        e.used = true;
        Some(e.value.clone())
    }

    fn parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str, what: &str) -> Option<T> {
        let v = self.raw(section, key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.error(section, key, format!("expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<f64> {
        let x: f64 = self.parsed(section, key, "a number")?;
        if !x.is_finite() {
            self.error(section, key, "must be finite");
            return None;
        }
        Some(x)
    }

    fn floats(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(section, key)?;
        let mut out = vec![];
        for t in v.split_whitespace() {
            match t.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.error(section, key, format!("expected numbers, got `{t}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn counts(&mut self, section: &str, key: &str) -> Option<Vec<usize>> {
        let v = self.raw(section, key)?;
        let mut out = vec![];
        for t in v.split_whitespace() {
            match t.parse::<usize>() {
                Ok(x) => out.push(x),
                Err(_) => {
                    self.error(section, key, format!("expected non-negative integers, got `{t}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn boolean(&mut self, section: &str, key: &str) -> Option<bool> {
        let v = self.raw(section, key)?;
        match v.as_str() {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => {
                self.error(section, key, format!("expected true or false, got `{v}`"));
                None
            }
        }
    }

    fn require<T>(&mut self, section: &str, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.map.contains_key(section) && !self.has(section, key) {
            self.error(section, key, "missing key");
        }
        v
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.map.get(section).is_some_and(|(_, e)| e.contains_key(key))
    }

    fn finish_unknown(&mut self) {
        let mut extra = vec![];
        for (s, (_, entries)) in &self.map {
            for (k, e) in entries {
                if !e.used {
                    extra.push(Diagnostic {
                        line: Some(e.line),
                        key: key_name(s, k),
                        message: "unknown key".into(),
                    });
                }
            }
        }
        self.diags.extend(extra);
        self.diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
    }
}

fn three(v: &[f64]) -> Option<[f64; 3]> {
    (v.len() == 3).then(|| [v[0], v[1], v[2]])
}

/// Parses and validates a configuration. All problems are collected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut s = Sections::parse(text);

    // grid
    let cells = s.counts("grid", "cells");
    let cells = s.require("grid", "cells", cells).and_then(|c| match c.len() {
        1 => Some([c[0]; 3]),
        3 => Some([c[0], c[1], c[2]]),
        _ => {
            s.error("grid", "cells", "expected one or three counts");
            None
        }
    });
    let lengths = match s.floats("grid", "lengths") {
        Some(v) => three(&v).or_else(|| {
            s.error("grid", "lengths", "expected three lengths");
            None
        }),
        None if s.has("grid", "lengths") => None,
        None => Some([1.0; 3]),
    };
    if let Some(c) = cells {
        if c.iter().any(|&n| n < 2) {
            s.error("grid", "cells", "every axis needs at least 2 cells");
        }
    }
    if let Some(l) = lengths {
        if l.iter().any(|&x| x <= 0.0) {
            s.error("grid", "lengths", "lengths must be positive");
        }
    }
    let grid = match (cells, lengths) {
        (Some(c), Some(l)) => Grid::new(l, c).ok(),
        _ => None,
    };

    // sigma
    let kind = s.raw("sigma", "kind");
    let kind = s.require("sigma", "kind", kind);
    let sigma = match kind.as_deref() {
        Some("constant") => {
            let v = s.float("sigma", "value");
            match s.require("sigma", "value", v) {
                Some(v) if v <= 0.0 => {
                    s.error("sigma", "value", format!("conductivity must be positive, got {v}"));
                    None
                }
                Some(v) => ConductivityModel::constant(v).ok(),
                None => None,
            }
        }
        Some("sigmoid") => {
            let s1 = s.float("sigma", "sigma1");
            let s1 = s.require("sigma", "sigma1", s1);
            let s2 = s.float("sigma", "sigma2");
            let s2 = s.require("sigma", "sigma2", s2);
            let c = s.float("sigma", "center").or(Some(0.0));
            let w = s.float("sigma", "width");
            let w = s.require("sigma", "width", w);
            let mut ok = true;
            if let Some(a) = s1 {
                if a <= 0.0 {
                    s.error("sigma", "sigma1", format!("lower bound must be positive, got {a}"));
                    ok = false;
                }
            }
            if let (Some(a), Some(b)) = (s1, s2) {
                if b < a {
                    s.error("sigma", "sigma2", format!("upper bound {b} is below sigma1 = {a}"));
                    ok = false;
                }
            }
            if let Some(w) = w {
                if w <= 0.0 {
                    s.error("sigma", "width", format!("width must be positive, got {w}"));
                    ok = false;
                }
            }
            match (ok, s1, s2, c, w) {
                (true, Some(a), Some(b), Some(c), Some(w)) => ConductivityModel::sigmoid(a, b, c, w).ok(),
                _ => None,
            }
        }
        Some("table") => {
            let raw = s.raw("sigma", "points");
            match s.require("sigma", "points", raw) {
                Some(raw) => {
                    let mut pts = vec![];
                    let mut bad = None;
                    for t in raw.split_whitespace() {
                        let p = t
                            .split_once(':')
                            .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)));
                        match p {
                            Some(p) => pts.push(p),
                            None => {
                                bad = Some(t.to_string());
                                break;
                            }
                        }
                    }
                    if let Some(t) = bad {
                        s.error("sigma", "points", format!("expected s:sigma pairs, got `{t}`"));
                        None
                    } else if let Some(&(_, v)) = pts.iter().find(|p| !(p.1 > 0.0)) {
                        s.error("sigma", "points", format!("table values must be positive, got {v}"));
                        None
                    } else {
                        match ConductivityModel::table(pts) {
                            Ok(m) => Some(m),
                            Err(e) => {
                                s.error("sigma", "points", e.to_string());
                                None
                            }
                        }
                    }
                }
                None => None,
            }
        }
        Some(other) => {
            s.error("sigma", "kind", format!("expected constant, sigmoid or table, got `{other}`"));
            None
        }
        None => None,
    };

    // boundary
    let u0 = match s.floats("boundary", "u0") {
        Some(v) if v.len() == 1 => Some([v[0], 0.0, 0.0, 0.0]),
        Some(v) if v.len() == 4 => Some([v[0], v[1], v[2], v[3]]),
        Some(_) => {
            s.error("boundary", "u0", "expected one or four coefficients");
            None
        }
        None if s.has("boundary", "u0") => None,
        None => Some([0.0; 4]),
    };
    let joule = match s.raw("boundary", "joule").as_deref() {
        None | Some("divergence") => Some(JouleMode::Divergence),
        Some("pointwise") => Some(JouleMode::Pointwise),
        Some(other) => {
            s.error("boundary", "joule", format!("expected divergence or pointwise, got `{other}`"));
            None
        }
    };
    let mode = s.raw("boundary", "mode");
    let mode = s.require("boundary", "mode", mode);
    let boundary = match mode.as_deref() {
        Some("electric") => {
            let e = match s.floats("boundary", "e") {
                Some(v) => three(&v).or_else(|| {
                    s.error("boundary", "e", "expected three components");
                    None
                }),
                None => {
                    s.require::<()>("boundary", "e", None);
                    None
                }
            };
            let psi0 = s.float("boundary", "psi0").or(Some(0.0));
            e.zip(psi0).map(|(e, psi0)| BoundaryConfig::Electric { e, psi0 })
        }
        Some("tangential") => {
            let flux = s.floats("boundary", "flux");
            let h0 = s.raw("boundary", "h0");
            match (flux, h0) {
                (Some(_), Some(_)) => {
                    s.error("boundary", "h0", "give either flux or h0, not both");
                    None
                }
                (Some(v), None) => {
                    if v.len() == 6 {
                        Some(BoundaryConfig::Tangential(TangentialData::Sides([
                            v[0], v[1], v[2], v[3], v[4], v[5],
                        ])))
                    } else {
                        s.error("boundary", "flux", format!("expected six values ordered {}", SIDES.join(" ")));
                        None
                    }
                }
                (None, Some(h)) => {
                    let parts: Vec<&str> = h.split_whitespace().collect();
                    let nums: Option<Vec<f64>> = parts[1..].iter().map(|t| t.parse().ok()).collect();
                    match (parts[0], nums) {
                        ("swirl", Some(n)) if n.len() == 1 => {
                            Some(BoundaryConfig::Tangential(TangentialData::Swirl(n[0])))
                        }
                        ("rotation", Some(n)) if n.len() == 3 => Some(BoundaryConfig::Tangential(
                            TangentialData::Rotation([n[0], n[1], n[2]]),
                        )),
                        _ => {
                            s.error("boundary", "h0", format!("expected `swirl a` or `rotation wx wy wz`, got `{h}`"));
                            None
                        }
                    }
                }
                (None, None) => {
                    if !s.has("boundary", "flux") && !s.has("boundary", "h0") {
                        s.error("boundary", "flux", "tangential mode needs flux or h0");
                    }
                    None
                }
            }
        }
        Some(other) => {
            s.error("boundary", "mode", format!("expected electric or tangential, got `{other}`"));
            None
        }
        None => None,
    };

    // picard
    let mut picard = grid.as_ref().map(PicardControls::for_grid);
    let linear_default = grid.as_ref().map(SolverControls::for_grid);
    let tol = s.float("picard", "tol");
    let max_iter: Option<usize> = s.parsed("picard", "max_iter", "a count");
    let damping = s.float("picard", "damping");
    let linear_tol = s.float("picard", "linear_tol");
    let linear_max: Option<usize> = s.parsed("picard", "linear_max_iter", "a count");
    for (key, v) in [("tol", tol), ("linear_tol", linear_tol)] {
        if let Some(t) = v {
            if !(t > 0.0 && t < 1.0) {
                s.error("picard", key, format!("tolerance must lie in (0,1), got {t}"));
            }
        }
    }
    if let Some(d) = damping {
        if !(d > 0.0 && d <= 1.0) {
            s.error("picard", "damping", format!("damping must lie in (0,1], got {d}"));
        }
    }
    for (key, v) in [("max_iter", max_iter), ("linear_max_iter", linear_max)] {
        if v == Some(0) {
            s.error("picard", key, "must be positive");
        }
    }
    if let (Some(p), Some(l)) = (picard.as_mut(), linear_default) {
        p.tol = tol.unwrap_or(p.tol);
        p.max_iter = max_iter.unwrap_or(p.max_iter);
        p.damping = damping.unwrap_or(p.damping);
        p.linear = SolverControls {
            tol: linear_tol.unwrap_or(l.tol),
            max_iter: linear_max.unwrap_or(l.max_iter),
        };
    }

    // output
    let output = OutputConfig {
        vtk: s.boolean("output", "vtk").unwrap_or(true),
        raw: s.boolean("output", "raw").unwrap_or(true),
    };

    // study
    let case = s.raw("study", "case");
    if let Some(c) = &case {
        if c != "all" && !CATALOG.contains(&c.as_str()) {
            s.error("study", "case", format!("unknown case `{c}`, expected all or one of {}", CATALOG.join(", ")));
        }
    }
    let grids = s.counts("study", "grids");
    if let Some(g) = &grids {
        if g.len() < 3 || g.iter().any(|&n| n < 2) {
            s.error("study", "grids", "expected at least three grids of 2 or more cells");
        }
    }
    let scales = s.floats("study", "scales").unwrap_or_else(|| vec![0.01, 0.03, 0.1, 0.3, 1.0]);
    if scales.is_empty() || scales.iter().any(|&x| x <= 0.0) {
        s.error("study", "scales", "scales must be positive");
    }
    let alpha = s.float("study", "alpha").unwrap_or(0.25);
    if !(alpha > 0.0 && alpha <= 1.0) {
        s.error("study", "alpha", format!("exponent must lie in (0,1], got {alpha}"));
    }
    let mu = s.float("study", "mu").unwrap_or(4.0);
    if !(mu > 0.0 && mu <= 5.0) {
        s.error("study", "mu", format!("exponent must lie in (0,5], got {mu}"));
    }
    let reconstruct_tol = s.float("study", "reconstruct_tol").unwrap_or(1e-10);
    if !(reconstruct_tol > 0.0 && reconstruct_tol < 1.0) {
        s.error("study", "reconstruct_tol", format!("tolerance must lie in (0,1), got {reconstruct_tol}"));
    }
    let lattice = s.parsed("study", "lattice", "a count").unwrap_or(8);
    if lattice == 0 {
        s.error("study", "lattice", "must be positive");
    }
    let study = StudyConfig {
        case,
        grids,
        scales,
        perturbation: s.float("study", "perturbation").unwrap_or(0.1),
        alpha,
        mu,
        lattice,
        random_pairs: s.parsed("study", "random_pairs", "a count").unwrap_or(0),
        reconstruct_tol,
    };
    let seed = s.parsed("study", "seed", "an unsigned integer").unwrap_or(0);

    s.finish_unknown();
    if !s.diags.is_empty() {
        return Err(ConfigError(s.diags));
    }
    let (Some(grid), Some(sigma), Some(boundary), Some(u0), Some(joule), Some(picard)) =
        (grid, sigma, boundary, u0, joule, picard)
    else {
        return Err(ConfigError(vec![Diagnostic {
            line: None,
            key: "config".into(),
            message: "incomplete configuration".into(),
        }]));
    };
    let config = RunConfig {
        grid,
        sigma,
        boundary,
        u0,
        joule,
        picard,
        output,
        study,
        seed,
    };
    // compatibility of tangential data is checked here so that it is reported
    // against the offending key
    if let BoundaryConfig::Tangential(t) = &config.boundary {
        let flux = config.flux(config.grid);
        if let Err(thermistor_core::Error::IncompatibleFlux { total, limit }) = flux.check_compatible() {
            let key = match t {
                TangentialData::Sides(_) => "flux",
                _ => "h0",
            };
            let mut s = Sections::parse(text);
            s.error(
                "boundary",
                key,
                format!("boundary flux is incompatible: total {total:e} exceeds {limit:e}"),
            );
            return Err(ConfigError(s.diags));
        }
    }
    Ok(config)
}

impl RunConfig {
    /// Same configuration on an `n^3` refinement of the box.
    pub fn with_cells(&self, n: usize) -> Result<Self, thermistor_core::Error> {
        let mut c = self.clone();
        c.grid = Grid::new(self.grid.lengths(), [n; 3])?;
        c.picard.linear = SolverControls {
            tol: self.picard.linear.tol,
            max_iter: SolverControls::for_grid(&c.grid)
                .max_iter
                .max(self.picard.linear.max_iter),
        };
        Ok(c)
    }

    pub fn flux(&self, grid: Grid) -> BoundaryFlux {
        let l = grid.lengths();
        match &self.boundary {
            BoundaryConfig::Tangential(TangentialData::Sides(g)) => BoundaryFlux::uniform_sides(grid, *g),
            BoundaryConfig::Tangential(TangentialData::Swirl(a)) => {
                let (kx, ky) = (std::f64::consts::PI / l[0], std::f64::consts::PI / l[1]);
                let a = *a;
                BoundaryFlux::from_tangential_field(grid, move |x| {
                    [
                        -a * ky * (kx * x[0]).sin() * (ky * x[1]).cos(),
                        a * kx * (kx * x[0]).cos() * (ky * x[1]).sin(),
                        0.0,
                    ]
                })
            }
            BoundaryConfig::Tangential(TangentialData::Rotation(w)) => {
                let w = *w;
                BoundaryFlux::from_tangential_field(grid, move |x| {
                    [
                        w[1] * x[2] - w[2] * x[1],
                        w[2] * x[0] - w[0] * x[2],
                        w[0] * x[1] - w[1] * x[0],
                    ]
                })
            }
            BoundaryConfig::Electric { .. } => BoundaryFlux::zero(grid),
        }
    }

    /// The problem with its boundary forcing multiplied by `scale`.
    pub fn problem_scaled(&self, scale: f64) -> Result<ProblemSpec, thermistor_core::Error> {
        let grid = self.grid;
        let l = grid.lengths();
        let c = self.u0;
        let u0 = NodeField::from_fn(grid, |x| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2]);
        let drive = match &self.boundary {
            BoundaryConfig::Electric { e, psi0 } => {
                let a = *psi0;
                let psi = NodeField::from_fn(grid, |x| {
                    a * (0..3)
                        .map(|d| (std::f64::consts::PI * x[d] / l[d]).sin())
                        .product::<f64>()
                });
                Drive::Electric(AppliedField { psi0: psi, uniform: *e }.scaled(scale))
            }
            BoundaryConfig::Tangential(_) => Drive::Tangential(self.flux(grid).scaled(scale)),
        };
        ProblemSpec::new(self.sigma.clone(), u0, drive, self.joule, self.picard)
    }

    pub fn problem(&self) -> Result<ProblemSpec, thermistor_core::Error> {
        self.problem_scaled(1.0)
    }
}
