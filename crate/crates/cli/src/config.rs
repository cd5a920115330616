//! Run configuration: a line-oriented `key = value` format with
//! `[section]` headers.
//!
//! ```text
//! [lattice]
//! epsilon = 0.015625
//! gamma   = 0.5
//! domain  = hexagon.poly          # path, relative to this file
//!
//! [potentials]
//! psi    = quadratic
//! alpha1 = 2.0
//! alpha2 = 2.0
//!
//! [dislocations]
//! entry = 0.0, 0.001, 1, 0, 0.0   # x, y, b1, b2, theta (repeatable)
//!
//! [far_field]
//! matrix = 0.0, 0.0, 0.0, 0.0     # m11, m12, m21, m22
//!
//! [rotation]
//! angle = 0.0
//!
//! [solver]
//! grad_tol = 1e-8                 # relative to epsilon
//! max_iter = 20000
//!
//! [scaling]
//! epsilons = 0.0625, 0.03125, 0.015625
//!
//! [output]
//! csv = scaling.csv
//! svg = scaling.svg
//! ```
//!
//! Comments start with `#`. Validation reports every problem found, not
//! just the first, each tagged with its line and field.

use std::fmt;
use std::path::{Path, PathBuf};

use tridis::energy::PotentialPair;
use tridis::geometry::{Mat2, Polygon, Vec2};
use tridis::recovery::FarField;
use tridis::strain::{Dislocation, DislocationMeasure};

#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: [{}] {}", self.line, self.field, self.message)
        } else {
            write!(f, "[{}] {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub domain: Polygon,
    pub pot: PotentialPair,
    pub dislocations: Vec<Dislocation>,
    pub rotation_angle: f64,
    pub far_field: FarField,
    pub grad_tol_rel: f64,
    pub max_iter: usize,
    pub scaling_epsilons: Vec<f64>,
    pub out_csv: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
}

impl RunConfig {
    pub fn measure(&self) -> Result<DislocationMeasure, tridis::Error> {
        DislocationMeasure::new(self.dislocations.clone(), self.epsilon, self.gamma)
    }
}

struct RawEntry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn tokenize(text: &str) -> (Vec<RawEntry>, Vec<ConfigError>) {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut section = String::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if stripped.starts_with('[') {
            if stripped.ends_with(']') {
                section = stripped[1..stripped.len() - 1].trim().to_string();
            } else {
                errors.push(ConfigError {
                    line,
                    field: stripped.to_string(),
                    message: "unterminated section header".into(),
                });
            }
            continue;
        }
        match stripped.split_once('=') {
            Some((k, v)) => entries.push(RawEntry {
                line,
                section: section.clone(),
                key: k.trim().to_string(),
                value: v.trim().to_string(),
            }),
            None => errors.push(ConfigError {
                line,
                field: stripped.to_string(),
                message: "expected `key = value`".into(),
            }),
        }
    }
    (entries, errors)
}

fn parse_f64(e: &RawEntry, errors: &mut Vec<ConfigError>) -> Option<f64> {
    match e.value.parse::<f64>() {
        Ok(v) => Some(v),
        Err(err) => {
            errors.push(ConfigError {
                line: e.line,
                field: format!("{}.{}", e.section, e.key),
                message: format!("not a number: {err}"),
            });
            None
        }
    }
}

fn parse_list_f64(e: &RawEntry, errors: &mut Vec<ConfigError>) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for piece in e.value.split(',') {
        match piece.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(err) => {
                errors.push(ConfigError {
                    line: e.line,
                    field: format!("{}.{}", e.section, e.key),
                    message: format!("bad list item {piece:?}: {err}"),
                });
                return None;
            }
        }
    }
    Some(out)
}

/// Parses and fully validates a run configuration. On failure, the list
/// carries every detected problem.
pub fn parse_config(path: &Path) -> Result<RunConfig, Vec<ConfigError>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigError {
            line: 0,
            field: path.display().to_string(),
            message: format!("cannot read config: {e}"),
        }]
    })?;
    parse_config_text(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_config_text(text: &str, base_dir: &Path) -> Result<RunConfig, Vec<ConfigError>> {
    let (entries, mut errors) = tokenize(text);

    let mut epsilon = None;
    let mut gamma = None;
    let mut domain_path: Option<(usize, PathBuf)> = None;
    let mut psi_name: Option<(usize, String)> = None;
    let mut alpha1 = 2.0;
    let mut alpha2 = 2.0;
    let mut dislocations: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut rotation_angle = 0.0;
    let mut far_matrix: Option<(usize, Vec<f64>)> = None;
    let mut grad_tol_rel = 1e-8;
    let mut max_iter = 20_000usize;
    let mut scaling_epsilons = Vec::new();
    let mut out_csv = None;
    let mut out_svg = None;

    for e in &entries {
        match (e.section.as_str(), e.key.as_str()) {
            ("lattice", "epsilon") => epsilon = parse_f64(e, &mut errors).map(|v| (e.line, v)),
            ("lattice", "gamma") => gamma = parse_f64(e, &mut errors).map(|v| (e.line, v)),
            ("lattice", "domain") => {
                domain_path = Some((e.line, base_dir.join(&e.value)));
            }
            ("potentials", "psi") => psi_name = Some((e.line, e.value.clone())),
            ("potentials", "alpha1") => {
                if let Some(v) = parse_f64(e, &mut errors) {
                    alpha1 = v;
                }
            }
            ("potentials", "alpha2") => {
                if let Some(v) = parse_f64(e, &mut errors) {
                    alpha2 = v;
                }
            }
            ("dislocations", "entry") => {
                if let Some(vals) = parse_list_f64(e, &mut errors) {
                    dislocations.push((e.line, vals));
                }
            }
            ("rotation", "angle") => {
                if let Some(v) = parse_f64(e, &mut errors) {
                    rotation_angle = v;
                }
            }
            ("far_field", "matrix") => {
                if let Some(vals) = parse_list_f64(e, &mut errors) {
                    far_matrix = Some((e.line, vals));
                }
            }
            ("solver", "grad_tol") => {
                if let Some(v) = parse_f64(e, &mut errors) {
                    grad_tol_rel = v;
                }
            }
            ("solver", "max_iter") => match e.value.parse::<usize>() {
                Ok(v) => max_iter = v,
                Err(err) => errors.push(ConfigError {
                    line: e.line,
                    field: "solver.max_iter".into(),
                    message: format!("not an integer: {err}"),
                }),
            },
            ("scaling", "epsilons") => {
                if let Some(vals) = parse_list_f64(e, &mut errors) {
                    scaling_epsilons = vals;
                }
            }
            ("output", "csv") => out_csv = Some(base_dir.join(&e.value)),
            ("output", "svg") => out_svg = Some(base_dir.join(&e.value)),
            _ => errors.push(ConfigError {
                line: e.line,
                field: format!("{}.{}", e.section, e.key),
                message: "unknown key".into(),
            }),
        }
    }

    // range checks
    let epsilon_v = match epsilon {
        Some((line, v)) => {
            if !(v > 0.0 && v.is_finite()) {
                errors.push(ConfigError {
                    line,
                    field: "lattice.epsilon".into(),
                    message: format!("must be positive, got {v}"),
                });
            }
            v
        }
        None => {
            errors.push(ConfigError {
                line: 0,
                field: "lattice.epsilon".into(),
                message: "missing".into(),
            });
            f64::NAN
        }
    };
    let gamma_v = match gamma {
        Some((line, v)) => {
            if !(v > 0.0 && v < 1.0) {
                errors.push(ConfigError {
                    line,
                    field: "lattice.gamma".into(),
                    message: format!("must lie in (0, 1), got {v}"),
                });
            }
            v
        }
        None => 0.5,
    };
    if let Some((line, name)) = &psi_name {
        if name != "quadratic" {
            errors.push(ConfigError {
                line: *line,
                field: "potentials.psi".into(),
                message: format!("unknown potential {name:?}; supported: quadratic"),
            });
        }
    }
    let pot = match PotentialPair::quadratic(alpha1, alpha2) {
        Ok(p) => p,
        Err(e) => {
            errors.push(ConfigError {
                line: 0,
                field: "potentials".into(),
                message: e.to_string(),
            });
            PotentialPair::default()
        }
    };
    let domain = match &domain_path {
        Some((line, p)) => match std::fs::read_to_string(p) {
            Ok(text) => match parse_polygon(&text) {
                Ok(poly) => Some(poly),
                Err(msg) => {
                    errors.push(ConfigError {
                        line: *line,
                        field: "lattice.domain".into(),
                        message: format!("{}: {msg}", p.display()),
                    });
                    None
                }
            },
            Err(e) => {
                errors.push(ConfigError {
                    line: *line,
                    field: "lattice.domain".into(),
                    message: format!("cannot read {}: {e}", p.display()),
                });
                None
            }
        },
        None => {
            errors.push(ConfigError {
                line: 0,
                field: "lattice.domain".into(),
                message: "missing".into(),
            });
            None
        }
    };

    let mut entries_v = Vec::new();
    for (line, vals) in &dislocations {
        if vals.len() != 5 {
            errors.push(ConfigError {
                line: *line,
                field: "dislocations.entry".into(),
                message: format!(
                    "expected x, y, b1, b2, theta (5 values), got {}",
                    vals.len()
                ),
            });
            continue;
        }
        let (b1, b2) = (vals[2], vals[3]);
        if b1.fract() != 0.0 || b2.fract() != 0.0 {
            errors.push(ConfigError {
                line: *line,
                field: "dislocations.entry".into(),
                message: "Burgers coordinates must be integers".into(),
            });
            continue;
        }
        entries_v.push(Dislocation {
            position: Vec2::new(vals[0], vals[1]),
            burgers: (b1 as i32, b2 as i32),
            frame_angle: vals[4],
        });
    }

    let far_field = match &far_matrix {
        None => FarField::Zero,
        Some((line, vals)) => {
            if vals.len() != 4 {
                errors.push(ConfigError {
                    line: *line,
                    field: "far_field.matrix".into(),
                    message: format!("expected 4 entries, got {}", vals.len()),
                });
                FarField::Zero
            } else if vals.iter().all(|v| *v == 0.0) {
                FarField::Zero
            } else {
                FarField::Constant(Mat2([[vals[0], vals[1]], [vals[2], vals[3]]]))
            }
        }
    };

    for &eps in &scaling_epsilons {
        if !(eps > 0.0) {
            errors.push(ConfigError {
                line: 0,
                field: "scaling.epsilons".into(),
                message: format!("ladder values must be positive, got {eps}"),
            });
        }
    }

    // separation / margin constraints, checked at validation time
    if let Some(domain) = &domain {
        if epsilon_v.is_finite() && gamma_v > 0.0 && gamma_v < 1.0 {
            let all_eps: Vec<f64> = if scaling_epsilons.is_empty() {
                vec![epsilon_v]
            } else {
                scaling_epsilons.clone()
            };
            for eps in all_eps {
                if !(eps > 0.0) {
                    continue;
                }
                if let Ok(mu) = DislocationMeasure::new(entries_v.clone(), eps, gamma_v) {
                    if let Err(e) = mu.validate(domain) {
                        errors.push(ConfigError {
                            line: 0,
                            field: "dislocations".into(),
                            message: format!("at epsilon = {eps}: {e}"),
                        });
                    }
                }
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunConfig {
        epsilon: epsilon_v,
        gamma: gamma_v,
        domain: domain.unwrap(),
        pot,
        dislocations: entries_v,
        rotation_angle,
        far_field,
        grad_tol_rel,
        max_iter,
        scaling_epsilons,
        out_csv,
        out_svg,
    })
}

/// Domain polygon file: one `x y` vertex pair per line, counter-clockwise.
pub fn parse_polygon(text: &str) -> Result<Polygon, String> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let stripped = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let mut it = stripped.split_whitespace();
        let x = it
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| format!("line {}: expected `x y`", i + 1))?;
        let y = it
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| format!("line {}: expected `x y`", i + 1))?;
        if it.next().is_some() {
            return Err(format!("line {}: trailing fields", i + 1));
        }
        pts.push(Vec2::new(x, y));
    }
    Polygon::new(pts).map_err(|e| e.to_string())
}
