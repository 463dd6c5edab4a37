//! Run configuration: a flat `key = value` file, overridden by flags.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use inflap::asymptotics::{default_p_list, StudyConfig};
use inflap::eigensolver::{check_exponent, validate_p_list, SeedProfile, SolverConfig};
use inflap::geometry::{DomainSpec, Point};

pub const OUT_ENV: &str = "INFLAP_OUT";
pub const DEFAULT_OUT: &str = "inflap_out";
pub const DEFAULT_H: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Every key the config file and the flags understand.
const KEYS: &[&str] = &[
    "shape",
    "h",
    "p",
    "p_list",
    "out",
    "formats",
    "reproducible",
    "seed",
    "radius",
    "center",
    "r_in",
    "r_out",
    "side",
    "width",
    "height",
    "outer_side",
    "notch_side",
    "vertices",
    "max_iters",
    "grad_tol",
    "grad_tol_large_p",
    "large_p_threshold",
    "seed_profile",
    "bound_constant",
    "concentration_eps_cells",
    "ray_threshold",
];

/// Raw settings before typing. Later inserts win.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines. `[section]` headers and `#` comments are
    /// allowed; keys are global, so a header only groups lines.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("unknown config key `{key}`"));
        }
        self.map.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// `key = value` lines that reproduce these settings.
    pub fn render(&self) -> String {
        self.map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn real(&self, key: &str) -> Result<Option<f64>, String> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| format!("`{key}` expects a number, got `{v}`")))
            .transpose()
    }

    fn real_or(&self, key: &str, default: f64) -> Result<f64, String> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn point_or(&self, key: &str, default: Point) -> Result<Point, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_point(v).ok_or_else(|| format!("`{key}` expects x,y, got `{v}`")),
        }
    }
}

pub fn parse_point(s: &str) -> Option<Point> {
    let (a, b) = s.split_once(',')?;
    Some(Point::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
}

pub fn parse_p_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad exponent `{}` in p list", t.trim())))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub h: f64,
    pub p: Option<f64>,
    pub p_list: Vec<f64>,
    pub solver: SolverConfig,
    pub study: StudyConfig,
    pub out_dir: PathBuf,
    pub formats: BTreeSet<Format>,
    pub reproducible: bool,
    pub seed: u64,
}

impl RunConfig {
    /// `env_out` is the value of the output-directory variable, if set. It
    /// beats the config file but not an explicit flag, which the caller
    /// records in `flag_out`.
    pub fn resolve(s: &Settings, env_out: Option<String>, flag_out: Option<&str>) -> Result<Self, String> {
        let domain = domain_of(s)?;
        domain.validate().map_err(|e| e.to_string())?;
        let h = s.real_or("h", DEFAULT_H)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(format!("h must be positive, got {h}"));
        }
        let p = s.real("p")?;
        if let Some(p) = p {
            check_exponent(p).map_err(|e| e.to_string())?;
        }
        let p_list = match s.get("p_list") {
            Some(v) => parse_p_list(v)?,
            None => default_p_list(),
        };
        validate_p_list(&p_list).map_err(|e| e.to_string())?;

        let mut solver = SolverConfig::default();
        if let Some(v) = s.get("max_iters") {
            solver.max_iters = v.parse().map_err(|_| format!("`max_iters` expects an integer, got `{v}`"))?;
        }
        solver.grad_tol = s.real_or("grad_tol", solver.grad_tol)?;
        solver.grad_tol_large_p = s.real_or("grad_tol_large_p", solver.grad_tol_large_p)?;
        solver.large_p_threshold = s.real_or("large_p_threshold", solver.large_p_threshold)?;
        if let Some(v) = s.get("seed_profile") {
            solver.seed_profile = match v {
                "distance" | "distance_field" => SeedProfile::DistanceField,
                "cone" => SeedProfile::Cone,
                "ones" => SeedProfile::Ones,
                _ => return Err(format!("unknown seed profile `{v}` (distance, cone, ones)")),
            };
        }
        solver.validate().map_err(|e| e.to_string())?;

        let mut study = StudyConfig { solver: solver.clone(), ..StudyConfig::default() };
        study.bound_constant = s.real_or("bound_constant", study.bound_constant)?;
        study.concentration_eps_cells = s.real_or("concentration_eps_cells", study.concentration_eps_cells)?;
        study.ray_threshold = s.real_or("ray_threshold", study.ray_threshold)?;

        let out_dir = match (flag_out, env_out.filter(|v| !v.is_empty()), s.get("out")) {
            (Some(f), _, _) => PathBuf::from(f),
            (None, Some(e), _) => PathBuf::from(e),
            (None, None, Some(c)) => PathBuf::from(c),
            (None, None, None) => PathBuf::from(DEFAULT_OUT),
        };

        let formats = match s.get("formats") {
            None => [Format::Csv, Format::Json, Format::Svg].into_iter().collect(),
            Some(v) => {
                let mut set = BTreeSet::new();
                for t in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    set.insert(match t {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        "svg" => Format::Svg,
                        _ => return Err(format!("unknown format `{t}` (csv, json, svg)")),
                    });
                }
                if set.is_empty() {
                    return Err("formats must name at least one of csv, json, svg".into());
                }
                set
            }
        };

        let reproducible = match s.get("reproducible") {
            None => false,
            Some("true" | "1" | "yes") => true,
            Some("false" | "0" | "no") => false,
            Some(v) => return Err(format!("`reproducible` expects true or false, got `{v}`")),
        };
        let seed = match s.get("seed") {
            None => 0,
            Some(v) => v.parse().map_err(|_| format!("`seed` expects an unsigned integer, got `{v}`"))?,
        };

        Ok(RunConfig { domain, h, p, p_list, solver, study, out_dir, formats, reproducible, seed })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn domain_of(s: &Settings) -> Result<DomainSpec, String> {
    let shape = s.get("shape").unwrap_or("disk");
    let origin = Point::new(0.0, 0.0);
    Ok(match shape {
        "disk" => DomainSpec::Disk { center: s.point_or("center", origin)?, radius: s.real_or("radius", 1.0)? },
        "square" => {
            let side = s.real_or("side", 1.0)?;
            let c = s.point_or("center", Point::new(side / 2.0, side / 2.0))?;
            DomainSpec::Rectangle {
                corner_min: Point::new(c.x - side / 2.0, c.y - side / 2.0),
                corner_max: Point::new(c.x + side / 2.0, c.y + side / 2.0),
            }
        }
        "rectangle" => {
            let (w, h) = (s.real_or("width", 2.0)?, s.real_or("height", 1.0)?);
            let c = s.point_or("center", Point::new(w / 2.0, h / 2.0))?;
            DomainSpec::Rectangle {
                corner_min: Point::new(c.x - w / 2.0, c.y - h / 2.0),
                corner_max: Point::new(c.x + w / 2.0, c.y + h / 2.0),
            }
        }
        "l_shape" | "l-shape" | "lshape" => {
            DomainSpec::LShape { outer_side: s.real_or("outer_side", 2.0)?, notch_side: s.real_or("notch_side", 1.0)? }
        }
        "annulus" => DomainSpec::Annulus {
            center: s.point_or("center", origin)?,
            r_in: s.real_or("r_in", 0.5)?,
            r_out: s.real_or("r_out", 1.0)?,
        },
        "polygon" => {
            let v = s.get("vertices").ok_or("polygon needs `vertices` as x,y;x,y;...")?;
            let vertices = v
                .split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| parse_point(t).ok_or_else(|| format!("bad vertex `{t}`")))
                .collect::<Result<Vec<_>, _>>()?;
            DomainSpec::Polygon { vertices }
        }
        _ => return Err(format!("unknown shape `{shape}` (disk, square, rectangle, l_shape, annulus, polygon)")),
    })
}
