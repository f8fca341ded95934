//! Study configuration, read from an INI file.
//!
//! ```ini
//! [study]
//! mode = convergence        ; solve | convergence | stability | embedding
//! example = allen_cahn_2d   ; allen_cahn_2d | combined_3d | custom
//! r = 0
//! M = 32, 64, 128
//! tau = coupled             ; coupled, or one or more fixed step sizes
//! T = 1
//!
//! [output]
//! csv = table.csv
//! vtk_dir = vtk
//! vtk_stride = 8
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use rtmixed::assembly::{CubicTerm, NonlinearitySpec};
use rtmixed::problems::Problem;
use rtmixed::spaces::is_supported;
use rtmixed::timestepper::{RunConfig, VtkOutput};
use rtmixed::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Convergence,
    Stability,
    Embedding,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "solve" => Ok(Mode::Solve),
            "convergence" => Ok(Mode::Convergence),
            "stability" => Ok(Mode::Stability),
            "embedding" => Ok(Mode::Embedding),
            _ => Err(format!(
                "unknown mode '{s}' (expected solve, convergence, stability or embedding)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    AllenCahn2d,
    Combined3d,
    Custom,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::AllenCahn2d => "allen_cahn_2d",
            Example::Combined3d => "combined_3d",
            Example::Custom => "custom",
        }
    }
}

impl FromStr for Example {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "allen_cahn_2d" => Ok(Example::AllenCahn2d),
            "combined_3d" => Ok(Example::Combined3d),
            "custom" => Ok(Example::Custom),
            _ => Err(format!(
                "unknown example '{s}' (expected allen_cahn_2d, combined_3d or custom)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauRule {
    /// `tau = (1/M)^{r+1}`.
    Coupled,
    /// Every listed step size is run against every `M`.
    Fixed(Vec<f64>),
}

/// Equation data for `example = custom`: zero initial data and a constant
/// source.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomProblem {
    pub source: f64,
    pub advection: Option<Point>,
    pub cubic: Option<CubicTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub mode: Mode,
    pub example: Example,
    pub dim: usize,
    pub r: usize,
    pub m_list: Vec<usize>,
    pub tau_rule: TauRule,
    pub t_final: f64,
    pub custom: Option<CustomProblem>,
    pub output_path: Option<PathBuf>,
    pub vtk_dir: Option<PathBuf>,
    pub vtk_stride: Option<usize>,
    /// Run the levels of a study concurrently.
    pub parallel: bool,
    /// Fill the `wall_time_s` column. Off by default so that output is
    /// reproducible byte for byte.
    pub timing: bool,
}

const STUDY_KEYS: [&str; 9] = ["mode", "example", "dim", "r", "M", "tau", "T", "parallel", "timing"];
const OUTPUT_KEYS: [&str; 3] = ["csv", "vtk_dir", "vtk_stride"];
const CUSTOM_KEYS: [&str; 3] = ["source", "advection", "cubic"];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse '{value}' as the value of '{key}'"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{key}' must be true or false, got '{value}'")),
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let ini = Ini::load_from_str(text).map_err(|e| format!("malformed config: {e}"))?;
        for (section, props) in ini.iter() {
            let allowed: &[&str] = match section {
                Some("study") => &STUDY_KEYS,
                Some("output") => &OUTPUT_KEYS,
                Some("custom") => &CUSTOM_KEYS,
                None if props.is_empty() => &[],
                None => return Err("keys must appear inside a [study], [output] or [custom] section".into()),
                Some(other) => return Err(format!("unknown section [{other}]")),
            };
            for (key, _) in props.iter() {
                if !allowed.contains(&key) {
                    return Err(format!("unknown key '{key}' in [{}]", section.unwrap_or_default()));
                }
            }
        }

        let study = ini.section(Some("study")).ok_or("missing [study] section")?;
        let required = |key: &str| study.get(key).ok_or_else(|| format!("missing required key '{key}' in [study]"));

        let mode: Mode = required("mode")?.trim().parse()?;
        let example: Example = required("example")?.trim().parse()?;
        let r = parse("r", required("r")?)?;
        let m_list = parse_list("M", required("M")?)?;
        let t_final = study.get("T").map(|v| parse("T", v)).transpose()?.unwrap_or(1.0);
        let tau_rule = match study.get("tau").map(str::trim) {
            None | Some("coupled") => TauRule::Coupled,
            Some(v) => TauRule::Fixed(parse_list("tau", v)?),
        };
        let parallel = study.get("parallel").map(|v| parse_bool("parallel", v)).transpose()?.unwrap_or(false);
        let timing = study.get("timing").map(|v| parse_bool("timing", v)).transpose()?.unwrap_or(false);

        let custom = match (example, ini.section(Some("custom"))) {
            (Example::Custom, section) => {
                let get = |key: &str| section.and_then(|s| s.get(key));
                let source = get("source").map(|v| parse("source", v)).transpose()?.unwrap_or(0.0);
                let advection = match get("advection") {
                    None => None,
                    Some(v) => {
                        let b: Vec<f64> = parse_list("advection", v)?;
                        if b.len() != 3 {
                            return Err(format!("'advection' needs three components, got {}", b.len()));
                        }
                        Some(Point::new(b[0], b[1], b[2]))
                    }
                };
                let cubic = match get("cubic").map(str::trim) {
                    None | Some("none") => None,
                    Some("pure") => Some(CubicTerm::Pure),
                    Some("allen_cahn") => Some(CubicTerm::AllenCahn),
                    Some(v) => return Err(format!("unknown cubic term '{v}' (expected none, pure or allen_cahn)")),
                };
                Some(CustomProblem { source, advection, cubic })
            }
            (_, Some(_)) => return Err("a [custom] section needs example = custom".into()),
            (_, None) => None,
        };

        let builtin_dim = match example {
            Example::AllenCahn2d => Some(2),
            Example::Combined3d => Some(3),
            Example::Custom => None,
        };
        let dim = match (study.get("dim").map(|v| parse::<usize>("dim", v)).transpose()?, builtin_dim) {
            (Some(d), Some(b)) if d != b => {
                return Err(format!("example {} is {b}D but dim = {d}", example.name()));
            }
            (Some(d), _) => d,
            (None, Some(b)) => b,
            (None, None) => return Err("example = custom needs 'dim' in [study]".into()),
        };

        let output = ini.section(Some("output"));
        let get_out = |key: &str| output.and_then(|s| s.get(key));
        let config = StudyConfig {
            mode,
            example,
            dim,
            r,
            m_list,
            tau_rule,
            t_final,
            custom,
            output_path: get_out("csv").map(PathBuf::from),
            vtk_dir: get_out("vtk_dir").map(PathBuf::from),
            vtk_stride: get_out("vtk_stride").map(|v| parse("vtk_stride", v)).transpose()?,
            parallel,
            timing,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks that do not need to build any run.
    pub fn validate(&self) -> Result<(), String> {
        if self.dim != 2 && self.dim != 3 {
            return Err(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if !is_supported(self.dim, self.r) {
            return Err(rtmixed::Error::Unsupported { dim: self.dim, r: self.r }.to_string());
        }
        if self.m_list.is_empty() {
            return Err("M must list at least one resolution".into());
        }
        if self.m_list.contains(&0) {
            return Err("every M must be at least 1".into());
        }
        if self.m_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("M must be strictly increasing, got {:?}", self.m_list));
        }
        if self.mode == Mode::Convergence {
            if self.m_list.len() < 2 {
                return Err("convergence mode needs at least two values of M".into());
            }
            if let Some(w) = self.m_list.windows(2).find(|w| w[1] != 2 * w[0]) {
                return Err(format!("convergence mode needs M to double, found {} then {}", w[0], w[1]));
            }
        }
        match &self.tau_rule {
            TauRule::Coupled if self.mode == Mode::Stability => {
                return Err("stability mode needs one or more fixed values of tau".into());
            }
            TauRule::Fixed(taus) if taus.is_empty() => return Err("tau must list at least one step size".into()),
            _ => {}
        }
        if self.vtk_stride == Some(0) {
            return Err("vtk_stride must be at least 1".into());
        }
        for group in self.runs() {
            for run in group {
                run.validate().map_err(|e| e.to_string())?;
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Problem {
        match self.example {
            Example::AllenCahn2d => Problem::allen_cahn_2d(),
            Example::Combined3d => Problem::combined_3d(),
            Example::Custom => {
                let custom = self.custom.clone().unwrap_or(CustomProblem {
                    source: 0.0,
                    advection: None,
                    cubic: None,
                });
                let spec = NonlinearitySpec {
                    advection: custom.advection,
                    cubic: custom.cubic,
                };
                Problem::custom(self.dim, spec, custom.source)
            }
        }
    }

    pub fn taus(&self) -> Vec<Option<f64>> {
        match &self.tau_rule {
            TauRule::Coupled => vec![None],
            TauRule::Fixed(taus) => taus.iter().map(|&t| Some(t)).collect(),
        }
    }

    /// One group of runs per step size rule, each ordered by `M`.
    pub fn runs(&self) -> Vec<Vec<RunConfig>> {
        let problem = self.problem();
        self.taus()
            .into_iter()
            .enumerate()
            .map(|(g, tau)| {
                self.m_list
                    .iter()
                    .map(|&m| {
                        let tau = tau.unwrap_or_else(|| RunConfig::coupled_tau(m, self.r));
                        let mut run = RunConfig::new(problem.clone(), m, self.r, tau, self.t_final);
                        if let Some(stride) = self.vtk_stride {
                            run.vtk = Some(VtkOutput {
                                directory: self.vtk_dir.clone().unwrap_or_else(|| PathBuf::from("vtk")),
                                prefix: format!("{}_r{}_M{}_g{}", self.example.name(), self.r, m, g),
                                stride,
                            });
                        }
                        run
                    })
                    .collect()
            })
            .collect()
    }
}
