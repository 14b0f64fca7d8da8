//! Run settings: built-in defaults, overridden by a `key = value` config
//! file, overridden by command-line flags. Keys are the long flag names
//! (`risk-premium` and `risk_premium` are both accepted in files).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rapm_fem::elements::{NonlinearVariant, PowerMode};
use rapm_fem::mesh::ElementOrder;
use rapm_fem::model::{RapmParams, TruncatedDomain};
use rapm_fem::solver::{BoundaryExtrapolation, BoundaryWeighting, MassMode, SolverConfig};
use rapm_fem::Error;

/// A configuration problem tied to one flag (or config-file key).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub flag: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(flag: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            flag: flag.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "--{}: {}", self.flag, self.message)
    }
}

/// Spots or times, before the strike/expiry they may depend on is known.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    Range { lo: f64, hi: f64, n: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { lo, n: 1, .. } => vec![*lo],
            Grid::Range { lo, hi, n } => (0..*n)
                .map(|i| {
                    if i + 1 == *n {
                        *hi
                    } else {
                        lo + (hi - lo) * i as f64 / (*n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(format!("range `{s}` must have the form lo:hi:n"));
            }
            let lo = parse_f64(parts[0])?;
            let hi = parse_f64(parts[1])?;
            let n: usize = parts[2]
                .parse()
                .map_err(|_| format!("`{}` is not a point count", parts[2]))?;
            if n == 0 {
                return Err("range needs at least one point".into());
            }
            if n > 1 && !(hi > lo) {
                return Err(format!("range end {hi} must exceed start {lo}"));
            }
            Ok(Grid::Range { lo, hi, n })
        } else {
            let values = parse_list(s)?;
            if values.windows(2).any(|w| !(w[1] > w[0])) {
                return Err("values must be strictly increasing".into());
            }
            Ok(Grid::List(values))
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(x)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let values = s.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("empty list".into());
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub rate: f64,
    pub sigma: f64,
    pub strike: f64,
    pub expiry: f64,
    pub risk_premium: f64,
    pub txn_cost: f64,
    pub radius: f64,
    pub dx: f64,
    pub order: ElementOrder,
    pub solver: SolverConfig,
    pub spots: Option<Grid>,
    pub times: Option<Grid>,
    pub out: String,
    pub dx_ladder: Vec<f64>,
    pub fdm_dx: Option<f64>,
    pub fdm_dtau: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        let p = RapmParams::reference();
        Self {
            rate: p.rate(),
            sigma: p.sigma(),
            strike: p.strike(),
            expiry: p.expiry(),
            risk_premium: p.risk_premium(),
            txn_cost: p.txn_cost(),
            radius: TruncatedDomain::DEFAULT_RADIUS,
            dx: 0.01,
            order: ElementOrder::P1,
            solver: SolverConfig::default(),
            spots: None,
            times: None,
            out: "rapm".into(),
            dx_ladder: vec![0.04, 0.02, 0.01, 0.001],
            fdm_dx: None,
            fdm_dtau: None,
        }
    }
}

fn positive(flag: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::new(flag, format!("must be > 0, got {x}")))
    }
}

impl Settings {
    /// Sets one key from its text value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let err = |m: String| ConfigError::new(key.as_str(), m);
        let num = || parse_f64(value).map_err(err);
        fn parsed<T: FromStr>(value: &str, key: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::new(key, e.to_string()))
        }
        match key.as_str() {
            "rate" => self.rate = num()?,
            "sigma" => self.sigma = num()?,
            "strike" => self.strike = num()?,
            "expiry" => self.expiry = num()?,
            "risk-premium" => self.risk_premium = num()?,
            "txn-cost" => self.txn_cost = num()?,
            "radius" => self.radius = positive(&key, num()?)?,
            "dx" => self.dx = positive(&key, num()?)?,
            "dtau" => self.solver.dtau = num()?,
            "theta" => self.solver.theta = num()?,
            "rannacher" => self.solver.rannacher_substeps = parsed(value, &key)?,
            "order" => self.order = parsed(value, &key)?,
            "nonlinearity" => self.solver.nonlinearity = parsed::<NonlinearVariant>(value, &key)?,
            "mass" => self.solver.mass_mode = parsed::<MassMode>(value, &key)?,
            "power" => self.solver.power_mode = parsed::<PowerMode>(value, &key)?,
            "boundary-v" => self.solver.boundary_v = parsed::<BoundaryExtrapolation>(value, &key)?,
            "boundary-weighting" => self.solver.boundary_weighting = parsed::<BoundaryWeighting>(value, &key)?,
            "spots" => self.spots = Some(value.parse().map_err(err)?),
            "times" => self.times = Some(value.parse().map_err(err)?),
            "out" => {
                if value.is_empty() {
                    return Err(err("output prefix must not be empty".into()));
                }
                self.out = value.to_string();
            }
            "dx-ladder" => {
                let ladder = parse_list(value).map_err(err)?;
                for &dx in &ladder {
                    positive(&key, dx)?;
                }
                self.dx_ladder = ladder;
            }
            "fdm-dx" => self.fdm_dx = Some(positive(&key, num()?)?),
            "fdm-dtau" => self.fdm_dtau = Some(positive(&key, num()?)?),
            _ => return Err(ConfigError::new(key.as_str(), "unknown key")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file. Blank lines and
    /// text after `#` are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(
                    "config",
                    format!("line {}: expected `key = value`, got `{line}`", lineno + 1),
                )
            })?;
            self.apply(key, value)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<RapmParams, ConfigError> {
        RapmParams::new(
            self.rate,
            self.sigma,
            self.strike,
            self.expiry,
            self.risk_premium,
            self.txn_cost,
        )
        .map_err(|e| match &e {
            Error::InvalidParameter { name, .. } => ConfigError::new(flag_name(name), e.to_string()),
            _ => ConfigError::new("risk-premium", e.to_string()),
        })
    }

    /// Solver configuration, validated.
    pub fn solver(&self) -> Result<SolverConfig, ConfigError> {
        self.solver.validate().map_err(|e| match &e {
            Error::InvalidParameter { name, .. } => ConfigError::new(flag_name(name), e.to_string()),
            _ => ConfigError::new("config", e.to_string()),
        })?;
        Ok(self.solver)
    }

    /// Evaluation spots; defaults to `K/2 .. 2K` in 226 points.
    pub fn spot_values(&self) -> Vec<f64> {
        self.spots
            .clone()
            .unwrap_or(Grid::Range {
                lo: 0.5 * self.strike,
                hi: 2.0 * self.strike,
                n: 226,
            })
            .values()
    }

    /// Calendar times for the surface; defaults to 11 points on `[0, T]`.
    pub fn time_values(&self) -> Result<Vec<f64>, ConfigError> {
        let times = self
            .times
            .clone()
            .unwrap_or(Grid::Range {
                lo: 0.0,
                hi: self.expiry,
                n: 11,
            })
            .values();
        if let Some(t) = times.iter().find(|&&t| !(0.0..=self.expiry).contains(&t)) {
            return Err(ConfigError::new(
                "times",
                format!("time {t} outside [0, {}]", self.expiry),
            ));
        }
        Ok(times)
    }

    /// Rejects spots outside the computational domain before any solve.
    pub fn check_spots(&self, spots: &[f64]) -> Result<(), ConfigError> {
        let (lo, hi) = (self.strike * (-self.radius).exp(), self.strike * self.radius.exp());
        match spots.iter().find(|&&s| !(s >= lo && s <= hi)) {
            Some(s) => Err(ConfigError::new(
                "spots",
                format!("spot {s} outside the computational domain [{lo:.6}, {hi:.6}] (see --radius)"),
            )),
            None => Ok(()),
        }
    }
}

/// Flag name for a parameter name reported by the library.
fn flag_name(name: &str) -> String {
    match name {
        "rannacher_substeps" => "rannacher".into(),
        other => other.replace('_', "-"),
    }
}
