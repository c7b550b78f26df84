//! Flat key=value sweep configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. List-valued keys
//! accept comma-separated values and may be repeated (occurrences append).
//!
//! ```text
//! # grid axes
//! db     = 0, 2, 4, 6, 8      # first-round data energy over n0, in dB
//! m      = 2, 4               # sensors
//! b      = 7                  # quantizer bits
//! rho    = 0.99               # correlation
//! lambda = 0.25               # control threshold (default 0.25)
//! mu     = 1.0                # energy split (default 1.0)
//! l      = 1                  # retransmission trigger (default 1)
//! # options (command-line flags override)
//! mode   = simulate           # bounds | analysis | simulate
//! trials = 100000
//! seed   = 1
//! out    = sweep.csv
//! ```

use std::fmt;
use std::path::PathBuf;

/// Which column groups the sweep fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Information-theoretic bound columns only.
    Bounds,
    /// Bounds plus the closed-form protocol analysis columns.
    Analysis,
    /// Everything, including Monte Carlo columns.
    Simulate,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "bounds" => Some(Mode::Bounds),
            "analysis" => Some(Mode::Analysis),
            "simulate" => Some(Mode::Simulate),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Bounds => "bounds",
            Mode::Analysis => "analysis",
            Mode::Simulate => "simulate",
        })
    }
}

/// Configuration error with the 1-based line it came from (0 for
/// whole-config problems).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// First-round data energy over `n0`, in dB.
    pub db: Vec<f64>,
    pub sensors: Vec<usize>,
    pub bits: Vec<u32>,
    pub rho: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub l: Vec<usize>,
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub strict: bool,
    pub detect_cap: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            db: Vec::new(),
            sensors: Vec::new(),
            bits: Vec::new(),
            rho: Vec::new(),
            lambda: vec![0.25],
            mu: vec![1.0],
            l: vec![1],
            mode: Mode::Bounds,
            trials: 10_000,
            seed: 0,
            out: PathBuf::from("sweep.csv"),
            strict: false,
            detect_cap: fbmac::sim::DEFAULT_DETECTION_CAP,
        }
    }
}

fn parse_list<T: std::str::FromStr>(
    value: &str,
    line: usize,
    key: &str,
) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| ConfigError {
                line,
                message: format!("cannot parse '{s}' for key '{key}'"),
            })
        })
        .collect()
}

impl SweepConfig {
    /// Parses the key=value text. Axis keys replace the defaults on first
    /// occurrence and append on repeats.
    pub fn parse_str(text: &str) -> Result<SweepConfig, ConfigError> {
        let mut cfg = SweepConfig::default();
        let mut lambda_set = false;
        let mut mu_set = false;
        let mut l_set = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "db" => cfg.db.extend(parse_list::<f64>(value, line, key)?),
                "m" => cfg.sensors.extend(parse_list::<usize>(value, line, key)?),
                "b" => cfg.bits.extend(parse_list::<u32>(value, line, key)?),
                "rho" => cfg.rho.extend(parse_list::<f64>(value, line, key)?),
                "lambda" => {
                    if !lambda_set {
                        cfg.lambda.clear();
                        lambda_set = true;
                    }
                    cfg.lambda.extend(parse_list::<f64>(value, line, key)?);
                }
                "mu" => {
                    if !mu_set {
                        cfg.mu.clear();
                        mu_set = true;
                    }
                    cfg.mu.extend(parse_list::<f64>(value, line, key)?);
                }
                "l" => {
                    if !l_set {
                        cfg.l.clear();
                        l_set = true;
                    }
                    cfg.l.extend(parse_list::<usize>(value, line, key)?);
                }
                "mode" => {
                    cfg.mode = Mode::parse(value).ok_or_else(|| ConfigError {
                        line,
                        message: format!(
                            "mode must be bounds, analysis or simulate, got '{value}'"
                        ),
                    })?;
                }
                "trials" => {
                    cfg.trials = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("cannot parse '{value}' for key 'trials'"),
                    })?;
                }
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("cannot parse '{value}' for key 'seed'"),
                    })?;
                }
                "out" => cfg.out = PathBuf::from(value),
                _ => {
                    return Err(ConfigError {
                        line,
                        message: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<SweepConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse_str(&text)
    }

    /// Checks the grid is runnable.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let whole = |message: String| ConfigError { line: 0, message };
        for (name, empty) in [
            ("db", self.db.is_empty()),
            ("m", self.sensors.is_empty()),
            ("b", self.bits.is_empty()),
            ("rho", self.rho.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("mu", self.mu.is_empty()),
            ("l", self.l.is_empty()),
        ] {
            if empty {
                return Err(whole(format!("axis '{name}' has no values")));
            }
        }
        if self.db.iter().any(|d| !d.is_finite()) {
            return Err(whole("db axis must be finite".into()));
        }
        if self.rho.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(whole("rho values must lie in [0, 1]".into()));
        }
        if self.mode != Mode::Bounds && self.rho.iter().any(|&r| r == 0.0) {
            return Err(whole(
                "protocol analysis needs rho > 0 (the estimator divides by rho)".into(),
            ));
        }
        if self.lambda.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(whole("lambda values must lie in [0, 1)".into()));
        }
        if self.mu.iter().any(|&x| !(x > 0.0 && x < 2.0)) {
            return Err(whole("mu values must lie in (0, 2)".into()));
        }
        let min_m = *self.sensors.iter().min().unwrap();
        if self.sensors.contains(&0) {
            return Err(whole("m values must be >= 1".into()));
        }
        if self.l.iter().any(|&l| l == 0 || l > min_m) {
            return Err(whole(format!(
                "l values must lie in 1..=min(m) = 1..={min_m}"
            )));
        }
        if self.bits.iter().any(|&b| !(2..=24).contains(&b)) {
            return Err(whole("b values must lie in 2..=24".into()));
        }
        if self.mode == Mode::Simulate && self.trials == 0 {
            return Err(whole("simulate mode needs trials >= 1".into()));
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn grid_size(&self) -> usize {
        self.sensors.len()
            * self.bits.len()
            * self.rho.len()
            * self.lambda.len()
            * self.mu.len()
            * self.l.len()
            * self.db.len()
    }
}
