use std::path::{Path, PathBuf};

use crate::admm::AdmmConfig;
use crate::error::{Error, Result};

/// Environment variable naming the color-name table when the config does not.
pub const COLOR_TABLE_ENV: &str = "SAT_COLOR_TABLE";

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Number of context patches around the target.
    pub context_count: usize,
    pub filter_rate: f64,
    pub histogram_rate: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub scales: Vec<f64>,
    /// Search window side over target side.
    pub padding: f64,
    pub admm: AdmmConfig,
    pub cell_size: usize,
    /// Cap on the longest template side, in cells.
    pub max_template_cells: usize,
    pub tau_l: f64,
    pub tau_u: f64,
    /// Parabolic sub-cell peak refinement.
    pub subcell_refine: bool,
    /// Record S_max/BK of gated-out frames in the running means as well.
    pub history_includes_rejected: bool,
    pub color_table: Option<PathBuf>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            context_count: 4,
            filter_rate: 0.015,
            histogram_rate: 0.04,
            theta1: 0.6,
            theta2: 0.5,
            scales: vec![0.94, 0.96, 0.98, 1.0, 1.02, 1.04, 1.06],
            padding: 2.5,
            admm: AdmmConfig::default(),
            cell_size: 4,
            max_template_cells: 96,
            tau_l: 0.3,
            tau_u: 1.5,
            subcell_refine: true,
            history_includes_rejected: false,
            color_table: None,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")))
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        unit_interval("filter_rate", self.filter_rate)?;
        unit_interval("histogram_rate", self.histogram_rate)?;
        unit_interval("theta1", self.theta1)?;
        unit_interval("theta2", self.theta2)?;
        if !self.scales.contains(&1.0) {
            return Err(Error::invalid("scales must contain 1.0"));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("scales must be positive"));
        }
        if !(self.padding >= 1.0) {
            return Err(Error::invalid("padding must be at least 1"));
        }
        if self.cell_size == 0 || self.max_template_cells < 4 {
            return Err(Error::invalid("cell_size and max_template_cells out of range"));
        }
        if !(self.tau_l > 0.0 && self.tau_l <= self.tau_u) {
            return Err(Error::invalid("need 0 < tau_l <= tau_u"));
        }
        self.admm.validate()
    }

    /// Table path from the config, falling back to `SAT_COLOR_TABLE`.
    pub fn color_table_path(&self) -> Option<PathBuf> {
        self.color_table.clone().or_else(|| {
            std::env::var_os(COLOR_TABLE_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            let flag = |v: &str| -> Result<bool> {
                match v {
                    "true" | "1" | "yes" => Ok(true),
                    "false" | "0" | "no" => Ok(false),
                    _ => Err(err(format!("{key}: expected a boolean, got {v:?}"))),
                }
            };
            match key {
                "context_count" => cfg.context_count = int(value)?,
                "filter_rate" => cfg.filter_rate = num(value)?,
                "histogram_rate" => cfg.histogram_rate = num(value)?,
                "theta1" => cfg.theta1 = num(value)?,
                "theta2" => cfg.theta2 = num(value)?,
                "scales" => {
                    cfg.scales = value
                        .split(',')
                        .map(|s| num(s.trim()))
                        .collect::<Result<_>>()?
                }
                "padding" => cfg.padding = num(value)?,
                "lambda1" => cfg.admm.lambda1 = num(value)?,
                "lambda2" => cfg.admm.lambda2 = num(value)?,
                "rho0" => cfg.admm.rho0 = num(value)?,
                "beta" => cfg.admm.beta = num(value)?,
                "rho_max" => cfg.admm.rho_max = num(value)?,
                "admm_iters" => cfg.admm.max_iters = int(value)?,
                "cell_size" => cfg.cell_size = int(value)?,
                "max_template_cells" => cfg.max_template_cells = int(value)?,
                "tau_l" => cfg.tau_l = num(value)?,
                "tau_u" => cfg.tau_u = num(value)?,
                "subcell_refine" => cfg.subcell_refine = flag(value)?,
                "history_includes_rejected" => cfg.history_includes_rejected = flag(value)?,
                "color_table" => {
                    cfg.color_table = (!value.is_empty()).then(|| PathBuf::from(value))
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`TrackerConfig::parse`].
    pub fn to_text(&self) -> String {
        let scales: Vec<String> = self.scales.iter().map(f64::to_string).collect();
        let mut out = format!(
            "context_count = {}\nfilter_rate = {}\nhistogram_rate = {}\ntheta1 = {}\ntheta2 = {}\n\
             scales = {}\npadding = {}\nlambda1 = {}\nlambda2 = {}\nrho0 = {}\nbeta = {}\n\
             rho_max = {}\nadmm_iters = {}\ncell_size = {}\nmax_template_cells = {}\n\
             tau_l = {}\ntau_u = {}\nsubcell_refine = {}\nhistory_includes_rejected = {}\n",
            self.context_count,
            self.filter_rate,
            self.histogram_rate,
            self.theta1,
            self.theta2,
            scales.join(", "),
            self.padding,
            self.admm.lambda1,
            self.admm.lambda2,
            self.admm.rho0,
            self.admm.beta,
            self.admm.rho_max,
            self.admm.max_iters,
            self.cell_size,
            self.max_template_cells,
            self.tau_l,
            self.tau_u,
            self.subcell_refine,
            self.history_includes_rejected,
        );
        if let Some(p) = &self.color_table {
            out.push_str(&format!("color_table = {}\n", p.display()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrackerConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.scales.len(), 7);
        assert!((cfg.scales[6] - 1.06).abs() < 1e-12);
    }

    #[test]
    fn parse_overrides_and_roundtrip() {
        let text = "# tuned\nlambda2 = 0\nscales = 0.98, 1.0, 1.02\nsubcell_refine = false\n";
        let cfg = TrackerConfig::parse(text, Path::new("cfg.txt")).unwrap();
        assert_eq!(cfg.admm.lambda2, 0.0);
        assert_eq!(cfg.scales, vec![0.98, 1.0, 1.02]);
        assert!(!cfg.subcell_refine);
        let again = TrackerConfig::parse(&cfg.to_text(), Path::new("cfg.txt")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn bad_lines_name_the_line() {
        let err = TrackerConfig::parse("theta1 = 0.6\nbogus = 1\n", Path::new("c.txt")).unwrap_err();
        assert!(err.to_string().starts_with("c.txt:2:"), "{err}");
        assert!(TrackerConfig::parse("theta1 = 2\n", Path::new("c.txt")).is_err());
        assert!(TrackerConfig::parse("scales = 0.9, 1.1\n", Path::new("c.txt")).is_err());
        assert!(TrackerConfig::parse("no equals sign\n", Path::new("c.txt")).is_err());
    }
}
