//! Run configuration: defaults, then a flat JSON file, then flags, then
//! `PARAWOLFF_SEED`.

use std::path::{Path, PathBuf};

use parawolff::suite::SuiteConfig;
use parawolff::ParabolicParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    /// Lattice depth `k_max`.
    pub depth: i32,
    /// Net resolution relative to the ball radius.
    pub epsilon0: f64,
    pub seed: u64,
    /// Frank–Wolfe stopping gap relative to the energy.
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Monte Carlo samples per `V^δ` evaluation.
    pub mc_samples: usize,
    /// Truncation radius of `W^δ` and `V^δ`.
    pub delta: f64,
    /// Read from files and flags but never written back, so the resolved
    /// config does not depend on where it was written.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            d: s.d,
            alpha: s.alpha,
            q: s.q,
            depth: s.depth,
            epsilon0: s.epsilon0,
            seed: s.seed,
            solver_tol: parawolff::tolerances::FW_GAP_REL,
            max_iter: 20_000,
            mc_samples: 20_000,
            delta: 1.0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

/// Flag overrides; `None` keeps the file value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub depth: Option<i32>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides, env_seed: Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?;
                serde_json::from_str(&text)
                    .map_err(|e| ConfigError::Invalid(format!("{}:{}: {e}", p.display(), e.line())))?
            }
            None => RunConfig::default(),
        };
        if let Some(o) = &flags.out {
            cfg.out = o.clone();
        }
        if let Some(s) = flags.seed {
            cfg.seed = s;
        }
        if let Some(d) = flags.depth {
            cfg.depth = d;
        }
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("PARAWOLFF_SEED: expected an unsigned integer, found `{s}`")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.suite().params().map_err(|e| ConfigError::Invalid(format!("config: {e}")))?;
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(ConfigError::Invalid(format!("config: solver_tol must lie in (0, 1), got {}", self.solver_tol)));
        }
        if self.max_iter == 0 || self.mc_samples == 0 {
            return Err(ConfigError::Invalid("config: max_iter and mc_samples must be positive".into()));
        }
        if !(self.delta > 0.0) {
            return Err(ConfigError::Invalid(format!("config: delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            d: self.d,
            alpha: self.alpha,
            q: self.q,
            depth: self.depth,
            epsilon0: self.epsilon0,
            seed: self.seed,
        }
    }

    pub fn params(&self) -> ParabolicParams {
        ParabolicParams::new(self.d, self.alpha, self.q).expect("validated at load")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_file_flag_env() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 5, "depth": 4}"#).unwrap();
        let c = RunConfig::load(Some(&p), &Overrides::default(), None).unwrap();
        assert_eq!((c.seed, c.depth, c.q), (5, 4, 2.0));
        let flags = Overrides {
            seed: Some(7),
            ..Default::default()
        };
        assert_eq!(RunConfig::load(Some(&p), &flags, None).unwrap().seed, 7);
        assert_eq!(RunConfig::load(Some(&p), &flags, Some("9".into())).unwrap().seed, 9);
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        for text in [r#"{"q": 1}"#, r#"{"alpha": 3}"#, r#"{"colour": 1}"#] {
            std::fs::write(&p, text).unwrap();
            assert!(matches!(
                RunConfig::load(Some(&p), &Overrides::default(), None),
                Err(ConfigError::Invalid(_))
            ));
        }
        assert!(matches!(
            RunConfig::load(Some(&dir.path().join("missing.json")), &Overrides::default(), None),
            Err(ConfigError::Io(..))
        ));
    }
}
