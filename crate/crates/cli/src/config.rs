//! Run configuration: JSON file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use covcalc::grid::MAX_STREAM_CELLS;
use covcalc::verify::{ChaosConfig, Tolerances};
use covcalc::{Grid, Kernel};

pub const DEFAULT_N: usize = 256;
pub const DEFAULT_T: f64 = 1.0;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SCAN: [usize; 3] = [64, 256, 1024];
pub const DEFAULT_CHAOS_ORDER: i64 = 8;

/// Configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceFile {
    pub mc_sigmas: Option<f64>,
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChaosFile {
    pub order: Option<i64>,
    pub points: Option<Vec<(f64, f64)>>,
    pub width: Option<f64>,
}

/// Every key accepted in a config file. All optional; flags override.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kernel: Option<String>,
    pub n: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub suite: Option<String>,
    pub mode: Option<String>,
    pub integrand: Option<String>,
    pub upto: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub scan: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub plotdata: Option<PathBuf>,
    pub tolerances: Option<ToleranceFile>,
    pub chaos: Option<ChaosFile>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|ConfigError(msg)| ConfigError(format!("{}: {msg}", path.display())))
    }

    /// Parses JSON; errors carry the line and column of the offending key or token.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    /// Fills every `None` of `self` from `base`, so `self` wins.
    pub fn over(self, base: ConfigFile) -> ConfigFile {
        let tolerances = match (self.tolerances, base.tolerances) {
            (Some(a), Some(b)) => Some(ToleranceFile {
                mc_sigmas: a.mc_sigmas.or(b.mc_sigmas),
                exact: a.exact.or(b.exact),
            }),
            (a, b) => a.or(b),
        };
        let chaos = match (self.chaos, base.chaos) {
            (Some(a), Some(b)) => Some(ChaosFile {
                order: a.order.or(b.order),
                points: a.points.or(b.points),
                width: a.width.or(b.width),
            }),
            (a, b) => a.or(b),
        };
        ConfigFile {
            kernel: self.kernel.or(base.kernel),
            n: self.n.or(base.n),
            horizon: self.horizon.or(base.horizon),
            paths: self.paths.or(base.paths),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            suite: self.suite.or(base.suite),
            mode: self.mode.or(base.mode),
            integrand: self.integrand.or(base.integrand),
            upto: self.upto.or(base.upto),
            eps: self.eps.or(base.eps),
            scan: self.scan.or(base.scan),
            out: self.out.or(base.out),
            json: self.json.or(base.json),
            plotdata: self.plotdata.or(base.plotdata),
            tolerances,
            chaos,
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: Kernel,
    pub grid: Grid,
    pub paths: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub suite: Option<String>,
    pub mode: Option<String>,
    pub integrand: Option<String>,
    pub upto: f64,
    pub eps: Option<Vec<f64>>,
    pub scan: Vec<usize>,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub plotdata: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub chaos: ChaosConfig,
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    /// Applies defaults and validates everything before any computation.
    pub fn resolve(file: ConfigFile) -> Result<Self, ConfigError> {
        let horizon = file.horizon.unwrap_or(DEFAULT_T);
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(bad(format!("key `T`: horizon must be positive, got {horizon}")));
        }
        let spec = file.kernel.as_deref().unwrap_or("bm");
        let kernel = Kernel::parse(spec, horizon).map_err(|e| bad(format!("key `kernel`: {e}")))?;
        let n = file.n.unwrap_or(DEFAULT_N);
        // large grids are only meaningful for independent-increment samplers
        let grid = if n > covcalc::grid::MAX_CELLS && n <= MAX_STREAM_CELLS {
            Grid::streaming(n, horizon)
        } else {
            Grid::new(n, horizon)
        }
        .map_err(|e| bad(format!("key `n`: {e}")))?;
        let paths = file.paths.unwrap_or(DEFAULT_PATHS);
        if paths < 2 {
            return Err(bad(format!("key `paths`: need at least 2 paths, got {paths}")));
        }
        if file.threads == Some(0) {
            return Err(bad("key `threads`: must be at least 1"));
        }
        let upto = file.upto.unwrap_or(horizon);
        grid.index_of(upto).map_err(|e| bad(format!("key `upto`: {e}")))?;
        if let Some(eps) = &file.eps {
            for &e in eps {
                grid.cells_in(e).map_err(|err| bad(format!("key `eps`: {err}")))?;
            }
        }
        let scan = file.scan.unwrap_or_else(|| DEFAULT_SCAN.to_vec());
        if scan.is_empty() || scan.iter().any(|&c| c == 0 || c > covcalc::grid::MAX_CELLS) {
            return Err(bad(format!("key `scan`: grid sizes must lie in 1..={}", covcalc::grid::MAX_CELLS)));
        }
        let defaults = Tolerances::default();
        let t = file.tolerances.unwrap_or_default();
        let tolerances = Tolerances {
            mc_sigmas: t.mc_sigmas.unwrap_or(defaults.mc_sigmas),
            exact: t.exact.unwrap_or(defaults.exact),
        };
        if !(tolerances.mc_sigmas > 0.0) || !(tolerances.exact >= 0.0) {
            return Err(bad("key `tolerances`: must be positive"));
        }
        let c = file.chaos.unwrap_or_default();
        let points = c.points.unwrap_or_else(|| vec![(horizon, 0.0)]);
        for &(t, _) in &points {
            if !(t > 0.0) {
                return Err(bad("key `chaos.points`: t must be positive"));
            }
            grid.index_of(t).map_err(|e| bad(format!("key `chaos.points`: {e}")))?;
        }
        let chaos = ChaosConfig::new(c.order.unwrap_or(DEFAULT_CHAOS_ORDER), points, c.width)
            .map_err(|e| bad(format!("key `chaos`: {e}")))?;
        if let Some(s) = &file.suite {
            if !matches!(s.as_str(), "qv" | "ito" | "gamma" | "chaos" | "quasihelix" | "all") {
                return Err(bad(format!("key `suite`: unknown suite `{s}`")));
            }
        }
        if let Some(m) = &file.mode {
            if !matches!(m.as_str(), "wiener" | "forward" | "backward" | "symmetric" | "skorohod-trace") {
                return Err(bad(format!("key `mode`: unknown mode `{m}`")));
            }
        }
        Ok(RunConfig {
            kernel,
            grid,
            paths,
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            threads: file.threads,
            suite: file.suite,
            mode: file.mode,
            integrand: file.integrand,
            upto,
            eps: file.eps,
            scan,
            out: file.out,
            json: file.json,
            plotdata: file.plotdata,
            tolerances,
            chaos,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(ConfigFile::default()).unwrap();
        assert_eq!(c.grid.cells(), 256);
        assert_eq!(c.grid.horizon(), 1.0);
        assert_eq!(c.paths, 10_000);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse(r#"{"kernel": "bm", "n": 64, "seed": 1}"#).unwrap();
        let flags = ConfigFile {
            kernel: Some("fbm:H=0.7".into()),
            n: Some(128),
            ..Default::default()
        };
        let c = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(c.kernel.id(), "fbm:H=0.7");
        assert_eq!(c.grid.cells(), 128);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = ConfigFile::parse("{\n  \"kernel\": \"bm\",\n  \"colour\": 3\n}").unwrap_err();
        assert!(err.0.contains("line 3"), "{}", err.0);
        assert!(err.0.contains("colour"));
        let bad_kernel = ConfigFile {
            kernel: Some("fbm:Z=1".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(bad_kernel).is_err());
    }
}
