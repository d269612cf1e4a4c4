//! Configuration file schema and parsing.
//!
//! TOML is the primary format; JSON is accepted as an alternate (by `.json`
//! extension or shape). Both map onto the same schema. Unknown keys are
//! rejected, defaults are filled (C = 1, R = 1, δ = 0.05, x₀ = 0), and
//! semantic validation reports every problem at once.

use std::path::{Path, PathBuf};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use sysid_core::bounds::BoundConfig;
use sysid_core::experiments::{ExperimentConfig, SystemDef};
use sysid_core::matrix::{dense_from_rows, read_matrix_csv, Mat, Vect};
use sysid_core::sim::{CompositeBlueprint, NoiseModel, SystemSpec, TaggedBlock};
use sysid_core::spectral::{JordanSpec, JordanStructure, Regime};
use sysid_core::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<SystemSection>,
    pub noise: Option<NoiseSection>,
    pub experiment: Option<ExperimentSection>,
    pub constants: Option<ConstantsSection>,
    pub simulate: Option<SimulateSection>,
    pub bounds: Option<BoundsSection>,
    pub estimate: Option<EstimateSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Inline rows of A, or a CSV path (exactly one of the two).
    pub a: Option<Vec<Vec<f64>>>,
    pub a_csv: Option<String>,
    pub b: Option<Vec<Vec<f64>>>,
    pub b_csv: Option<String>,
    /// Initial state; defaults to zero.
    pub x0: Option<Vec<f64>>,
    pub jordan: Option<JordanSection>,
    /// Composite blueprint (alternative to `a`/`a_csv`).
    pub composite: Option<CompositeSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanSection {
    pub blocks: Vec<BlockSection>,
    /// Similarity transform CSV; identity when absent.
    pub p_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub size: usize,
    /// Regime tag, needed only inside composite blueprints.
    pub regime: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSection {
    pub blocks: Vec<BlockSection>,
    #[serde(default)]
    pub similarity_seed: u64,
    #[serde(default = "default_conditioning")]
    pub conditioning: f64,
}

fn default_conditioning() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// "gaussian" | "subweibull" | "zero"
    pub family: String,
    pub alpha: Option<f64>,
    pub b: Option<f64>,
    pub m: Option<f64>,
    pub delta_trunc: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// "rate" | "inconsistency" | "spectrum" | "concentration" | "structure"
    pub kind: Option<String>,
    pub t_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    /// Horizon for the inconsistency demonstration.
    pub t: Option<usize>,
    /// Growth factor for the spectrum experiment.
    pub a: Option<f64>,
    /// Jordan specs for the structure checks (one list per system).
    pub jordan_specs: Option<Vec<Vec<BlockSection>>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub universal_c: Option<f64>,
    pub universal_small_c: Option<f64>,
    pub r: Option<f64>,
    pub class_boundary_c: Option<f64>,
    pub psi_samples: Option<usize>,
    pub psi_seed: Option<u64>,
    pub outbox_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub t: Option<usize>,
    #[serde(default)]
    pub scaled: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub t: Option<usize>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// Directory produced by `sysid simulate`.
    pub trajectory_dir: Option<String>,
}

/// Parse a config file (TOML primary, JSON alternate), reporting parse
/// errors with position and semantic errors all at once.
pub fn parse_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let parsed: ConfigFile = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?
    } else {
        match toml::from_str(&text) {
            Ok(c) => c,
            Err(toml_err) => {
                // alternate format: accept JSON content under any extension
                serde_json::from_str(&text).map_err(|_| {
                    Error::InvalidParameter(format!("{}: {toml_err}", path.display()))
                })?
            }
        }
    };
    let problems = validate(&parsed);
    if !problems.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{}: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    Ok(parsed)
}

/// Collect every semantic problem (not just the first).
pub fn validate(cfg: &ConfigFile) -> Vec<String> {
    let mut problems = Vec::new();
    if let Some(sys) = &cfg.system {
        let sources = [sys.a.is_some(), sys.a_csv.is_some(), sys.composite.is_some()]
            .iter()
            .filter(|&&x| x)
            .count();
        if sources > 1 {
            problems.push("system: give exactly one of a, a_csv, composite".into());
        }
        if sys.b.is_some() && sys.b_csv.is_some() {
            problems.push("system: give at most one of b, b_csv".into());
        }
        if let Some(j) = &sys.jordan {
            if j.blocks.is_empty() {
                problems.push("system.jordan.blocks: empty".into());
            }
            if j.blocks.iter().any(|b| b.size == 0) {
                problems.push("system.jordan.blocks: size must be >= 1".into());
            }
        }
        if let Some(c) = &sys.composite {
            if c.conditioning < 1.0 {
                problems.push(format!(
                    "system.composite.conditioning: must be >= 1, got {}",
                    c.conditioning
                ));
            }
            for b in &c.blocks {
                if b.regime.is_none() {
                    problems.push("system.composite.blocks: each block needs a regime tag".into());
                } else if parse_regime(b.regime.as_deref().unwrap()).is_none() {
                    problems.push(format!(
                        "system.composite.blocks: unknown regime {:?}",
                        b.regime.as_deref().unwrap()
                    ));
                }
            }
        }
    }
    if let Some(noise) = &cfg.noise {
        match noise.family.as_str() {
            "gaussian" | "zero" => {}
            "subweibull" => {
                if noise.alpha.is_none() || noise.m.is_none() {
                    problems.push("noise: subweibull needs alpha and m".into());
                }
            }
            other => problems.push(format!("noise.family: unknown family {other:?}")),
        }
    }
    if let Some(exp) = &cfg.experiment {
        if let Some(kind) = &exp.kind {
            if !matches!(
                kind.as_str(),
                "rate" | "inconsistency" | "spectrum" | "concentration" | "structure"
            ) {
                problems.push(format!("experiment.kind: unknown kind {kind:?}"));
            }
        }
        if let Some(grid) = &exp.t_grid {
            if grid.is_empty() {
                problems.push("experiment.t_grid: empty".into());
            } else if grid.windows(2).any(|w| w[0] >= w[1]) {
                problems.push("experiment.t_grid: must be strictly ascending".into());
            }
        }
        if let Some(delta) = exp.delta {
            if !(delta > 0.0 && delta < 1.0) {
                problems.push(format!("experiment.delta: must be in (0,1), got {delta}"));
            }
        }
        if exp.trials == Some(0) {
            problems.push("experiment.trials: must be >= 1".into());
        }
    }
    if let Some(b) = &cfg.bounds {
        if let Some(delta) = b.delta {
            if !(delta > 0.0 && delta < 1.0) {
                problems.push(format!("bounds.delta: must be in (0,1), got {delta}"));
            }
        }
        if b.t == Some(0) {
            problems.push("bounds.t: must be >= 1".into());
        }
    }
    problems
}

fn parse_regime(s: &str) -> Option<Regime> {
    match s.to_ascii_lowercase().as_str() {
        "s0" | "stable" => Some(Regime::S0),
        "s1" | "marginal" => Some(Regime::S1),
        "s2" | "explosive" => Some(Regime::S2),
        _ => None,
    }
}

fn blocks_to_jordan(blocks: &[BlockSection]) -> Result<JordanSpec> {
    JordanSpec::new(
        blocks
            .iter()
            .map(|b| (Complex::new(b.re, b.im), b.size))
            .collect(),
    )
}

impl ConfigFile {
    /// Materialize the system matrices (resolving CSV paths relative to
    /// `base`).
    pub fn build_system(&self, base: &Path) -> Result<SystemDef> {
        let sys = self
            .system
            .as_ref()
            .ok_or_else(|| Error::Missing("[system] section".into()))?;
        if let Some(comp) = &sys.composite {
            let blocks: Result<Vec<TaggedBlock>> = comp
                .blocks
                .iter()
                .map(|b| {
                    let regime = b
                        .regime
                        .as_deref()
                        .and_then(parse_regime)
                        .ok_or_else(|| Error::Missing("composite block regime".into()))?;
                    Ok(TaggedBlock {
                        eigenvalue: Complex::new(b.re, b.im),
                        size: b.size,
                        regime,
                    })
                })
                .collect();
            return Ok(SystemDef::Composite(CompositeBlueprint {
                blocks: blocks?,
                similarity_seed: comp.similarity_seed,
                conditioning: comp.conditioning,
            }));
        }

        let a: Mat = match (&sys.a, &sys.a_csv) {
            (Some(rows), None) => dense_from_rows(rows)?,
            (None, Some(rel)) => read_matrix_csv(&resolve(base, rel))?,
            _ => return Err(Error::Missing("system.a or system.a_csv".into())),
        };
        let mut spec = SystemSpec::new(a)?;
        match (&sys.b, &sys.b_csv) {
            (Some(rows), None) => spec = spec.with_input(dense_from_rows(rows)?)?,
            (None, Some(rel)) => spec = spec.with_input(read_matrix_csv(&resolve(base, rel))?)?,
            _ => {}
        }
        if let Some(x0) = &sys.x0 {
            spec = spec.with_x0(Vect::from_vec(x0.clone()))?;
        }
        if let Some(j) = &sys.jordan {
            let jordan_spec = blocks_to_jordan(&j.blocks)?;
            let p = match &j.p_csv {
                Some(rel) => read_matrix_csv(&resolve(base, rel))?,
                None => Mat::identity(jordan_spec.dim(), jordan_spec.dim()),
            };
            spec = spec.with_jordan(JordanStructure { spec: jordan_spec, p });
        }
        Ok(SystemDef::Explicit(spec))
    }

    pub fn build_noise(&self) -> Result<NoiseModel> {
        match &self.noise {
            None => Ok(NoiseModel::GaussianIsotropic),
            Some(n) => match n.family.as_str() {
                "gaussian" => Ok(NoiseModel::GaussianIsotropic),
                "zero" => Ok(NoiseModel::Zero),
                "subweibull" => Ok(NoiseModel::SubweibullTruncated {
                    alpha: n.alpha.ok_or_else(|| Error::Missing("noise.alpha".into()))?,
                    b: n.b.unwrap_or(1.0),
                    m: n.m.ok_or_else(|| Error::Missing("noise.m".into()))?,
                    delta_trunc: n.delta_trunc.unwrap_or(DEFAULT_DELTA),
                }),
                other => Err(Error::InvalidParameter(format!("noise family {other:?}"))),
            },
        }
    }

    pub fn build_constants(&self) -> BoundConfig {
        let defaults = BoundConfig::default();
        match &self.constants {
            None => defaults,
            Some(c) => BoundConfig {
                universal_c: c.universal_c.unwrap_or(defaults.universal_c),
                universal_small_c: c.universal_small_c.unwrap_or(defaults.universal_small_c),
                r: c.r.unwrap_or(defaults.r),
                class_boundary_c: c.class_boundary_c.unwrap_or(defaults.class_boundary_c),
                psi_samples: c.psi_samples.unwrap_or(defaults.psi_samples),
                psi_seed: c.psi_seed.unwrap_or(defaults.psi_seed),
                outbox_grid: c.outbox_grid.unwrap_or(defaults.outbox_grid),
            },
        }
    }

    /// Assemble the experiment config with defaults filled.
    pub fn build_experiment(
        &self,
        base: &Path,
        seed_override: Option<u64>,
        trials_override: Option<usize>,
        delta_override: Option<f64>,
    ) -> Result<ExperimentConfig> {
        let exp = self.experiment.clone().unwrap_or_default();
        let config = ExperimentConfig {
            system: self.build_system(base)?,
            noise: self.build_noise()?,
            t_grid: exp
                .t_grid
                .ok_or_else(|| Error::Missing("experiment.t_grid".into()))?,
            trials: trials_override.or(exp.trials).unwrap_or(100),
            seed: seed_override.or(exp.seed).unwrap_or(0),
            delta: delta_override.or(exp.delta).unwrap_or(DEFAULT_DELTA),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn structure_specs(&self) -> Result<Vec<JordanSpec>> {
        let exp = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Missing("[experiment] section".into()))?;
        let lists = exp
            .jordan_specs
            .as_ref()
            .ok_or_else(|| Error::Missing("experiment.jordan_specs".into()))?;
        lists.iter().map(|blocks| blocks_to_jordan(blocks)).collect()
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("sysid-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let path = write_tmp(
            "min.toml",
            r#"
[system]
a = [[0.9]]

[experiment]
kind = "rate"
t_grid = [100, 200]
"#,
        );
        let cfg = parse_config(&path).unwrap();
        let exp = cfg
            .build_experiment(path.parent().unwrap(), None, None, None)
            .unwrap();
        assert_eq!(exp.delta, DEFAULT_DELTA);
        assert_eq!(exp.seed, 0);
        assert_eq!(exp.trials, 100);
        let constants = cfg.build_constants();
        assert_eq!(constants.universal_c, 1.0);
        assert_eq!(constants.r, 1.0);
        // x0 defaults to zero
        if let SystemDef::Explicit(spec) = exp.system {
            assert!(spec.x0.iter().all(|&x| x == 0.0));
        } else {
            panic!("expected explicit system");
        }
    }

    #[test]
    fn descending_grid_named_in_error() {
        let path = write_tmp(
            "desc.toml",
            r#"
[system]
a = [[0.9]]

[experiment]
t_grid = [200, 100]
"#,
        );
        let err = parse_config(&path).unwrap_err().to_string();
        assert!(err.contains("t_grid"), "{err}");
        assert!(err.contains("ascending"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let path = write_tmp(
            "unk.toml",
            r#"
[system]
a = [[0.9]]
mystery_knob = 3
"#,
        );
        assert!(parse_config(&path).is_err());
    }

    #[test]
    fn validation_reports_all_problems_at_once() {
        let path = write_tmp(
            "multi.toml",
            r#"
[system]
a = [[0.9]]

[noise]
family = "cauchy"

[experiment]
kind = "warp"
t_grid = [200, 100]
delta = 2.0
"#,
        );
        let err = parse_config(&path).unwrap_err().to_string();
        for needle in ["cauchy", "warp", "ascending", "delta"] {
            assert!(err.contains(needle), "missing {needle} in: {err}");
        }
    }

    #[test]
    fn json_alternate_roundtrip() {
        let cfg = ConfigFile {
            system: Some(SystemSection {
                a: Some(vec![vec![0.5, 0.1], vec![0.0, 0.4]]),
                ..Default::default()
            }),
            experiment: Some(ExperimentSection {
                kind: Some("rate".into()),
                t_grid: Some(vec![50, 100]),
                trials: Some(7),
                seed: Some(3),
                delta: Some(0.1),
                ..Default::default()
            }),
            ..Default::default()
        };
        // serialize -> parse -> equal semantic content (round-trip oracle)
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let path = write_tmp("rt.json", &json);
        let back = parse_config(&path).unwrap();
        assert_eq!(
            serde_json::to_value(&cfg).unwrap(),
            serde_json::to_value(&back).unwrap()
        );

        let toml_text = toml::to_string(&cfg).unwrap();
        let path = write_tmp("rt.toml", &toml_text);
        let back = parse_config(&path).unwrap();
        assert_eq!(
            serde_json::to_value(&cfg).unwrap(),
            serde_json::to_value(&back).unwrap()
        );
    }

    #[test]
    fn composite_blocks_need_regimes() {
        let path = write_tmp(
            "comp.toml",
            r#"
[system.composite]
blocks = [{ re = 0.5, size = 1 }]
"#,
        );
        let err = parse_config(&path).unwrap_err().to_string();
        assert!(err.contains("regime"), "{err}");
    }
}
