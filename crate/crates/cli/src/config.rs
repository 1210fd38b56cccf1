//! Run configuration read from a JSON document.
//!
//! ```json
//! {
//!   "nx": 32, "ny": 32, "lambda2": 50.0,
//!   "a": -1.0, "b": 1.0, "c": 1.0, "L2": 0.0, "L3": 0.0,
//!   "seeds": { "rng": 0, "init": "diagonal(d1)", "target": "diagonal(d2)" },
//!   "tolerances": { "grad": 1e-8 },
//!   "schemes": { "flow": "sav", "dt": 1.0 },
//!   "output": "out"
//! }
//! ```
//!
//! Only `nx` and `lambda2` are required. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lcland::field::ElasticParams;
use lcland::hisd::HisdOptions;
use lcland::landscape::LandscapeOptions;
use lcland::minimize::MinimizeOptions;
use lcland::string::{Interpolation, Reparam, StringOptions};
use lcland::{BoundaryCondition, BulkParams, Domain, Seed};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_a() -> f64 {
    -1.0
}
fn one() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nx: usize,
    /// Defaults to `nx`.
    #[serde(default)]
    pub ny: Option<usize>,
    pub lambda2: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(rename = "L2", default)]
    pub l2: f64,
    #[serde(rename = "L3", default)]
    pub l3: f64,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub schemes: Schemes,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Seed of the random initial conditions.
    pub rng: u64,
    pub init: String,
    /// Second endpoint of the string.
    pub target: String,
    /// Optional intermediate state the initial string is bent through.
    pub via: Option<String>,
    /// Landscape root: `symmetric` or a named initial condition refined by
    /// saddle dynamics of index `schemes.saddle_index`.
    pub root: String,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            rng: 0,
            init: "diagonal(d1)".into(),
            target: "diagonal(d2)".into(),
            via: None,
            root: "symmetric".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Stationarity threshold on `|grad E|_inf`.
    pub grad: f64,
    /// String convergence threshold on the perpendicular residual.
    pub string: f64,
    /// Eigensolver residual, relative to the spectral scale.
    pub eig: f64,
    pub max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grad: 1e-8,
            string: 1e-6,
            eig: 1e-8,
            max_iters: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowScheme {
    Sav,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationScheme {
    Linear,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReparamScheme {
    EqualArc,
    EnergyWeighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schemes {
    pub flow: FlowScheme,
    pub dt: f64,
    pub max_steps: usize,
    /// Record every this many flow steps.
    pub trajectory_every: usize,
    pub nodes: usize,
    pub interpolation: InterpolationScheme,
    pub reparam: ReparamScheme,
    pub kappa: f64,
    /// Node count of the refined string between the two top nodes; 0 skips.
    pub refine_nodes: usize,
    pub saddle_index: usize,
    pub upward: bool,
    pub max_index: usize,
    pub max_nodes: usize,
    pub max_searches: usize,
    pub eps: f64,
    pub use_symmetry: bool,
}

impl Default for Schemes {
    fn default() -> Self {
        Schemes {
            flow: FlowScheme::Sav,
            dt: 1.0,
            max_steps: 20_000,
            trajectory_every: 1,
            nodes: 17,
            interpolation: InterpolationScheme::Linear,
            reparam: ReparamScheme::EqualArc,
            kappa: 4.0,
            refine_nodes: 0,
            saddle_index: 1,
            upward: false,
            max_index: 4,
            max_nodes: 200,
            max_searches: 2000,
            eps: 1e-2,
            use_symmetry: false,
        }
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("`{key}`: {reason}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Invalid(inner.to_string())
            } else {
                invalid(&path, inner)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Checks everything the pipelines need before any compute starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.domain()?;
        for (key, s) in [("seeds.init", &self.seeds.init), ("seeds.target", &self.seeds.target)] {
            parse_seed(key, s)?;
        }
        if let Some(v) = &self.seeds.via {
            parse_seed("seeds.via", v)?;
        }
        if self.seeds.root != "symmetric" {
            parse_seed("seeds.root", &self.seeds.root)?;
        }
        let t = &self.tolerances;
        for (key, v) in [("tolerances.grad", t.grad), ("tolerances.string", t.string), ("tolerances.eig", t.eig)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if t.max_iters == 0 {
            return Err(invalid("tolerances.max_iters", "must be positive"));
        }
        let s = &self.schemes;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid("schemes.dt", "must be positive"));
        }
        if s.trajectory_every == 0 {
            return Err(invalid("schemes.trajectory_every", "must be positive"));
        }
        if s.nodes < 8 {
            return Err(invalid("schemes.nodes", "the string needs at least 8 nodes"));
        }
        if s.refine_nodes != 0 && s.refine_nodes < 3 {
            return Err(invalid("schemes.refine_nodes", "must be 0 or at least 3"));
        }
        if !(s.kappa >= 0.0) {
            return Err(invalid("schemes.kappa", "must be non-negative"));
        }
        if !(s.eps > 0.0) {
            return Err(invalid("schemes.eps", "must be positive"));
        }
        if s.max_nodes == 0 || s.max_searches == 0 {
            return Err(invalid("schemes.max_nodes", "budgets must be positive"));
        }
        if self.seeds.via.is_some() && s.nodes % 2 == 0 {
            return Err(invalid("schemes.nodes", "must be odd when `seeds.via` is set"));
        }
        Ok(())
    }

    pub fn bulk(&self) -> Result<BulkParams, CliError> {
        BulkParams::new(self.a, self.b, self.c).map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn domain(&self) -> Result<Arc<Domain>, CliError> {
        let bulk = self.bulk()?;
        let elastic = ElasticParams {
            l1: 1.0,
            l2: self.l2,
            l3: self.l3,
        };
        Domain::new(
            self.nx,
            self.ny.unwrap_or(self.nx),
            self.lambda2,
            bulk,
            elastic,
            BoundaryCondition::Tangent { amplitude: None },
        )
        .map(Arc::new)
        .map_err(|e| CliError::Invalid(e.to_string()))
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            tol_grad: self.tolerances.grad,
            max_iters: self.tolerances.max_iters,
            ..Default::default()
        }
    }

    pub fn hisd_options(&self) -> HisdOptions {
        let mut h = HisdOptions {
            tol_grad: self.tolerances.grad,
            max_iters: self.tolerances.max_iters,
            ..Default::default()
        };
        h.eig.tol = self.tolerances.eig;
        h.eig.rng_seed = self.seeds.rng;
        h
    }

    pub fn string_options(&self) -> StringOptions {
        StringOptions {
            tol: self.tolerances.string,
            max_iters: self.tolerances.max_iters,
            reparam: match self.schemes.reparam {
                ReparamScheme::EqualArc => Reparam::EqualArc,
                ReparamScheme::EnergyWeighted => Reparam::EnergyWeighted {
                    kappa: self.schemes.kappa,
                },
            },
            interpolation: match self.schemes.interpolation {
                InterpolationScheme::Linear => Interpolation::Linear,
                InterpolationScheme::Spline => Interpolation::CubicSpline,
            },
            hisd: self.hisd_options(),
            ..Default::default()
        }
    }

    pub fn landscape_options(&self) -> LandscapeOptions {
        let s = &self.schemes;
        LandscapeOptions {
            eps: s.eps,
            hisd: self.hisd_options(),
            upward: s.upward,
            max_index: s.max_index,
            max_nodes: s.max_nodes,
            max_searches: s.max_searches,
            use_symmetry: s.use_symmetry,
            ..Default::default()
        }
    }
}

pub fn parse_seed(key: &str, s: &str) -> Result<Seed, CliError> {
    s.parse::<Seed>().map_err(|_| invalid(key, format!("unrecognized initial condition `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"nx": 8, "lambda2": 5}"#).unwrap();
        assert_eq!(c.ny, None);
        assert_eq!((c.a, c.b, c.c), (-1.0, 1.0, 1.0));
        assert_eq!(c.schemes.flow, FlowScheme::Sav);
        assert_eq!(c.domain().unwrap().ny(), 8);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (r#"{"nx": 8}"#, "lambda2"),
            (r#"{"nx": 8, "lambda2": 5, "colour": 1}"#, "colour"),
            (r#"{"nx": 8, "lambda2": "big"}"#, "lambda2"),
            (r#"{"nx": 8, "lambda2": -5}"#, "lambda2"),
            (r#"{"nx": 8, "lambda2": 5, "schemes": {"flow": "rk4"}}"#, "schemes.flow"),
            (r#"{"nx": 8, "lambda2": 5, "schemes": {"dt": 0}}"#, "schemes.dt"),
            (r#"{"nx": 8, "lambda2": 5, "seeds": {"init": "spiral"}}"#, "seeds.init"),
            (r#"{"nx": 8, "lambda2": 5, "tolerances": {"grad": 1e-8, "gard": 1}}"#, "gard"),
            (r#"{"nx": 2, "lambda2": 5}"#, "nx"),
            (r#"{"nx": 8, "lambda2": 5, "b": -1}"#, "b"),
        ];
        for (text, key) in cases {
            match RunConfig::from_json(text) {
                Err(CliError::Invalid(msg)) => assert!(msg.contains(key), "{text}: {msg}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
