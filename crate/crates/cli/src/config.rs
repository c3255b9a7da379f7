//! Run configuration, read from TOML.
//!
//! ```toml
//! [problem]
//! horizon = 0.1
//!
//! [weight]
//! breakpoints = [0.0, 0.2, 1.0]
//! pieces = [[1.0], [0.0]]
//!
//! [signals.q0]
//! breakpoints = [0.0, 0.4, 0.6, 1.0]
//! pieces = [[0.0], [1.0], [0.0]]
//!
//! [grid]
//! xs = { start = 0.1, stop = 0.9, count = 9 }
//! ts = [0.02, 0.05, 0.1]
//! ```
//!
//! Polynomial pieces are coefficient lists in ascending powers of the global
//! variable (`x` for the weight and `q0`, `t` for `g0` and `g1`). Missing
//! signals are zero.

use std::path::Path;

use nlheat::contours::ContourSpec;
use nlheat::oracle::FdConfig;
use nlheat::poly::{PiecewisePoly, Poly};
use nlheat::solver::{HeatProblem, ResidualOptions, TauRule};
use nlheat::transforms::{SpaceSignal, TimeSignal};
use nlheat::weights::Weight;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub weight: WeightSection,
    #[serde(default)]
    pub signals: SignalsSection,
    #[serde(default)]
    pub contour: ContourSpec,
    pub grid: GridSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub compare: CompareSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(default = "unit_interval")]
    pub breakpoints: Vec<f64>,
    #[serde(default)]
    pub pieces: Vec<Vec<f64>>,
    /// Point masses `[position, mass]`; a weight is either a density or atoms.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<[f64; 2]>,
}

/// Breakpoints with one coefficient list per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSection {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<PiecewiseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<PiecewiseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<PiecewiseSection>,
}

/// Explicit list or evenly spaced points (endpoints included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub xs: Axis,
    pub ts: Axis,
    /// `None` uses `τ = min(2 max t, T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    /// CSV destination; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Pass/fail threshold for `verify`.
    pub tolerance: f64,
    /// Finite-difference steps used by `verify`.
    pub residual: ResidualOptions,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            csv: None,
            tolerance: 1e-6,
            residual: ResidualOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub fd: FdConfig,
    /// Refinements of `fd` tried until two levels agree to `fd_self_tolerance`.
    pub fd_refinements: usize,
    pub fd_self_tolerance: f64,
    /// Pass/fail threshold for the contour-vs-oracle difference.
    pub oracle_tolerance: f64,
    pub m_list: Vec<usize>,
    pub j_list: Vec<usize>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            fd: FdConfig {
                n_space: 200,
                dt: 1e-3,
                rannacher_steps: 2,
            },
            fd_refinements: 4,
            fd_self_tolerance: 1e-4,
            oracle_tolerance: 1e-3,
            m_list: vec![10, 20, 40, 80],
            j_list: vec![10, 20, 50],
        }
    }
}

fn unit_interval() -> Vec<f64> {
    vec![0.0, 1.0]
}

fn polys(pieces: &[Vec<f64>]) -> Vec<Poly> {
    pieces.iter().map(|c| Poly::new(c.clone())).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn weight(&self) -> Result<Weight, CliError> {
        let w = &self.weight;
        let atoms: Vec<(f64, f64)> = w.atoms.iter().map(|a| (a[0], a[1])).collect();
        let res = match (w.pieces.is_empty(), atoms.is_empty()) {
            (false, true) => Weight::new(w.breakpoints.clone(), polys(&w.pieces)),
            (true, false) => Weight::atomic(atoms),
            (false, false) => PiecewisePoly::new(w.breakpoints.clone(), polys(&w.pieces))
                .and_then(|d| Weight::with_atoms(d, atoms)),
            (true, true) => return Err(CliError::Config("weight needs pieces or atoms".into())),
        };
        res.map_err(config_error)
    }

    fn space(&self, s: &Option<PiecewiseSection>) -> Result<SpaceSignal, CliError> {
        match s {
            None => Ok(SpaceSignal::zero()),
            Some(p) => SpaceSignal::new(p.breakpoints.clone(), polys(&p.pieces)).map_err(config_error),
        }
    }

    fn time(&self, s: &Option<PiecewiseSection>) -> Result<TimeSignal, CliError> {
        match s {
            None => Ok(TimeSignal::zero(self.problem.horizon)),
            Some(p) => TimeSignal::new(p.breakpoints.clone(), polys(&p.pieces)).map_err(config_error),
        }
    }

    pub fn q0(&self) -> Result<SpaceSignal, CliError> {
        self.space(&self.signals.q0)
    }

    pub fn g0(&self) -> Result<TimeSignal, CliError> {
        self.time(&self.signals.g0)
    }

    pub fn g1(&self) -> Result<TimeSignal, CliError> {
        self.time(&self.signals.g1)
    }

    /// Builds and validates the problem; hypothesis failures stay distinct.
    pub fn problem(&self) -> Result<HeatProblem, CliError> {
        HeatProblem::new(self.q0()?, self.g0()?, self.g1()?, self.weight()?, self.problem.horizon).map_err(config_error)
    }
}

/// Malformed data in the file is a configuration error, not a numerical one.
fn config_error(e: nlheat::Error) -> CliError {
    match e {
        nlheat::Error::InvalidInput(m) => CliError::Config(m),
        other => CliError::from(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_includes_endpoints() {
        let a = Axis::Linspace {
            start: 0.1,
            stop: 0.9,
            count: 5,
        };
        assert_eq!(a.points(), vec![0.1, 0.30000000000000004, 0.5, 0.7000000000000001, 0.9]);
        assert_eq!(Axis::Linspace { start: 0.3, stop: 1.0, count: 1 }.points(), vec![0.3]);
    }

    #[test]
    fn weight_needs_pieces_or_atoms() {
        let cfg = RunConfig::parse("[problem]\nhorizon = 1.0\n[weight]\n[grid]\nxs = [0.5]\nts = [0.5]\n").unwrap();
        assert!(matches!(cfg.weight(), Err(CliError::Config(_))));
        assert_eq!(cfg.outputs.tolerance, 1e-6);
    }
}
