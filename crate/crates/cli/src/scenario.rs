//! Scenario files: one TOML document describing a network, its delay
//! signals, the simulation window and the initial condition.
//!
//! Field names are part of the tool's interface: the graph is `n`, `d`
//! and `edges` with records `{u, v, w, class}`.

use std::collections::BTreeMap;
use std::path::Path;

use delay_consensus::sim::{DelaySignal, InitialCondition};
use delay_consensus::{AgentGraph, GraphError};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub d: usize,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub signals: Vec<SignalSpec>,
    pub initial: Option<InitialSpec>,
    pub simulation: Option<SimulationSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    pub class: usize,
}

// No deny_unknown_fields here: it cannot coexist with the flattened tag.
#[derive(Debug, Deserialize)]
pub struct SignalSpec {
    pub class: usize,
    #[serde(flatten)]
    pub shape: SignalShape,
    /// Overrides the declared bound (defaults to the tight one).
    pub bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalShape {
    Constant {
        tau: f64,
    },
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Sinusoidal {
        center: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    Sawtooth {
        peak: f64,
        period: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Per-agent state vectors at time zero, extended constantly over the
    /// history window.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon: f64,
    pub h_step: f64,
    #[serde(default = "default_conv_tol")]
    pub conv_tol: f64,
    #[serde(default = "default_div_factor")]
    pub div_factor: f64,
    /// Emit every k-th time node to the CSV.
    #[serde(default = "default_stride")]
    pub csv_stride: usize,
}

fn default_conv_tol() -> f64 {
    1e-6
}

fn default_div_factor() -> f64 {
    1e3
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default = "default_runs")]
    pub runs_per_point: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the [simulation] horizon for sweep probes.
    pub horizon: Option<f64>,
}

fn default_points() -> usize {
    11
}

fn default_runs() -> usize {
    1
}

fn default_seed() -> u64 {
    0x5eed
}

#[derive(Debug, Default, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySpec {
    /// Same constant delay (the probed bound) on every class.
    #[default]
    UniformConstant,
    /// One randomized bounded signal shared by all classes.
    UniformRandom,
    /// Independent randomized bounded signals per class.
    PerClassRandom,
}

pub fn load(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

impl Scenario {
    pub fn graph(&self) -> Result<AgentGraph, GraphError> {
        let records: Vec<(usize, usize, f64, usize)> = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, e.w, e.class))
            .collect();
        AgentGraph::build(self.n, self.d, &records)
    }

    pub fn signals(&self) -> BTreeMap<usize, DelaySignal> {
        self.signals
            .iter()
            .map(|spec| {
                let signal = match &spec.shape {
                    SignalShape::Constant { tau } => DelaySignal::constant(*tau),
                    SignalShape::PiecewiseConstant {
                        breakpoints,
                        values,
                    } => DelaySignal::piecewise_constant(breakpoints.clone(), values.clone()),
                    SignalShape::Sinusoidal {
                        center,
                        amplitude,
                        period,
                        phase,
                    } => DelaySignal::sinusoidal(*center, *amplitude, *period, *phase),
                    SignalShape::Sawtooth { peak, period } => DelaySignal::sawtooth(*peak, *period),
                };
                let signal = match spec.bound {
                    Some(bound) => signal.with_bound(bound),
                    None => signal,
                };
                (spec.class, signal)
            })
            .collect()
    }

    pub fn initial_condition(&self) -> Option<InitialCondition> {
        self.initial
            .as_ref()
            .map(|spec| InitialCondition::Constant(spec.values.clone()))
    }
}
