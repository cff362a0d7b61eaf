//! Closed-form outcome probabilities of the model ladder.
//!
//! | model       | P(E)                                   |
//! |-------------|----------------------------------------|
//! | classical   | `2|delta|/pi`                          |
//! | quantum     | `sin^2(delta)`                         |
//! | transition  | diamond counts fed into `N(E)/(N(E)+N(U))` |
//! | grid        | `(M-m)^2 / ((M-m)^2 + m^2)`            |

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::angle::{Klass, OutcomePair};
use crate::error::{Error, Result};
use crate::partition::{counts_eq5, GridSpec};

/// Default grid resolution (directions per quadrant).
pub const DEFAULT_GRID_RESOLUTION: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "classical_C")]
    Classical,
    #[serde(rename = "quantum_P")]
    Quantum,
    #[serde(rename = "transition_Pstar")]
    Transition,
    #[serde(rename = "grid")]
    Grid,
    #[serde(rename = "custom_counts")]
    CustomCounts,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Classical => "classical_C",
            ModelKind::Quantum => "quantum_P",
            ModelKind::Transition => "transition_Pstar",
            ModelKind::Grid => "grid",
            ModelKind::CustomCounts => "custom_counts",
        }
    }
}

/// A model that yields a probability table at any relative angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Classical,
    Quantum,
    Transition,
    /// Grid model with `resolution` directions per quadrant; `m` is picked
    /// per angle by [`GridSpec::for_delta`].
    Grid {
        resolution: u32,
    },
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Classical => ModelKind::Classical,
            Model::Quantum => ModelKind::Quantum,
            Model::Transition => ModelKind::Transition,
            Model::Grid { .. } => ModelKind::Grid,
        }
    }

    pub fn table(&self, delta: f64) -> Result<ProbabilityTable> {
        match *self {
            Model::Classical => prob_classical(delta),
            Model::Quantum => Ok(prob_quantum(delta)),
            Model::Transition => prob_transition(delta),
            Model::Grid { resolution } => Ok(prob_grid(GridSpec::for_delta(resolution, delta)?)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Model::Grid { resolution } => format!("grid{resolution}"),
            m => m.kind().name().to_string(),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    /// Accepts `classical`, `quantum`, `transition` (plus the long names and
    /// `C`/`P`/`Pstar`), `grid` and `grid<M>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "classical" | "classical_c" | "c" => Ok(Model::Classical),
            "quantum" | "quantum_p" | "p" => Ok(Model::Quantum),
            "transition" | "transition_pstar" | "pstar" | "p*" => Ok(Model::Transition),
            "grid" => Ok(Model::Grid {
                resolution: DEFAULT_GRID_RESOLUTION,
            }),
            other => other
                .strip_prefix("grid")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n > 0)
                .map(|resolution| Model::Grid { resolution })
                .ok_or_else(|| format!("unknown model '{s}'")),
        }
    }
}

/// Outcome probabilities for one model at one relative angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub model: ModelKind,
    pub delta: f64,
    #[serde(rename = "pE")]
    pub p_equal: f64,
    #[serde(rename = "pU")]
    pub p_unequal: f64,
    /// Indexed like [`OutcomePair::ALL`].
    pub per_pair: [f64; 4],
}

impl ProbabilityTable {
    /// Splits each class evenly between its two outcome pairs.
    pub fn from_equal(model: ModelKind, delta: f64, p_equal: f64) -> Self {
        let p_unequal = 1.0 - p_equal;
        let mut per_pair = [0.0; 4];
        for pair in OutcomePair::ALL {
            per_pair[pair.index()] = match pair.klass() {
                Klass::Equal => p_equal / 2.0,
                Klass::Unequal => p_unequal / 2.0,
            };
        }
        Self {
            model,
            delta,
            p_equal,
            p_unequal,
            per_pair,
        }
    }

    pub fn p(&self, klass: Klass) -> f64 {
        match klass {
            Klass::Equal => self.p_equal,
            Klass::Unequal => self.p_unequal,
        }
    }

    pub fn pair(&self, pair: OutcomePair) -> f64 {
        self.per_pair[pair.index()]
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta.abs() > FRAC_PI_2 + 1e-12 {
        return Err(Error::AngleOutOfDomain(delta));
    }
    Ok(())
}

/// Classical arc-length probability.
pub fn prob_classical(delta: f64) -> Result<ProbabilityTable> {
    check_delta(delta)?;
    let p = (2.0 * delta.abs() / PI).min(1.0);
    Ok(ProbabilityTable::from_equal(ModelKind::Classical, delta, p))
}

/// Standard quantum probability.
pub fn prob_quantum(delta: f64) -> ProbabilityTable {
    let s = delta.sin();
    ProbabilityTable::from_equal(ModelKind::Quantum, delta, s * s)
}

/// Model-internal probability: share of equal worlds among all worlds.
pub fn prob_internal(n_equal: f64, n_unequal: f64) -> Result<f64> {
    let total = n_equal + n_unequal;
    if total.is_nan() || total <= 0.0 || n_equal < 0.0 || n_unequal < 0.0 {
        return Err(Error::NoWorlds);
    }
    Ok(n_equal / total)
}

/// Transition-model probability: diamond counts at unit spacing (the
/// spacing cancels).
pub fn prob_transition(delta: f64) -> Result<ProbabilityTable> {
    check_delta(delta)?;
    let (ne, nu) = counts_eq5(delta, 1.0);
    let p = prob_internal(ne.max(0.0), nu.max(0.0))?;
    Ok(ProbabilityTable::from_equal(ModelKind::Transition, delta, p))
}

/// Exact grid-model probability of an equal outcome.
pub fn grid_equal_exact(spec: GridSpec) -> Ratio<u64> {
    let (ne, nu) = spec.counts();
    Ratio::new(ne, ne + nu)
}

pub fn prob_grid(spec: GridSpec) -> ProbabilityTable {
    let r = grid_equal_exact(spec);
    let p = *r.numer() as f64 / *r.denom() as f64;
    ProbabilityTable::from_equal(ModelKind::Grid, spec.delta(), p)
}

/// Table built from arbitrary world counts.
pub fn prob_counts(delta: f64, n_equal: f64, n_unequal: f64) -> Result<ProbabilityTable> {
    let p = prob_internal(n_equal, n_unequal)?;
    Ok(ProbabilityTable::from_equal(ModelKind::CustomCounts, delta, p))
}

/// Channel probabilities `(cos^2, sin^2)` of one splitter at angle `gamma`
/// to the incoming polarization.
pub fn single_pbs_probs(gamma: f64) -> (f64, f64) {
    let c = gamma.cos();
    let s = gamma.sin();
    (c * c, s * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub delta: f64,
    pub model: String,
    #[serde(rename = "pE")]
    pub p_equal: f64,
    #[serde(rename = "pU")]
    pub p_unequal: f64,
}

pub fn curve_table(model: Model, deltas: &[f64]) -> Result<Vec<CurveRow>> {
    deltas
        .iter()
        .map(|&d| {
            let t = model.table(d)?;
            Ok(CurveRow {
                delta: d,
                model: model.name(),
                p_equal: t.p_equal,
                p_unequal: t.p_unequal,
            })
        })
        .collect()
}

/// `n` evenly spaced angles covering `[0, pi/2]`.
pub fn delta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| FRAC_PI_2 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// CSV with columns `delta,model,pE,pU`.
pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delta", "model", "pE", "pU"]).expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{:.12}", r.delta),
            r.model.clone(),
            format!("{:.12}", r.p_equal),
            format!("{:.12}", r.p_unequal),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
