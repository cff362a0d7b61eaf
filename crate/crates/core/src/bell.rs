//! Bell inequality `N1(U) <= N2(E) + N3(U)` on model tables and on count
//! tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angle::{AngleSetting, Klass, OutcomePair};
use crate::error::{Error, Result};
use crate::probability::Model;

/// Tolerance for analytic verdicts.
pub const ANALYTIC_TOLERANCE: f64 = 1e-9;

/// Default number of standard errors for empirical verdicts.
pub const DEFAULT_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Saturated,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Saturated => "saturated",
            Verdict::Violated => "violated",
        })
    }
}

impl Verdict {
    /// Classify `margin` against a non-negative `threshold`.
    pub fn classify(margin: f64, threshold: f64) -> Self {
        if margin > threshold {
            Verdict::Violated
        } else if margin.abs() <= threshold {
            Verdict::Saturated
        } else {
            Verdict::Satisfied
        }
    }
}

/// Outcome counts for one relative angle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    #[serde(rename = "00")]
    pub n00: u64,
    #[serde(rename = "01")]
    pub n01: u64,
    #[serde(rename = "10")]
    pub n10: u64,
    #[serde(rename = "11")]
    pub n11: u64,
}

impl PairCounts {
    pub fn get(&self, pair: OutcomePair) -> u64 {
        match pair {
            OutcomePair::P00 => self.n00,
            OutcomePair::P01 => self.n01,
            OutcomePair::P10 => self.n10,
            OutcomePair::P11 => self.n11,
        }
    }

    pub fn add(&mut self, pair: OutcomePair, n: u64) {
        match pair {
            OutcomePair::P00 => self.n00 += n,
            OutcomePair::P01 => self.n01 += n,
            OutcomePair::P10 => self.n10 += n,
            OutcomePair::P11 => self.n11 += n,
        }
    }

    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn klass(&self, k: Klass) -> u64 {
        match k {
            Klass::Equal => self.n00 + self.n11,
            Klass::Unequal => self.n01 + self.n10,
        }
    }
}

/// `N_d(AB)`, keyed by `d`.
pub type CountTable = BTreeMap<u32, PairCounts>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub schema: u32,
    pub source: String,
    /// Probability of an unequal outcome at `d = 1`.
    pub t1: f64,
    /// Probability of an equal outcome at `d = 2`.
    pub t2: f64,
    /// Probability of an unequal outcome at `d = 3`.
    pub t3: f64,
    /// `t1 - (t2 + t3)`; positive means violation.
    pub margin: f64,
    pub verdict: Verdict,
    /// Threshold the margin was compared against.
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<[u64; 3]>,
}

impl BellReport {
    pub fn terms(&self) -> [f64; 3] {
        [self.t1, self.t2, self.t3]
    }

    pub fn bar_chart(&self) -> BarChart {
        let spec = [
            (1, Klass::Unequal, self.t1),
            (2, Klass::Equal, self.t2),
            (3, Klass::Unequal, self.t3),
        ];
        BarChart {
            schema: 1,
            source: self.source.clone(),
            bars: spec
                .iter()
                .map(|&(d, klass, value)| Bar {
                    label: format!("N{d}({klass})"),
                    d,
                    klass,
                    value,
                })
                .collect(),
            lhs: self.t1,
            rhs: self.t2 + self.t3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Bar-chart description of the three terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarChart {
    pub schema: u32,
    pub source: String,
    pub bars: Vec<Bar>,
    /// Left-hand side of the inequality.
    pub lhs: f64,
    /// Right-hand side of the inequality.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub label: String,
    pub d: u32,
    pub klass: Klass,
    pub value: f64,
}

/// Terms of the inequality for a model, evaluated at `delta = d pi/8`.
pub fn bell_terms(model: &Model) -> BellReport {
    let p = |d: u32, k: Klass| {
        model
            .table(AngleSetting::delta_of(d))
            .expect("Bell angles lie inside every model's domain")
            .p(k)
    };
    let (t1, t2, t3) = (p(1, Klass::Unequal), p(2, Klass::Equal), p(3, Klass::Unequal));
    let margin = t1 - (t2 + t3);
    BellReport {
        schema: 1,
        source: model.name(),
        t1,
        t2,
        t3,
        margin,
        verdict: Verdict::classify(margin, ANALYTIC_TOLERANCE),
        threshold: ANALYTIC_TOLERANCE,
        std_errors: None,
        margin_std_error: None,
        sigmas: None,
        trials: None,
    }
}

/// Empirical terms from count tables, using within-`d` relative frequencies.
///
/// Each term carries a binomial standard error `sqrt(p(1-p)/n)`; the margin
/// error adds the three in quadrature. The verdict compares the margin with
/// `sigmas` margin standard errors (never less than the analytic tolerance,
/// so degenerate all-in-one-cell tables still classify).
pub fn bell_counts(counts: &CountTable, sigmas: f64) -> Result<BellReport> {
    let term = |d: u32, k: Klass| -> Result<(f64, f64, u64)> {
        let bin = counts.get(&d).filter(|b| b.total() > 0).ok_or(Error::EmptyBin(d))?;
        let n = bin.total();
        let p = bin.klass(k) as f64 / n as f64;
        Ok((p, (p * (1.0 - p) / n as f64).sqrt(), n))
    };
    let (t1, s1, n1) = term(1, Klass::Unequal)?;
    let (t2, s2, n2) = term(2, Klass::Equal)?;
    let (t3, s3, n3) = term(3, Klass::Unequal)?;
    let margin = t1 - (t2 + t3);
    let se = (s1 * s1 + s2 * s2 + s3 * s3).sqrt();
    let threshold = (sigmas * se).max(ANALYTIC_TOLERANCE);
    Ok(BellReport {
        schema: 1,
        source: "counts".to_string(),
        t1,
        t2,
        t3,
        margin,
        verdict: Verdict::classify(margin, threshold),
        threshold,
        std_errors: Some([s1, s2, s3]),
        margin_std_error: Some(se),
        sigmas: Some(sigmas),
        trials: Some([n1, n2, n3]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::prob_quantum;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classical_saturates() {
        let r = bell_terms(&Model::Classical);
        assert_eq!(r.t1, 0.75);
        assert_eq!(r.t2, 0.5);
        assert_eq!(r.t3, 0.25);
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.verdict, Verdict::Saturated);
    }

    #[test]
    fn quantum_violates() {
        let r = bell_terms(&Model::Quantum);
        // cos^2(pi/8) = (2 + sqrt2)/4, cos^2(3pi/8) = (2 - sqrt2)/4
        let s2 = std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(r.t1, (2.0 + s2) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.t2, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.t3, (2.0 - s2) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.margin, (s2 - 1.0) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.margin, 0.207107, epsilon = 1e-6);
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn transition_violates_more() {
        let r = bell_terms(&Model::Transition);
        let p = 1.0 / (1.0 + 3.0 * (1.0 + std::f64::consts::SQRT_2));
        assert_abs_diff_eq!(r.t1, 1.0 - p, epsilon = 1e-15);
        assert_abs_diff_eq!(r.t3, p, epsilon = 1e-15);
        assert_abs_diff_eq!(r.margin, 0.5 - 2.0 * p, epsilon = 1e-15);
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.margin > bell_terms(&Model::Quantum).margin);
    }

    #[test]
    fn grid_model_is_close_to_quantum() {
        let r = bell_terms(&Model::Grid { resolution: 400 });
        assert_abs_diff_eq!(r.margin, bell_terms(&Model::Quantum).margin, epsilon = 5e-3);
        assert_eq!(r.verdict, Verdict::Violated);
    }

    fn proportional(tables: [[u64; 4]; 4]) -> CountTable {
        tables
            .iter()
            .enumerate()
            .map(|(d, c)| {
                (
                    d as u32,
                    PairCounts {
                        n00: c[0],
                        n01: c[1],
                        n10: c[2],
                        n11: c[3],
                    },
                )
            })
            .collect()
    }

    #[test]
    fn counts_proportional_to_classical() {
        let counts = proportional([[0, 50, 50, 0], [25, 75, 75, 25], [50, 50, 50, 50], [75, 25, 25, 75]]);
        let r = bell_counts(&counts, DEFAULT_SIGMAS).unwrap();
        assert_abs_diff_eq!(r.margin, 0.0, epsilon = 1e-15);
        assert_eq!(r.verdict, Verdict::Saturated);
        assert_eq!(r.trials, Some([200, 200, 200]));
    }

    #[test]
    fn degenerate_counts() {
        let counts = proportional([[0, 0, 0, 0], [0, 9, 0, 0], [4, 0, 0, 0], [0, 0, 7, 0]]);
        let r = bell_counts(&counts, DEFAULT_SIGMAS).unwrap();
        assert_eq!((r.t1, r.t2, r.t3), (1.0, 1.0, 1.0));
        assert_eq!(r.std_errors, Some([0.0, 0.0, 0.0]));
        assert_eq!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn empty_bins_rejected() {
        let mut counts = proportional([[0, 1, 1, 0], [1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1]]);
        counts.insert(2, PairCounts::default());
        assert_eq!(bell_counts(&counts, 3.0), Err(Error::EmptyBin(2)));
        counts.remove(&2);
        assert_eq!(bell_counts(&counts, 3.0), Err(Error::EmptyBin(2)));
    }

    #[test]
    fn sampled_counts_converge_to_model_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [Model::Classical, Model::Quantum, Model::Transition] {
            let mut counts = CountTable::new();
            for d in 1..=3u32 {
                let t = model.table(AngleSetting::delta_of(d)).unwrap();
                let bin = counts.entry(d).or_default();
                for _ in 0..100_000 {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let pair = OutcomePair::ALL
                        .into_iter()
                        .find(|p| {
                            acc += t.pair(*p);
                            u < acc
                        })
                        .unwrap_or(OutcomePair::P11);
                    bin.add(pair, 1);
                }
            }
            let emp = bell_counts(&counts, 3.0).unwrap();
            let exact = bell_terms(&model);
            for (a, b) in emp.terms().iter().zip(exact.terms()) {
                assert!((a - b).abs() < 0.01, "{model}: {a} vs {b}");
            }
        }
        // sanity on the sampler itself
        assert!(prob_quantum(0.3).p_equal > 0.0);
    }

    #[test]
    fn bar_chart_heights() {
        let chart = bell_terms(&Model::Quantum).bar_chart();
        let h: Vec<f64> = chart.bars.iter().map(|b| (b.value * 1e4).round() / 1e4).collect();
        assert_eq!(h, vec![0.8536, 0.5, 0.1464]);
        assert_eq!(chart.bars[0].label, "N1(U)");
        assert!(chart.lhs > chart.rhs);
    }

    #[test]
    fn report_json_shape() {
        let v: serde_json::Value = serde_json::from_str(&bell_terms(&Model::Classical).to_json()).unwrap();
        assert_eq!(v["verdict"], "saturated");
        assert_eq!(v["schema"], 1);
        assert!(v.get("std_errors").is_none());
    }
}
