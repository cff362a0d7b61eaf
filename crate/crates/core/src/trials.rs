//! Seeded end-to-end runs of the two-observer experiment.
//!
//! Every pair draws from its own ChaCha8 stream (root seed, stream = pair
//! index), so pairs can be simulated in any order or in parallel and the log
//! is still byte-identical for a given seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actualization::{self, ActOutcome, ActPointer, PointerMode};
use crate::angle::{AngleSetting, OutcomePair};
use crate::bell::{self, BellReport, CountTable};
use crate::error::{Error, Result};
use crate::partition::{self, GridSpec, Partition};
use crate::probability::{Model, ModelKind, ProbabilityTable};

pub const DEFAULT_PAIRS: u64 = 800;

/// Wire spacing of the diamonds partition used for external-randomness runs
/// of the transition model.
pub const EXTERNAL_DIAMOND_SPACING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomnessMode {
    /// Outcomes drawn from the model's probability table.
    Internal,
    /// Outcomes read off the model's partition by a pre-committed pointer.
    ExternalAct,
}

impl fmt::Display for RandomnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RandomnessMode::Internal => "internal",
            RandomnessMode::ExternalAct => "external_act",
        })
    }
}

impl FromStr for RandomnessMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "internal" => Ok(RandomnessMode::Internal),
            "external" | "external_act" => Ok(RandomnessMode::ExternalAct),
            _ => Err(format!("unknown randomness mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub pair_index: u64,
    pub a: i32,
    pub b: i32,
    pub d: u32,
    #[serde(rename = "A")]
    pub alice: Option<u8>,
    #[serde(rename = "B")]
    pub bob: Option<u8>,
    /// The pointer landed on no world.
    pub miss: bool,
}

impl TrialRecord {
    pub fn outcome(&self) -> Option<OutcomePair> {
        OutcomePair::from_bits(self.alice?, self.bob?)
    }

    fn check(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::Malformed(format!("pair {}: {why}", self.pair_index)));
        if self.d != (self.b - self.a).unsigned_abs() {
            return bad("d differs from |b - a|");
        }
        match (self.alice, self.bob, self.miss) {
            (None, None, true) => Ok(()),
            (Some(_), Some(_), false) if self.outcome().is_some() => Ok(()),
            _ => bad("outcome bits inconsistent with miss flag"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub schema: u32,
    pub model: String,
    pub mode: RandomnessMode,
    pub seed: u64,
    pub pairs: u64,
    /// Outcome counts per `d`, misses excluded.
    pub counts: CountTable,
    /// Pointer misses per `d`.
    #[serde(default)]
    pub misses: BTreeMap<u32, u64>,
    pub records: Vec<TrialRecord>,
}

/// Fold records into per-`d` outcome counts and misses.
pub fn fold_records(records: &[TrialRecord]) -> (CountTable, BTreeMap<u32, u64>) {
    let mut counts = CountTable::new();
    let mut misses = BTreeMap::new();
    for r in records {
        match r.outcome() {
            Some(pair) => counts.entry(r.d).or_default().add(pair, 1),
            None => *misses.entry(r.d).or_insert(0) += 1,
        }
    }
    (counts, misses)
}

enum Source {
    Tables(BTreeMap<(i32, i32), ProbabilityTable>),
    Partitions(BTreeMap<(i32, i32), Partition>, PointerMode),
}

fn coin_settings() -> [AngleSetting; 4] {
    [(false, false), (false, true), (true, false), (true, true)].map(|(a, b)| AngleSetting::from_coins(a, b))
}

fn external_partition(model: Model, s: &AngleSetting) -> Result<Partition> {
    match model {
        Model::Classical => partition::cross_section_arcs(s.delta),
        Model::Transition => partition::diamond_partition(s.delta, EXTERNAL_DIAMOND_SPACING),
        Model::Grid { resolution } => partition::grid_partition(GridSpec::for_delta(resolution, s.delta)?),
        Model::Quantum => Err(Error::NoExternalRealization(model.name())),
    }
}

fn sample_pair(table: &ProbabilityTable, u: f64) -> OutcomePair {
    let mut acc = 0.0;
    for pair in OutcomePair::ALL {
        acc += table.pair(pair);
        if u < acc {
            return pair;
        }
    }
    // u within rounding of 1
    *OutcomePair::ALL
        .iter()
        .rev()
        .find(|p| table.pair(**p) > 0.0)
        .expect("table has mass")
}

/// Simulate `pairs` photon pairs.
///
/// Each pair flips two coins for the setting. In internal mode the outcome is
/// drawn from the model's table at that setting. In external mode a pointer
/// is drawn first, before the coins, and read off the model's partition in
/// Alice's frame; pairs whose pointer hits no world are kept as misses.
pub fn run_trials(model: Model, mode: RandomnessMode, pairs: u64, seed: u64) -> Result<TrialLog> {
    if pairs == 0 {
        return Err(Error::NoPairs);
    }
    let key = |s: &AngleSetting| (s.a, s.b);
    let source = match mode {
        RandomnessMode::Internal => Source::Tables(
            coin_settings()
                .iter()
                .map(|s| Ok((key(s), model.table(s.delta)?)))
                .collect::<Result<_>>()?,
        ),
        RandomnessMode::ExternalAct => {
            let pointer_mode = if model.kind() == ModelKind::Classical {
                PointerMode::Angle
            } else {
                PointerMode::Point
            };
            let parts = coin_settings()
                .par_iter()
                .map(|s| Ok((key(s), external_partition(model, s)?)))
                .collect::<Result<_>>()?;
            Source::Partitions(parts, pointer_mode)
        }
    };
    let records: Vec<TrialRecord> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let pointer = match &source {
                Source::Partitions(_, m) => Some(actualization::sample_act(*m, &mut rng)),
                Source::Tables(_) => None,
            };
            let s = AngleSetting::from_coins(rng.gen(), rng.gen());
            let outcome = match (&source, pointer) {
                (Source::Tables(t), _) => Some(sample_pair(&t[&key(&s)], rng.gen())),
                (Source::Partitions(p, _), Some(act)) => read_pointer(&p[&key(&s)], &act.rotated(s.alpha)),
                (Source::Partitions(..), None) => unreachable!(),
            };
            TrialRecord {
                pair_index: i,
                a: s.a,
                b: s.b,
                d: s.d,
                alice: outcome.map(OutcomePair::alice),
                bob: outcome.map(OutcomePair::bob),
                miss: outcome.is_none(),
            }
        })
        .collect();
    let (counts, misses) = fold_records(&records);
    Ok(TrialLog {
        schema: 1,
        model: model.name(),
        mode,
        seed,
        pairs,
        counts,
        misses,
        records,
    })
}

fn read_pointer(p: &Partition, act: &ActPointer) -> Option<OutcomePair> {
    match actualization::act_outcome(p, act).expect("pointer mode matches partition kind") {
        ActOutcome::Hit { label, .. } => Some(label),
        ActOutcome::Miss => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Json,
    Csv,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(LogFormat::Json),
            "csv" => Ok(LogFormat::Csv),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl TrialLog {
    pub fn export(&self, format: LogFormat) -> String {
        match format {
            LogFormat::Json => serde_json::to_string_pretty(self).expect("log serializes") + "\n",
            LogFormat::Csv => records_to_csv(&self.records),
        }
    }

    /// Parse a JSON log and check its counts against its records.
    pub fn from_json(text: &str) -> Result<Self> {
        let log: TrialLog = serde_json::from_str(text)?;
        log.validate()?;
        Ok(log)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            r.check()?;
        }
        let (counts, misses) = fold_records(&self.records);
        if counts != self.counts || misses != self.misses || self.records.len() as u64 != self.pairs {
            return Err(Error::CountMismatch);
        }
        Ok(())
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(["pair_index", "a", "b", "d", "A", "B", "miss"])
            .expect("in-memory write");
    }
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let records: Vec<TrialRecord> = rd.deserialize().collect::<std::result::Result<_, _>>()?;
    for r in &records {
        r.check()?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub schema: u32,
    pub report: BellReport,
    /// Per-`d` relative frequencies of `00, 01, 10, 11` among hits.
    pub frequencies: BTreeMap<u32, [f64; 4]>,
    pub misses: BTreeMap<u32, u64>,
}

impl Analysis {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analysis serializes")
    }
}

/// Bell report and per-`d` frequencies from count tables.
pub fn analyze_counts(counts: &CountTable, misses: &BTreeMap<u32, u64>, sigmas: f64) -> Result<Analysis> {
    let mut report = bell::bell_counts(counts, sigmas)?;
    report.source = "trials".to_string();
    let frequencies = counts
        .iter()
        .filter(|(_, c)| c.total() > 0)
        .map(|(d, c)| (*d, OutcomePair::ALL.map(|p| c.get(p) as f64 / c.total() as f64)))
        .collect();
    Ok(Analysis {
        schema: 1,
        report,
        frequencies,
        misses: misses.clone(),
    })
}

pub fn analyze(log: &TrialLog) -> Result<Analysis> {
    let mut a = analyze_counts(&log.counts, &log.misses, bell::DEFAULT_SIGMAS)?;
    a.report.source = format!("{} {} seed={}", log.model, log.mode, log.seed);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::Klass;
    use crate::bell::Verdict;

    fn cell_sigma(p: f64, n: u64) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn seeded_logs_are_identical() {
        for mode in [RandomnessMode::Internal, RandomnessMode::ExternalAct] {
            let a = run_trials(Model::Classical, mode, 500, 9).unwrap();
            let b = run_trials(Model::Classical, mode, 500, 9).unwrap();
            assert_eq!(a.export(LogFormat::Json), b.export(LogFormat::Json));
            assert_eq!(a.export(LogFormat::Csv), b.export(LogFormat::Csv));
            let c = run_trials(Model::Classical, mode, 500, 10).unwrap();
            assert_ne!(a.records, c.records);
        }
    }

    #[test]
    fn rejected_runs() {
        assert_eq!(
            run_trials(Model::Quantum, RandomnessMode::Internal, 0, 1),
            Err(Error::NoPairs)
        );
        assert_eq!(
            run_trials(Model::Quantum, RandomnessMode::ExternalAct, 10, 1),
            Err(Error::NoExternalRealization("quantum_P".into()))
        );
    }

    #[test]
    fn settings_equally_likely() {
        let log = run_trials(Model::Quantum, RandomnessMode::Internal, 100_000, 2).unwrap();
        let expected = 25_000.0;
        let chi2: f64 = (0..4)
            .map(|d| {
                let n = log.counts[&d].total() as f64;
                (n - expected).powi(2) / expected
            })
            .sum();
        // 95% point of chi-square with 3 degrees of freedom
        assert!(chi2 < 7.815, "chi2 = {chi2}");
    }

    #[test]
    fn internal_frequencies_converge() {
        for model in [Model::Quantum, Model::Transition, Model::Classical] {
            let log = run_trials(model, RandomnessMode::Internal, 100_000, 3).unwrap();
            let a = analyze(&log).unwrap();
            for (d, f) in &a.frequencies {
                let t = model.table(AngleSetting::delta_of(*d)).unwrap();
                for pair in OutcomePair::ALL {
                    assert!((f[pair.index()] - t.pair(pair)).abs() < 0.01, "{model} d={d} {pair}");
                }
            }
        }
    }

    #[test]
    fn classical_margin_is_noise() {
        let log = run_trials(Model::Classical, RandomnessMode::Internal, 100_000, 4).unwrap();
        let r = analyze(&log).unwrap().report;
        assert!(r.margin.abs() < 3.0 * r.margin_std_error.unwrap());
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn external_matches_internal_for_classical() {
        let n = 100_000;
        let int = run_trials(Model::Classical, RandomnessMode::Internal, n, 5).unwrap();
        let ext = run_trials(Model::Classical, RandomnessMode::ExternalAct, n, 6).unwrap();
        assert!(ext.misses.is_empty());
        for d in 0..4 {
            let (ci, ce) = (&int.counts[&d], &ext.counts[&d]);
            for pair in OutcomePair::ALL {
                let fi = ci.get(pair) as f64 / ci.total() as f64;
                let fe = ce.get(pair) as f64 / ce.total() as f64;
                let p = (fi + fe) / 2.0;
                let sigma = (cell_sigma(p, ci.total()).powi(2) + cell_sigma(p, ce.total()).powi(2)).sqrt();
                assert!((fi - fe).abs() <= 3.0 * sigma + 1e-12, "d={d} {pair}: {fi} vs {fe}");
            }
        }
    }

    #[test]
    fn transition_log_violates_more() {
        let q = analyze(&run_trials(Model::Quantum, RandomnessMode::Internal, 100_000, 7).unwrap()).unwrap();
        let t = analyze(&run_trials(Model::Transition, RandomnessMode::Internal, 100_000, 7).unwrap()).unwrap();
        assert_eq!(q.report.verdict, Verdict::Violated);
        assert_eq!(t.report.verdict, Verdict::Violated);
        assert!(t.report.margin > q.report.margin);
    }

    #[test]
    fn external_transition_falls_back_to_arc_lengths() {
        let log = run_trials(Model::Transition, RandomnessMode::ExternalAct, 20_000, 8).unwrap();
        let c = &log.counts[&2];
        let f = c.klass(Klass::Equal) as f64 / c.total() as f64;
        assert!((f - 0.5).abs() < 3.0 * cell_sigma(0.5, c.total()));
    }

    #[test]
    fn grid_misses_are_kept() {
        let log = run_trials(Model::Grid { resolution: 40 }, RandomnessMode::ExternalAct, 2000, 9).unwrap();
        let missed: u64 = log.misses.values().sum();
        assert!(missed > 0);
        assert_eq!(log.records.len(), 2000);
        let csv = log.export(LogFormat::Csv);
        assert!(csv.lines().any(|l| l.ends_with(",,,true")));
        let back = records_from_csv(&csv).unwrap();
        assert_eq!(back, log.records);
        let hits: u64 = log.counts.values().map(crate::bell::PairCounts::total).sum();
        assert_eq!(hits + missed, 2000);
    }

    #[test]
    fn csv_shape() {
        let log = run_trials(Model::Quantum, RandomnessMode::Internal, 3, 1).unwrap();
        let csv = log.export(LogFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "pair_index,a,b,d,A,B,miss");
        assert!(lines[1].starts_with("0,"));
        assert_eq!(records_to_csv(&[]), "pair_index,a,b,d,A,B,miss\n");
    }

    #[test]
    fn json_round_trip() {
        let log = run_trials(Model::Grid { resolution: 12 }, RandomnessMode::ExternalAct, 300, 2).unwrap();
        let back = TrialLog::from_json(&log.export(LogFormat::Json)).unwrap();
        assert_eq!(back, log);
        let parsed: Model = back.model.parse().unwrap();
        assert_eq!(parsed, Model::Grid { resolution: 12 });

        let mut tampered = log.clone();
        tampered.counts.get_mut(&1).unwrap().n00 += 1;
        assert_eq!(
            TrialLog::from_json(&tampered.export(LogFormat::Json)),
            Err(Error::CountMismatch)
        );
    }

    #[test]
    fn unknown_format() {
        assert_eq!("xml".parse::<LogFormat>(), Err(Error::UnknownFormat("xml".into())));
        assert_eq!("CSV".parse::<LogFormat>(), Ok(LogFormat::Csv));
    }

    #[test]
    fn missing_bins_rejected() {
        let mut log = run_trials(Model::Quantum, RandomnessMode::Internal, 200, 1).unwrap();
        log.counts.remove(&2);
        assert_eq!(analyze(&log), Err(Error::EmptyBin(2)));
    }
}
