//! World counting over sequences of runs.
//!
//! Each run branches into `N(E)` equal and `N(U)` unequal worlds. After `i`
//! runs the number of worlds that recorded `r` equal outcomes is
//! `C(i, r) N(E)^r N(U)^(i-r)`, and all of them together number
//! `(N(E) + N(U))^i`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest world count [`simulate_sequences`] will enumerate.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Number of worlds after `i` runs with exactly `r` equal outcomes.
pub fn world_count_q(i: u32, r: u32, n_equal: u32, n_unequal: u32) -> Result<BigUint> {
    if r > i {
        return Err(Error::ROutOfRange { i, r });
    }
    let c = binomial(BigUint::from(i), BigUint::from(r));
    Ok(c * BigUint::from(n_equal).pow(r) * BigUint::from(n_unequal).pow(i - r))
}

/// Total number of worlds, `(N(E) + N(U))^i`.
pub fn total_worlds(i: u32, n_equal: u32, n_unequal: u32) -> BigUint {
    BigUint::from(n_equal + n_unequal).pow(i)
}

/// An exact fraction together with its floating value.
#[derive(Debug, Clone, PartialEq)]
pub struct Fraction {
    pub exact: BigRational,
    pub value: f64,
}

impl Fraction {
    fn new(num: BigUint, den: BigUint) -> Self {
        let exact = BigRational::new(num.into(), den.into());
        let value = exact.to_f64().unwrap_or(f64::NAN);
        Self { exact, value }
    }
}

/// Share of all worlds whose equal-count lies in `window`.
pub fn typicality_fraction(i: u32, n_equal: u32, n_unequal: u32, window: &BTreeSet<u32>) -> Result<Fraction> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut sum = BigUint::zero();
    for &r in window {
        sum += world_count_q(i, r, n_equal, n_unequal)?;
    }
    let total = total_worlds(i, n_equal, n_unequal);
    if total.is_zero() {
        return Err(Error::NoWorlds);
    }
    Ok(Fraction::new(sum, total))
}

/// The `r` with the most worlds; ties go to the smaller `r`.
pub fn most_common_r(i: u32, n_equal: u32, n_unequal: u32) -> u32 {
    let mut best = 0;
    let mut best_q = BigUint::zero();
    for r in 0..=i {
        let q = world_count_q(i, r, n_equal, n_unequal).expect("r <= i");
        if q > best_q {
            best = r;
            best_q = q;
        }
    }
    best
}

/// Contiguous window of `width` values of `r` grown from the most common `r`,
/// each step taking the neighbour with more worlds (ties toward smaller `r`).
pub fn greedy_window(i: u32, n_equal: u32, n_unequal: u32, width: u32) -> BTreeSet<u32> {
    let q = |r: u32| world_count_q(i, r, n_equal, n_unequal).expect("r <= i");
    let mode = most_common_r(i, n_equal, n_unequal);
    let (mut lo, mut hi) = (mode, mode);
    let width = width.clamp(1, i + 1);
    while hi - lo + 1 < width {
        let left = (lo > 0).then(|| q(lo - 1));
        let right = (hi < i).then(|| q(hi + 1));
        match (left, right) {
            (Some(l), Some(r)) if l >= r => lo -= 1,
            (Some(_), Some(_)) => hi += 1,
            (Some(_), None) => lo -= 1,
            (None, Some(_)) => hi += 1,
            (None, None) => break,
        }
    }
    (lo..=hi).collect()
}

/// Window of `max(1, round(i/3))` values around the most common `r`.
pub fn third_window(i: u32, n_equal: u32, n_unequal: u32) -> BTreeSet<u32> {
    let width = ((f64::from(i) / 3.0).round() as u32).max(1);
    greedy_window(i, n_equal, n_unequal, width)
}

/// Per-`r` world counts after `i` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDistribution {
    pub i: u32,
    pub n_equal: u32,
    pub n_unequal: u32,
    /// Exact counts (enumeration) as decimal strings, indexed by `r`.
    pub q_by_r: Vec<String>,
    pub total: String,
    /// Fractions of all worlds per `r`.
    pub fractions: Vec<f64>,
    pub sampled: bool,
}

impl BranchDistribution {
    pub fn q(&self, r: u32) -> BigUint {
        self.q_by_r[r as usize].parse().expect("decimal")
    }

    /// CSV with columns `r,Q,fraction`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r", "Q", "fraction"]).expect("in-memory write");
        for (r, (q, f)) in self.q_by_r.iter().zip(&self.fractions).enumerate() {
            w.write_record([r.to_string(), q.clone(), format!("{f:.12}")])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_formula(i: u32, n_equal: u32, n_unequal: u32) -> Self {
        let qs: Vec<BigUint> = (0..=i)
            .map(|r| world_count_q(i, r, n_equal, n_unequal).expect("r <= i"))
            .collect();
        Self::exact(i, n_equal, n_unequal, qs)
    }

    fn exact(i: u32, n_equal: u32, n_unequal: u32, qs: Vec<BigUint>) -> Self {
        let total: BigUint = qs.iter().sum();
        let fractions = qs
            .iter()
            .map(|q| Fraction::new(q.clone(), total.clone().max(BigUint::one())).value)
            .collect();
        Self {
            i,
            n_equal,
            n_unequal,
            q_by_r: qs.iter().map(|q| q.to_string()).collect(),
            total: total.to_string(),
            fractions,
            sampled: false,
        }
    }
}

/// Enumerate every world sequence and tally equal outcomes per sequence.
///
/// Branch indices below `n_equal` are equal outcomes. Sequences are split by
/// their first run across worker threads and merged in order.
pub fn simulate_sequences(i: u32, n_equal: u32, n_unequal: u32) -> Result<BranchDistribution> {
    let branches = u128::from(n_equal + n_unequal);
    let worlds = branches.checked_pow(i).unwrap_or(u128::MAX);
    if worlds > ENUMERATION_CAP {
        return Err(Error::EnumerationTooLarge {
            worlds,
            cap: ENUMERATION_CAP,
        });
    }
    if i == 0 {
        return Ok(BranchDistribution::exact(0, n_equal, n_unequal, vec![BigUint::one()]));
    }
    let b = n_equal + n_unequal;
    let tally_from = |first: u32| -> Vec<u64> {
        let mut tally = vec![0u64; i as usize + 1];
        let mut digits = vec![0u32; i as usize - 1];
        let base_r = u32::from(first < n_equal);
        loop {
            let r = base_r + digits.iter().filter(|&&x| x < n_equal).count() as u32;
            tally[r as usize] += 1;
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    return tally;
                }
                digits[pos] += 1;
                if digits[pos] < b {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    };
    let parts: Vec<Vec<u64>> = (0..b).into_par_iter().map(tally_from).collect();
    let mut qs = vec![BigUint::zero(); i as usize + 1];
    for part in parts {
        for (q, n) in qs.iter_mut().zip(part) {
            *q += n;
        }
    }
    Ok(BranchDistribution::exact(i, n_equal, n_unequal, qs))
}

/// Estimate the distribution by drawing `samples` uniformly random world
/// sequences.
pub fn sample_sequences<R: Rng>(i: u32, n_equal: u32, n_unequal: u32, samples: u64, rng: &mut R) -> BranchDistribution {
    let b = n_equal + n_unequal;
    let mut tally = vec![0u64; i as usize + 1];
    for _ in 0..samples {
        let r = (0..i).filter(|_| rng.gen_range(0..b) < n_equal).count();
        tally[r] += 1;
    }
    BranchDistribution {
        i,
        n_equal,
        n_unequal,
        q_by_r: tally.iter().map(|t| t.to_string()).collect(),
        total: samples.to_string(),
        fractions: tally.iter().map(|&t| t as f64 / samples.max(1) as f64).collect(),
        sampled: true,
    }
}

/// Node of a branching tree. Leaves are worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTree {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<BranchTree>,
    /// Weight for choosing this node among its siblings (uniform if absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl BranchTree {
    pub fn leaf(label: Option<&str>) -> Self {
        Self {
            label: label.map(str::to_string),
            children: Vec::new(),
            width: None,
        }
    }

    pub fn node(label: Option<&str>, children: Vec<BranchTree>) -> Self {
        Self {
            label: label.map(str::to_string),
            children,
            width: None,
        }
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = Some(width);
        self
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(BranchTree::leaf_count).sum()
        }
    }
}

/// External and internal probability of reaching a world whose path
/// contains a node satisfying `predicate`.
///
/// External: product of sibling-normalized choice weights along the path,
/// summed over satisfying leaves (one walk from the root per trial).
/// Internal: satisfying leaves over all leaves.
pub fn tree_probabilities<F>(tree: &BranchTree, predicate: F) -> Result<(f64, f64)>
where
    F: Fn(Option<&str>) -> bool,
{
    fn walk<F: Fn(Option<&str>) -> bool>(
        node: &BranchTree,
        weight: f64,
        matched: bool,
        predicate: &F,
        out: &mut (f64, usize, usize),
    ) -> Result<()> {
        let matched = matched || predicate(node.label.as_deref());
        if node.children.is_empty() {
            out.2 += 1;
            if matched {
                out.0 += weight;
                out.1 += 1;
            }
            return Ok(());
        }
        let widths: Vec<f64> = node.children.iter().map(|c| c.width.unwrap_or(1.0)).collect();
        if let Some(&w) = widths.iter().find(|w| w.is_nan() || **w <= 0.0) {
            return Err(Error::NonPositiveWidth(w));
        }
        let sum: f64 = widths.iter().sum();
        for (child, w) in node.children.iter().zip(widths) {
            walk(child, weight * w / sum, matched, predicate, out)?;
        }
        Ok(())
    }
    let mut acc = (0.0, 0usize, 0usize);
    walk(tree, 1.0, false, &predicate, &mut acc)?;
    Ok((acc.0, acc.1 as f64 / acc.2 as f64))
}
