//! Randomness from outside the model: an actualization pointer picks "the"
//! actual world by landing somewhere on the cross-section.
//!
//! Angle pointers model a pencil twirled on the circumference, point pointers
//! a pebble thrown onto the disk. Either way the hit frequency of a region is
//! its share of the circumference or of the disk area, whatever the number of
//! worlds inside it.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{AngleSetting, Klass, OutcomePair};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::partition::{self, GridSpec, Partition, PartitionKind, DISK_RADIUS};

/// Shards used by [`act_statistics`]. Fixed so results do not depend on the
/// number of worker threads.
const SHARDS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointerMode {
    Angle,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ActPointer {
    Angle { angle: f64 },
    Point { x: f64, y: f64 },
}

impl ActPointer {
    pub fn angle(theta: f64) -> Self {
        ActPointer::Angle {
            angle: theta.rem_euclid(TAU),
        }
    }

    pub fn point(x: f64, y: f64) -> Result<Self> {
        let r = x.hypot(y);
        if r.is_nan() || r > DISK_RADIUS * (1.0 + 1e-12) {
            return Err(Error::PointerOutsideDisk(r));
        }
        Ok(ActPointer::Point { x, y })
    }

    pub fn mode(&self) -> PointerMode {
        match self {
            ActPointer::Angle { .. } => PointerMode::Angle,
            ActPointer::Point { .. } => PointerMode::Point,
        }
    }

    fn mode_name(&self) -> &'static str {
        match self {
            ActPointer::Angle { .. } => "angle",
            ActPointer::Point { .. } => "point",
        }
    }

    /// Same pointer seen from a frame turned by `alpha`.
    pub fn rotated(&self, alpha: f64) -> Self {
        match *self {
            ActPointer::Angle { angle } => ActPointer::angle(angle - alpha),
            ActPointer::Point { x, y } => {
                let (s, c) = alpha.sin_cos();
                ActPointer::Point {
                    x: x * c + y * s,
                    y: -x * s + y * c,
                }
            }
        }
    }
}

/// Draw a pointer. Points are uniform over the disk area via the
/// square-root radius method.
pub fn sample_act<R: Rng + ?Sized>(mode: PointerMode, rng: &mut R) -> ActPointer {
    match mode {
        PointerMode::Angle => ActPointer::angle(rng.gen::<f64>() * TAU),
        PointerMode::Point => {
            let r = DISK_RADIUS * rng.gen::<f64>().sqrt();
            let t = rng.gen::<f64>() * TAU;
            ActPointer::Point {
                x: r * t.cos(),
                y: r * t.sin(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum ActOutcome {
    Hit { label: OutcomePair, region: usize },
    Miss,
}

impl ActOutcome {
    pub fn label(&self) -> Option<OutcomePair> {
        match self {
            ActOutcome::Hit { label, .. } => Some(*label),
            ActOutcome::Miss => None,
        }
    }
}

fn lookup(partition: &Partition, p: Point) -> ActOutcome {
    match partition.region_at_point(p) {
        Some(i) => ActOutcome::Hit {
            label: partition.regions[i].label,
            region: i,
        },
        None => ActOutcome::Miss,
    }
}

/// The world the pointer lands in. Angle pointers need an arcs partition,
/// point pointers a diamonds or grid partition.
pub fn act_outcome(partition: &Partition, act: &ActPointer) -> Result<ActOutcome> {
    match (act, partition.kind) {
        (ActPointer::Angle { angle }, PartitionKind::Arcs) => {
            let i = partition.region_at_angle(*angle).expect("arcs tile the circle");
            Ok(ActOutcome::Hit {
                label: partition.regions[i].label,
                region: i,
            })
        }
        (ActPointer::Point { x, y }, PartitionKind::Diamonds | PartitionKind::Grid) => Ok(lookup(partition, [*x, *y])),
        _ => Err(Error::ModeMismatch {
            pointer: act.mode_name(),
            partition: partition.kind.name(),
        }),
    }
}

/// Where pebbles may land.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActDomain {
    /// Anywhere on the disk.
    #[default]
    Disk,
    /// Only on regions; throws off every region are drawn again.
    Regions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActStatistics {
    pub schema: u32,
    pub kind: PartitionKind,
    pub delta: f64,
    pub domain: ActDomain,
    pub seed: u64,
    pub trials: u64,
    /// Hits per outcome pair in `00, 01, 10, 11` order.
    pub counts: [u64; 4],
    pub misses: u64,
    pub frequencies: [f64; 4],
    pub miss_rate: f64,
}

impl ActStatistics {
    pub fn freq(&self, k: Klass) -> f64 {
        OutcomePair::ALL
            .iter()
            .filter(|p| p.klass() == k)
            .map(|p| self.frequencies[p.index()])
            .sum()
    }

    /// Binomial standard error of `freq(k)` around `expected`.
    pub fn std_error(&self, expected: f64) -> f64 {
        (expected * (1.0 - expected) / self.trials as f64).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("statistics serialize")
    }
}

/// Throw `n_trials` pointers at the partition and tally the labels hit.
/// Arcs partitions get angle pointers, the others point pointers.
pub fn act_statistics(partition: &Partition, n_trials: u64, seed: u64, domain: ActDomain) -> Result<ActStatistics> {
    if n_trials == 0 {
        return Err(Error::NoPairs);
    }
    let mode = match partition.kind {
        PartitionKind::Arcs => PointerMode::Angle,
        _ => PointerMode::Point,
    };
    let shard = |k: u64| -> Result<([u64; 4], u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        let n = n_trials / SHARDS + u64::from(k < n_trials % SHARDS);
        let mut counts = [0u64; 4];
        let mut misses = 0;
        for _ in 0..n {
            loop {
                let act = sample_act(mode, &mut rng);
                match act_outcome(partition, &act)? {
                    ActOutcome::Hit { label, .. } => counts[label.index()] += 1,
                    ActOutcome::Miss if domain == ActDomain::Regions => continue,
                    ActOutcome::Miss => misses += 1,
                }
                break;
            }
        }
        Ok((counts, misses))
    };
    let parts: Vec<([u64; 4], u64)> = (0..SHARDS).into_par_iter().map(shard).collect::<Result<_>>()?;
    let mut counts = [0u64; 4];
    let mut misses = 0;
    for (c, m) in parts {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        misses += m;
    }
    let n = n_trials as f64;
    Ok(ActStatistics {
        schema: 1,
        kind: partition.kind,
        delta: partition.delta,
        domain,
        seed,
        trials: n_trials,
        counts,
        misses,
        frequencies: counts.map(|c| c as f64 / n),
        miss_rate: misses as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingHit {
    pub a: i32,
    pub b: i32,
    pub d: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Pointer in the frame of the setting's partition.
    pub local: [f64; 2],
    pub outcome: ActOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActFailureReport {
    pub schema: u32,
    pub pointer: ActPointer,
    pub settings: Vec<SettingHit>,
    pub misses: usize,
    pub miss_fraction: f64,
}

/// Run one pre-committed pebble through a sequence of settings.
///
/// The pointer is fixed in the laboratory frame before any setting exists.
/// Each setting's partition is built in Alice's frame, so the pebble is read
/// there after turning by `-alpha`.
pub fn act_failure_experiment_with<F>(
    pointer: ActPointer,
    settings: &[AngleSetting],
    mut partition_for: F,
) -> Result<ActFailureReport>
where
    F: FnMut(&AngleSetting) -> Result<Partition>,
{
    if pointer.mode() != PointerMode::Point {
        return Err(Error::ModeMismatch {
            pointer: "angle",
            partition: "grid",
        });
    }
    let mut hits = Vec::with_capacity(settings.len());
    for s in settings {
        let partition = partition_for(s)?;
        let ActPointer::Point { x, y } = pointer.rotated(s.alpha) else {
            unreachable!()
        };
        hits.push(SettingHit {
            a: s.a,
            b: s.b,
            d: s.d,
            grid: partition.grid,
            local: [x, y],
            outcome: lookup(&partition, [x, y]),
        });
    }
    let misses = hits.iter().filter(|h| h.outcome == ActOutcome::Miss).count();
    Ok(ActFailureReport {
        schema: 1,
        pointer,
        miss_fraction: if hits.is_empty() {
            0.0
        } else {
            misses as f64 / hits.len() as f64
        },
        settings: hits,
        misses,
    })
}

/// [`act_failure_experiment_with`] on grid partitions of resolution `grid_m`.
pub fn act_failure_experiment(pointer: ActPointer, settings: &[AngleSetting], grid_m: u32) -> Result<ActFailureReport> {
    act_failure_experiment_with(pointer, settings, |s| {
        partition::grid_partition(GridSpec::for_delta(grid_m, s.delta)?)
    })
}

/// Overall miss fraction of many pre-committed pointers.
pub fn miss_fraction(reports: &[ActFailureReport]) -> f64 {
    let total: usize = reports.iter().map(|r| r.settings.len()).sum();
    let misses: usize = reports.iter().map(|r| r.misses).sum();
    if total == 0 {
        0.0
    } else {
        misses as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::IndexMode;
    use crate::partition::{cross_section_arcs, diamond_partition, grid_partition};
    use crate::probability::prob_transition;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn coin_settings() -> Vec<AngleSetting> {
        [(false, false), (true, true), (false, true), (true, false)]
            .into_iter()
            .map(|(a, b)| AngleSetting::from_coins(a, b))
            .collect()
    }

    #[test]
    fn seeded_pointers_repeat() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for mode in [PointerMode::Angle, PointerMode::Point] {
            assert_eq!(sample_act(mode, &mut a), sample_act(mode, &mut b));
        }
    }

    #[test]
    fn angle_quadrants_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut q = [0u32; 4];
        for _ in 0..n {
            let ActPointer::Angle { angle } = sample_act(PointerMode::Angle, &mut rng) else {
                panic!()
            };
            assert!((0.0..TAU).contains(&angle));
            q[(angle / FRAC_PI_2) as usize] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in q {
            assert!((f64::from(c) / n as f64 - 0.25).abs() < 3.0 * sigma, "{q:?}");
        }
    }

    #[test]
    fn point_radius_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let ActPointer::Point { x, y } = sample_act(PointerMode::Point, &mut rng) else {
                panic!()
            };
            let r = x.hypot(y);
            assert!(r <= DISK_RADIUS);
            sum += r;
        }
        // radius density 2r/R^2: mean 2R/3, variance R^2/18
        let sigma = DISK_RADIUS / 18f64.sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64 - 2.0 * DISK_RADIUS / 3.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn pointer_construction() {
        assert!(ActPointer::point(DISK_RADIUS, 0.0).is_ok());
        assert!(matches!(
            ActPointer::point(DISK_RADIUS, 0.01),
            Err(Error::PointerOutsideDisk(_))
        ));
        assert_eq!(ActPointer::angle(-FRAC_PI_2), ActPointer::Angle { angle: 1.5 * PI });
        let json = serde_json::to_string(&ActPointer::Point { x: 0.0, y: 0.0 }).unwrap();
        assert_eq!(json, r#"{"mode":"point","x":0.0,"y":0.0}"#);
    }

    #[test]
    fn two_region_lookup() {
        let arcs = cross_section_arcs(0.0).unwrap();
        let out = act_outcome(&arcs, &ActPointer::angle(0.75 * PI)).unwrap();
        assert_eq!(out.label(), Some(OutcomePair::P10));
        let out = act_outcome(&arcs, &ActPointer::angle(0.25 * PI)).unwrap();
        assert_eq!(out.label(), Some(OutcomePair::P01));
    }

    #[test]
    fn arcs_never_miss() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in 0..4 {
            let arcs = cross_section_arcs(AngleSetting::delta_of(d)).unwrap();
            for _ in 0..2000 {
                let act = sample_act(PointerMode::Angle, &mut rng);
                assert_ne!(act_outcome(&arcs, &act).unwrap(), ActOutcome::Miss);
            }
        }
    }

    #[test]
    fn mode_mismatch() {
        let arcs = cross_section_arcs(0.3).unwrap();
        let grid = grid_partition(GridSpec::new(4, 2).unwrap()).unwrap();
        let p = ActPointer::Point { x: 0.0, y: 0.0 };
        assert_eq!(
            act_outcome(&arcs, &p),
            Err(Error::ModeMismatch {
                pointer: "point",
                partition: "arcs"
            })
        );
        assert_eq!(
            act_outcome(&grid, &ActPointer::angle(0.0)),
            Err(Error::ModeMismatch {
                pointer: "angle",
                partition: "grid"
            })
        );
        assert!(act_failure_experiment(ActPointer::angle(0.0), &coin_settings(), 40).is_err());
    }

    #[test]
    fn pebble_off_the_blocks_misses() {
        let spec = GridSpec::new(40, 30).unwrap();
        let grid = grid_partition(spec).unwrap();
        let c = spec.cell_size();
        let p = ActPointer::point(35.0 * c, 35.0 * c).unwrap();
        assert_eq!(act_outcome(&grid, &p).unwrap(), ActOutcome::Miss);
        let q = ActPointer::point(5.0 * c, 5.0 * c).unwrap();
        assert_eq!(act_outcome(&grid, &q).unwrap().label(), Some(OutcomePair::P01));
    }

    #[test]
    fn arcs_frequencies_follow_arc_length() {
        for delta in [FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8] {
            let arcs = cross_section_arcs(delta).unwrap();
            let st = act_statistics(&arcs, 100_000, 21, ActDomain::Disk).unwrap();
            let c = 2.0 * delta / PI;
            assert!((st.freq(Klass::Equal) - c).abs() < 3.0 * st.std_error(c));
            assert_eq!(st.misses, 0);
        }
    }

    #[test]
    fn diamonds_stay_chained_to_area() {
        let p = diamond_partition(FRAC_PI_8, 0.02).unwrap();
        let st = act_statistics(&p, 100_000, 22, ActDomain::Disk).unwrap();
        let f = st.freq(Klass::Equal);
        assert!((f - 0.25).abs() < 3.0 * st.std_error(0.25), "{f}");
        let p_star = prob_transition(FRAC_PI_8).unwrap().p_equal;
        assert!((f - p_star).abs() > 5.0 * st.std_error(p_star));
        assert_eq!(st.misses, 0);
    }

    #[test]
    fn constrained_pebbles_on_small_grid() {
        let grid = grid_partition(GridSpec::new(2, 1).unwrap()).unwrap();
        let st = act_statistics(&grid, 20_000, 23, ActDomain::Regions).unwrap();
        assert_eq!(st.misses, 0);
        assert!((st.freq(Klass::Equal) - 0.5).abs() < 3.0 * st.std_error(0.5));
        let free = act_statistics(&grid, 20_000, 23, ActDomain::Disk).unwrap();
        assert!(free.misses > 0);
    }

    #[test]
    fn statistics_are_seeded() {
        let arcs = cross_section_arcs(0.4).unwrap();
        let a = act_statistics(&arcs, 1001, 5, ActDomain::Disk).unwrap();
        let b = act_statistics(&arcs, 1001, 5, ActDomain::Disk).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>(), 1001);
        assert!(act_statistics(&arcs, 0, 5, ActDomain::Disk).is_err());
    }

    #[test]
    fn center_pebble_layout() {
        // The origin is the lower-left corner of the first (01) block, which
        // exists for every coin setting (m >= 1).
        let r = act_failure_experiment(ActPointer::Point { x: 0.0, y: 0.0 }, &coin_settings(), 40).unwrap();
        assert_eq!(r.misses, 0);
        assert!(r.settings.iter().all(|h| h.outcome.label() == Some(OutcomePair::P01)));
        let ms: Vec<u32> = r.settings.iter().map(|h| h.grid.unwrap().m).collect();
        assert_eq!(ms, vec![40, 28, 20, 12]);
    }

    #[test]
    fn grids_miss_and_arcs_do_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let settings = coin_settings();
        let mut grid_reports = Vec::new();
        let mut arc_reports = Vec::new();
        for _ in 0..1000 {
            let pebble = sample_act(PointerMode::Point, &mut rng);
            grid_reports.push(act_failure_experiment(pebble, &settings, 40).unwrap());
            arc_reports.push(act_failure_experiment_with(pebble, &settings, |s| cross_section_arcs(s.delta)).unwrap());
        }
        assert!(miss_fraction(&grid_reports) > 0.0);
        assert_eq!(miss_fraction(&arc_reports), 0.0);
    }

    #[test]
    fn hit_set_depends_on_setting() {
        // All-unequal layout (m = M) with Alice turned to 3pi/8 against the
        // all-equal layout (m = 0) with both splitters at rest.
        let unequal = AngleSetting::from_indices(3, 3, IndexMode::Free).unwrap();
        let equal = AngleSetting::from_indices(0, 4, IndexMode::Free).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let found = (0..10_000).find_map(|_| {
            let pebble = sample_act(PointerMode::Point, &mut rng);
            let r = act_failure_experiment(pebble, &[unequal, equal], 40).unwrap();
            let [u, e] = [&r.settings[0], &r.settings[1]];
            (u.outcome == ActOutcome::Miss && e.outcome != ActOutcome::Miss).then_some(r)
        });
        let r = found.expect("some pebble separates the two layouts");
        assert_eq!(r.settings[0].grid.unwrap().m, 40);
        assert_eq!(r.settings[1].grid.unwrap().m, 0);
        assert_eq!(r.settings[1].outcome.label().unwrap().klass(), Klass::Equal);
    }
}
