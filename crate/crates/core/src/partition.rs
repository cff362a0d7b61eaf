//! Cross-section partitions of the probability cylinder.
//!
//! The cylinder has unit circumference, so its cross-section is a disk of
//! radius `1/(2pi)`. Three partitions live on that disk:
//!
//! * **arcs**: the circumference cut by both observers' wire crosses into
//!   eight wedges. Arc length is the classical probability of the wedge.
//! * **diamonds**: every wedge further cut by closely spaced wires into
//!   parallelogram cells, one world per cell.
//! * **grid**: square blocks of unit cells whose counts realise `tan^2`
//!   ratios. The blocks do not fill the disk.
//!
//! All partitions are built in Alice's frame: her splitter axis is the
//! positive x axis. Areas are reported multiplied by `4pi` so the whole disk
//! has measure 1.
//!
//! Labeling convention: a point at polar angle `theta` has `A = 0` when
//! `theta mod pi` lies in `[0, pi/2)` and `B = 0` when
//! `(theta - pi/2 - delta) mod pi` lies in `[0, pi/2)`. At `delta = 0` Bob's
//! 0-quadrants coincide with Alice's 1-quadrants, so only unequal outcomes
//! occur there.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::angle::OutcomePair;
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Radius of the cross-section of a unit-circumference cylinder.
pub const DISK_RADIUS: f64 = 1.0 / TAU;

/// Factor turning a cross-section area into a normalized measure.
pub const AREA_NORMALIZATION: f64 = 4.0 * PI;

/// Angular step used when sampling circle arcs into polygon vertices.
const ARC_STEP: f64 = PI / 180.0;

/// Length unit of wire spacings: lengths in the normalized picture (disk of
/// unit area) are `sqrt(4pi)` times the physical ones.
fn physical_length(normalized: f64) -> f64 {
    normalized / AREA_NORMALIZATION.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Arcs,
    Diamonds,
    Grid,
}

impl PartitionKind {
    pub fn name(self) -> &'static str {
        match self {
            PartitionKind::Arcs => "arcs",
            PartitionKind::Diamonds => "diamonds",
            PartitionKind::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geometry {
    /// Polar-angle interval `[start, end)`, `end` may exceed `2pi` on wrap.
    Arc { start: f64, end: f64 },
    /// Counter-clockwise vertex list in the cross-section plane.
    Polygon { vertices: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: OutcomePair,
    pub geometry: Geometry,
    /// Arc length (arcs) or normalized area (diamonds, grid).
    pub measure: f64,
    /// Cell cut by the disk edge.
    #[serde(default, skip_serializing_if = "is_false")]
    pub boundary: bool,
    /// Whether the cell counts as a world.
    pub counted: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// `M` directions per quadrant, `m` steps along Alice's axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "M")]
    pub big_m: u32,
    pub m: u32,
}

impl GridSpec {
    pub fn new(big_m: u32, m: u32) -> Result<Self> {
        if big_m == 0 || m > big_m {
            return Err(Error::InvalidGrid { big_m, m });
        }
        Ok(Self { big_m, m })
    }

    /// Nearest `m` with `(M - m)/m = tan|delta|`.
    pub fn for_delta(big_m: u32, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let t = delta.abs().tan();
        let m = if delta.abs() >= FRAC_PI_2 - 1e-12 {
            0
        } else {
            (f64::from(big_m) / (1.0 + t)).round() as u32
        };
        Self::new(big_m, m)
    }

    /// `M - m`.
    pub fn n(&self) -> u32 {
        self.big_m - self.m
    }

    /// Relative angle realised by the grid, `atan((M - m)/m)`.
    pub fn delta(&self) -> f64 {
        f64::from(self.n()).atan2(f64::from(self.m))
    }

    /// World counts `(N(E), N(U))`: `4(M-m)^2` and `4m^2`.
    pub fn counts(&self) -> (u64, u64) {
        let n = u64::from(self.n());
        let m = u64::from(self.m);
        (4 * n * n, 4 * m * m)
    }

    /// Edge length of one unit cell; the layout for any `m` fits the disk.
    pub fn cell_size(&self) -> f64 {
        DISK_RADIUS / (f64::from(self.big_m) * std::f64::consts::SQRT_2)
    }
}

/// World counts read off a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldCounts {
    pub per_pair: [u64; 4],
}

impl WorldCounts {
    pub fn equal(&self) -> u64 {
        self.per_pair[OutcomePair::P00.index()] + self.per_pair[OutcomePair::P11.index()]
    }

    pub fn unequal(&self) -> u64 {
        self.per_pair[OutcomePair::P01.index()] + self.per_pair[OutcomePair::P10.index()]
    }

    pub fn get(&self, pair: OutcomePair) -> u64 {
        self.per_pair[pair.index()]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    pub schema: u32,
    pub kind: PartitionKind,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub disk_radius: f64,
    pub regions: Vec<Region>,
    pub normalization: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip)]
    locator: Locator,
}

#[derive(Debug, Clone)]
enum Locator {
    Arcs {
        /// Sorted wedge start angles in `[0, 2pi)`, one per region.
        starts: Vec<f64>,
    },
    Diamonds {
        wedges: Vec<WedgeLattice>,
    },
    Grid {
        cell: f64,
        blocks: Vec<Block>,
    },
}

#[derive(Debug, Clone)]
struct WedgeLattice {
    start: f64,
    width: f64,
    e1: Point,
    e2: Point,
    side: f64,
    /// `(first region index, columns)` per lattice row.
    rows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Block {
    label: OutcomePair,
    x0: i64,
    y0: i64,
    side: i64,
    first: usize,
}

impl Partition {
    pub fn world_counts(&self) -> WorldCounts {
        let mut c = WorldCounts::default();
        for r in self.regions.iter().filter(|r| r.counted) {
            c.per_pair[r.label.index()] += 1;
        }
        c
    }

    /// Counts restricted to cells lying entirely inside the disk.
    pub fn full_cell_counts(&self) -> WorldCounts {
        let mut c = WorldCounts::default();
        for r in self.regions.iter().filter(|r| !r.boundary) {
            c.per_pair[r.label.index()] += 1;
        }
        c
    }

    /// Total measure per outcome pair.
    pub fn measure_by_pair(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for r in &self.regions {
            m[r.label.index()] += r.measure;
        }
        m
    }

    /// Index of the region containing polar angle `theta` (arcs only).
    pub fn region_at_angle(&self, theta: f64) -> Option<usize> {
        match &self.locator {
            Locator::Arcs { starts } => {
                let t = theta.rem_euclid(TAU);
                let i = starts.partition_point(|s| *s <= t);
                Some(if i == 0 { starts.len() - 1 } else { i - 1 })
            }
            _ => None,
        }
    }

    /// Index of the region containing `p`; `None` outside every region.
    /// Points on shared edges go to the region with the lower lattice index.
    pub fn region_at_point(&self, p: Point) -> Option<usize> {
        if geometry::norm(p) > DISK_RADIUS * (1.0 + geometry::EPS) {
            return None;
        }
        match &self.locator {
            Locator::Arcs { .. } => self.region_at_angle(p[1].atan2(p[0])),
            Locator::Diamonds { wedges } => {
                let theta = p[1].atan2(p[0]).rem_euclid(TAU);
                let w = wedges.iter().find(|w| {
                    let off = (theta - w.start).rem_euclid(TAU);
                    off < w.width || (TAU - off) < geometry::EPS
                })?;
                let det = geometry::cross(w.e1, w.e2);
                let u = (geometry::cross(p, w.e2) / det).max(0.0);
                let v = (geometry::cross(w.e1, p) / det).max(0.0);
                let k = (u / w.side).floor() as usize;
                let l = (v / w.side).floor() as usize;
                // Rounding at the disk edge can land one row or column past
                // the stored cells; clamp back onto the nearest one.
                let k = k.min(w.rows.len().checked_sub(1)?);
                let (first, cols) = w.rows[k];
                if cols == 0 {
                    return None;
                }
                Some(first + l.min(cols - 1))
            }
            Locator::Grid { cell, blocks } => {
                let gx = p[0] / cell;
                let gy = p[1] / cell;
                blocks.iter().find_map(|b| {
                    let lx = gx - b.x0 as f64;
                    let ly = gy - b.y0 as f64;
                    let side = b.side as f64;
                    if (0.0..=side).contains(&lx) && (0.0..=side).contains(&ly) {
                        let ix = (lx.floor() as i64).min(b.side - 1) as usize;
                        let iy = (ly.floor() as i64).min(b.side - 1) as usize;
                        Some(b.first + iy * b.side as usize + ix)
                    } else {
                        None
                    }
                })
            }
        }
    }

    /// Linear scan with point-in-polygon tests; independent of the lattice
    /// arithmetic in [`Partition::region_at_point`].
    pub fn region_at_point_scan(&self, p: Point) -> Option<usize> {
        self.regions.iter().position(|r| match &r.geometry {
            Geometry::Polygon { vertices } => geometry::contains(vertices, p),
            Geometry::Arc { start, end } => {
                let t = p[1].atan2(p[0]).rem_euclid(TAU);
                geometry::norm(p) <= DISK_RADIUS && ((t >= *start && t < *end) || (t + TAU >= *start && t + TAU < *end))
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta.abs() > FRAC_PI_2 + 1e-12 {
        return Err(Error::AngleOutOfDomain(delta));
    }
    Ok(())
}

/// Outcome pair owning polar angle `theta` under the labeling convention.
pub fn label_at_angle(theta: f64, delta: f64) -> OutcomePair {
    let alice = u8::from(theta.rem_euclid(PI) >= FRAC_PI_2);
    let bob = u8::from((theta - FRAC_PI_2 - delta).rem_euclid(PI) >= FRAC_PI_2);
    OutcomePair::from_bits(alice, bob).expect("bits")
}

/// Wedges `(start, width, label)` cut by both wire crosses, sorted by start.
fn wedges(delta: f64) -> Vec<(f64, f64, OutcomePair)> {
    let mut cuts: Vec<f64> = (0..4)
        .flat_map(|k| {
            let q = f64::from(k) * FRAC_PI_2;
            [q, (q + delta).rem_euclid(TAU)]
        })
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < geometry::EPS);
    if cuts.len() > 1 && (cuts[0] + TAU - cuts[cuts.len() - 1]).abs() < geometry::EPS {
        cuts.pop();
    }
    let n = cuts.len();
    (0..n)
        .map(|i| {
            let start = cuts[i];
            let end = if i + 1 < n { cuts[i + 1] } else { cuts[0] + TAU };
            let width = end - start;
            (start, width, label_at_angle(start + width / 2.0, delta))
        })
        .collect()
}

/// Circumference partition: arcs of total length 1.
pub fn cross_section_arcs(delta: f64) -> Result<Partition> {
    check_delta(delta)?;
    let ws = wedges(delta);
    let regions: Vec<Region> = ws
        .iter()
        .map(|&(start, width, label)| Region {
            label,
            geometry: Geometry::Arc {
                start,
                end: start + width,
            },
            measure: width / TAU,
            boundary: false,
            counted: true,
        })
        .collect();
    let normalization = regions.iter().map(|r| r.measure).sum();
    Ok(Partition {
        schema: 1,
        kind: PartitionKind::Arcs,
        delta,
        spacing: None,
        grid: None,
        disk_radius: DISK_RADIUS,
        regions,
        normalization,
        warning: None,
        locator: Locator::Arcs {
            starts: ws.iter().map(|w| w.0).collect(),
        },
    })
}

/// Diamond-cell partition with wire spacing `s` (normalized units).
///
/// Each wedge is cut by two wire families running parallel to its bounding
/// rays, so its cells are parallelograms of normalized area `s^2/sin(phi)`
/// for wedge opening `phi`: `s^2/sin|delta|` in equal wedges and
/// `s^2/cos(delta)` in unequal ones. Cells cut by the disk edge are kept as
/// clipped regions with `boundary = true`; such a cell counts as a world when
/// the centroid of its uncut parallelogram lies in the disk.
pub fn diamond_partition(delta: f64, s: f64) -> Result<Partition> {
    check_delta(delta)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidSpacing(s));
    }
    let spacing = physical_length(s);
    let r = DISK_RADIUS;
    let mut regions = Vec::new();
    let mut lattices = Vec::new();
    for (start, width, label) in wedges(delta) {
        let e1 = [start.cos(), start.sin()];
        let e2 = [(start + width).cos(), (start + width).sin()];
        let side = spacing / width.sin();
        let at = |u: f64, v: f64| -> Point { [side * (u * e1[0] + v * e2[0]), side * (u * e1[1] + v * e2[1])] };
        let cell_measure = s * s / width.sin();
        let mut rows = Vec::new();
        let mut k = 0usize;
        loop {
            let mut cols = 0usize;
            while geometry::norm(at(k as f64, cols as f64)) < r {
                cols += 1;
            }
            if cols == 0 {
                break;
            }
            rows.push((regions.len(), cols));
            for l in 0..cols {
                let (u, v) = (k as f64, l as f64);
                let corners = [at(u, v), at(u + 1.0, v), at(u + 1.0, v + 1.0), at(u, v + 1.0)];
                let inside = geometry::norm(corners[2]) <= r * (1.0 + geometry::EPS);
                let counted = geometry::norm(at(u + 0.5, v + 0.5)) <= r;
                let (vertices, measure) = if inside {
                    (corners.to_vec(), cell_measure)
                } else {
                    (
                        geometry::clip_convex_to_disk(&corners, r, ARC_STEP),
                        geometry::polygon_disk_area(&corners, r) * AREA_NORMALIZATION,
                    )
                };
                regions.push(Region {
                    label,
                    geometry: Geometry::Polygon { vertices },
                    measure,
                    boundary: !inside,
                    counted,
                });
            }
            k += 1;
        }
        lattices.push(WedgeLattice {
            start,
            width,
            e1,
            e2,
            side,
            rows,
        });
    }
    let mut warning = None;
    if regions.iter().all(|r| r.boundary) {
        warning = Some(format!("spacing s={s} too large for a single full cell"));
        for r in &mut regions {
            r.counted = false;
        }
    }
    let normalization = regions.iter().map(|r| r.measure).sum();
    Ok(Partition {
        schema: 1,
        kind: PartitionKind::Diamonds,
        delta,
        spacing: Some(s),
        grid: None,
        disk_radius: DISK_RADIUS,
        regions,
        normalization,
        warning,
        locator: Locator::Diamonds { wedges: lattices },
    })
}

/// Closed-form diamond counts `(N(E), N(U))` for spacing `s`.
pub fn counts_eq5(delta: f64, s: f64) -> (f64, f64) {
    let d = delta.abs();
    let c_equal = 2.0 * d / PI;
    (c_equal * d.sin() / (s * s), (1.0 - c_equal) * delta.cos() / (s * s))
}

/// Grid-model layout.
///
/// Unit cells of edge [`GridSpec::cell_size`], grouped in eight square
/// blocks so opposite blocks share a label. Unequal blocks have side `m` and
/// fill the square `[-m, m]^2` around the center, split by the axes. Equal
/// blocks have side `M - m` and sit above and below it, split by the y axis.
/// Only counts are meaningful; the layout is one rendering of them.
pub fn grid_partition(spec: GridSpec) -> Result<Partition> {
    let spec = GridSpec::new(spec.big_m, spec.m)?;
    let m = i64::from(spec.m);
    let n = i64::from(spec.n());
    let cell = spec.cell_size();
    let layout = [
        (OutcomePair::P01, 0, 0, m),
        (OutcomePair::P10, 0, -m, m),
        (OutcomePair::P01, -m, -m, m),
        (OutcomePair::P10, -m, 0, m),
        (OutcomePair::P00, -n, m, n),
        (OutcomePair::P11, 0, m, n),
        (OutcomePair::P00, 0, -m - n, n),
        (OutcomePair::P11, -n, -m - n, n),
    ];
    let measure = cell * cell * AREA_NORMALIZATION;
    let mut regions = Vec::new();
    let mut blocks = Vec::new();
    for (label, x0, y0, side) in layout {
        if side == 0 {
            continue;
        }
        blocks.push(Block {
            label,
            x0,
            y0,
            side,
            first: regions.len(),
        });
        for iy in 0..side {
            for ix in 0..side {
                let x = (x0 + ix) as f64 * cell;
                let y = (y0 + iy) as f64 * cell;
                regions.push(Region {
                    label,
                    geometry: Geometry::Polygon {
                        vertices: vec![[x, y], [x + cell, y], [x + cell, y + cell], [x, y + cell]],
                    },
                    measure,
                    boundary: false,
                    counted: true,
                });
            }
        }
    }
    debug_assert!(blocks.iter().all(|b| regions[b.first].label == b.label));
    let normalization = regions.iter().map(|r| r.measure).sum();
    Ok(Partition {
        schema: 1,
        kind: PartitionKind::Grid,
        delta: spec.delta(),
        spacing: None,
        grid: Some(spec),
        disk_radius: DISK_RADIUS,
        regions,
        normalization,
        warning: None,
        locator: Locator::Grid { cell, blocks },
    })
}
