//! Deterministic SVG output for cross-sections and probability curves.
//!
//! Coordinates are printed with fixed precision so a given input always
//! yields the same bytes.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;

use serde::Serialize;

use crate::actualization::ActPointer;
use crate::angle::OutcomePair;
use crate::bell::BellReport;
use crate::partition::{Geometry, Partition, DISK_RADIUS};
use crate::probability::{curves_csv, CurveRow};

const SIZE: f64 = 400.0;
const DISK_PX: f64 = 180.0;

pub fn pair_color(pair: OutcomePair) -> &'static str {
    match pair {
        OutcomePair::P00 => "#1f6fd1",
        OutcomePair::P01 => "#e8a33d",
        OutcomePair::P10 => "#c8453b",
        OutcomePair::P11 => "#00ff00",
    }
}

fn model_color(model: &str) -> &'static str {
    match model {
        "classical_C" => "#000000",
        "quantum_P" => "#d62728",
        "transition_Pstar" => "#2ca02c",
        _ => "#9467bd",
    }
}

#[derive(Serialize)]
struct CrossSectionMeta<'a> {
    schema: u32,
    kind: &'a str,
    delta: f64,
    regions: usize,
    counts: BTreeMap<&'static str, u64>,
    equal: u64,
    unequal: u64,
}

fn to_px(p: [f64; 2]) -> (f64, f64) {
    let k = DISK_PX / DISK_RADIUS;
    (SIZE / 2.0 + p[0] * k, SIZE / 2.0 - p[1] * k)
}

/// One shape per region, filled by label. Boundary cells get a dashed
/// stroke. World counts are embedded as JSON in `<metadata>`.
pub fn render_cross_section(partition: &Partition, pointer: Option<&ActPointer>) -> String {
    let wc = partition.world_counts();
    let meta = CrossSectionMeta {
        schema: 1,
        kind: partition.kind.name(),
        delta: partition.delta,
        regions: partition.regions.len(),
        counts: OutcomePair::ALL.iter().map(|p| (p.as_str(), wc.get(*p))).collect(),
        equal: wc.equal(),
        unequal: wc.unequal(),
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        "<metadata>{}</metadata>",
        serde_json::to_string(&meta).expect("metadata serializes")
    );
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let c = SIZE / 2.0;
    let _ = writeln!(
        s,
        r##"<circle cx="{c}" cy="{c}" r="{DISK_PX}" fill="#f4f4f4" stroke="#888888"/>"##
    );
    for (i, region) in partition.regions.iter().enumerate() {
        let fill = pair_color(region.label);
        match &region.geometry {
            Geometry::Arc { start, end } => {
                let (x0, y0) = to_px([DISK_RADIUS * start.cos(), DISK_RADIUS * start.sin()]);
                let (x1, y1) = to_px([DISK_RADIUS * end.cos(), DISK_RADIUS * end.sin()]);
                let large = u8::from(end - start > TAU / 2.0);
                let _ = writeln!(
                    s,
                    r#"<path class="region" data-index="{i}" data-label="{}" d="M{x0:.3},{y0:.3} A{DISK_PX},{DISK_PX} 0 {large} 0 {x1:.3},{y1:.3}" fill="none" stroke="{fill}" stroke-width="14"/>"#,
                    region.label
                );
            }
            Geometry::Polygon { vertices } => {
                let points: Vec<String> = vertices
                    .iter()
                    .map(|v| {
                        let (x, y) = to_px(*v);
                        format!("{x:.3},{y:.3}")
                    })
                    .collect();
                let stroke = if region.boundary {
                    r##"stroke="#555555" stroke-dasharray="2,1""##
                } else {
                    r##"stroke="#222222""##
                };
                let _ = writeln!(
                    s,
                    r#"<polygon class="{}" data-index="{i}" data-label="{}" points="{}" fill="{fill}" {stroke} stroke-width="0.3"/>"#,
                    if region.boundary { "region boundary" } else { "region" },
                    region.label,
                    points.join(" ")
                );
            }
        }
    }
    match pointer {
        Some(ActPointer::Angle { angle }) => {
            let (x, y) = to_px([DISK_RADIUS * angle.cos(), DISK_RADIUS * angle.sin()]);
            let _ = writeln!(
                s,
                r##"<line class="act" x1="{c}" y1="{c}" x2="{x:.3}" y2="{y:.3}" stroke="#000000" stroke-width="2"/>"##
            );
        }
        Some(ActPointer::Point { x, y }) => {
            let (px, py) = to_px([*x, *y]);
            let _ = writeln!(
                s,
                r##"<circle class="act" cx="{px:.3}" cy="{py:.3}" r="4" fill="#ffffff" stroke="#000000" stroke-width="1.5"/>"##
            );
        }
        None => {}
    }
    s.push_str("</svg>\n");
    s
}

/// A curve plot and its CSV twin.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePlot {
    pub svg: String,
    /// `delta,model,pE,pU` rows of every curve.
    pub csv: String,
    /// `source,label,d,class,value` rows of the bars; header only without
    /// reports.
    pub bars_csv: String,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn plot_xy(delta: f64, p: f64) -> (f64, f64) {
    let x = MARGIN + delta / FRAC_PI_2 * (PLOT_W - 2.0 * MARGIN);
    let y = PLOT_H - MARGIN - p * (PLOT_H - 2.0 * MARGIN);
    (x, y)
}

/// `p(E)` against `delta` for every model in `rows`, plus the three terms of
/// each report as bars at `delta = d pi/8`.
pub fn render_curves(rows: &[CurveRow], reports: &[BellReport]) -> CurvePlot {
    let mut by_model: BTreeMap<&str, Vec<&CurveRow>> = BTreeMap::new();
    for r in rows {
        by_model.entry(r.model.as_str()).or_default().push(r);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(s, r##"<rect width="{PLOT_W}" height="{PLOT_H}" fill="#ffffff"/>"##);
    let (x0, y0) = plot_xy(0.0, 0.0);
    let (x1, y1) = plot_xy(FRAC_PI_2, 1.0);
    let _ = writeln!(
        s,
        r##"<path class="axes" d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="#000000"/>"##
    );
    for d in 0..=4u32 {
        let (x, y) = plot_xy(f64::from(d) * FRAC_PI_2 / 4.0, 0.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{d}&#960;/8</text>"#,
            y + 16.0
        );
    }
    let bar_w = 18.0;
    let mut bars = csv::Writer::from_writer(Vec::new());
    bars.write_record(["source", "label", "d", "class", "value"])
        .expect("in-memory write");
    for (k, report) in reports.iter().enumerate() {
        let chart = report.bar_chart();
        for bar in &chart.bars {
            let (x, y) = plot_xy(f64::from(bar.d) * FRAC_PI_2 / 4.0, bar.value);
            let x = x - bar_w * reports.len() as f64 / 2.0 + bar_w * k as f64;
            let _ = writeln!(
                s,
                r##"<rect class="bar" data-source="{}" data-label="{}" x="{x:.2}" y="{y:.2}" width="{bar_w}" height="{:.2}" fill="#3a62c9" fill-opacity="0.6"/>"##,
                chart.source,
                bar.label,
                y0 - y
            );
            bars.write_record([
                chart.source.clone(),
                bar.label.clone(),
                bar.d.to_string(),
                bar.klass.to_string(),
                format!("{:.12}", bar.value),
            ])
            .expect("in-memory write");
        }
        // inequality bound: the first bar may not exceed the sum of the others
        let (bx, by) = plot_xy(FRAC_PI_2 / 4.0, chart.rhs.min(1.0));
        let _ = writeln!(
            s,
            r##"<line class="bound" x1="{:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="#000000" stroke-dasharray="4,2"/>"##,
            bx - 20.0,
            bx + 20.0
        );
    }
    for (model, pts) in &by_model {
        let points: Vec<String> = pts
            .iter()
            .map(|r| {
                let (x, y) = plot_xy(r.delta, r.p_equal);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-model="{model}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points.join(" "),
            model_color(model)
        );
    }
    s.push_str("</svg>\n");
    CurvePlot {
        svg: s,
        csv: curves_csv(rows),
        bars_csv: String::from_utf8(bars.into_inner().expect("flush")).expect("utf8"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actualization::ActPointer;
    use crate::bell::bell_terms;
    use crate::partition::{cross_section_arcs, diamond_partition, grid_partition, GridSpec};
    use crate::probability::{curve_table, delta_grid, Model};
    use std::f64::consts::FRAC_PI_8;

    fn metadata(svg: &str) -> serde_json::Value {
        let start = svg.find("<metadata>").unwrap() + "<metadata>".len();
        let end = svg.find("</metadata>").unwrap();
        serde_json::from_str(&svg[start..end]).unwrap()
    }

    #[test]
    fn arcs_at_zero_are_two_bands() {
        let p = cross_section_arcs(0.0).unwrap();
        let svg = render_cross_section(&p, None);
        assert_eq!(svg.matches(r#"class="region""#).count(), p.regions.len());
        let labels: std::collections::BTreeSet<&str> = p.regions.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["01", "10"].into());
        let m = metadata(&svg);
        assert_eq!(m["kind"], "arcs");
    }

    #[test]
    fn grid_metadata_counts() {
        let p = grid_partition(GridSpec::new(40, 30).unwrap()).unwrap();
        let svg = render_cross_section(&p, Some(&ActPointer::Point { x: 0.1, y: 0.0 }));
        let m = metadata(&svg);
        assert_eq!(m["unequal"], 3600);
        assert_eq!(m["equal"], 400);
        assert_eq!(svg.matches("<polygon").count(), 4000);
        assert!(svg.contains(r##"fill="#00ff00""##));
        assert_eq!(svg.matches(r#"class="act""#).count(), 1);
    }

    #[test]
    fn diamond_boundary_stroke() {
        let p = diamond_partition(FRAC_PI_8, 0.05).unwrap();
        let svg = render_cross_section(&p, None);
        let boundary = p.regions.iter().filter(|r| r.boundary).count();
        assert!(boundary > 0);
        assert_eq!(svg.matches(r#"class="region boundary""#).count(), boundary);
        assert_eq!(svg.matches("stroke-dasharray").count(), boundary);
        assert_eq!(svg, render_cross_section(&p, None));
    }

    #[test]
    fn curves_agree_at_quarter_turns() {
        let deltas = delta_grid(91);
        let mut rows = Vec::new();
        for m in [Model::Classical, Model::Quantum, Model::Transition] {
            rows.extend(curve_table(m, &deltas).unwrap());
        }
        let plot = render_curves(&rows, &[]);
        let mut rd = csv::Reader::from_reader(plot.csv.as_bytes());
        let mut pe: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for rec in rd.records() {
            let rec = rec.unwrap();
            pe.entry(rec[1].to_string()).or_default().push(rec[2].parse().unwrap());
        }
        let (c, p, t) = (&pe["classical_C"], &pe["quantum_P"], &pe["transition_Pstar"]);
        let agree: Vec<usize> = (0..91)
            .filter(|&i| (c[i] - p[i]).abs() < 1e-9 && (c[i] - t[i]).abs() < 1e-9)
            .collect();
        assert_eq!(agree, vec![0, 45, 90]);
        assert_eq!(plot.svg.matches("<polyline").count(), 3);
        assert_eq!(plot.bars_csv, "source,label,d,class,value\n");
    }

    #[test]
    fn quantum_bars() {
        let plot = render_curves(&[], &[bell_terms(&Model::Quantum)]);
        let vals: Vec<f64> = plot
            .bars_csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        let expected = [0.8536, 0.5, 0.1464];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 5e-5);
        }
        assert_eq!(plot.svg.matches(r#"class="bar""#).count(), 3);
        assert_eq!(plot.csv, "delta,model,pE,pU\n");
    }
}
