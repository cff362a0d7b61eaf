//! Small planar helpers: polygon areas, convex clipping and exact
//! polygon/disk intersection areas. All disks are centered at the origin.

pub type Point = [f64; 2];

pub const EPS: f64 = 1e-12;

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Signed shoelace area (positive for counter-clockwise vertex order).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() / 2.0
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

/// Crossing-number point-in-polygon test. Points within `EPS` of an edge
/// count as inside.
pub fn contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = sub(b, a);
        let ap = sub(p, a);
        let len2 = dot(ab, ab);
        if len2 > 0.0 {
            let t = (dot(ap, ab) / len2).clamp(0.0, 1.0);
            let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
            if norm(sub(p, q)) <= EPS {
                return true;
            }
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: Point| cross(sub(b, a), sub(p, a));
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let p = input[j];
            let q = input[(j + 1) % m];
            let sp = side(p);
            let sq = side(q);
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Area of the intersection of two convex polygons.
pub fn convex_overlap_area(a: &[Point], b: &[Point]) -> f64 {
    let mut clip = b.to_vec();
    if signed_area(&clip) < 0.0 {
        clip.reverse();
    }
    area(&clip_convex(a, &clip))
}

/// Parameters `t in (0,1)` where segment `p -> q` crosses the circle of
/// radius `r`, in increasing order.
pub fn segment_circle_crossings(p: Point, q: Point, r: f64) -> Vec<f64> {
    let d = sub(q, p);
    let a = dot(d, d);
    if a == 0.0 {
        return Vec::new();
    }
    let b = 2.0 * dot(p, d);
    let c = dot(p, p) - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let mut ts: Vec<f64> = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
        .into_iter()
        .filter(|t| *t > EPS && *t < 1.0 - EPS)
        .collect();
    ts.sort_by(f64::total_cmp);
    ts
}

/// Signed area of triangle `(0, p, q)` intersected with the disk of radius `r`.
fn triangle_disk_area(p: Point, q: Point, r: f64) -> f64 {
    let mut pts = vec![p];
    for t in segment_circle_crossings(p, q, r) {
        pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
    }
    pts.push(q);
    pts.windows(2)
        .map(|w| {
            let (u, v) = (w[0], w[1]);
            let mid = [(u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0];
            if norm(mid) <= r {
                cross(u, v) / 2.0
            } else {
                r * r * cross(u, v).atan2(dot(u, v)) / 2.0
            }
        })
        .sum()
}

/// Exact area of a simple polygon intersected with the disk of radius `r`.
pub fn polygon_disk_area(poly: &[Point], r: f64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| triangle_disk_area(poly[i], poly[(i + 1) % n], r))
        .sum::<f64>()
        .abs()
}

/// Boundary of `convex ∩ disk(r)` as a polygon. Arc stretches are sampled
/// every `max_step` radians, so all vertices lie within the closed disk.
pub fn clip_convex_to_disk(poly: &[Point], r: f64, max_step: f64) -> Vec<Point> {
    // Walk the polygon, keep inside vertices and crossing points, and record
    // where the boundary leaves the disk so the arc can be filled in.
    let n = poly.len();
    let inside = |p: Point| norm(p) <= r * (1.0 + EPS);
    let mut out: Vec<(Point, bool)> = Vec::new(); // (point, boundary leaves the disk after it)
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let p_in = inside(p);
        if p_in {
            out.push((p, false));
        }
        let mut state = p_in;
        for t in segment_circle_crossings(p, q, r) {
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            state = !state;
            out.push((x, !state));
        }
        if state && !inside(q) {
            // exit too close to an endpoint to register as a crossing
            if let Some(last) = out.last_mut() {
                last.1 = true;
            }
        }
    }
    if out.is_empty() {
        return Vec::new();
    }
    let mut result = Vec::with_capacity(out.len() * 2);
    let m = out.len();
    for j in 0..m {
        let (p, leaves) = out[j];
        result.push(p);
        if leaves {
            let (q, _) = out[(j + 1) % m];
            let a0 = p[1].atan2(p[0]);
            let mut a1 = q[1].atan2(q[0]);
            while a1 <= a0 {
                a1 += std::f64::consts::TAU;
            }
            if a1 - a0 >= std::f64::consts::TAU - EPS {
                continue;
            }
            let steps = ((a1 - a0) / max_step).ceil() as usize;
            for s in 1..steps {
                let a = a0 + (a1 - a0) * s as f64 / steps as f64;
                result.push([r * a.cos(), r * a.sin()]);
            }
        }
    }
    result
}
