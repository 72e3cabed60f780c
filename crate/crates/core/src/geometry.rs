//! Planar domains: shape catalog, boundary description and metric queries.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spacing of the polyline that stands in for smooth boundaries.
pub const POLYLINE_SPACING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Shape descriptor. Serialized as a JSON object tagged by `"shape"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Disk of the given radius centred at the origin.
    Disk { radius: f64 },
    /// Ellipse with semi-axes `a` (along x) and `b`, centred at the origin.
    Ellipse { a: f64, b: f64 },
    /// Axis-aligned rectangle `[0, b1] x [0, b2]`.
    Rectangle { b1: f64, b2: f64 },
    /// Regular polygon centred at the origin with a horizontal bottom edge.
    RegularPolygon { sides: usize, circumradius: f64 },
    /// Triangle with `side` on the x-axis from the origin and the given
    /// interior angles at its two ends.
    Triangle { side: f64, angle1: f64, angle2: f64 },
    /// Simple polygon, counterclockwise vertex list.
    Polygon { vertices: Vec<Point> },
    /// Koch prefractal grown outward from an equilateral triangle.
    Koch { generation: u32, side: f64 },
    /// Star-shaped domain `r < 1 + gamma cos(mode theta)`.
    DeformedDisk { gamma: f64, mode: u32 },
}

impl DomainSpec {
    pub fn square(side: f64) -> Self {
        DomainSpec::Rectangle { b1: side, b2: side }
    }

    /// Octagon with interior angles, in traversal order,
    /// `(pi/12, pi/12, pi/4, pi/4, 1.9064, 2.7224, r, r)` and area 2, where
    /// both reflex angles `r` take whatever value closes the polygon. Side
    /// lengths maximize the clearance between each vertex and the edges not
    /// incident to it, so that corner modes stay apart at large `p`.
    pub fn mixed_angle_octagon() -> Self {
        const V: [[f64; 2]; 8] = [
            [0.0, 0.0],
            [1.5382508509, 0.0],
            [-1.2672873349, 0.7517416912],
            [0.2379137037, -1.8553429832],
            [0.5888391096, -0.5456715386],
            [-0.2008806444, -0.008400596],
            [-0.7417632484, 0.0890238697],
            [0.5308599672, 0.1422434995],
        ];
        // Rebuild from exact headings so the acute angles hold to machine
        // precision rather than to the 8 digits stored above. Edge i runs
        // from vertex i to i + 1; alpha[i] is the angle at vertex i.
        let alpha = [PI / 12.0, PI / 12.0, PI / 4.0, PI / 4.0, 1.9064, 2.7224];
        let reflex = (6.0 * PI - alpha.iter().sum::<f64>()) / 2.0;
        let dir = |t: f64| Point::new(t.cos(), t.sin());
        let mut heading = 0.0f64;
        let mut pts = vec![Point::from(V[0])];
        for i in 0..6 {
            let len = Point::from(V[i + 1]).dist(Point::from(V[i]));
            let last = pts[i];
            pts.push(last + dir(heading).scale(len));
            let next_angle = if i + 1 < 6 { alpha[i + 1] } else { reflex };
            heading += PI - next_angle;
        }
        // Close with the two reflex edges: v6 + s d6 + t d7 = v0.
        let d6 = dir(heading);
        let d7 = dir(heading + PI - reflex);
        let s = (pts[0] - pts[6]).cross(d7) / d6.cross(d7);
        pts.push(pts[6] + d6.scale(s));
        DomainSpec::Polygon { vertices: pts }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDomain(m));
        let pos = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            DomainSpec::Disk { radius } => pos("radius", *radius),
            DomainSpec::Ellipse { a, b } => pos("a", *a).and(pos("b", *b)),
            DomainSpec::Rectangle { b1, b2 } => pos("b1", *b1).and(pos("b2", *b2)),
            DomainSpec::RegularPolygon { sides, circumradius } => {
                if *sides < 3 {
                    return bad(format!("regular polygon needs >= 3 sides, got {sides}"));
                }
                pos("circumradius", *circumradius)
            }
            DomainSpec::Triangle { side, angle1, angle2 } => {
                pos("side", *side)?;
                pos("angle1", *angle1)?;
                pos("angle2", *angle2)?;
                if angle1 + angle2 >= PI {
                    return bad(format!("triangle angles sum to {} >= pi", angle1 + angle2));
                }
                Ok(())
            }
            DomainSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return bad(format!("polygon needs >= 3 vertices, got {}", vertices.len()));
                }
                if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
                    return bad("non-finite vertex".into());
                }
                Ok(())
            }
            DomainSpec::Koch { side, .. } => pos("side", *side),
            DomainSpec::DeformedDisk { gamma, .. } => {
                if !(gamma.is_finite() && gamma.abs() < 1.0) {
                    return bad(format!("deformed disk needs |gamma| < 1, got {gamma}"));
                }
                Ok(())
            }
        }
    }
}

/// Parses shorthand specs such as `disk:R=1`, `rect:b1=1,b2=2`,
/// `ngon:N=5,r=1`, `triangle:side=2,a1=pi/12,a2=pi/3`, `koch:g=1,side=2`,
/// `deformed:gamma=0.02,m=5`, `square:side=2`, `ellipse:a=2,b=1`,
/// `octagon` and `poly:file=path.json`.
impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidDomain(format!("bad domain JSON: {e}")));
        }
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for part in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidDomain(format!("expected key=value, got `{part}`")))?;
            kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let raw = |keys: &[&str]| -> Option<&str> {
            kv.iter().find(|(k, _)| keys.contains(&k.as_str())).map(|(_, v)| v.as_str())
        };
        let num = |keys: &[&str], default: Option<f64>| -> Result<f64> {
            match raw(keys) {
                Some(v) => parse_real(v),
                None => default.ok_or_else(|| Error::InvalidDomain(format!("`{kind}` needs `{}`", keys[0]))),
            }
        };
        let spec = match kind.to_ascii_lowercase().as_str() {
            "disk" | "circle" => DomainSpec::Disk { radius: num(&["r", "radius"], Some(1.0))? },
            "ellipse" => DomainSpec::Ellipse { a: num(&["a"], None)?, b: num(&["b"], None)? },
            "rect" | "rectangle" => DomainSpec::Rectangle { b1: num(&["b1"], None)?, b2: num(&["b2"], None)? },
            "square" => DomainSpec::square(num(&["side", "b"], Some(2.0))?),
            "ngon" | "regular" | "regular_polygon" => DomainSpec::RegularPolygon {
                sides: num(&["n", "sides"], None)? as usize,
                circumradius: num(&["r", "circumradius"], Some(1.0))?,
            },
            "triangle" => DomainSpec::Triangle {
                side: num(&["side"], Some(2.0))?,
                angle1: num(&["a1", "angle1"], None)?,
                angle2: num(&["a2", "angle2"], None)?,
            },
            "koch" => DomainSpec::Koch {
                generation: num(&["g", "generation"], None)? as u32,
                side: num(&["side"], Some(2.0))?,
            },
            "deformed" | "deformed_disk" => {
                DomainSpec::DeformedDisk { gamma: num(&["gamma"], None)?, mode: num(&["m", "mode"], Some(5.0))? as u32 }
            }
            "octagon" => DomainSpec::mixed_angle_octagon(),
            "poly" | "polygon" => {
                let path = raw(&["file"]).ok_or_else(|| Error::InvalidDomain("`poly` needs `file`".into()))?;
                let text = std::fs::read_to_string(path)?;
                parse_polygon_json(&text)?
            }
            other => return Err(Error::InvalidDomain(format!("unknown shape `{other}`"))),
        };
        Ok(spec)
    }
}

/// Accepts either a full tagged spec or a bare `[[x, y], ...]` vertex list.
fn parse_polygon_json(text: &str) -> Result<DomainSpec> {
    if let Ok(spec) = serde_json::from_str::<DomainSpec>(text) {
        return Ok(spec);
    }
    let vertices: Vec<Point> =
        serde_json::from_str(text).map_err(|e| Error::InvalidDomain(format!("bad polygon file: {e}")))?;
    Ok(DomainSpec::Polygon { vertices })
}

/// Real number, optionally written as a multiple or fraction of `pi`
/// (`pi`, `7pi/12`, `pi/3`, `0.5*pi`).
pub fn parse_real(s: &str) -> Result<f64> {
    let err = || Error::InvalidDomain(format!("cannot parse number `{s}`"));
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().map_err(|_| err())?),
        None => (t.clone(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.trim_end_matches('*');
        let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| err())? };
        c * PI
    } else {
        num.parse::<f64>().map_err(|_| err())?
    };
    Ok(value / den)
}

/// A polygon vertex together with its interior angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub point: Point,
    pub angle: f64,
}

#[derive(Debug, Clone)]
enum Boundary {
    Polygon(Vec<Point>),
    Disk { r: f64 },
    Ellipse { a: f64, b: f64 },
    Deformed { gamma: f64, mode: u32 },
}

impl Boundary {
    /// Point at parameter `t` in `[0, 2 pi)` on a smooth boundary.
    fn curve(&self, t: f64) -> Point {
        match *self {
            Boundary::Disk { r } => Point::new(r * t.cos(), r * t.sin()),
            Boundary::Ellipse { a, b } => Point::new(a * t.cos(), b * t.sin()),
            Boundary::Deformed { gamma, mode } => {
                let rho = 1.0 + gamma * (mode as f64 * t).cos();
                Point::new(rho * t.cos(), rho * t.sin())
            }
            Boundary::Polygon(_) => unreachable!("polygon has no smooth parametrization"),
        }
    }

    /// Largest speed |dγ/dt| of the parametrization.
    fn max_speed(&self) -> f64 {
        match *self {
            Boundary::Disk { r } => r,
            Boundary::Ellipse { a, b } => a.max(b),
            Boundary::Deformed { gamma, mode } => 1.0 + gamma.abs() * (1.0 + mode as f64),
            Boundary::Polygon(_) => 0.0,
        }
    }
}

/// Built domain: boundary, corners and metric data. Immutable.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    boundary: Boundary,
    corners: Vec<Corner>,
    area: f64,
    perimeter: f64,
    /// Closed polyline (last point not repeated): exact for polygons, a
    /// dense sampling for smooth shapes.
    polyline: Vec<Point>,
    index: SegmentIndex,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let boundary = match &spec {
            DomainSpec::Disk { radius } => Boundary::Disk { r: *radius },
            DomainSpec::Ellipse { a, b } => Boundary::Ellipse { a: *a, b: *b },
            DomainSpec::DeformedDisk { gamma, mode } => Boundary::Deformed { gamma: *gamma, mode: *mode },
            DomainSpec::Rectangle { b1, b2 } => Boundary::Polygon(vec![
                Point::new(0.0, 0.0),
                Point::new(*b1, 0.0),
                Point::new(*b1, *b2),
                Point::new(0.0, *b2),
            ]),
            DomainSpec::RegularPolygon { sides, circumradius } => {
                let n = *sides as f64;
                Boundary::Polygon(
                    (0..*sides)
                        .map(|j| {
                            let t = -PI / 2.0 - PI / n + 2.0 * PI * j as f64 / n;
                            Point::new(circumradius * t.cos(), circumradius * t.sin())
                        })
                        .collect(),
                )
            }
            DomainSpec::Triangle { side, angle1, angle2 } => {
                // Law of sines: the side adjacent to angle1 has length
                // side * sin(angle2) / sin(angle1 + angle2).
                let l = side * angle2.sin() / (angle1 + angle2).sin();
                Boundary::Polygon(vec![
                    Point::new(0.0, 0.0),
                    Point::new(*side, 0.0),
                    Point::new(l * angle1.cos(), l * angle1.sin()),
                ])
            }
            DomainSpec::Polygon { vertices } => Boundary::Polygon(vertices.clone()),
            DomainSpec::Koch { generation, side } => Boundary::Polygon(koch_vertices(*generation, *side)),
        };

        let (corners, area, perimeter, polyline) = match &boundary {
            Boundary::Polygon(v) => {
                check_simple(v)?;
                let area = shoelace(v);
                if area <= 0.0 {
                    return Err(Error::InvalidDomain("polygon vertices must be counterclockwise".into()));
                }
                let perimeter = (0..v.len()).map(|i| v[i].dist(v[(i + 1) % v.len()])).sum();
                let corners = interior_angles(v)
                    .into_iter()
                    .zip(v)
                    .map(|(angle, &point)| Corner { point, angle })
                    .collect::<Vec<_>>();
                let total: f64 = corners.iter().map(|c| c.angle).sum();
                let expected = (v.len() as f64 - 2.0) * PI;
                if (total - expected).abs() > 1e-9 {
                    return Err(Error::InvalidDomain(format!("interior angles sum to {total}, expected {expected}")));
                }
                (corners, area, perimeter, v.clone())
            }
            smooth => {
                let n = ((2.0 * PI * smooth.max_speed() / POLYLINE_SPACING).ceil() as usize).max(64);
                let poly: Vec<Point> = (0..n).map(|i| smooth.curve(2.0 * PI * i as f64 / n as f64)).collect();
                let (area, perimeter) = smooth_metrics(smooth);
                (Vec::new(), area, perimeter, poly)
            }
        };

        let index = SegmentIndex::new(&polyline);
        Ok(Domain { spec, boundary, corners, area, perimeter, polyline, index })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn is_polygon(&self) -> bool {
        matches!(self.boundary, Boundary::Polygon(_))
    }

    /// Polygon vertices, `None` for smooth shapes.
    pub fn vertices(&self) -> Option<&[Point]> {
        match &self.boundary {
            Boundary::Polygon(v) => Some(v),
            _ => None,
        }
    }

    /// Interior angles in boundary-traversal order, reflex angles included.
    pub fn polygon_angle_sequence(&self) -> Result<Vec<f64>> {
        if !self.is_polygon() {
            return Err(Error::InvalidDomain("angle sequence requested for a smooth domain".into()));
        }
        Ok(self.corners.iter().map(|c| c.angle).collect())
    }

    /// True for shapes with at least one mirror symmetry by construction.
    pub fn has_mirror_symmetry(&self) -> bool {
        match &self.spec {
            DomainSpec::Triangle { angle1, angle2, .. } => {
                let a3 = PI - angle1 - angle2;
                (angle1 - angle2).abs() < 1e-12 || (angle1 - a3).abs() < 1e-12 || (angle2 - a3).abs() < 1e-12
            }
            DomainSpec::Polygon { .. } => false,
            _ => true,
        }
    }

    /// Slope of the small-`p` asymptote of the first eigenvalue.
    pub fn ratio_area_perimeter(&self) -> f64 {
        self.area / self.perimeter
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        bbox(&self.polyline)
    }

    pub fn contains(&self, x: Point) -> bool {
        match &self.boundary {
            Boundary::Disk { r } => x.norm() < *r,
            Boundary::Ellipse { a, b } => (x.x / a).powi(2) + (x.y / b).powi(2) < 1.0,
            Boundary::Deformed { gamma, mode } => {
                let t = x.y.atan2(x.x);
                x.norm() < 1.0 + gamma * (*mode as f64 * t).cos()
            }
            Boundary::Polygon(v) => winding_contains(v, x),
        }
    }

    /// Euclidean distance to the boundary, for points inside or outside.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        match self.boundary {
            Boundary::Disk { r } => (r - x.norm()).abs(),
            _ => self.index.distance(&self.polyline, x),
        }
    }

    /// Maps a point near the boundary onto it. Smooth shapes are projected
    /// radially (all of them are star-shaped about the origin), polygons
    /// to the closest point.
    pub fn project_to_boundary(&self, x: Point) -> Point {
        match &self.boundary {
            Boundary::Polygon(v) => {
                let mut best = (f64::INFINITY, x);
                for i in 0..v.len() {
                    let q = closest_on_segment(v[i], v[(i + 1) % v.len()], x);
                    let d = q.dist(x);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                best.1
            }
            Boundary::Ellipse { a, b } => {
                let s = ((x.x / a).powi(2) + (x.y / b).powi(2)).sqrt();
                x.scale(1.0 / s)
            }
            smooth => smooth.curve(x.y.atan2(x.x)),
        }
    }

    /// Closed boundary sampling counterclockwise with spacing at most `h`.
    /// For polygons the first point is vertex 0 and every vertex is
    /// included; each edge gets at least two segments.
    pub fn boundary_points(&self, h: f64) -> Result<Vec<Point>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
        }
        match &self.boundary {
            Boundary::Polygon(v) => {
                let n = v.len();
                let min_edge = (0..n).map(|i| v[i].dist(v[(i + 1) % n])).fold(f64::INFINITY, f64::min);
                if h > min_edge {
                    return Err(Error::Meshing(format!("h = {h} exceeds the shortest polygon edge {min_edge}")));
                }
                let mut out = Vec::new();
                for i in 0..n {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    let k = ((a.dist(b) / h).ceil() as usize).max(2);
                    for j in 0..k {
                        let t = j as f64 / k as f64;
                        out.push(a + (b - a).scale(t));
                    }
                }
                Ok(out)
            }
            smooth => {
                if h > self.perimeter / 8.0 {
                    return Err(Error::Meshing(format!("h = {h} too coarse for perimeter {}", self.perimeter)));
                }
                Ok(equal_arc_samples(smooth, self.perimeter, h))
            }
        }
    }
}

/// Samples a smooth closed curve at equal arc length with spacing <= h.
fn equal_arc_samples(curve: &Boundary, perimeter: f64, h: f64) -> Vec<Point> {
    let n = (perimeter / h).ceil() as usize;
    // Cumulative arc length on a fine parameter grid, then invert.
    let fine = 64 * n.max(64);
    let mut cum = Vec::with_capacity(fine + 1);
    cum.push(0.0);
    let mut prev = curve.curve(0.0);
    for i in 1..=fine {
        let p = curve.curve(2.0 * PI * i as f64 / fine as f64);
        cum.push(cum[i - 1] + p.dist(prev));
        prev = p;
    }
    let total = cum[fine];
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let target = total * i as f64 / n as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let f = (target - cum[j]) / (cum[j + 1] - cum[j]);
        let t = 2.0 * PI * (j as f64 + f) / fine as f64;
        out.push(curve.curve(t));
    }
    out
}

/// Area and perimeter of a smooth shape. The ellipse and deformed-disk
/// integrands are periodic and smooth, so the trapezoid rule converges
/// geometrically.
fn smooth_metrics(b: &Boundary) -> (f64, f64) {
    match *b {
        Boundary::Disk { r } => (PI * r * r, 2.0 * PI * r),
        Boundary::Ellipse { a, b } => {
            let n = 4096;
            let per: f64 = (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    (a * t.sin()).hypot(b * t.cos())
                })
                .sum::<f64>()
                * 2.0
                * PI
                / n as f64;
            (PI * a * b, per)
        }
        Boundary::Deformed { gamma, mode } => {
            let n = 4096.max(64 * mode as usize);
            let m = mode as f64;
            let (mut area, mut per) = (0.0, 0.0);
            for i in 0..n {
                let t = 2.0 * PI * i as f64 / n as f64;
                let rho = 1.0 + gamma * (m * t).cos();
                let drho = -gamma * m * (m * t).sin();
                area += 0.5 * rho * rho;
                per += rho.hypot(drho);
            }
            let w = 2.0 * PI / n as f64;
            (area * w, per * w)
        }
        Boundary::Polygon(_) => unreachable!(),
    }
}

fn koch_vertices(generation: u32, side: f64) -> Vec<Point> {
    let mut v = vec![Point::new(0.0, 0.0), Point::new(side, 0.0), Point::new(side / 2.0, side * 3f64.sqrt() / 2.0)];
    for _ in 0..generation {
        let n = v.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let d = b - a;
            // Outward normal of a counterclockwise edge points to its right.
            let normal = Point::new(d.y, -d.x).scale(3f64.sqrt() / 6.0);
            next.push(a);
            next.push(a + d.scale(1.0 / 3.0));
            next.push(a + d.scale(0.5) + normal);
            next.push(a + d.scale(2.0 / 3.0));
        }
        v = next;
    }
    v
}

fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Interior angles of a counterclockwise polygon, in (0, 2 pi).
fn interior_angles(v: &[Point]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n] - v[i];
            let next = v[(i + 1) % n] - v[i];
            next.cross(prev).atan2(next.dot(prev)).rem_euclid(2.0 * PI)
        })
        .collect()
}

fn check_simple(v: &[Point]) -> Result<()> {
    let n = v.len();
    for i in 0..n {
        if v[i].dist(v[(i + 1) % n]) == 0.0 {
            return Err(Error::InvalidDomain(format!("repeated vertex {i}")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(Error::InvalidDomain(format!("self-intersecting polygon: edges {i} and {j} cross")));
            }
        }
    }
    Ok(())
}

fn segments_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let o = |a: Point, b: Point, c: Point| (b - a).cross(c - a);
    let (d1, d2) = (o(p3, p4, p1), o(p3, p4, p2));
    let (d3, d4) = (o(p1, p2, p3), o(p1, p2, p4));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0 && c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    on(p3, p4, p1, d1) || on(p3, p4, p2, d2) || on(p1, p2, p3, d3) || on(p1, p2, p4, d4)
}

fn winding_contains(v: &[Point], x: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a.y > x.y) != (b.y > x.y) {
            let t = (x.y - a.y) / (b.y - a.y);
            if x.x < a.x + t * (b.x - a.x) {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn closest_on_segment(a: Point, b: Point, x: Point) -> Point {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return a;
    }
    let t = ((x - a).dot(d) / len2).clamp(0.0, 1.0);
    a + d.scale(t)
}

fn bbox(pts: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Bounding-box tree over runs of consecutive polyline segments. Runs of
/// a boundary curve are spatially compact, so no sorting is needed.
#[derive(Debug, Clone)]
struct SegmentIndex {
    nodes: Vec<BoxNode>,
}

#[derive(Debug, Clone)]
struct BoxNode {
    lo: Point,
    hi: Point,
    /// Segment range for leaves; child indices for inner nodes.
    a: u32,
    b: u32,
    leaf: bool,
}

const LEAF_SEGMENTS: usize = 8;

impl SegmentIndex {
    fn new(poly: &[Point]) -> Self {
        let mut idx = SegmentIndex { nodes: Vec::new() };
        idx.build(poly, 0, poly.len());
        idx
    }

    fn build(&mut self, poly: &[Point], start: usize, end: usize) -> u32 {
        let n = poly.len();
        let pts: Vec<Point> = (start..=end).map(|i| poly[i % n]).collect();
        let (lo, hi) = bbox(&pts);
        let id = self.nodes.len();
        self.nodes.push(BoxNode { lo, hi, a: start as u32, b: end as u32, leaf: true });
        if end - start > LEAF_SEGMENTS {
            let mid = (start + end) / 2;
            let l = self.build(poly, start, mid);
            let r = self.build(poly, mid, end);
            let node = &mut self.nodes[id];
            node.leaf = false;
            node.a = l;
            node.b = r;
        }
        id as u32
    }

    fn box_dist(node: &BoxNode, x: Point) -> f64 {
        let dx = (node.lo.x - x.x).max(0.0).max(x.x - node.hi.x);
        let dy = (node.lo.y - x.y).max(0.0).max(x.y - node.hi.y);
        dx.hypot(dy)
    }

    fn distance(&self, poly: &[Point], x: Point) -> f64 {
        let n = poly.len();
        let mut best = f64::INFINITY;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if Self::box_dist(node, x) >= best {
                continue;
            }
            if node.leaf {
                for i in node.a as usize..node.b as usize {
                    let d = closest_on_segment(poly[i], poly[(i + 1) % n], x).dist(x);
                    best = best.min(d);
                }
            } else {
                let (l, r) = (node.a, node.b);
                let dl = Self::box_dist(&self.nodes[l as usize], x);
                let dr = Self::box_dist(&self.nodes[r as usize], x);
                // Pop the nearer child first.
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Disk { radius } => write!(f, "disk(R={radius})"),
            DomainSpec::Ellipse { a, b } => write!(f, "ellipse(a={a}, b={b})"),
            DomainSpec::Rectangle { b1, b2 } => write!(f, "rectangle({b1} x {b2})"),
            DomainSpec::RegularPolygon { sides, circumradius } => {
                write!(f, "regular {sides}-gon(r={circumradius})")
            }
            DomainSpec::Triangle { side, angle1, angle2 } => {
                write!(f, "triangle(side={side}, {angle1}, {angle2})")
            }
            DomainSpec::Polygon { vertices } => write!(f, "polygon({} vertices)", vertices.len()),
            DomainSpec::Koch { generation, side } => write!(f, "koch(g={generation}, side={side})"),
            DomainSpec::DeformedDisk { gamma, mode } => {
                write!(f, "deformed disk(gamma={gamma}, m={mode})")
            }
        }
    }
}
