use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Implicit domain description: `value < 0` inside, `= 0` on the boundary.
pub trait LevelSet: Send + Sync + std::fmt::Debug {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
    fn name(&self) -> String;
    /// Axis-aligned box `(min, max)` containing the domain.
    fn bounding_box(&self) -> (Point, Point);
    /// A point from which the domain is star-shaped.
    fn center(&self) -> Point;
    fn is_convex(&self) -> bool;
}

/// Built-in level sets, selectable by name in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelSetDomain {
    /// `|x - c| - r`
    Circle { center: [f64; 2], radius: f64 },
    /// `(dx / a)^2 + (dy / b)^2 - 1`
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// Quarter of the disk of given radius in the first quadrant:
    /// `max(|x| - r, -x, -y)`.
    QuarterDisk { radius: f64 },
    /// Convex polygon: maximum of the signed distances to the edge lines.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Star-shaped curve `r(theta) = radius (1 + amplitude cos(lobes theta))`,
    /// `|x| - r(theta)`; convex only for small amplitudes.
    Flower { radius: f64, amplitude: f64, lobes: u32 },
}

impl LevelSetDomain {
    pub fn unit_circle() -> Self {
        Self::Circle { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn unit_quarter_disk() -> Self {
        Self::QuarterDisk { radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Circle { radius, .. } => *radius > 0.0,
            Self::Ellipse { semi_axes, .. } => semi_axes[0] > 0.0 && semi_axes[1] > 0.0,
            Self::QuarterDisk { radius } => *radius > 0.0,
            Self::Polygon { vertices } => vertices.len() >= 3,
            Self::Flower { radius, amplitude, lobes } => *radius > 0.0 && amplitude.abs() < 1.0 && *lobes > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid level set parameters: {self:?}")))
        }
    }

    fn polygon_planes(vertices: &[[f64; 2]]) -> Vec<(Point, f64)> {
        let n = vertices.len();
        (0..n)
            .map(|i| {
                let a = Point::new(vertices[i][0], vertices[i][1]);
                let b = Point::new(vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]);
                let t = (b - a).normalize();
                let normal = Point::new(t.y, -t.x);
                (normal, normal.dot(&a))
            })
            .collect()
    }
}

impl LevelSet for LevelSetDomain {
    fn value(&self, x: Point) -> f64 {
        match self {
            Self::Circle { center, radius } => (x - Point::new(center[0], center[1])).norm() - radius,
            Self::Ellipse { center, semi_axes } => {
                let d = x - Point::new(center[0], center[1]);
                (d.x / semi_axes[0]).powi(2) + (d.y / semi_axes[1]).powi(2) - 1.0
            }
            Self::QuarterDisk { radius } => (x.norm() - radius).max(-x.x).max(-x.y),
            Self::Polygon { vertices } => {
                Self::polygon_planes(vertices).iter().map(|(n, c)| n.dot(&x) - c).fold(f64::NEG_INFINITY, f64::max)
            }
            Self::Flower { radius, amplitude, lobes } => {
                let theta = x.y.atan2(x.x);
                x.norm() - radius * (1.0 + amplitude * (*lobes as f64 * theta).cos())
            }
        }
    }

    fn gradient(&self, x: Point) -> Point {
        match self {
            Self::Circle { center, .. } => {
                let d = x - Point::new(center[0], center[1]);
                let r = d.norm();
                if r > 0.0 {
                    d / r
                } else {
                    Point::zeros()
                }
            }
            Self::Ellipse { center, semi_axes } => {
                let d = x - Point::new(center[0], center[1]);
                Point::new(2.0 * d.x / semi_axes[0].powi(2), 2.0 * d.y / semi_axes[1].powi(2))
            }
            Self::QuarterDisk { radius } => {
                let arc = x.norm() - radius;
                if arc >= -x.x && arc >= -x.y {
                    let r = x.norm();
                    if r > 0.0 {
                        x / r
                    } else {
                        Point::zeros()
                    }
                } else if -x.x >= -x.y {
                    Point::new(-1.0, 0.0)
                } else {
                    Point::new(0.0, -1.0)
                }
            }
            Self::Polygon { vertices } => {
                Self::polygon_planes(vertices)
                    .iter()
                    .map(|(n, c)| (n.dot(&x) - c, *n))
                    .fold((f64::NEG_INFINITY, Point::zeros()), |a, b| if b.0 > a.0 { b } else { a })
                    .1
            }
            Self::Flower { radius, amplitude, lobes } => {
                let r = x.norm();
                if r == 0.0 {
                    return Point::zeros();
                }
                let theta = x.y.atan2(x.x);
                let m = *lobes as f64;
                // d/dtheta of -r(theta), expressed in cartesian components
                let dr = -radius * amplitude * m * (m * theta).sin();
                let e_r = x / r;
                let e_t = Point::new(-e_r.y, e_r.x);
                e_r - e_t * (dr / r)
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Self::Circle { center, radius } => format!("circle(c=({}, {}), r={})", center[0], center[1], radius),
            Self::Ellipse { center, semi_axes } => {
                format!("ellipse(c=({}, {}), a={}, b={})", center[0], center[1], semi_axes[0], semi_axes[1])
            }
            Self::QuarterDisk { radius } => format!("quarter-disk(r={radius})"),
            Self::Polygon { vertices } => format!("polygon({} vertices)", vertices.len()),
            Self::Flower { radius, amplitude, lobes } => format!("flower(r={radius}, a={amplitude}, m={lobes})"),
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        match self {
            Self::Circle { center, radius } => {
                let c = Point::new(center[0], center[1]);
                (c - Point::repeat(*radius), c + Point::repeat(*radius))
            }
            Self::Ellipse { center, semi_axes } => {
                let c = Point::new(center[0], center[1]);
                let s = Point::new(semi_axes[0], semi_axes[1]);
                (c - s, c + s)
            }
            Self::QuarterDisk { radius } => (Point::zeros(), Point::repeat(*radius)),
            Self::Polygon { vertices } => {
                let mut lo = Point::repeat(f64::INFINITY);
                let mut hi = Point::repeat(f64::NEG_INFINITY);
                for v in vertices {
                    let p = Point::new(v[0], v[1]);
                    lo = lo.inf(&p);
                    hi = hi.sup(&p);
                }
                (lo, hi)
            }
            Self::Flower { radius, amplitude, .. } => {
                let r = radius * (1.0 + amplitude.abs());
                (Point::repeat(-r), Point::repeat(r))
            }
        }
    }

    fn center(&self) -> Point {
        match self {
            Self::Circle { center, .. } | Self::Ellipse { center, .. } => Point::new(center[0], center[1]),
            Self::QuarterDisk { radius } => Point::repeat(0.35 * radius),
            Self::Polygon { vertices } => {
                vertices.iter().map(|v| Point::new(v[0], v[1])).sum::<Point>() / vertices.len() as f64
            }
            Self::Flower { .. } => Point::zeros(),
        }
    }

    fn is_convex(&self) -> bool {
        match self {
            // curvature of r = R (1 + a cos m t) stays positive iff a (m^2 - 1) <= 1
            Self::Flower { amplitude, lobes, .. } => {
                let m = *lobes as f64;
                amplitude.abs() * (m * m - 1.0) <= 1.0
            }
            _ => true,
        }
    }
}

/// Distance `t > 0` at which the ray `origin + t dir` leaves the domain,
/// for `origin` strictly inside a star-shaped domain.
pub fn ray_exit(levelset: &dyn LevelSet, origin: Point, dir: Point) -> Result<f64> {
    let f = |t: f64| levelset.value(origin + dir * t);
    if f(0.0) >= 0.0 {
        return Err(Error::InvalidArgument("ray origin is not inside the domain".into()));
    }
    let (lo, hi) = levelset.bounding_box();
    let mut b = 1e-3 * (hi - lo).norm();
    let mut a = 0.0;
    let mut guard = 0;
    while f(b) <= 0.0 {
        a = b;
        b *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidArgument("ray never leaves the domain".into()));
        }
    }
    Ok(refine_root(&f, |t| levelset.gradient(origin + dir * t).dot(&dir), a, b))
}

/// Bisection down to a tight bracket followed by a safeguarded Newton polish.
/// Requires `f(a) <= 0 < f(b)`.
pub(crate) fn refine_root(f: &dyn Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let width0 = (b - a).abs();
    while b - a > 1e-10 * width0.max(1e-300) {
        let m = 0.5 * (a + b);
        if f(m) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let mut t = if f(a).abs() <= f(b).abs() { a } else { b };
    for _ in 0..20 {
        let ft = f(t);
        if ft.abs() <= 1e-15 {
            break;
        }
        let d = df(t);
        if d == 0.0 {
            break;
        }
        let next = t - ft / d;
        // stay inside a slightly widened bracket
        let margin = 1e-8 * width0;
        if !(next >= a - margin && next <= b + margin) {
            break;
        }
        if (next - t).abs() <= 1e-16 * t.abs().max(1e-300) {
            t = next;
            break;
        }
        t = next;
    }
    t
}
