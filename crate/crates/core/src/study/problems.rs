use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::monomial_exponents;
use crate::curved::{LevelSet, LevelSetDomain};
use crate::{Error, Point, Result};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Exact solution `u` with its gradient and `f = -Laplace u`; `g = u` on the
/// boundary.
#[derive(Clone)]
pub struct Manufactured {
    pub name: String,
    pub u: ScalarField,
    pub grad: VectorField,
    pub f: ScalarField,
}

impl fmt::Debug for Manufactured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manufactured").field("name", &self.name).finish()
    }
}

const FD_STEP: f64 = 1e-3;
const FD_REL_TOL: f64 = 1e-4;
const FD_SAMPLES: usize = 32;

impl Manufactured {
    /// `cos(pi x) cos(pi y) / (2 pi^2)`.
    pub fn test1_2d() -> Self {
        let c = 1.0 / (2.0 * PI * PI);
        Self {
            name: "test1-2d".into(),
            u: Arc::new(move |x| c * (PI * x.x).cos() * (PI * x.y).cos()),
            grad: Arc::new(move |x| {
                Point::new(-c * PI * (PI * x.x).sin() * (PI * x.y).cos(), -c * PI * (PI * x.x).cos() * (PI * x.y).sin())
            }),
            f: Arc::new(|x| (PI * x.x).cos() * (PI * x.y).cos()),
        }
    }

    /// `cos(pi r^2 / 4)`.
    pub fn curved() -> Self {
        let a = PI / 4.0;
        Self {
            name: "curved".into(),
            u: Arc::new(move |x| (a * x.norm_squared()).cos()),
            grad: Arc::new(move |x| x * (-2.0 * a * (a * x.norm_squared()).sin())),
            // -Laplace cos(a r^2) = 4a sin(a r^2) + 4 a^2 r^2 cos(a r^2)
            f: Arc::new(move |x| {
                let r2 = x.norm_squared();
                4.0 * a * (a * r2).sin() + 4.0 * a * a * r2 * (a * r2).cos()
            }),
        }
    }

    /// Fixed polynomial of total degree `k` with all monomials present.
    pub fn polynomial(k: usize) -> Self {
        let terms: Vec<(usize, usize, f64)> = monomial_exponents(k)
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                (a, b, s / (1.0 + a as f64 + 2.0 * b as f64))
            })
            .collect();
        let pw = |x: f64, n: usize| if n == 0 { 1.0 } else { x.powi(n as i32) };
        let t_u = terms.clone();
        let t_g = terms.clone();
        let t_f = terms;
        Self {
            name: format!("poly-{k}"),
            u: Arc::new(move |x| t_u.iter().map(|&(a, b, c)| c * pw(x.x, a) * pw(x.y, b)).sum()),
            grad: Arc::new(move |x| {
                t_g.iter().fold(Point::zeros(), |acc, &(a, b, c)| {
                    let dx = if a > 0 { a as f64 * pw(x.x, a - 1) * pw(x.y, b) } else { 0.0 };
                    let dy = if b > 0 { b as f64 * pw(x.x, a) * pw(x.y, b - 1) } else { 0.0 };
                    acc + Point::new(dx, dy) * c
                })
            }),
            f: Arc::new(move |x| {
                -t_f.iter()
                    .map(|&(a, b, c)| {
                        let dxx = if a > 1 { (a * (a - 1)) as f64 * pw(x.x, a - 2) * pw(x.y, b) } else { 0.0 };
                        let dyy = if b > 1 { (b * (b - 1)) as f64 * pw(x.x, a) * pw(x.y, b - 2) } else { 0.0 };
                        c * (dxx + dyy)
                    })
                    .sum::<f64>()
            }),
        }
    }

    /// Checks `f = -Laplace u` and the gradient against central differences at
    /// random points of the box, to relative `1e-4`.
    pub fn validate(&self, bbox: (Point, Point), seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = bbox;
        let h = FD_STEP * (hi - lo).norm();
        let ex = Point::new(h, 0.0);
        let ey = Point::new(0.0, h);
        let u = &self.u;
        let (mut lap_err, mut lap_scale, mut grad_err, mut grad_scale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..FD_SAMPLES {
            let x = Point::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
            let lap = (u(x + ex) + u(x - ex) + u(x + ey) + u(x - ey) - 4.0 * u(x)) / (h * h);
            lap_err = lap_err.max((lap + (self.f)(x)).abs());
            lap_scale = lap_scale.max((self.f)(x).abs());
            let g = Point::new((u(x + ex) - u(x - ex)) / (2.0 * h), (u(x + ey) - u(x - ey)) / (2.0 * h));
            grad_err = grad_err.max((g - (self.grad)(x)).norm());
            grad_scale = grad_scale.max((self.grad)(x).norm());
        }
        // polynomials of degree <= 1 have f = 0: fall back to an absolute scale
        let ok = |err: f64, scale: f64| err <= FD_REL_TOL * scale.max(1.0);
        if ok(lap_err, lap_scale) && ok(grad_err, grad_scale) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{}: f or grad u inconsistent with u (laplacian {lap_err:.2e}, gradient {grad_err:.2e})",
                self.name
            )))
        }
    }
}

/// Registered problems selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    /// Cosine product on the unit square.
    #[value(name = "test1-2d")]
    #[serde(rename = "test1-2d")]
    Test1,
    /// Polynomial of the space order on the unit square.
    Patch,
    /// Radial cosine on the unit disk.
    Disk,
    /// Radial cosine on the unit quarter disk.
    QuarterDisk,
}

impl ProblemName {
    pub fn domain(self) -> LevelSetDomain {
        match self {
            Self::Test1 | Self::Patch => {
                LevelSetDomain::Polygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] }
            }
            Self::Disk => LevelSetDomain::unit_circle(),
            Self::QuarterDisk => LevelSetDomain::unit_quarter_disk(),
        }
    }

    pub fn solution(self, order: usize) -> Manufactured {
        match self {
            Self::Test1 => Manufactured::test1_2d(),
            Self::Patch => Manufactured::polynomial(order),
            Self::Disk | Self::QuarterDisk => Manufactured::curved(),
        }
    }

    pub fn is_curved(self) -> bool {
        matches!(self, Self::Disk | Self::QuarterDisk)
    }
}

pub(crate) fn domain_bbox(domain: &LevelSetDomain) -> (Point, Point) {
    domain.bounding_box()
}
