//! Impermeable substrates described as graphs `y = w(x)`.
//!
//! Three realizations: a flat plane, the analytic groove
//! `w(x) = A (sin kx + cos 2kx)^2`, and a monotone chain of cubic Bezier
//! segments (used for the teapot geometry). Derivatives are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Control points of the teapot cross-section. Grouped 1-4 / 4-7 / 7-10
/// into three cubic segments sharing their end points.
pub const TEAPOT_POINTS: [[f64; 2]; 10] = [
    [-2.0, 0.78],
    [-4.0 / 3.0, 0.0],
    [-2.0 / 3.0, 0.0],
    [0.0, 0.0],
    [2.0 / 3.0, 0.0],
    [4.0 / 3.0, 0.0],
    [2.0, 0.78],
    [2.655, 1.142],
    [2.846, 2.146],
    [4.0, 2.5],
];

/// Relative floor on `dx/dl` below which a Bezier segment is treated as degenerate.
const DEGENERATE_FLOOR: f64 = 1e-12;
/// Relative tolerance on `|x(l) - x|` for [`BezierSegment::invert_x`].
const INVERT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BezierSegment {
    pub points: [[f64; 2]; 4],
}

impl BezierSegment {
    pub fn new(points: [[f64; 2]; 4]) -> Result<Self> {
        for k in 0..3 {
            if points[k + 1][0] < points[k][0] {
                return Err(Error::InvalidChain(format!(
                    "control x-coordinates must be nondecreasing, got {:?}",
                    points.map(|p| p[0])
                )));
            }
        }
        if points[3][0] <= points[0][0] {
            return Err(Error::InvalidChain("segment has zero x-extent".into()));
        }
        Ok(Self { points })
    }

    pub fn x_start(&self) -> f64 {
        self.points[0][0]
    }

    pub fn x_end(&self) -> f64 {
        self.points[3][0]
    }

    fn extent(&self) -> f64 {
        self.x_end() - self.x_start()
    }

    fn bernstein(&self, t: f64, coord: usize) -> f64 {
        let s = 1.0 - t;
        let p = &self.points;
        s * s * s * p[0][coord]
            + 3.0 * s * s * t * p[1][coord]
            + 3.0 * s * t * t * p[2][coord]
            + t * t * t * p[3][coord]
    }

    fn bernstein_derivative(&self, t: f64, coord: usize) -> f64 {
        let s = 1.0 - t;
        let p = &self.points;
        3.0 * (s * s * (p[1][coord] - p[0][coord])
            + 2.0 * s * t * (p[2][coord] - p[1][coord])
            + t * t * (p[3][coord] - p[2][coord]))
    }

    pub fn point(&self, t: f64) -> (f64, f64) {
        (self.bernstein(t, 0), self.bernstein(t, 1))
    }

    /// Parameter `l` in `[0, 1]` with `x(l) = x`, by bisection on the
    /// monotone x-component.
    pub fn invert_x(&self, x: f64) -> Result<f64> {
        let (x0, x1) = (self.x_start(), self.x_end());
        if !(x0..=x1).contains(&x) {
            return Err(Error::OutOfRange { x, lo: x0, hi: x1 });
        }
        if x == x0 {
            return Ok(0.0);
        }
        if x == x1 {
            return Ok(1.0);
        }
        let tol = INVERT_TOL * self.extent();
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut mid = 0.5;
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let r = self.bernstein(mid, 0) - x;
            if r.abs() <= tol || hi - lo <= f64::EPSILON {
                break;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let t = self.invert_x(x)?;
        Ok(self.bernstein(t, 1))
    }

    fn eval_prime(&self, x: f64) -> Result<f64> {
        let t = self.invert_x(x)?;
        let dxdl = self.bernstein_derivative(t, 0);
        if dxdl < DEGENERATE_FLOOR * self.extent() {
            return Err(Error::DegenerateParametrization { x, dxdl });
        }
        Ok(self.bernstein_derivative(t, 1) / dxdl)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Substrate {
    Flat,
    Groove { amplitude: f64, wavenumber: f64 },
    BezierChain(Vec<BezierSegment>),
}

impl Substrate {
    /// Builds a chain from `3m + 1` control points; consecutive segments share an end point.
    pub fn bezier_chain(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 4 || !(points.len() - 1).is_multiple_of(3) {
            return Err(Error::InvalidChain(format!(
                "point count must be 3m + 1 with m >= 1, got {}",
                points.len()
            )));
        }
        let segments = points
            .windows(4)
            .step_by(3)
            .map(|w| BezierSegment::new([w[0], w[1], w[2], w[3]]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Substrate::BezierChain(segments))
    }

    pub fn teapot() -> Self {
        Self::bezier_chain(&TEAPOT_POINTS).expect("teapot control points form a valid chain")
    }

    /// Closed interval on which `w` is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Substrate::BezierChain(segs) => (segs[0].x_start(), segs[segs.len() - 1].x_end()),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    // Segment containing x; at junctions the right-hand segment wins.
    fn segment(segs: &[BezierSegment], x: f64) -> Result<&BezierSegment> {
        let (lo, hi) = (segs[0].x_start(), segs[segs.len() - 1].x_end());
        if !(lo..=hi).contains(&x) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        Ok(segs
            .iter()
            .find(|s| x < s.x_end())
            .unwrap_or(&segs[segs.len() - 1]))
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        match self {
            Substrate::Flat => Ok(0.0),
            Substrate::Groove {
                amplitude,
                wavenumber,
            } => {
                let k = *wavenumber;
                let g = (k * x).sin() + (2.0 * k * x).cos();
                Ok(amplitude * g * g)
            }
            Substrate::BezierChain(segs) => Self::segment(segs, x)?.eval(x),
        }
    }

    pub fn w_prime(&self, x: f64) -> Result<f64> {
        match self {
            Substrate::Flat => Ok(0.0),
            Substrate::Groove {
                amplitude,
                wavenumber,
            } => {
                let k = *wavenumber;
                let g = (k * x).sin() + (2.0 * k * x).cos();
                let dg = k * (k * x).cos() - 2.0 * k * (2.0 * k * x).sin();
                Ok(2.0 * amplitude * g * dg)
            }
            Substrate::BezierChain(segs) => Self::segment(segs, x)?.eval_prime(x),
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.w(x)).collect()
    }
}

/// Config-file description of a substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SubstrateSpec {
    Flat,
    Groove {
        #[serde(rename = "A")]
        amplitude: f64,
        k: f64,
    },
    Teapot,
    Bezier {
        points: Vec<[f64; 2]>,
    },
}

impl SubstrateSpec {
    pub fn build(&self) -> Result<Substrate> {
        match self {
            SubstrateSpec::Flat => Ok(Substrate::Flat),
            SubstrateSpec::Groove { amplitude, k } => Ok(Substrate::Groove {
                amplitude: *amplitude,
                wavenumber: *k,
            }),
            SubstrateSpec::Teapot => Ok(Substrate::teapot()),
            SubstrateSpec::Bezier { points } => Substrate::bezier_chain(points),
        }
    }
}
