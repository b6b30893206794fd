//! Piecewise-linear paths in R^n and their word algebra: composition,
//! inversion, and reduction modulo retraces and reparametrization.
//!
//! A path is stored as a base point plus an ordered vertex list; the curve is
//! the polyline through them. Two paths are *thin equivalent* when they agree
//! after cancelling immediate back-and-forth segments and merging collinear
//! ones; `reduce` computes the canonical representative and `thin_equal`
//! compares them. Reduction never invents coordinates: every vertex of the
//! reduced word is a vertex of the input.

use crate::error::{Error, Result};

/// Absolute per-coordinate tolerance under which two vertices are the same
/// point. Used by composition, loop closure, and equality of reduced words.
pub const VERTEX_TOL: f64 = 1e-12;

/// Relative tolerance for the collinearity test in `reduce`: the step `w` is
/// collinear with the incoming step `u` when the rejection of `w` from `u`
/// has norm at most `COLLINEAR_TOL * |w|`.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// A point of R^n. Coordinates are finite; `dim >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Invalid("point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite coordinate {c}")));
        }
        Ok(Point { coords })
    }

    /// Origin of R^n.
    pub fn origin(dim: usize) -> Self {
        Point {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Per-coordinate comparison with absolute tolerance `tol`.
    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Largest per-coordinate deviation from `other`.
    pub fn max_deviation(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self + s * v`. Panics if `v.len() != self.dim()`; callers validate.
    pub fn add_scaled(&self, v: &[f64], s: f64) -> Point {
        assert_eq!(v.len(), self.coords.len());
        Point {
            coords: self.coords.iter().zip(v).map(|(x, d)| x + s * d).collect(),
        }
    }

    /// Displacement `self - other` as a vector.
    pub fn sub(&self, other: &Point) -> Vec<f64> {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect()
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// True when step `b -> c` continues along the line of step `a -> b`
/// (same or opposite direction). Both steps must be nonzero.
fn collinear_steps(a: &Point, b: &Point, c: &Point) -> bool {
    let u = b.sub(a);
    let w = c.sub(b);
    let uu = dot(&u, &u);
    if uu == 0.0 {
        return false;
    }
    let t = dot(&u, &w) / uu;
    let rejection: Vec<f64> = w.iter().zip(&u).map(|(wi, ui)| wi - t * ui).collect();
    norm2(&rejection) <= COLLINEAR_TOL * norm2(&w)
}

/// A piecewise-linear path: the polyline from `base` through `vertices`.
/// An empty vertex list is the constant path at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    base: Point,
    vertices: Vec<Point>,
}

impl Path {
    pub fn new(base: Point, vertices: Vec<Point>) -> Result<Self> {
        let dim = base.dim();
        for v in &vertices {
            if v.dim() != dim {
                return Err(Error::DimMismatch(dim, v.dim()));
            }
        }
        Ok(Path {
            dim,
            base,
            vertices,
        })
    }

    /// The constant path sitting at `base`.
    pub fn constant(base: Point) -> Self {
        let dim = base.dim();
        Path {
            dim,
            base,
            vertices: Vec::new(),
        }
    }

    /// The straight segment from `x` to `y`; constant when `x == y` exactly.
    pub fn segment(x: Point, y: Point) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimMismatch(x.dim(), y.dim()));
        }
        if x.coords() == y.coords() {
            return Ok(Path::constant(x));
        }
        let dim = x.dim();
        Ok(Path {
            dim,
            base: x,
            vertices: vec![y],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Final point of the polyline; the base itself for a constant path.
    pub fn endpoint(&self) -> &Point {
        self.vertices.last().unwrap_or(&self.base)
    }

    /// Base followed by the vertices, in traversal order.
    pub fn points(&self) -> impl Iterator<Item = &Point> {
        std::iter::once(&self.base).chain(self.vertices.iter())
    }

    /// Consecutive point pairs, one per polyline segment.
    pub fn segments(&self) -> impl Iterator<Item = (&Point, &Point)> {
        self.points().zip(self.points().skip(1))
    }

    /// Concatenation `self * other`. Requires `other` to start where `self`
    /// ends, within `VERTEX_TOL` per coordinate; the joint keeps this path's
    /// endpoint and drops `other`'s base.
    pub fn compose(&self, other: &Path) -> Result<Path> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        if !self.endpoint().approx_eq(&other.base, VERTEX_TOL) {
            return Err(Error::EndpointMismatch(
                self.endpoint().max_deviation(&other.base),
            ));
        }
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices.iter().cloned());
        Ok(Path {
            dim: self.dim,
            base: self.base.clone(),
            vertices,
        })
    }

    /// Orientation reversal: same polyline traversed from endpoint to base.
    pub fn inverse(&self) -> Path {
        if self.vertices.is_empty() {
            return self.clone();
        }
        let base = self.vertices.last().unwrap().clone();
        let mut vertices: Vec<Point> = self.vertices.iter().rev().skip(1).cloned().collect();
        vertices.push(self.base.clone());
        Path {
            dim: self.dim,
            base,
            vertices,
        }
    }

    /// Canonical representative modulo retraces and reparametrization.
    ///
    /// Single left-to-right pass over the vertices keeping a stack that is
    /// reduced at all times: a step shorter than `VERTEX_TOL` merges into its
    /// predecessor, and the middle point of two collinear consecutive steps
    /// is dropped (this cancels exact retraces and fuses split segments in
    /// one rule). Output vertices are a subsequence of the input's, except
    /// that a vanishing first step keeps the base rather than displace it.
    pub fn reduce(&self) -> Path {
        let mut pts: Vec<Point> = Vec::with_capacity(self.vertices.len() + 1);
        pts.push(self.base.clone());
        for v in &self.vertices {
            pts.push(v.clone());
            loop {
                let n = pts.len();
                if n >= 2 && pts[n - 1].approx_eq(&pts[n - 2], VERTEX_TOL) {
                    // Zero step: keep the newer point so the endpoint stays
                    // exact, except at the base, which anchors the path.
                    let last = pts.pop().unwrap();
                    if pts.len() > 1 {
                        *pts.last_mut().unwrap() = last;
                    }
                    continue;
                }
                if n >= 3 && collinear_steps(&pts[n - 3], &pts[n - 2], &pts[n - 1]) {
                    let last = pts.pop().unwrap();
                    *pts.last_mut().unwrap() = last;
                    continue;
                }
                break;
            }
        }
        let base = pts.remove(0);
        Path {
            dim: self.dim,
            base,
            vertices: pts,
        }
    }

    /// Thin equivalence: equality of the reduced words, vertex by vertex
    /// within `VERTEX_TOL`.
    pub fn thin_equal(&self, other: &Path) -> Result<bool> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let a = self.reduce();
        let b = other.reduce();
        if a.vertices.len() != b.vertices.len() {
            return Ok(false);
        }
        let same = a
            .points()
            .zip(b.points())
            .all(|(p, q)| p.approx_eq(q, VERTEX_TOL));
        Ok(same)
    }
}

/// A closed path: endpoint equals base within `VERTEX_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop(Path);

impl Loop {
    pub fn new(path: Path) -> Result<Self> {
        if !path.endpoint().approx_eq(path.base(), VERTEX_TOL) {
            return Err(Error::EndpointMismatch(
                path.endpoint().max_deviation(path.base()),
            ));
        }
        Ok(Loop(path))
    }

    pub fn constant(base: Point) -> Self {
        Loop(Path::constant(base))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn into_path(self) -> Path {
        self.0
    }
}

/// The boundary of the parallelogram spanned by `e1 * u` and `e2 * v` at
/// corner `x`, traversed `u`-side first: x, x+e1·u, x+e1·u+e2·v, x+e2·v, x.
/// Signed scale factors are allowed; `u` and `v` must be nonzero vectors.
pub fn parallelogram(x: &Point, u: &[f64], v: &[f64], e1: f64, e2: f64) -> Result<Loop> {
    let dim = x.dim();
    if u.len() != dim {
        return Err(Error::DimMismatch(dim, u.len()));
    }
    if v.len() != dim {
        return Err(Error::DimMismatch(dim, v.len()));
    }
    if u.iter().all(|c| *c == 0.0) || v.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let a = x.add_scaled(u, e1);
    let b = a.add_scaled(v, e2);
    let c = x.add_scaled(v, e2);
    let path = Path::new(x.clone(), vec![a, b, c, x.clone()])?;
    Loop::new(path)
}

/// Transport of the loop `gamma` along `alpha`: the reduced word of
/// `alpha * gamma * alpha^-1`, a loop at `alpha`'s base. Requires `gamma`
/// to be based at `alpha`'s endpoint.
pub fn parallel_transport(alpha: &Path, gamma: &Loop) -> Result<Loop> {
    let conjugated = alpha.compose(gamma.path())?.compose(&alpha.inverse())?;
    Loop::new(conjugated.reduce())
}
