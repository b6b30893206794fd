//! Finite-difference differential operators on path functionals: the
//! endpoint-extension (Mandelstam) derivative, derivatives along sections,
//! the vertical connection term, and the second-order loop derivative.
//!
//! Every operator samples a difference quotient at a decreasing ladder of
//! step sizes and extrapolates to zero step by Neville's tableau in the
//! stencil's error variable (`eps^2` for central stencils, `eps` for
//! forward ones). Results carry an observed convergence order measured from
//! the raw quotients and an error estimate from the two finest extrapolants.

use crate::error::{Error, Result};
use crate::gauge::{CMatrix, ConnectionField, IntegratorOptions};
use crate::paths::{parallelogram, Loop, Path, Point};

/// A matrix-valued function of paths. Implementations must be defined for
/// every well-formed path of the session's base dimension; operators probe
/// them on composed extensions of their arguments.
pub trait PathFunctional {
    fn eval(&self, path: &Path) -> CMatrix;
    /// `(rows, cols)` of every value.
    fn output_shape(&self) -> (usize, usize);
}

/// Holonomy of a fixed field as a functional of the path.
pub struct HolonomyFunctional<'a> {
    field: &'a ConnectionField,
    opts: IntegratorOptions,
}

impl<'a> HolonomyFunctional<'a> {
    pub fn new(field: &'a ConnectionField, opts: IntegratorOptions) -> Self {
        HolonomyFunctional { field, opts }
    }
}

impl PathFunctional for HolonomyFunctional<'_> {
    fn eval(&self, path: &Path) -> CMatrix {
        self.field
            .holonomy(path, &self.opts)
            .expect("path dimension must match the field")
            .0
    }

    fn output_shape(&self) -> (usize, usize) {
        let d = self.field.matrix_dim();
        (d, d)
    }
}

/// The `axis`-th coordinate (1-based) of the endpoint, as a 1x1 matrix.
/// Linear in endpoint displacements, so first derivatives of it are exact.
pub struct EndpointCoordinate {
    axis: usize,
}

impl EndpointCoordinate {
    pub fn new(axis: usize) -> Self {
        EndpointCoordinate { axis }
    }
}

impl PathFunctional for EndpointCoordinate {
    fn eval(&self, path: &Path) -> CMatrix {
        let c = path.endpoint().coords()[self.axis - 1];
        CMatrix::from_element(1, 1, num_complex::Complex64::new(c, 0.0))
    }

    fn output_shape(&self) -> (usize, usize) {
        (1, 1)
    }
}

/// Adapter turning a closure into a functional; used to nest operators.
pub struct FnFunctional<F: Fn(&Path) -> CMatrix> {
    shape: (usize, usize),
    f: F,
}

impl<F: Fn(&Path) -> CMatrix> FnFunctional<F> {
    pub fn new(rows: usize, cols: usize, f: F) -> Self {
        FnFunctional {
            shape: (rows, cols),
            f,
        }
    }
}

impl<F: Fn(&Path) -> CMatrix> PathFunctional for FnFunctional<F> {
    fn eval(&self, path: &Path) -> CMatrix {
        (self.f)(path)
    }

    fn output_shape(&self) -> (usize, usize) {
        self.shape
    }
}

/// A smooth family of paths from a fixed start to every point near a center:
/// `path_to(y)` ends at `y` (within the vertex tolerance) and varies smoothly
/// with `y` inside the chart of the given radius.
pub trait Section {
    fn center(&self) -> &Point;
    fn radius(&self) -> f64;
    fn path_to(&self, y: &Point) -> Path;
}

/// Section obtained by appending a straight segment to a fixed stem path:
/// `S(y) = stem * segment(center, y)`. Appending the return segment cancels
/// thinly, so this section has no vertical component.
pub struct TransportSection {
    stem: Path,
    center: Point,
    radius: f64,
}

impl TransportSection {
    pub fn new(stem: Path, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!(
                "section radius must be positive, got {radius}"
            )));
        }
        let center = stem.endpoint().clone();
        Ok(TransportSection {
            stem,
            center,
            radius,
        })
    }

    pub fn stem(&self) -> &Path {
        &self.stem
    }
}

impl Section for TransportSection {
    fn center(&self) -> &Point {
        &self.center
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn path_to(&self, y: &Point) -> Path {
        let tail = Path::segment(self.center.clone(), y.clone())
            .expect("segment endpoints share the section dimension");
        self.stem
            .compose(&tail)
            .expect("segment starts at the stem endpoint")
    }
}

/// Section of curved paths: the quadratic through a fixed start, a fixed
/// waypoint at half parameter, and the target `y`, sampled as a polyline
/// with a fixed number of segments. Unlike `TransportSection`, moving `y`
/// bends the whole tail of the path, so the vertical term is nonzero.
pub struct ArcSection {
    start: Point,
    center: Point,
    waypoint: Point,
    segments: usize,
    radius: f64,
}

impl ArcSection {
    pub fn new(
        start: Point,
        center: Point,
        waypoint: Point,
        segments: usize,
        radius: f64,
    ) -> Result<Self> {
        let dim = start.dim();
        if center.dim() != dim {
            return Err(Error::DimMismatch(dim, center.dim()));
        }
        if waypoint.dim() != dim {
            return Err(Error::DimMismatch(dim, waypoint.dim()));
        }
        if segments < 2 {
            return Err(Error::Invalid(
                "arc section needs at least 2 segments".into(),
            ));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!(
                "section radius must be positive, got {radius}"
            )));
        }
        Ok(ArcSection {
            start,
            center,
            waypoint,
            segments,
            radius,
        })
    }

    /// Arc from `start` to `center` with an automatic waypoint: the chord
    /// midpoint displaced sideways by half the chord length. Needs dim >= 2.
    pub fn between(start: Point, center: Point, radius: f64) -> Result<Self> {
        let dim = start.dim();
        if dim < 2 {
            return Err(Error::DimTooSmall { dim, needed: 2 });
        }
        if center.dim() != dim {
            return Err(Error::DimMismatch(dim, center.dim()));
        }
        let chord = center.sub(&start);
        let len = chord.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut offset = vec![0.0; dim];
        if len < 1e-9 {
            offset[1] = 0.3;
        } else {
            // Reject the least-aligned axis vector from the chord to get a
            // perpendicular of comparable scale.
            let axis = (0..dim)
                .min_by(|a, b| chord[*a].abs().total_cmp(&chord[*b].abs()))
                .unwrap();
            let t = chord[axis] / (len * len);
            let mut r: Vec<f64> = chord.iter().map(|c| -t * c).collect();
            r[axis] += 1.0;
            let rn = r.iter().map(|c| c * c).sum::<f64>().sqrt();
            for (o, ri) in offset.iter_mut().zip(&r) {
                *o = ri / rn * (len / 2.0);
            }
        }
        let mut waypoint = Vec::with_capacity(dim);
        for i in 0..dim {
            waypoint.push((start.coords()[i] + center.coords()[i]) / 2.0 + offset[i]);
        }
        ArcSection::new(start, center, Point::new(waypoint)?, 16, radius)
    }
}

impl Section for ArcSection {
    fn center(&self) -> &Point {
        &self.center
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn path_to(&self, y: &Point) -> Path {
        // Lagrange weights of the quadratic through (0, start), (1/2,
        // waypoint), (1, y); they sum to 1 at every t, and at t = 1 the
        // computed point is y exactly.
        let dim = self.start.dim();
        let k = self.segments;
        let mut vertices = Vec::with_capacity(k);
        for j in 1..=k {
            let t = j as f64 / k as f64;
            let w0 = (2.0 * t - 1.0) * (t - 1.0);
            let w1 = 4.0 * t * (1.0 - t);
            let w2 = t * (2.0 * t - 1.0);
            let mut coords = Vec::with_capacity(dim);
            for i in 0..dim {
                coords.push(
                    w0 * self.start.coords()[i]
                        + w1 * self.waypoint.coords()[i]
                        + w2 * y.coords()[i],
                );
            }
            vertices.push(Point::new(coords).expect("finite arc vertex"));
        }
        Path::new(self.start.clone(), vertices).expect("arc vertices share one dimension")
    }
}

/// Difference stencil family. `Central` has an even error series in the
/// step; `Forward` needs one fewer probe direction but converges one order
/// lower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central,
    Forward,
}

impl Stencil {
    /// Power p such that the quotient error expands in powers of `eps^p`.
    fn error_power(self) -> i32 {
        match self {
            Stencil::Central => 2,
            Stencil::Forward => 1,
        }
    }
}

/// Step ladder and extrapolation policy for the derivative operators.
#[derive(Debug, Clone, PartialEq)]
pub struct FdScheme {
    /// Strictly decreasing positive step sizes; at least two.
    pub eps_list: Vec<f64>,
    pub stencil: Stencil,
    /// Extrapolate the ladder to zero step; otherwise report the finest raw
    /// quotient.
    pub richardson: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme {
            eps_list: vec![1e-2, 5e-3, 2.5e-3],
            stencil: Stencil::Central,
            richardson: true,
        }
    }
}

impl FdScheme {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.len() < 2 {
            return Err(Error::Invalid(
                "scheme needs at least two step sizes".into(),
            ));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Invalid(
                    "step sizes must be strictly decreasing".into(),
                ));
            }
        }
        let last = *self.eps_list.last().unwrap();
        if !(last > 0.0) || !self.eps_list[0].is_finite() {
            return Err(Error::Invalid(
                "step sizes must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Largest step of the ladder (the list is strictly decreasing).
    pub fn max_eps(&self) -> f64 {
        self.eps_list[0]
    }
}

/// Outcome of one extrapolated derivative.
#[derive(Debug, Clone)]
pub struct DerivativeResult {
    pub value: CMatrix,
    /// Convergence order fitted to the three finest raw quotients; NaN when
    /// fewer than three steps were taken or the differences sit at the
    /// rounding floor.
    pub est_order: f64,
    /// Distance between the two finest extrapolants (or raw quotients when
    /// extrapolation is off).
    pub est_error: f64,
}

/// Neville extrapolation to zero step of `samples = [(eps, G(eps))]`,
/// descending in `eps`, with error series in `eps^power`.
fn extrapolate(samples: Vec<(f64, CMatrix)>, power: i32, richardson: bool) -> DerivativeResult {
    let k = samples.len();
    debug_assert!(k >= 2);
    let est_order = if k >= 3 {
        let ga = &samples[k - 3].1;
        let (eb, gb) = &samples[k - 2];
        let (ec, gc) = &samples[k - 1];
        let n1 = (ga - gb).norm();
        let n2 = (gb - gc).norm();
        let floor = 1e-14 * (1.0 + gc.norm());
        if n1 <= floor || n2 <= floor {
            f64::NAN
        } else {
            (n1 / n2).ln() / (eb / ec).ln()
        }
    } else {
        f64::NAN
    };

    if !richardson {
        let est_error = (&samples[k - 1].1 - &samples[k - 2].1).norm();
        return DerivativeResult {
            value: samples[k - 1].1.clone(),
            est_order,
            est_error,
        };
    }

    let h: Vec<f64> = samples.iter().map(|(e, _)| e.powi(power)).collect();
    let mut t: Vec<CMatrix> = samples.into_iter().map(|(_, g)| g).collect();
    let mut second = t[1].clone();
    for j in 1..k {
        for i in 0..(k - j) {
            let num = t[i + 1].scale(h[i]) - t[i].scale(h[i + j]);
            t[i] = num.unscale(h[i] - h[i + j]);
        }
        if j == k - 2 {
            second = t[1].clone();
        }
    }
    let value = t.swap_remove(0);
    let est_error = (&value - &second).norm();
    DerivativeResult {
        value,
        est_order,
        est_error,
    }
}

fn require_direction(dim: usize, v: &[f64]) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimMismatch(dim, v.len()));
    }
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    Ok(())
}

pub(crate) fn axis_vector(dim: usize, mu: usize) -> Result<Vec<f64>> {
    if mu == 0 || mu > dim {
        return Err(Error::IndexOutOfRange { index: mu, dim });
    }
    let mut v = vec![0.0; dim];
    v[mu - 1] = 1.0;
    Ok(v)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Derivative of `f` under endpoint extension: append a straight probe
/// segment of length `eps |v|` in direction `v` at the endpoint of `pi` and
/// differentiate in `eps`.
pub fn mandelstam_derivative(
    f: &dyn PathFunctional,
    pi: &Path,
    v: &[f64],
    scheme: &FdScheme,
) -> Result<DerivativeResult> {
    scheme.validate()?;
    require_direction(pi.dim(), v)?;
    let x = pi.endpoint().clone();
    let probe = |eps: f64| -> Result<CMatrix> {
        let tip = Path::segment(x.clone(), x.add_scaled(v, eps))?;
        Ok(f.eval(&pi.compose(&tip)?))
    };
    let mut samples = Vec::with_capacity(scheme.eps_list.len());
    match scheme.stencil {
        Stencil::Central => {
            for &e in &scheme.eps_list {
                let g = (probe(e)? - probe(-e)?).unscale(2.0 * e);
                samples.push((e, g));
            }
        }
        Stencil::Forward => {
            let f0 = f.eval(pi);
            for &e in &scheme.eps_list {
                let g = (probe(e)? - &f0).unscale(e);
                samples.push((e, g));
            }
        }
    }
    Ok(extrapolate(
        samples,
        scheme.stencil.error_power(),
        scheme.richardson,
    ))
}

/// Derivative of `f` along a section: move the target point of `s.path_to`
/// in direction `v` and differentiate. Unlike the endpoint extension this
/// deforms the whole path family.
pub fn section_derivative(
    f: &dyn PathFunctional,
    s: &dyn Section,
    v: &[f64],
    scheme: &FdScheme,
) -> Result<DerivativeResult> {
    scheme.validate()?;
    let x = s.center().clone();
    require_direction(x.dim(), v)?;
    let reach = scheme.max_eps() * norm2(v);
    if reach > s.radius() {
        return Err(Error::RadiusExceeded {
            step: reach,
            radius: s.radius(),
        });
    }
    let probe = |eps: f64| f.eval(&s.path_to(&x.add_scaled(v, eps)));
    let mut samples = Vec::with_capacity(scheme.eps_list.len());
    match scheme.stencil {
        Stencil::Central => {
            for &e in &scheme.eps_list {
                let g = (probe(e) - probe(-e)).unscale(2.0 * e);
                samples.push((e, g));
            }
        }
        Stencil::Forward => {
            let f0 = probe(0.0);
            for &e in &scheme.eps_list {
                let g = (probe(e) - &f0).unscale(e);
                samples.push((e, g));
            }
        }
    }
    Ok(extrapolate(
        samples,
        scheme.stencil.error_power(),
        scheme.richardson,
    ))
}

/// Vertical part of the section derivative along axis `mu` (1-based): probe
/// with `s.path_to(x + eps e_mu)` closed by the straight return segment to
/// `x`, so the comparison happens at a fixed endpoint. For a transport
/// section the probe is thin-equivalent to the stem and the result vanishes;
/// in general it measures the gauge potential of the section.
pub fn connection_derivative(
    f: &dyn PathFunctional,
    s: &dyn Section,
    mu: usize,
    scheme: &FdScheme,
) -> Result<DerivativeResult> {
    scheme.validate()?;
    let x = s.center().clone();
    let e_mu = axis_vector(x.dim(), mu)?;
    if scheme.max_eps() > s.radius() {
        return Err(Error::RadiusExceeded {
            step: scheme.max_eps(),
            radius: s.radius(),
        });
    }
    let probe = |eps: f64| -> Result<CMatrix> {
        let y = x.add_scaled(&e_mu, eps);
        let out = s.path_to(&y);
        let back = Path::segment(y, x.clone())?;
        Ok(f.eval(&out.compose(&back)?))
    };
    let mut samples = Vec::with_capacity(scheme.eps_list.len());
    match scheme.stencil {
        Stencil::Central => {
            for &e in &scheme.eps_list {
                let g = (probe(e)? - probe(-e)?).unscale(2.0 * e);
                samples.push((e, g));
            }
        }
        Stencil::Forward => {
            let f0 = f.eval(&s.path_to(&x));
            for &e in &scheme.eps_list {
                let g = (probe(e)? - &f0).unscale(e);
                samples.push((e, g));
            }
        }
    }
    Ok(extrapolate(
        samples,
        scheme.stencil.error_power(),
        scheme.richardson,
    ))
}

/// Second-order loop derivative: insert the small parallelogram spanned by
/// `u`, `v` at the endpoint of `pi`, conjugate it back to the base, continue
/// along `gamma`, and take the mixed second derivative in the two edge
/// scales. For thin-invariant `f` the pure-edge terms cancel, leaving the
/// curvature component along `(u, v)`.
pub fn loop_derivative(
    f: &dyn PathFunctional,
    pi: &Path,
    gamma: &Loop,
    u: &[f64],
    v: &[f64],
    scheme: &FdScheme,
) -> Result<DerivativeResult> {
    scheme.validate()?;
    require_direction(pi.dim(), u)?;
    require_direction(pi.dim(), v)?;
    let uu: f64 = u.iter().map(|c| c * c).sum();
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let rej: f64 = v
        .iter()
        .zip(u)
        .map(|(vi, ui)| {
            let r = vi - uv / uu * ui;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    if rej <= 1e-12 * norm2(v) {
        return Err(Error::DependentDirections);
    }
    let x = pi.endpoint().clone();
    let inv = pi.inverse();
    let probe = |e1: f64, e2: f64| -> Result<CMatrix> {
        let square = parallelogram(&x, u, v, e1, e2)?;
        let path = pi
            .compose(square.path())?
            .compose(&inv)?
            .compose(gamma.path())?;
        Ok(f.eval(&path))
    };
    let mut samples = Vec::with_capacity(scheme.eps_list.len());
    match scheme.stencil {
        Stencil::Central => {
            for &e in &scheme.eps_list {
                let g = (probe(e, e)? - probe(-e, e)? - probe(e, -e)? + probe(-e, -e)?)
                    .unscale(4.0 * e * e);
                samples.push((e, g));
            }
        }
        Stencil::Forward => {
            let f0 = probe(0.0, 0.0)?;
            for &e in &scheme.eps_list {
                let g = (probe(e, e)? - &f0).unscale(e * e);
                samples.push((e, g));
            }
        }
    }
    Ok(extrapolate(
        samples,
        scheme.stencil.error_power(),
        scheme.richardson,
    ))
}

/// Commutator of endpoint-extension derivatives along axes `mu` and `nu`
/// (1-based), computed by nesting `mandelstam_derivative`: the outer
/// operator differentiates the value of the inner one as the base path
/// extends. Equals the loop derivative along the same axes for functionals
/// built from a connection.
pub fn commutator_mandelstam(
    f: &dyn PathFunctional,
    pi: &Path,
    mu: usize,
    nu: usize,
    scheme: &FdScheme,
) -> Result<DerivativeResult> {
    scheme.validate()?;
    let dim = pi.dim();
    let e_mu = axis_vector(dim, mu)?;
    let e_nu = axis_vector(dim, nu)?;
    if mu == nu {
        return Err(Error::DependentDirections);
    }
    let (rows, cols) = f.output_shape();
    let nested = |outer: &[f64], inner: &[f64]| -> Result<DerivativeResult> {
        let inner = inner.to_vec();
        let g = FnFunctional::new(rows, cols, |p: &Path| {
            mandelstam_derivative(f, p, &inner, scheme)
                .expect("inner derivative on a probe extension")
                .value
        });
        mandelstam_derivative(&g, pi, outer, scheme)
    };
    let a = nested(&e_mu, &e_nu)?;
    let b = nested(&e_nu, &e_mu)?;
    let est_order = if a.est_order.is_nan() || b.est_order.is_nan() {
        f64::NAN
    } else {
        0.5 * (a.est_order + b.est_order)
    };
    Ok(DerivativeResult {
        value: a.value - b.value,
        est_order,
        est_error: a.est_error + b.est_error,
    })
}
