//! Randomized verification of the structural identities tying the path
//! algebra, holonomy, and the finite-difference operators together.
//!
//! Sampling is fully deterministic: a SplitMix64 stream seeded from a
//! `RandomSpec` drives every draw, and the suite consumes the stream in a
//! fixed order, so identical inputs produce byte-identical reports.

use crate::calculus::{
    axis_vector, connection_derivative, loop_derivative, mandelstam_derivative, section_derivative,
    ArcSection, FdScheme, FnFunctional, HolonomyFunctional, PathFunctional, Section,
    TransportSection,
};
use crate::error::{Error, Result};
use crate::gauge::{
    algebra_distance, commutator, su2_from_coeffs, CMatrix, ConnectionField, GroupTag,
    IntegratorOptions,
};
use crate::paths::{Loop, Path, Point};

/// SplitMix64: additive constant `0x9E3779B97F4B7C15`, mixing multipliers
/// `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`. Small, seedable, and
/// stable across platforms; every random draw in this module comes from it.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4B_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in [-1, 1).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    /// Uniform in 0..n by modular reduction (n is small here, so the
    /// reduction bias is negligible and determinism stays simple).
    pub fn next_below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// Parameters of the deterministic path sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    /// Base-space dimension of sampled points and paths.
    pub dim: usize,
    /// Inclusive bounds on the vertex count of a sampled path.
    pub min_vertices: usize,
    pub max_vertices: usize,
    /// Coordinates are uniform in `[-half_width, half_width)`.
    pub half_width: f64,
}

impl RandomSpec {
    pub fn new(seed: u64, dim: usize) -> Self {
        RandomSpec {
            seed,
            dim,
            min_vertices: 3,
            max_vertices: 12,
            half_width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::DimTooSmall { dim: 0, needed: 1 });
        }
        if self.min_vertices < 2 || self.max_vertices < self.min_vertices {
            return Err(Error::Invalid(
                "vertex bounds must satisfy 2 <= min <= max".into(),
            ));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::Invalid(
                "half_width must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// A `RandomSpec` plus its live generator state. All sampling helpers pull
/// from one stream so that a fixed call order reproduces fixed data.
#[derive(Debug, Clone)]
pub struct RandomStream {
    spec: RandomSpec,
    rng: SplitMix64,
}

impl RandomStream {
    pub fn new(spec: &RandomSpec) -> Self {
        spec.validate().expect("valid sampling spec");
        RandomStream {
            spec: spec.clone(),
            rng: SplitMix64::new(spec.seed),
        }
    }

    pub fn spec(&self) -> &RandomSpec {
        &self.spec
    }

    pub fn rng(&mut self) -> &mut SplitMix64 {
        &mut self.rng
    }

    /// Uniform point in the sampling box.
    pub fn point(&mut self) -> Point {
        let h = self.spec.half_width;
        let coords = (0..self.spec.dim)
            .map(|_| h * self.rng.next_symmetric())
            .collect();
        Point::new(coords).expect("finite sampled coordinates")
    }

    /// Uniform direction in the box, resampled until its length is at least
    /// 0.3 so difference quotients stay clear of the rounding floor.
    pub fn direction(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.spec.dim)
                .map(|_| self.spec.half_width * self.rng.next_symmetric())
                .collect();
            if v.iter().map(|c| c * c).sum::<f64>().sqrt() >= 0.3 {
                return v;
            }
        }
    }

    /// Random path from `base`: `count` vertices with `count` drawn from the
    /// spec's bounds. For `closed` the final vertex is `base` itself, so the
    /// loop closes exactly.
    pub fn path_from(&mut self, base: Point, closed: bool) -> Path {
        assert_eq!(
            base.dim(),
            self.spec.dim,
            "base dimension must match the spec"
        );
        let span = (self.spec.max_vertices - self.spec.min_vertices + 1) as u64;
        let count = self.spec.min_vertices + self.rng.next_below(span) as usize;
        let random = if closed { count - 1 } else { count };
        let mut vertices = Vec::with_capacity(count);
        for _ in 0..random {
            vertices.push(self.point());
        }
        if closed {
            vertices.push(base.clone());
        }
        Path::new(base, vertices).expect("sampled vertices share the spec dimension")
    }

    /// Random path from the origin.
    pub fn path(&mut self, closed: bool) -> Path {
        self.path_from(Point::origin(self.spec.dim), closed)
    }

    /// Random path from `from` to `to`: random interior vertices, exact
    /// final vertex.
    pub fn path_between(&mut self, from: Point, to: Point) -> Path {
        assert_eq!(from.dim(), self.spec.dim);
        assert_eq!(to.dim(), self.spec.dim);
        let span = (self.spec.max_vertices - self.spec.min_vertices + 1) as u64;
        let count = self.spec.min_vertices + self.rng.next_below(span) as usize;
        let mut vertices = Vec::with_capacity(count);
        for _ in 0..count - 1 {
            vertices.push(self.point());
        }
        vertices.push(to);
        Path::new(from, vertices).expect("sampled vertices share the spec dimension")
    }

    /// Random su(2) affine field on the spec's base dimension: every
    /// coefficient matrix is `su2_from_coeffs` of three uniform draws at the
    /// given scale, so membership in the algebra is exact.
    pub fn su2_field(&mut self, constant_scale: f64, linear_scale: f64) -> ConnectionField {
        let dim = self.spec.dim;
        let mut draw = |s: f64| {
            su2_from_coeffs(
                s * self.rng.next_symmetric(),
                s * self.rng.next_symmetric(),
                s * self.rng.next_symmetric(),
            )
        };
        let constant: Vec<CMatrix> = (0..dim).map(|_| draw(constant_scale)).collect();
        let linear: Vec<Vec<CMatrix>> = (0..dim)
            .map(|_| (0..dim).map(|_| draw(linear_scale)).collect())
            .collect();
        ConnectionField::new(GroupTag::Su2, dim, constant, linear)
            .expect("sampled matrices are exactly in the algebra")
    }
}

/// Deterministic random path for a spec: a fresh stream is consumed, so the
/// same spec always yields the same path.
pub fn random_path(spec: &RandomSpec, closed: bool) -> Path {
    RandomStream::new(spec).path(closed)
}

/// Pass thresholds of the identity suite, pinned in one place. Error
/// columns are Frobenius distances; `_rel` entries are relative to the
/// oracle norm (absolute below `REL_FLOOR`).
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTolerances {
    pub homomorphism: f64,
    pub inverse: f64,
    pub thin_invariance: f64,
    pub mandelstam_rel: f64,
    pub decomposition: f64,
    pub transport_vertical: f64,
    pub curvature_rel: f64,
    pub commutator_rel: f64,
    pub bianchi_analytic: f64,
    pub bianchi_numeric: f64,
    /// Accepted window for the observed order of first-derivative checks.
    pub order_min: f64,
    pub order_max: f64,
    /// Lower bound on the observed order of the loop derivative.
    pub curvature_order_min: f64,
    /// Antisymmetry defect may exceed the summed error estimates by at most
    /// this factor.
    pub antisymmetry_factor: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        SuiteTolerances {
            homomorphism: 1e-9,
            inverse: 1e-9,
            thin_invariance: 1e-9,
            mandelstam_rel: 1e-6,
            decomposition: 1e-6,
            transport_vertical: 1e-10,
            curvature_rel: 1e-4,
            commutator_rel: 1e-3,
            bianchi_analytic: 1e-12,
            bianchi_numeric: 1e-2,
            order_min: 1.8,
            order_max: 2.2,
            curvature_order_min: 1.8,
            antisymmetry_factor: 10.0,
        }
    }
}

impl SuiteTolerances {
    /// Override one threshold by its field name; used by tolerance files.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "homomorphism" => &mut self.homomorphism,
            "inverse" => &mut self.inverse,
            "thin_invariance" => &mut self.thin_invariance,
            "mandelstam_rel" => &mut self.mandelstam_rel,
            "decomposition" => &mut self.decomposition,
            "transport_vertical" => &mut self.transport_vertical,
            "curvature_rel" => &mut self.curvature_rel,
            "commutator_rel" => &mut self.commutator_rel,
            "bianchi_analytic" => &mut self.bianchi_analytic,
            "bianchi_numeric" => &mut self.bianchi_numeric,
            "order_min" => &mut self.order_min,
            "order_max" => &mut self.order_max,
            "curvature_order_min" => &mut self.curvature_order_min,
            "antisymmetry_factor" => &mut self.antisymmetry_factor,
            _ => return Err(Error::Invalid(format!("unknown tolerance key {key:?}"))),
        };
        *slot = value;
        Ok(())
    }
}

/// Oracle norms below this are compared absolutely instead of relatively.
pub const REL_FLOOR: f64 = 1e-9;

/// `|value - oracle| / |oracle|`, or the absolute distance when the oracle
/// is numerically zero.
pub fn relative_error(value: &CMatrix, oracle: &CMatrix) -> f64 {
    let diff = algebra_distance(value, oracle).expect("matching shapes");
    let denom = oracle.norm();
    if denom >= REL_FLOOR {
        diff / denom
    } else {
        diff
    }
}

/// Aggregated outcome of one identity over its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRecord {
    pub name: String,
    pub samples: usize,
    pub max_error: f64,
    pub mean_error: f64,
    /// Mean observed convergence order over samples where it was measurable;
    /// 0 for identities without an order notion.
    pub observed_order: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct RecordBuilder {
    name: &'static str,
    tolerance: f64,
    errors: Vec<f64>,
    orders: Vec<f64>,
    all_ok: bool,
}

impl RecordBuilder {
    fn new(name: &'static str, tolerance: f64) -> Self {
        RecordBuilder {
            name,
            tolerance,
            errors: Vec::new(),
            orders: Vec::new(),
            all_ok: true,
        }
    }

    fn push(&mut self, error: f64, ok: bool) {
        self.errors.push(error);
        self.all_ok &= ok;
    }

    fn push_order(&mut self, order: f64) {
        if order.is_finite() {
            self.orders.push(order);
        }
    }

    fn finish(self) -> IdentityRecord {
        let samples = self.errors.len();
        let max_error = self.errors.iter().cloned().fold(0.0, f64::max);
        let mean_error = if samples == 0 {
            0.0
        } else {
            self.errors.iter().sum::<f64>() / samples as f64
        };
        let observed_order = if self.orders.is_empty() {
            0.0
        } else {
            self.orders.iter().sum::<f64>() / self.orders.len() as f64
        };
        IdentityRecord {
            name: self.name.to_string(),
            samples,
            max_error,
            mean_error,
            observed_order,
            tolerance: self.tolerance,
            pass: self.all_ok,
        }
    }
}

/// Suite outcome; `pass` is the conjunction of all records.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub records: Vec<IdentityRecord>,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn assert_field_stream(field: &ConnectionField, stream: &RandomStream) {
    assert_eq!(
        field.dim(),
        stream.spec().dim,
        "field and sampler must share one base dimension"
    );
}

/// `W(a * b) = W(a) W(b)` over random composable pairs.
pub fn check_homomorphism(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let mut rec = RecordBuilder::new("homomorphism", tol);
    for _ in 0..samples {
        let a = stream.path(false);
        let b = stream.path_from(a.endpoint().clone(), false);
        let ab = a.compose(&b).expect("b starts at a's endpoint");
        let wa = field.holonomy(&a, opts).unwrap().0;
        let wb = field.holonomy(&b, opts).unwrap().0;
        let wab = field.holonomy(&ab, opts).unwrap().0;
        let err = algebra_distance(&(wa * wb), &wab).unwrap();
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// `W(a^-1) = W(a)^-1` over random paths.
pub fn check_inverse(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let mut rec = RecordBuilder::new("inverse", tol);
    for _ in 0..samples {
        let a = stream.path(false);
        let w = field.holonomy(&a, opts).unwrap().0;
        let w_rev = field.holonomy(&a.inverse(), opts).unwrap().0;
        let inv = w.try_inverse().expect("holonomy is invertible");
        let err = algebra_distance(&w_rev, &inv).unwrap();
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// Splits one segment at its midpoint and inserts an out-and-back spur at a
/// random traversal point: thin-equivalent to the input by construction.
fn thin_variant(stream: &mut RandomStream, path: &Path) -> Path {
    let pts: Vec<Point> = path.points().cloned().collect();
    let nseg = pts.len() - 1;
    let split_at = stream.rng.next_below(nseg as u64) as usize;
    let spur_at = stream.rng.next_below(pts.len() as u64) as usize;
    let spur_dir = stream.direction();
    let mut out: Vec<Point> = Vec::with_capacity(pts.len() + 3);
    for (i, p) in pts.iter().enumerate() {
        out.push(p.clone());
        if i == spur_at {
            out.push(p.add_scaled(&spur_dir, 0.25));
            out.push(p.clone());
        }
        if i == split_at {
            let next = &pts[i + 1];
            let mid: Vec<f64> = p
                .coords()
                .iter()
                .zip(next.coords())
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            out.push(Point::new(mid).expect("finite midpoint"));
        }
    }
    let base = out.remove(0);
    Path::new(base, out).expect("variant vertices share the dimension")
}

/// Holonomy is unchanged under retrace insertion and segment splitting.
pub fn check_thin_invariance(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let mut rec = RecordBuilder::new("thin_invariance", tol);
    for _ in 0..samples {
        let a = stream.path(false);
        let b = thin_variant(stream, &a);
        debug_assert!(a.thin_equal(&b).unwrap());
        let wa = field.holonomy(&a, opts).unwrap().0;
        let wb = field.holonomy(&b, opts).unwrap().0;
        let err = algebra_distance(&wa, &wb).unwrap();
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// Endpoint-extension derivative of holonomy against the closed form
/// `W(pi) A_v(endpoint)`, plus the observed-order window.
pub fn check_mandelstam(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tols: &SuiteTolerances,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let mut rec = RecordBuilder::new("mandelstam", tols.mandelstam_rel);
    for _ in 0..samples {
        let pi = stream.path(false);
        let v = stream.direction();
        let d = mandelstam_derivative(&f, &pi, &v, scheme).unwrap();
        let w = field.holonomy(&pi, opts).unwrap().0;
        let d_mat = field.matrix_dim();
        let mut a_v = CMatrix::zeros(d_mat, d_mat);
        for (mu, c) in v.iter().enumerate() {
            if *c != 0.0 {
                a_v += field.eval_field(pi.endpoint(), mu + 1).unwrap().0.scale(*c);
            }
        }
        let oracle = w * a_v;
        let err = relative_error(&d.value, &oracle);
        // A vanishing quotient difference leaves the order unmeasured (NaN);
        // the window only applies where convergence is visible.
        let order_ok = d.est_order.is_nan()
            || (d.est_order >= tols.order_min && d.est_order <= tols.order_max);
        rec.push(err, err <= tols.mandelstam_rel && order_ok);
        rec.push_order(d.est_order);
    }
    rec.finish()
}

/// Derivative along an arc section splits into the endpoint-extension part
/// plus the vertical connection terms.
pub fn check_decomposition_arc(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let dim = field.dim();
    let origin = Point::origin(dim);
    let mut rec = RecordBuilder::new("decomposition_arc", tol);
    for _ in 0..samples {
        let center = loop {
            let x = stream.point();
            let len: f64 = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
            if len >= 0.3 {
                break x;
            }
        };
        let s = ArcSection::between(origin.clone(), center, 1.0).unwrap();
        let v = stream.direction();
        let total = section_derivative(&f, &s, &v, scheme).unwrap().value;
        let stem = s.path_to(s.center());
        let mut rhs = mandelstam_derivative(&f, &stem, &v, scheme).unwrap().value;
        for (mu, c) in v.iter().enumerate() {
            if *c != 0.0 {
                rhs += connection_derivative(&f, &s, mu + 1, scheme)
                    .unwrap()
                    .value
                    .scale(*c);
            }
        }
        let err = relative_error(&total, &rhs);
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// On transport sections the vertical term cancels thinly; its derivative
/// must vanish to integrator accuracy.
pub fn check_decomposition_transport(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let dim = field.dim();
    let mut rec = RecordBuilder::new("decomposition_transport", tol);
    for _ in 0..samples {
        let stem = stream.path(false);
        let s = TransportSection::new(stem, 1.0).unwrap();
        let mut worst = 0.0f64;
        for mu in 1..=dim {
            let d = connection_derivative(&f, &s, mu, scheme).unwrap();
            worst = worst.max(d.value.norm());
        }
        rec.push(worst, worst <= tol);
    }
    rec.finish()
}

fn distinct_axes(stream: &mut RandomStream, dim: usize) -> (usize, usize) {
    let mu = 1 + stream.rng.next_below(dim as u64) as usize;
    loop {
        let nu = 1 + stream.rng.next_below(dim as u64) as usize;
        if nu != mu {
            return (mu, nu);
        }
    }
}

/// Loop derivative of holonomy against the conjugated field strength
/// `W(pi) F_mu_nu(x) W(pi)^-1 W(gamma)`.
pub fn check_curvature(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tols: &SuiteTolerances,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let dim = field.dim();
    let mut rec = RecordBuilder::new("curvature", tols.curvature_rel);
    for _ in 0..samples {
        let pi = stream.path(false);
        let gamma = Loop::new(stream.path(true)).expect("sampled loop closes exactly");
        let (mu, nu) = distinct_axes(stream, dim);
        let u = axis_vector(dim, mu).unwrap();
        let v = axis_vector(dim, nu).unwrap();
        let d = loop_derivative(&f, &pi, &gamma, &u, &v, scheme).unwrap();
        let w = field.holonomy(&pi, opts).unwrap().0;
        let w_gamma = field.holonomy(gamma.path(), opts).unwrap().0;
        let fs = field.field_strength(pi.endpoint(), mu, nu).unwrap().0;
        let oracle = &w * fs * w.try_inverse().unwrap() * w_gamma;
        let err = relative_error(&d.value, &oracle);
        let order_ok = d.est_order.is_nan() || d.est_order >= tols.curvature_order_min;
        rec.push(err, err <= tols.curvature_rel && order_ok);
        rec.push_order(d.est_order);
    }
    rec.finish()
}

/// Swapping the parallelogram directions flips the sign; the defect must be
/// explained by the reported error estimates (times a fixed headroom
/// factor). The recorded error is the defect in units of the estimates.
pub fn check_loop_antisymmetry(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    factor: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let dim = field.dim();
    let mut rec = RecordBuilder::new("loop_antisymmetry", factor);
    for _ in 0..samples {
        let pi = stream.path(false);
        let gamma = Loop::constant(pi.base().clone());
        let (mu, nu) = distinct_axes(stream, dim);
        let u = axis_vector(dim, mu).unwrap();
        let v = axis_vector(dim, nu).unwrap();
        let a = loop_derivative(&f, &pi, &gamma, &u, &v, scheme).unwrap();
        let b = loop_derivative(&f, &pi, &gamma, &v, &u, scheme).unwrap();
        let defect = (&a.value + &b.value).norm();
        // The extrapolation estimates only see truncation. The defect bottoms
        // out at the rounding floor of the second-difference quotients
        // (~1e-16 entry noise / 4 eps^2 at eps = 2.5e-3, times the
        // extrapolation weights), so that floor enters the budget additively.
        let budget = a.est_error + b.est_error + 1e-10;
        let ratio = defect / budget;
        rec.push(ratio, ratio <= factor);
    }
    rec.finish()
}

/// The commutator of endpoint-extension derivatives equals the loop
/// derivative. The functional carries a fixed right factor (the transport
/// of the return leg), so both routes target `W(pi) F_mu_nu(x) W(chi)`.
pub fn check_commutator(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    assert_field_stream(field, stream);
    let f = HolonomyFunctional::new(field, *opts);
    let dim = field.dim();
    let d_mat = field.matrix_dim();
    let origin = Point::origin(dim);
    let mut rec = RecordBuilder::new("commutator", tol);
    for _ in 0..samples {
        let pi = stream.path(false);
        let chi = stream.path_between(pi.endpoint().clone(), origin.clone());
        let (mu, nu) = distinct_axes(stream, dim);
        let w_chi = field.holonomy(&chi, opts).unwrap().0;
        let h = FnFunctional::new(d_mat, d_mat, |p: &Path| f.eval(p) * &w_chi);
        let c = crate::calculus::commutator_mandelstam(&h, &pi, mu, nu, scheme).unwrap();
        let gamma = Loop::new(pi.compose(&chi).unwrap()).expect("chi returns to the base");
        let u = axis_vector(dim, mu).unwrap();
        let v = axis_vector(dim, nu).unwrap();
        let l = loop_derivative(&f, &pi, &gamma, &u, &v, scheme).unwrap();
        let err = relative_error(&c.value, &l.value);
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// Exact cyclic identity of the affine field strength:
/// `sum_cyc ( d_mu F_nu_xi + [A_mu, F_nu_xi] ) = 0`, evaluated in closed
/// form. Returns the Frobenius norm of the cyclic sum at `x`.
pub fn bianchi_analytic(
    field: &ConnectionField,
    x: &Point,
    mu: usize,
    nu: usize,
    xi: usize,
) -> Result<f64> {
    if field.dim() < 3 {
        return Err(Error::DimTooSmall {
            dim: field.dim(),
            needed: 3,
        });
    }
    if mu == nu || nu == xi || mu == xi {
        return Err(Error::Invalid(
            "directions must be pairwise distinct".into(),
        ));
    }
    let lin = field.linear_matrices();
    let d = field.matrix_dim();
    let mut total = CMatrix::zeros(d, d);
    for (m, n, s) in [(mu, nu, xi), (nu, xi, mu), (xi, mu, nu)] {
        let a_m = field.eval_field(x, m)?.0;
        let a_n = field.eval_field(x, n)?.0;
        let a_s = field.eval_field(x, s)?.0;
        let f_ns = field.field_strength(x, n, s)?.0;
        // d_m F_n_s for an affine field: [D_n_m, A_s] + [A_n, D_s_m].
        total += commutator(&lin[n - 1][m - 1], &a_s)
            + commutator(&a_n, &lin[s - 1][m - 1])
            + commutator(&a_m, &f_ns);
    }
    Ok(total.norm())
}

/// Numeric cyclic identity: the endpoint-extension derivative of the loop
/// derivative, summed cyclically over three axes, vanishes. Returns the
/// Frobenius norm of the cyclic sum at the endpoint of `pi`.
pub fn bianchi_numeric(
    field: &ConnectionField,
    pi: &Path,
    mu: usize,
    nu: usize,
    xi: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
) -> Result<f64> {
    if field.dim() < 3 {
        return Err(Error::DimTooSmall {
            dim: field.dim(),
            needed: 3,
        });
    }
    if mu == nu || nu == xi || mu == xi {
        return Err(Error::Invalid(
            "directions must be pairwise distinct".into(),
        ));
    }
    scheme.validate()?;
    if pi.dim() != field.dim() {
        return Err(Error::DimMismatch(pi.dim(), field.dim()));
    }
    let dim = field.dim();
    let d_mat = field.matrix_dim();
    let f = HolonomyFunctional::new(field, *opts);
    let mut total = CMatrix::zeros(d_mat, d_mat);
    for (m, n, s) in [(mu, nu, xi), (nu, xi, mu), (xi, mu, nu)] {
        let e_m = axis_vector(dim, m)?;
        let e_n = axis_vector(dim, n)?;
        let e_s = axis_vector(dim, s)?;
        let inner = FnFunctional::new(d_mat, d_mat, |p: &Path| {
            let gamma = Loop::constant(p.base().clone());
            loop_derivative(&f, p, &gamma, &e_n, &e_s, scheme)
                .expect("probe paths stay well-formed")
                .value
        });
        total += mandelstam_derivative(&inner, pi, &e_m, scheme)?.value;
    }
    Ok(total.norm())
}

fn check_bianchi_analytic(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    tol: f64,
) -> IdentityRecord {
    let dim = field.dim();
    let mut rec = RecordBuilder::new("bianchi_analytic", tol);
    for _ in 0..samples {
        let x = stream.point();
        let mu = 1 + stream.rng.next_below(dim as u64) as usize;
        let (nu, xi) = loop {
            let (a, b) = distinct_axes(stream, dim);
            if a != mu && b != mu {
                break (a, b);
            }
        };
        let err = bianchi_analytic(field, &x, mu, nu, xi).unwrap();
        rec.push(err, err <= tol);
    }
    rec.finish()
}

fn check_bianchi_numeric(
    field: &ConnectionField,
    stream: &mut RandomStream,
    samples: usize,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tol: f64,
) -> IdentityRecord {
    let dim = field.dim();
    let mut rec = RecordBuilder::new("bianchi_numeric", tol);
    for _ in 0..samples {
        let pi = stream.path(false);
        let mu = 1 + stream.rng.next_below(dim as u64) as usize;
        let (nu, xi) = loop {
            let (a, b) = distinct_axes(stream, dim);
            if a != mu && b != mu {
                break (a, b);
            }
        };
        let err = bianchi_numeric(field, &pi, mu, nu, xi, scheme, opts).unwrap();
        rec.push(err, err <= tol);
    }
    rec.finish()
}

/// Runs every identity check against one field with deterministic sampling.
/// `trials` scales the cheap checks directly; the expensive nested-operator
/// checks are capped (5 for commutator and antisymmetry, 2 for the numeric
/// cyclic identity). Fields on fewer than 3 base dimensions skip the cyclic
/// identities with a note.
pub fn run_identity_suite(
    field: &ConnectionField,
    spec: &RandomSpec,
    scheme: &FdScheme,
    opts: &IntegratorOptions,
    tols: &SuiteTolerances,
    trials: usize,
) -> Result<VerificationReport> {
    spec.validate()?;
    scheme.validate()?;
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    if field.dim() != spec.dim {
        return Err(Error::DimMismatch(field.dim(), spec.dim));
    }
    if spec.dim < 2 {
        return Err(Error::DimTooSmall {
            dim: spec.dim,
            needed: 2,
        });
    }
    let mut stream = RandomStream::new(spec);
    let small = trials.min(5);
    let tiny = trials.min(2);
    let mut records = vec![
        check_homomorphism(field, &mut stream, trials, opts, tols.homomorphism),
        check_inverse(field, &mut stream, trials, opts, tols.inverse),
        check_thin_invariance(field, &mut stream, trials, opts, tols.thin_invariance),
        check_mandelstam(field, &mut stream, trials, scheme, opts, tols),
        check_decomposition_arc(field, &mut stream, trials, scheme, opts, tols.decomposition),
        check_decomposition_transport(
            field,
            &mut stream,
            trials,
            scheme,
            opts,
            tols.transport_vertical,
        ),
        check_curvature(field, &mut stream, trials, scheme, opts, tols),
        check_loop_antisymmetry(
            field,
            &mut stream,
            small,
            scheme,
            opts,
            tols.antisymmetry_factor,
        ),
        check_commutator(field, &mut stream, small, scheme, opts, tols.commutator_rel),
    ];
    let mut notes = Vec::new();
    if field.dim() >= 3 {
        records.push(check_bianchi_analytic(
            field,
            &mut stream,
            trials,
            tols.bianchi_analytic,
        ));
        records.push(check_bianchi_numeric(
            field,
            &mut stream,
            tiny,
            scheme,
            opts,
            tols.bianchi_numeric,
        ));
    } else {
        notes.push("cyclic identities need dim >= 3; skipped".to_string());
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(VerificationReport {
        records,
        notes,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_matches_the_reference_sequence() {
        // Frozen against an independent C implementation of the generator.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0x09aa_b36c_fda2_d1b3);
        assert_eq!(r.next_u64(), 0x5b00_c671_9759_0451);
        assert_eq!(r.next_u64(), 0x0eb2_afb5_7f7f_9972);
        let mut r = SplitMix64::new(42);
        assert_eq!(r.next_u64(), 0x5daf_dc09_9d0f_6cae);
        assert_eq!(r.next_u64(), 0x474f_5acd_566c_57c9);
        assert_eq!(r.next_u64(), 0x35c1_0ae5_31e3_5299);
        let mut r = SplitMix64::new(42);
        assert_eq!(r.next_unit(), 0.36596465334610928);
    }

    #[test]
    fn random_paths_are_deterministic() {
        let spec = RandomSpec::new(7, 2);
        let a = random_path(&spec, false);
        let b = random_path(&spec, false);
        assert_eq!(a, b);
        let mut s1 = RandomStream::new(&spec);
        let mut s2 = RandomStream::new(&spec);
        for _ in 0..5 {
            assert_eq!(s1.path(true), s2.path(true));
        }
    }

    #[test]
    fn random_paths_respect_the_spec() {
        let spec = RandomSpec::new(3, 4);
        let mut stream = RandomStream::new(&spec);
        for i in 0..50 {
            let closed = i % 2 == 0;
            let p = stream.path(closed);
            assert_eq!(p.dim(), 4);
            let n = p.vertices().len();
            assert!((3..=12).contains(&n), "vertex count {n}");
            for v in p.vertices() {
                for c in v.coords() {
                    assert!((-1.0..1.0).contains(c));
                }
            }
            if closed {
                assert_eq!(p.endpoint().coords(), p.base().coords());
            }
        }
    }

    #[test]
    fn suite_passes_on_the_su2_reference_field() {
        let field = ConnectionField::reference_su2();
        let spec = RandomSpec::new(11, 3);
        let report = run_identity_suite(
            &field,
            &spec,
            &FdScheme::default(),
            &IntegratorOptions::default(),
            &SuiteTolerances::default(),
            2,
        )
        .unwrap();
        let names: Vec<&str> = report.records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "homomorphism",
                "inverse",
                "thin_invariance",
                "mandelstam",
                "decomposition_arc",
                "decomposition_transport",
                "curvature",
                "loop_antisymmetry",
                "commutator",
                "bianchi_analytic",
                "bianchi_numeric",
            ]
        );
        for r in &report.records {
            assert!(
                r.pass,
                "{} failed: max {:.3e} tol {:.3e}",
                r.name, r.max_error, r.tolerance
            );
        }
        assert!(report.pass);
        assert!(report.notes.is_empty());
    }

    #[test]
    fn suite_skips_cyclic_identities_in_two_dimensions() {
        let field = ConnectionField::reference_u1(1.0);
        let spec = RandomSpec::new(5, 2);
        let report = run_identity_suite(
            &field,
            &spec,
            &FdScheme::default(),
            &IntegratorOptions::default(),
            &SuiteTolerances::default(),
            2,
        )
        .unwrap();
        assert_eq!(report.records.len(), 9);
        assert_eq!(report.notes.len(), 1);
        assert!(report.pass, "u1 suite failed");
    }

    #[test]
    fn suite_is_reproducible() {
        let field = ConnectionField::reference_u1(0.5);
        let spec = RandomSpec::new(9, 2);
        let run = || {
            run_identity_suite(
                &field,
                &spec,
                &FdScheme::default(),
                &IntegratorOptions::default(),
                &SuiteTolerances::default(),
                2,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn suite_validates_inputs() {
        let field = ConnectionField::reference_u1(1.0);
        let spec = RandomSpec::new(1, 3);
        let r = run_identity_suite(
            &field,
            &spec,
            &FdScheme::default(),
            &IntegratorOptions::default(),
            &SuiteTolerances::default(),
            1,
        );
        assert!(matches!(r, Err(Error::DimMismatch(2, 3))));
    }

    #[test]
    fn impossible_tolerance_fails_the_report() {
        let field = ConnectionField::reference_u1(1.0);
        let spec = RandomSpec::new(2, 2);
        let mut tols = SuiteTolerances::default();
        tols.set("mandelstam_rel", 0.0).unwrap();
        let report = run_identity_suite(
            &field,
            &spec,
            &FdScheme::default(),
            &IntegratorOptions::default(),
            &tols,
            1,
        )
        .unwrap();
        assert!(!report.pass);
        let rec = report
            .records
            .iter()
            .find(|r| r.name == "mandelstam")
            .unwrap();
        assert!(!rec.pass);
        assert!(matches!(
            tols.set("no_such_key", 1.0),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn cyclic_identity_is_exact_for_affine_fields() {
        let field = ConnectionField::reference_su2();
        let spec = RandomSpec::new(21, 3);
        let mut stream = RandomStream::new(&spec);
        for _ in 0..20 {
            let x = stream.point();
            let err = bianchi_analytic(&field, &x, 1, 2, 3).unwrap();
            assert!(err < 1e-13, "residual {err:.3e}");
        }
        let random = stream.su2_field(0.5, 0.2);
        let x = stream.point();
        assert!(bianchi_analytic(&random, &x, 3, 1, 2).unwrap() < 1e-13);
    }

    #[test]
    fn cyclic_identity_rejects_bad_inputs() {
        let field = ConnectionField::reference_u1(1.0);
        let x = Point::origin(2);
        assert!(matches!(
            bianchi_analytic(&field, &x, 1, 2, 3),
            Err(Error::DimTooSmall { .. })
        ));
        let su2 = ConnectionField::reference_su2();
        let y = Point::origin(3);
        assert!(matches!(
            bianchi_analytic(&su2, &y, 1, 2, 2),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn order_column_is_zero_when_unmeasurable() {
        // The zero field makes every quotient difference sit at the rounding
        // floor, so no order is observed and the window must not fail.
        let field = ConnectionField::zero(GroupTag::Su2, 3).unwrap();
        let spec = RandomSpec::new(4, 3);
        let mut stream = RandomStream::new(&spec);
        let rec = check_mandelstam(
            &field,
            &mut stream,
            1,
            &FdScheme::default(),
            &IntegratorOptions::default(),
            &SuiteTolerances::default(),
        );
        assert!(rec.pass, "max error {:.3e}", rec.max_error);
        assert_eq!(rec.observed_order, 0.0);
    }
}
