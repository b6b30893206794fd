//! Connection fields on R^n with values in a matrix Lie algebra, and the
//! holonomy of piecewise-linear paths.
//!
//! Fields are affine in the coordinates: `A_mu(x) = C_mu + sum_nu D_mu_nu x^nu`.
//! Holonomy solves `dW/ds = W(s) * A_mu(x(s)) * dx^mu/ds` per segment with
//! classical fixed-step RK4, so composition of paths maps to right-ordered
//! products of segment transports: `W(a * b) = W(a) * W(b)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::paths::{Path, Point};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for algebra/group membership checks on programmatic
/// construction. File loaders pass a looser tolerance explicitly.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Structure group of a connection. `Gl(d)` carries no metric constraint;
/// `U1` and `Su2` have anti-Hermitian algebras and unitary holonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupTag {
    U1,
    Su2,
    Gl(usize),
}

impl GroupTag {
    pub fn matrix_dim(self) -> usize {
        match self {
            GroupTag::U1 => 1,
            GroupTag::Su2 => 2,
            GroupTag::Gl(d) => d,
        }
    }

    /// Whether holonomy lies in a unitary group (and may be re-projected).
    pub fn is_unitary(self) -> bool {
        !matches!(self, GroupTag::Gl(_))
    }
}

impl std::fmt::Display for GroupTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupTag::U1 => write!(f, "u1"),
            GroupTag::Su2 => write!(f, "su2"),
            GroupTag::Gl(d) => write!(f, "gl {d}"),
        }
    }
}

/// Lie-algebra value: anti-Hermitian for `U1`/`Su2`, traceless for `Su2`,
/// unconstrained for `Gl`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement(pub CMatrix);

impl AlgebraElement {
    pub fn zero(tag: GroupTag) -> Self {
        let d = tag.matrix_dim();
        AlgebraElement(CMatrix::zeros(d, d))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn validate(&self, tag: GroupTag, tol: f64) -> Result<()> {
        check_algebra(&self.0, tag, tol)
    }
}

/// Group value: unitary (det 1 for `Su2`) or invertible for `Gl`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(pub CMatrix);

impl GroupElement {
    pub fn identity(tag: GroupTag) -> Self {
        let d = tag.matrix_dim();
        GroupElement(CMatrix::identity(d, d))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn validate(&self, tag: GroupTag, tol: f64) -> Result<()> {
        check_group(&self.0, tag, tol)
    }
}

fn expect_square(m: &CMatrix, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::ShapeMismatch(m.nrows(), m.ncols(), d, d));
    }
    Ok(())
}

/// Membership test for the Lie algebra of `tag`. The tolerance is relative
/// with an absolute floor of 1: `|X + X^H| <= tol * (1 + |X|)`.
pub fn check_algebra(m: &CMatrix, tag: GroupTag, tol: f64) -> Result<()> {
    let d = tag.matrix_dim();
    expect_square(m, d)?;
    if matches!(tag, GroupTag::Gl(_)) {
        return Ok(());
    }
    let scale = 1.0 + m.norm();
    let anti = (m + m.adjoint()).norm();
    if anti > tol * scale {
        return Err(Error::Invalid(format!(
            "matrix is not anti-Hermitian: |X + X^H| = {anti:.3e}"
        )));
    }
    if tag == GroupTag::Su2 {
        let tr = m.trace().norm();
        if tr > tol * scale {
            return Err(Error::Invalid(format!(
                "matrix is not traceless: |tr| = {tr:.3e}"
            )));
        }
    }
    Ok(())
}

/// Membership test for the group of `tag`: unitarity within `tol`, unit
/// determinant for `Su2`, invertibility for `Gl`.
pub fn check_group(m: &CMatrix, tag: GroupTag, tol: f64) -> Result<()> {
    let d = tag.matrix_dim();
    expect_square(m, d)?;
    if tag.is_unitary() {
        let defect = (m.adjoint() * m - CMatrix::identity(d, d)).norm();
        if defect > tol * (1.0 + m.norm()) {
            return Err(Error::Invalid(format!(
                "matrix is not unitary: |U^H U - I| = {defect:.3e}"
            )));
        }
        if tag == GroupTag::Su2 {
            let det = m.determinant();
            if (det - Complex64::new(1.0, 0.0)).norm() > tol * (1.0 + m.norm()) {
                return Err(Error::Invalid(format!("determinant {det} is not 1")));
            }
        }
    } else if m.clone().try_inverse().is_none() {
        return Err(Error::Invalid("matrix is singular".into()));
    }
    Ok(())
}

/// Frobenius distance between two same-shaped matrices.
pub fn algebra_distance(x: &CMatrix, y: &CMatrix) -> Result<f64> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
        ));
    }
    Ok((x - y).norm())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `i (a s1 + b s2 + c s3)` for the Pauli matrices `s1, s2, s3`: the general
/// element of the su(2) algebra with real coefficients.
pub fn su2_from_coeffs(a: f64, b: f64, c: f64) -> CMatrix {
    let i = Complex64::i();
    CMatrix::from_row_slice(2, 2, &[i * c, i * a + b, i * a - b, -i * c])
}

/// Fixed-step integration controls for `ConnectionField::holonomy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// RK4 substeps per polyline segment.
    pub steps_per_segment: usize,
    /// Project onto the unitary group after every substep (no-op for `Gl`).
    pub reunitarize: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            steps_per_segment: 64,
            reunitarize: true,
        }
    }
}

/// Affine connection field `A_mu(x) = C_mu + sum_nu D_mu_nu x^nu` on R^n.
/// Direction indices `mu`, `nu` in the public operations are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionField {
    group: GroupTag,
    dim: usize,
    constant: Vec<CMatrix>,
    linear: Vec<Vec<CMatrix>>,
}

impl ConnectionField {
    /// The zero field: every holonomy is the identity.
    pub fn zero(group: GroupTag, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimTooSmall { dim: 0, needed: 1 });
        }
        let d = group.matrix_dim();
        if d == 0 {
            return Err(Error::Invalid("matrix dimension must be positive".into()));
        }
        Ok(ConnectionField {
            group,
            dim,
            constant: vec![CMatrix::zeros(d, d); dim],
            linear: vec![vec![CMatrix::zeros(d, d); dim]; dim],
        })
    }

    /// Builds a field from explicit coefficient matrices, checking shapes and
    /// algebra membership at the given tolerance. `constant[m]` is `C_{m+1}`
    /// and `linear[m][n]` is `D_{m+1,n+1}`.
    pub fn with_matrices(
        group: GroupTag,
        dim: usize,
        constant: Vec<CMatrix>,
        linear: Vec<Vec<CMatrix>>,
        tol: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimTooSmall { dim: 0, needed: 1 });
        }
        if constant.len() != dim {
            return Err(Error::DimMismatch(constant.len(), dim));
        }
        if linear.len() != dim {
            return Err(Error::DimMismatch(linear.len(), dim));
        }
        for m in &constant {
            check_algebra(m, group, tol)?;
        }
        for row in &linear {
            if row.len() != dim {
                return Err(Error::DimMismatch(row.len(), dim));
            }
            for m in row {
                check_algebra(m, group, tol)?;
            }
        }
        Ok(ConnectionField {
            group,
            dim,
            constant,
            linear,
        })
    }

    pub fn new(
        group: GroupTag,
        dim: usize,
        constant: Vec<CMatrix>,
        linear: Vec<Vec<CMatrix>>,
    ) -> Result<Self> {
        Self::with_matrices(group, dim, constant, linear, ALGEBRA_TOL)
    }

    /// Uniform magnetic field of strength `b` on R^2 in the symmetric gauge:
    /// `A_1 = -i b x_2 / 2`, `A_2 = i b x_1 / 2`, so `F_12 = i b`.
    pub fn reference_u1(b: f64) -> Self {
        let z = CMatrix::zeros(1, 1);
        let half = |s: f64| CMatrix::from_element(1, 1, Complex64::new(0.0, s));
        ConnectionField {
            group: GroupTag::U1,
            dim: 2,
            constant: vec![z.clone(), z.clone()],
            linear: vec![vec![z.clone(), half(-b / 2.0)], vec![half(b / 2.0), z]],
        }
    }

    /// A fixed non-commuting su(2) field on R^3 with nonzero constant and
    /// linear parts; curvature picks up both derivative and commutator terms.
    /// Coefficients are small enough that unit-scale segments stay well
    /// within the accuracy of the default integrator settings.
    pub fn reference_su2() -> Self {
        let z = || CMatrix::zeros(2, 2);
        let constant = vec![
            su2_from_coeffs(0.15, 0.0, 0.0),
            su2_from_coeffs(0.0, 0.12, 0.0),
            su2_from_coeffs(0.0, 0.0, 0.10),
        ];
        let linear = vec![
            vec![
                z(),
                su2_from_coeffs(0.0, 0.0, 0.06),
                su2_from_coeffs(0.04, 0.0, 0.0),
            ],
            vec![
                su2_from_coeffs(0.0, 0.0, -0.05),
                z(),
                su2_from_coeffs(0.0, 0.03, 0.0),
            ],
            vec![
                su2_from_coeffs(0.0, 0.02, 0.0),
                su2_from_coeffs(0.05, 0.0, 0.0),
                z(),
            ],
        ];
        ConnectionField {
            group: GroupTag::Su2,
            dim: 3,
            constant,
            linear,
        }
    }

    pub fn group(&self) -> GroupTag {
        self.group
    }

    /// Base-space dimension n.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fibre matrix dimension d.
    pub fn matrix_dim(&self) -> usize {
        self.group.matrix_dim()
    }

    /// Constant parts `C_mu`, 0-indexed by direction.
    pub fn constant_matrices(&self) -> &[CMatrix] {
        &self.constant
    }

    /// Linear parts `D_mu_nu`, 0-indexed: `linear_matrices()[m][n]` couples
    /// component `A_{m+1}` to coordinate `x^{n+1}`.
    pub fn linear_matrices(&self) -> &[Vec<CMatrix>] {
        &self.linear
    }

    fn check_direction(&self, mu: usize) -> Result<usize> {
        if mu == 0 || mu > self.dim {
            return Err(Error::IndexOutOfRange {
                index: mu,
                dim: self.dim,
            });
        }
        Ok(mu - 1)
    }

    /// Component `A_mu(x)`; `mu` is 1-based.
    pub fn eval_field(&self, x: &Point, mu: usize) -> Result<AlgebraElement> {
        if x.dim() != self.dim {
            return Err(Error::DimMismatch(x.dim(), self.dim));
        }
        let m = self.check_direction(mu)?;
        let mut a = self.constant[m].clone();
        for (n, c) in x.coords().iter().enumerate() {
            if *c != 0.0 {
                a += self.linear[m][n].scale(*c);
            }
        }
        Ok(AlgebraElement(a))
    }

    /// Curvature `F_mu_nu(x) = d_mu A_nu - d_nu A_mu + [A_mu, A_nu](x)`.
    /// For an affine field the derivative part is exact: `d_mu A_nu = D_nu_mu`.
    pub fn field_strength(&self, x: &Point, mu: usize, nu: usize) -> Result<AlgebraElement> {
        let m = self.check_direction(mu)?;
        let n = self.check_direction(nu)?;
        let a_mu = self.eval_field(x, mu)?;
        let a_nu = self.eval_field(x, nu)?;
        let f = &self.linear[n][m] - &self.linear[m][n] + commutator(&a_mu.0, &a_nu.0);
        Ok(AlgebraElement(f))
    }

    /// Integrand pieces for one segment `x(s) = a + s (b - a)`, `s in [0,1]`:
    /// `B(s) = A_mu(x(s)) dx^mu/ds` is affine in `s`, returned as `(P, Q)`
    /// with `B(s) = P + s Q`.
    fn segment_integrand(&self, a: &Point, b: &Point) -> (CMatrix, CMatrix) {
        let d = self.matrix_dim();
        let step = b.sub(a);
        let mut p = CMatrix::zeros(d, d);
        let mut q = CMatrix::zeros(d, d);
        for (m, dm) in step.iter().enumerate() {
            if *dm == 0.0 {
                continue;
            }
            p += self.constant[m].scale(*dm);
            for (n, an) in a.coords().iter().enumerate() {
                if *an != 0.0 {
                    p += self.linear[m][n].scale(dm * an);
                }
            }
            for (n, dn) in step.iter().enumerate() {
                if *dn != 0.0 {
                    q += self.linear[m][n].scale(dm * dn);
                }
            }
        }
        (p, q)
    }

    /// Parallel transport along `path`: the path-ordered exponential of the
    /// field, one RK4 substep sequence per polyline segment, with factors
    /// ordered left to right in traversal order.
    pub fn holonomy(&self, path: &Path, opts: &IntegratorOptions) -> Result<GroupElement> {
        if path.dim() != self.dim {
            return Err(Error::DimMismatch(path.dim(), self.dim));
        }
        if opts.steps_per_segment == 0 {
            return Err(Error::Invalid(
                "steps_per_segment must be at least 1".into(),
            ));
        }
        let d = self.matrix_dim();
        let mut w = CMatrix::identity(d, d);
        let project = opts.reunitarize && self.group.is_unitary();
        for (a, b) in path.segments() {
            let (p, q) = self.segment_integrand(a, b);
            let n = opts.steps_per_segment;
            let h = 1.0 / n as f64;
            let eval = |s: f64| &p + q.scale(s);
            for k in 0..n {
                let s0 = k as f64 * h;
                let b0 = eval(s0);
                let bm = eval(s0 + 0.5 * h);
                let b1 = eval(s0 + h);
                let k1 = &w * &b0;
                let k2 = (&w + k1.scale(0.5 * h)) * &bm;
                let k3 = (&w + k2.scale(0.5 * h)) * &bm;
                let k4 = (&w + k3.scale(h)) * &b1;
                w += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
                if project {
                    w = unitarize(w, self.group);
                }
            }
        }
        Ok(GroupElement(w))
    }
}

/// Nearest unitary (polar factor) via Newton iteration, with determinant
/// normalization for `Su2`. Input must be close to the group; holonomy
/// substeps deviate by O(h^5) per call.
fn unitarize(m: CMatrix, tag: GroupTag) -> CMatrix {
    match tag {
        GroupTag::U1 => {
            let z = m[(0, 0)];
            let r = z.norm();
            if r == 0.0 {
                return m;
            }
            CMatrix::from_element(1, 1, z / r)
        }
        GroupTag::Su2 => {
            let d = m.nrows();
            let id = CMatrix::identity(d, d);
            let mut u = m;
            for _ in 0..12 {
                let defect = (u.adjoint() * &u - &id).norm();
                if defect <= 1e-14 {
                    break;
                }
                let inv_adj = match u.adjoint().try_inverse() {
                    Some(x) => x,
                    None => break,
                };
                u = (&u + inv_adj).scale(0.5);
            }
            let det = u.determinant();
            if det.norm() > 0.0 {
                let root = det.sqrt();
                u = u.map(|z| z / root);
            }
            u
        }
        GroupTag::Gl(_) => m,
    }
}
