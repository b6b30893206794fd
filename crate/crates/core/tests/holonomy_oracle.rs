//! Holonomy accuracy against closed-form oracles that bypass the integrator:
//! the abelian midpoint line integral, the constant-field matrix
//! exponential, and invariance under inserting collinear vertices.

use loopcalc_core::gauge::{
    su2_from_coeffs, CMatrix, ConnectionField, GroupTag, IntegratorOptions,
};
use loopcalc_core::paths::{Path, Point};
use loopcalc_core::verify::{RandomSpec, RandomStream, SplitMix64};
use num_complex::Complex64;

/// For a commuting (1x1) field the ordered product collapses to
/// `exp(sum_mu int A_mu dx^mu)`; the integrand is affine along a straight
/// segment, so the midpoint value integrates it exactly.
fn abelian_oracle(c: &[Complex64], d: &[Vec<Complex64>], path: &Path) -> Complex64 {
    let dim = c.len();
    let mut phase = Complex64::new(0.0, 0.0);
    for (p, q) in path.segments() {
        let pc = p.coords();
        let qc = q.coords();
        for mu in 0..dim {
            let mut a = c[mu];
            for nu in 0..dim {
                a += d[mu][nu] * (0.5 * (pc[nu] + qc[nu]));
            }
            phase += a * (qc[mu] - pc[mu]);
        }
    }
    phase.exp()
}

fn imag_scalar(v: f64) -> CMatrix {
    CMatrix::from_element(1, 1, Complex64::new(0.0, v))
}

#[test]
fn holonomy_matches_the_abelian_line_integral() {
    for seed in 0..25u64 {
        let dim = 2 + (seed % 2) as usize;
        let mut coeff = SplitMix64::new(seed ^ 0xA5A5_5A5A);
        let c: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(0.0, 0.3 * coeff.next_symmetric()))
            .collect();
        let d: Vec<Vec<Complex64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| Complex64::new(0.0, 0.1 * coeff.next_symmetric()))
                    .collect()
            })
            .collect();
        let field = ConnectionField::new(
            GroupTag::U1,
            dim,
            c.iter().map(|z| imag_scalar(z.im)).collect(),
            d.iter()
                .map(|row| row.iter().map(|z| imag_scalar(z.im)).collect())
                .collect(),
        )
        .unwrap();

        let mut stream = RandomStream::new(&RandomSpec::new(seed, dim));
        let path = stream.path(false);
        let oracle = abelian_oracle(&c, &d, &path);

        for reunitarize in [false, true] {
            let opts = IntegratorOptions {
                steps_per_segment: 64,
                reunitarize,
            };
            let h = field.holonomy(&path, &opts).unwrap();
            let got = h.matrix()[(0, 0)];
            assert!(
                (got - oracle).norm() <= 1e-7,
                "seed {seed} reunit {reunitarize}: |{got} - {oracle}| = {:.3e}",
                (got - oracle).norm()
            );
        }
    }
}

#[test]
fn holonomy_is_stable_under_midpoint_subdivision_and_step_doubling() {
    for seed in 0..10u64 {
        let mut spec = RandomSpec::new(seed, 3);
        // Short segments keep the per-segment truncation near the rounding
        // floor, so refining the discretization moves nothing above 1e-10.
        spec.half_width = 0.3;
        let mut stream = RandomStream::new(&spec);
        let field = stream.su2_field(0.2, 0.1);
        let path = stream.path(false);

        let pts: Vec<Point> = path.points().cloned().collect();
        let mut vs = Vec::new();
        for w in pts.windows(2) {
            let mid: Vec<f64> = w[0]
                .coords()
                .iter()
                .zip(w[1].coords())
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            vs.push(Point::new(mid).unwrap());
            vs.push(w[1].clone());
        }
        let split = Path::new(pts[0].clone(), vs).unwrap();

        let coarse = IntegratorOptions {
            steps_per_segment: 64,
            reunitarize: false,
        };
        let fine = IntegratorOptions {
            steps_per_segment: 128,
            reunitarize: false,
        };
        let h = field.holonomy(&path, &coarse).unwrap();
        let h_split = field.holonomy(&split, &coarse).unwrap();
        let h_fine = field.holonomy(&path, &fine).unwrap();

        let d_split = (h.matrix() - h_split.matrix()).norm();
        let d_fine = (h.matrix() - h_fine.matrix()).norm();
        assert!(
            d_split <= 1e-10,
            "seed {seed}: subdivision moved holonomy by {d_split:.3e}"
        );
        assert!(
            d_fine <= 1e-10,
            "seed {seed}: step doubling moved holonomy by {d_fine:.3e}"
        );
    }
}

#[test]
fn constant_field_straight_line_matches_the_matrix_exponential() {
    // A_1 constant along a straight run on axis 1 of length L gives
    // H = exp(L X); with X = su2(a,b,c), X^2 = -(a^2+b^2+c^2) I closes the
    // series as cos(r) I + (sin(r)/r) X.
    let (a, b, c) = (0.21, -0.13, 0.08);
    let x = su2_from_coeffs(a, b, c);
    let field = ConnectionField::new(
        GroupTag::Su2,
        2,
        vec![x.clone(), CMatrix::zeros(2, 2)],
        vec![vec![CMatrix::zeros(2, 2); 2]; 2],
    )
    .unwrap();

    let len = 1.5;
    let r = len * (a * a + b * b + c * c).sqrt();
    let expected = CMatrix::identity(2, 2).scale(r.cos()) + x.scale(len * r.sin() / r);

    // Interior collinear vertices must not change the answer.
    let mk = |t: f64| Point::new(vec![t, 0.0]).unwrap();
    let path = Path::new(mk(0.0), vec![mk(0.4), mk(0.9), mk(1.5)]).unwrap();
    let opts = IntegratorOptions {
        steps_per_segment: 64,
        reunitarize: false,
    };
    let h = field.holonomy(&path, &opts).unwrap();
    let err = (h.matrix() - expected).norm();
    assert!(err <= 1e-10, "exp oracle missed by {err:.3e}");
}
