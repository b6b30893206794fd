//! Acceptance gate: ten end-to-end checks of the toolkit, each printing one
//! verdict line (run with `--nocapture` to see them). Tolerances are pinned
//! here and nowhere else; a failing check means the shipped artifact does
//! not meet its contract.

use std::path::PathBuf;
use std::process::Command;

use loopcalc_core::calculus::{
    connection_derivative, loop_derivative, mandelstam_derivative, section_derivative, ArcSection,
    FdScheme, FnFunctional, HolonomyFunctional, PathFunctional, Section, TransportSection,
};
use loopcalc_core::formats::{parse_path, write_path};
use loopcalc_core::gauge::{CMatrix, ConnectionField, IntegratorOptions};
use loopcalc_core::paths::{parallelogram, Loop, Path, Point};
use loopcalc_core::verify::{
    bianchi_analytic, bianchi_numeric, relative_error, RandomSpec, RandomStream,
};
use num_complex::Complex64;

const HOLONOMY_ABELIAN_TOL: f64 = 1e-8;
const GROUP_LAW_TOL: f64 = 1e-9;
const MANDELSTAM_REL_TOL: f64 = 1e-6;
const ORDER_WINDOW: (f64, f64) = (1.8, 2.2);
const DECOMP_ARC_TOL: f64 = 1e-6;
const DECOMP_TRANSPORT_TOL: f64 = 1e-10;
const CURVATURE_REL_TOL: f64 = 1e-4;
const CURVATURE_ORDER_MIN: f64 = 1.8;
const ANTISYMMETRY_FACTOR: f64 = 10.0;
/// Rounding floor of the second-difference quotients; see the antisymmetry
/// budget in the identity suite.
const FD_QUOTIENT_FLOOR: f64 = 1e-10;
const COMMUTATOR_REL_TOL: f64 = 1e-3;
const BIANCHI_ANALYTIC_TOL: f64 = 1e-12;
const BIANCHI_NUMERIC_TOL: f64 = 1e-2;
const HALVING_WINDOW: (f64, f64) = (12.0, 20.0);

fn conclude(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance criterion {n:02} [{verdict}] {name}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn insert_spur(p: &Path, i: usize, w: Point) -> Path {
    let pts: Vec<Point> = p.points().cloned().collect();
    let mut vs: Vec<Point> = pts[1..=i].to_vec();
    vs.push(w);
    vs.push(pts[i].clone());
    vs.extend_from_slice(&pts[i + 1..]);
    Path::new(p.base().clone(), vs).unwrap()
}

fn frob(m: &CMatrix) -> f64 {
    m.norm()
}

#[test]
fn criterion_01_word_algebra_reduction_laws() {
    let mut stream = RandomStream::new(&RandomSpec::new(42, 2));
    let mut failures = 0usize;
    for _ in 0..1000 {
        let l = stream.path(true);
        let r = l.reduce();
        if r.reduce() != r {
            failures += 1;
        }
        let round = l.compose(&l.inverse()).unwrap().reduce();
        if !round.vertices().is_empty() || round.base() != l.base() {
            failures += 1;
        }
        let k = stream.rng().next_below(l.vertices().len() as u64 + 1) as usize;
        let w = stream.point();
        if !l.thin_equal(&insert_spur(&l, k, w)).unwrap() {
            failures += 1;
        }
    }
    conclude(
        1,
        "word algebra reduction laws over 1000 seeded loops",
        failures == 0,
        &format!("{failures} failures"),
    );
}

#[test]
fn criterion_02_abelian_holonomy_oracle() {
    let mut worst = 0.0f64;
    for b in [0.5, 1.0] {
        let field = ConnectionField::reference_u1(b);
        for l in [0.1, 0.5, 1.0] {
            let sq = parallelogram(&Point::origin(2), &[1.0, 0.0], &[0.0, 1.0], l, l).unwrap();
            let opts = IntegratorOptions {
                steps_per_segment: 64,
                reunitarize: true,
            };
            let h = field.holonomy(sq.path(), &opts).unwrap();
            let oracle = Complex64::new(0.0, b * l * l).exp();
            worst = worst.max((h.matrix()[(0, 0)] - oracle).norm());
        }
    }
    conclude(
        2,
        "uniform-field square holonomy matches exp(iBL^2)",
        worst <= HOLONOMY_ABELIAN_TOL,
        &format!("max |H - exp(iBL^2)| = {worst:.3e} (tol {HOLONOMY_ABELIAN_TOL:.1e})"),
    );
}

#[test]
fn criterion_03_holonomy_group_laws() {
    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let mut stream = RandomStream::new(&RandomSpec::new(4203, 3));
    let eye = CMatrix::identity(2, 2);
    let (mut hom, mut inv, mut thin) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let a = stream.path(false);
        let b = stream.path_from(a.endpoint().clone(), false);
        let wa = field.holonomy(&a, &opts).unwrap().0;
        let wb = field.holonomy(&b, &opts).unwrap().0;
        let wab = field.holonomy(&a.compose(&b).unwrap(), &opts).unwrap().0;
        hom = hom.max(frob(&(&wab - &wa * &wb)));

        let winv = field.holonomy(&a.inverse(), &opts).unwrap().0;
        inv = inv.max(frob(&(winv * &wa - &eye)));

        let k = stream.rng().next_below(a.vertices().len() as u64 + 1) as usize;
        let w = stream.point();
        let wspur = field.holonomy(&insert_spur(&a, k, w), &opts).unwrap().0;
        thin = thin.max(frob(&(wspur - &wa)));
    }
    let worst = hom.max(inv).max(thin);
    conclude(
        3,
        "holonomy homomorphism / inverse / thin invariance over 50 pairs",
        worst <= GROUP_LAW_TOL,
        &format!(
            "max errors hom {hom:.3e}, inv {inv:.3e}, thin {thin:.3e} (tol {GROUP_LAW_TOL:.1e})"
        ),
    );
}

#[test]
fn criterion_04_mandelstam_matches_the_field() {
    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let scheme = FdScheme::default();
    let f = HolonomyFunctional::new(&field, opts);
    let mut stream = RandomStream::new(&RandomSpec::new(4204, 3));
    let (mut worst, mut order_lo, mut order_hi) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let pi = stream.path(false);
        let v = stream.direction();
        let d = mandelstam_derivative(&f, &pi, &v, &scheme).unwrap();
        let x = pi.endpoint();
        let mut a_v = CMatrix::zeros(2, 2);
        for (mu, c) in v.iter().enumerate() {
            a_v += field.eval_field(x, mu + 1).unwrap().0.scale(*c);
        }
        let oracle = field.holonomy(&pi, &opts).unwrap().0 * a_v;
        worst = worst.max(relative_error(&d.value, &oracle));
        order_lo = order_lo.min(d.est_order);
        order_hi = order_hi.max(d.est_order);
    }
    let orders_ok = order_lo >= ORDER_WINDOW.0 && order_hi <= ORDER_WINDOW.1;
    conclude(
        4,
        "endpoint derivative equals W(pi) A_v(x) over 20 paths",
        worst <= MANDELSTAM_REL_TOL && orders_ok,
        &format!(
            "max rel {worst:.3e} (tol {MANDELSTAM_REL_TOL:.1e}), observed order in \
             [{order_lo:.3}, {order_hi:.3}]"
        ),
    );
}

#[test]
fn criterion_05_derivative_decomposition() {
    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let scheme = FdScheme::default();
    let f = HolonomyFunctional::new(&field, opts);
    let mut stream = RandomStream::new(&RandomSpec::new(4205, 3));
    let origin = Point::origin(3);

    let mut worst_arc = 0.0f64;
    for _ in 0..20 {
        let center = loop {
            let x = stream.point();
            if x.coords().iter().map(|c| c * c).sum::<f64>().sqrt() >= 0.3 {
                break x;
            }
        };
        let s = ArcSection::between(origin.clone(), center, 1.0).unwrap();
        let v = stream.direction();
        let total = section_derivative(&f, &s, &v, &scheme).unwrap().value;
        let stem = s.path_to(s.center());
        let mut horizontal_plus_vertical =
            mandelstam_derivative(&f, &stem, &v, &scheme).unwrap().value;
        for (mu, c) in v.iter().enumerate() {
            if *c != 0.0 {
                horizontal_plus_vertical += connection_derivative(&f, &s, mu + 1, &scheme)
                    .unwrap()
                    .value
                    .scale(*c);
            }
        }
        worst_arc = worst_arc.max(relative_error(&total, &horizontal_plus_vertical));
    }

    let mut worst_transport = 0.0f64;
    for _ in 0..20 {
        let s = TransportSection::new(stream.path(false), 1.0).unwrap();
        for mu in 1..=3 {
            let d = connection_derivative(&f, &s, mu, &scheme).unwrap();
            worst_transport = worst_transport.max(d.value.norm());
        }
    }

    conclude(
        5,
        "section derivative splits into endpoint + vertical parts",
        worst_arc <= DECOMP_ARC_TOL && worst_transport <= DECOMP_TRANSPORT_TOL,
        &format!(
            "arc residual {worst_arc:.3e} (tol {DECOMP_ARC_TOL:.1e}), transport vertical \
             {worst_transport:.3e} (tol {DECOMP_TRANSPORT_TOL:.1e})"
        ),
    );
}

#[test]
fn criterion_06_curvature_identity() {
    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let scheme = FdScheme::default();
    let f = HolonomyFunctional::new(&field, opts);
    let mut stream = RandomStream::new(&RandomSpec::new(4206, 3));
    let (mut worst, mut order_min) = (0.0f64, f64::INFINITY);
    let mut antisym_ok = true;
    let mut worst_ratio = 0.0f64;
    for k in 0..10 {
        let pi = stream.path(false);
        let gamma = Loop::new(stream.path(true)).unwrap();
        let (mu, nu) = if k % 2 == 0 { (1, 2) } else { (2, 3) };
        let mut u = vec![0.0; 3];
        let mut v = vec![0.0; 3];
        u[mu - 1] = 1.0;
        v[nu - 1] = 1.0;

        let d = loop_derivative(&f, &pi, &gamma, &u, &v, &scheme).unwrap();
        let w = field.holonomy(&pi, &opts).unwrap().0;
        let w_gamma = field.holonomy(gamma.path(), &opts).unwrap().0;
        let fs = field.field_strength(pi.endpoint(), mu, nu).unwrap().0;
        let oracle = &w * fs * w.clone().try_inverse().unwrap() * w_gamma;
        worst = worst.max(relative_error(&d.value, &oracle));
        order_min = order_min.min(d.est_order);

        let d_swapped = loop_derivative(&f, &pi, &gamma, &v, &u, &scheme).unwrap();
        let defect = (&d.value + &d_swapped.value).norm();
        let budget = d.est_error + d_swapped.est_error + FD_QUOTIENT_FLOOR;
        worst_ratio = worst_ratio.max(defect / budget);
        antisym_ok &= defect <= ANTISYMMETRY_FACTOR * budget;
    }
    conclude(
        6,
        "loop derivative equals conjugated field strength",
        worst <= CURVATURE_REL_TOL && order_min >= CURVATURE_ORDER_MIN && antisym_ok,
        &format!(
            "max rel {worst:.3e} (tol {CURVATURE_REL_TOL:.1e}), min order {order_min:.3}, \
             antisymmetry defect / estimate {worst_ratio:.2} (cap {ANTISYMMETRY_FACTOR})"
        ),
    );
}

#[test]
fn criterion_07_commutator_equals_loop_derivative() {
    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let scheme = FdScheme::default();
    let f = HolonomyFunctional::new(&field, opts);
    let mut stream = RandomStream::new(&RandomSpec::new(4207, 3));
    let origin = Point::origin(3);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let pi = stream.path(false);
        let chi = stream.path_between(pi.endpoint().clone(), origin.clone());
        let (mu, nu) = if k % 2 == 0 { (1, 3) } else { (2, 1) };
        let w_chi = field.holonomy(&chi, &opts).unwrap().0;
        let h = FnFunctional::new(2, 2, |p: &Path| f.eval(p) * &w_chi);
        let nested =
            loopcalc_core::calculus::commutator_mandelstam(&h, &pi, mu, nu, &scheme).unwrap();

        let gamma = Loop::new(pi.compose(&chi).unwrap()).unwrap();
        let mut u = vec![0.0; 3];
        let mut v = vec![0.0; 3];
        u[mu - 1] = 1.0;
        v[nu - 1] = 1.0;
        let direct = loop_derivative(&f, &pi, &gamma, &u, &v, &scheme).unwrap();
        worst = worst.max(relative_error(&nested.value, &direct.value));
    }
    conclude(
        7,
        "nested endpoint-derivative commutator equals the loop derivative",
        worst <= COMMUTATOR_REL_TOL,
        &format!("max rel {worst:.3e} (tol {COMMUTATOR_REL_TOL:.1e})"),
    );
}

#[test]
fn criterion_08_bianchi_identities() {
    let mut stream = RandomStream::new(&RandomSpec::new(4208, 3));
    let mut worst_analytic = 0.0f64;
    for _ in 0..100 {
        let field = stream.su2_field(0.4, 0.2);
        let x = stream.point();
        for (mu, nu, xi) in [
            (1, 2, 3),
            (2, 3, 1),
            (3, 1, 2),
            (1, 3, 2),
            (3, 2, 1),
            (2, 1, 3),
        ] {
            let r = bianchi_analytic(&field, &x, mu, nu, xi).unwrap();
            worst_analytic = worst_analytic.max(r);
        }
    }

    let field = ConnectionField::reference_su2();
    let opts = IntegratorOptions::default();
    let scheme = FdScheme::default();
    let mut worst_numeric = 0.0f64;
    for _ in 0..2 {
        let pi = stream.path(false);
        let r = bianchi_numeric(&field, &pi, 1, 2, 3, &scheme, &opts).unwrap();
        worst_numeric = worst_numeric.max(r);
    }
    conclude(
        8,
        "cyclic covariant sums vanish (exact and loop-level)",
        worst_analytic <= BIANCHI_ANALYTIC_TOL && worst_numeric <= BIANCHI_NUMERIC_TOL,
        &format!(
            "analytic {worst_analytic:.3e} (tol {BIANCHI_ANALYTIC_TOL:.1e}) over 100 fields, \
             numeric {worst_numeric:.3e} (tol {BIANCHI_NUMERIC_TOL:.1e})"
        ),
    );
}

#[test]
fn criterion_09_integrator_order() {
    let field = ConnectionField::reference_u1(1.0);
    let sq = parallelogram(&Point::origin(2), &[1.0, 0.0], &[0.0, 1.0], 1.0, 1.0).unwrap();
    let oracle = Complex64::new(0.0, 1.0).exp();
    let err = |n: usize| {
        let opts = IntegratorOptions {
            steps_per_segment: n,
            reunitarize: false,
        };
        (field.holonomy(sq.path(), &opts).unwrap().matrix()[(0, 0)] - oracle).norm()
    };
    let r16 = err(16) / err(32);
    let r32 = err(32) / err(64);
    let ok = |r: f64| r >= HALVING_WINDOW.0 && r <= HALVING_WINDOW.1;
    conclude(
        9,
        "halving the step divides the oracle error by about 16",
        ok(r16) && ok(r32),
        &format!(
            "ratios 16->32: {r16:.2}, 32->64: {r32:.2} (window [{}, {}])",
            HALVING_WINDOW.0, HALVING_WINDOW.1
        ),
    );
}

#[test]
fn criterion_10_determinism_and_round_trip() {
    let tmp = std::env::temp_dir();
    let out_a = tmp.join(format!("loopcalc_det_a_{}.csv", std::process::id()));
    let out_b = tmp.join(format!("loopcalc_det_b_{}.csv", std::process::id()));
    let field = fixture("su2_ref.field");
    let run = |out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_loopcalc"))
            .args(["verify"])
            .arg(&field)
            .args(["--seed", "42", "--trials", "4", "--out"])
            .arg(out)
            .status()
            .expect("binary runs");
        assert!(status.success(), "verify run failed");
    };
    run(&out_a);
    run(&out_b);
    let rep_a = std::fs::read(&out_a).unwrap();
    let rep_b = std::fs::read(&out_b).unwrap();
    let _ = std::fs::remove_file(&out_a);
    let _ = std::fs::remove_file(&out_b);
    let identical = rep_a == rep_b;

    // Round-trip: an already-canonical path with awkward coordinates must
    // come back from `reduce` byte-identical, and reparse to the same bits.
    let p = Path::new(
        Point::new(vec![0.1, -2.5e-7]).unwrap(),
        vec![
            Point::new(vec![1.0 / 3.0, 7.13e300]).unwrap(),
            Point::new(vec![-0.0, 1e-320]).unwrap(),
        ],
    )
    .unwrap();
    let text = write_path(&p);
    let in_file = tmp.join(format!("loopcalc_rt_{}.path", std::process::id()));
    std::fs::write(&in_file, &text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_loopcalc"))
        .arg("reduce")
        .arg(&in_file)
        .output()
        .expect("binary runs");
    let _ = std::fs::remove_file(&in_file);
    let echoed = String::from_utf8(out.stdout).unwrap();
    let round_trip_bytes = echoed == text;

    let reparsed = parse_path(&echoed).unwrap();
    let bits_equal = p.points().zip(reparsed.points()).all(|(a, b)| {
        a.coords()
            .iter()
            .zip(b.coords())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    });

    conclude(
        10,
        "verify reports are byte-identical; path files round-trip exactly",
        identical && round_trip_bytes && bits_equal,
        &format!(
            "reports identical: {identical}, reduce echo identical: {round_trip_bytes}, \
             coordinate bits preserved: {bits_equal}"
        ),
    );
}
