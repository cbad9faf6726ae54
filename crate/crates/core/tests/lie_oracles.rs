mod common;

use common::rng;
use mycocat::dense::norm_inf as dense_norm_inf;
use mycocat::experiments::fit_loglog_slope;
use mycocat::lie::{
    bch_truncated, commutator, effective_mixture_generator, estimate_generator, expm, matrix_exp, matrix_log, Generator,
};
use mycocat::progsem::{Program, ReferenceDynamics};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_generator(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Generator {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let norm = dense_norm_inf(&m);
    let target = rng.random_range(0.0..=max_norm);
    Generator::new(m * (target / norm)).unwrap()
}

fn nilpotent_pair() -> (Generator, Generator) {
    (
        Generator::from_row_slice(2, &[0.0, 1.0, 0.0, 0.0]).unwrap(),
        Generator::from_row_slice(2, &[0.0, 0.0, 1.0, 0.0]).unwrap(),
    )
}

/// Closed form of `log(exp(εY)·exp(εX))` for the nilpotent pair.
///
/// The product is `[[1, ε], [ε, 1 + ε²]]` with determinant 1 and eigenvalues
/// `e^{±μ}`, `μ = 2·asinh(ε/2)`, so its logarithm is
/// `μ / sinh(μ) · (M − cosh(μ)·I)` with `sinh(μ) = ε·sqrt(1 + ε²/4)`.
fn exact_log_nilpotent(eps: f64) -> DMatrix<f64> {
    let mu = 2.0 * (eps / 2.0).asinh();
    let scale = mu / (eps * (1.0 + eps * eps / 4.0).sqrt());
    DMatrix::from_row_slice(2, 2, &[-eps * eps / 2.0, eps, eps, eps * eps / 2.0]) * scale
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

#[test]
fn closed_form_log_matches_library() {
    let (x, y) = nilpotent_pair();
    for eps in [0.5, 0.1, 1e-3] {
        let lib = effective_mixture_generator(&x, &y, eps).unwrap();
        assert!(max_abs(&(lib.matrix() - exact_log_nilpotent(eps))) < 1e-14);
    }
}

#[test]
fn exp_log_roundtrip() {
    let mut rng = rng(2);
    for i in 0..100 {
        let n = 2 + i % 5;
        let x = random_generator(&mut rng, n, 1.0);
        let back = matrix_log(&matrix_exp(&x, 1.0).unwrap()).unwrap();
        let err = max_abs(&(back.matrix() - x.matrix()));
        assert!(err < 1e-10, "roundtrip error {err} at n={n}");
    }
}

#[test]
fn exp_of_large_arguments_is_accurate() {
    // exp(tX) for X = [[a, b], [0, a]] is e^{ta}·[[1, tb], [0, 1]].
    for (a, b, t) in [(1.5, 2.0, 2.0), (-2.0, 3.0, 2.5), (0.3, -4.0, 1.2)] {
        let x = Generator::from_row_slice(2, &[a, b, 0.0, a]).unwrap();
        let got = matrix_exp(&x, t).unwrap();
        let e = (t * a).exp();
        let want = DMatrix::from_row_slice(2, 2, &[e, e * t * b, 0.0, e]);
        let rel = max_abs(&(got - &want)) / max_abs(&want);
        assert!(rel < 1e-12, "relative error {rel}");
    }
}

#[test]
fn exp_of_rotation_generator() {
    for theta in [0.1, 1.0, 3.0, 4.9] {
        let x = Generator::from_row_slice(2, &[0.0, -theta, theta, 0.0]).unwrap();
        let got = matrix_exp(&x, 1.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!(max_abs(&(got - want)) < 1e-13);
    }
}

#[test]
fn jacobi_identity() {
    let mut rng = rng(3);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let [x, y, z] = [0, 1, 2].map(|_| random_generator(&mut rng, n, 1.0));
        let c = |a: &Generator, b: &Generator| commutator(a, b).unwrap();
        let sum = c(&x, &c(&y, &z)).matrix() + c(&y, &c(&z, &x)).matrix() + c(&z, &c(&x, &y)).matrix();
        assert!(max_abs(&sum) < 1e-12);
    }
}

#[test]
fn canonical_commutator() {
    let (x, y) = nilpotent_pair();
    assert_eq!(
        commutator(&x, &y).unwrap().matrix(),
        &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
    );
    assert_eq!(commutator(&x, &x).unwrap().matrix(), &DMatrix::zeros(2, 2));
}

#[test]
fn truncation_orders_have_expected_slopes() {
    let (x, y) = nilpotent_pair();
    let grid = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3];
    for order in 1..=3u32 {
        let rows: Vec<(f64, f64)> = grid
            .iter()
            .map(|&eps| {
                let t = bch_truncated(&x, &y, eps, order).unwrap();
                (eps, max_abs(&(t.value - exact_log_nilpotent(eps))))
            })
            .collect();
        let fit = fit_loglog_slope(&rows).unwrap();
        let want = f64::from(order + 1);
        assert!(
            (fit.slope - want).abs() <= 0.15,
            "order {order}: slope {} (rows {rows:?})",
            fit.slope
        );
    }
}

#[test]
fn bch_term_structure() {
    let (x, y) = nilpotent_pair();
    let eps = 0.3;
    let r = bch_truncated(&x, &y, eps, 3).unwrap();
    let sum = r.terms.iter().fold(DMatrix::zeros(2, 2), |acc, (_, m)| acc + m);
    assert_eq!(r.value, sum);
    let orders: Vec<u32> = r.terms.iter().map(|(k, _)| *k).collect();
    assert_eq!(orders, vec![1, 2, 3]);
    // ε²/2 · [Y, X] with X applied first.
    let yx = commutator(&y, &x).unwrap();
    assert!(max_abs(&(&r.terms[1].1 - yx.matrix() * (eps * eps / 2.0))) < 1e-16);
    assert!(bch_truncated(&x, &y, eps, 4).is_err());
}

#[test]
fn effective_generator_properties() {
    let mut rng = rng(4);
    // Commuting pair: polynomials in one matrix.
    for _ in 0..20 {
        let a = random_generator(&mut rng, 3, 1.0);
        let x = Generator::new(a.matrix() * 0.7).unwrap();
        let y = Generator::new(a.matrix() * a.matrix() * 0.3 - a.matrix()).unwrap();
        let eps = 0.2;
        let eff = effective_mixture_generator(&x, &y, eps).unwrap();
        assert!(max_abs(&(eff.matrix() - (x.matrix() + y.matrix()) * eps)) < 1e-12);
    }
    let (x, y) = nilpotent_pair();
    let eps = 0.1;
    let eff = effective_mixture_generator(&x, &y, eps).unwrap();
    let third = bch_truncated(&x, &y, eps, 3).unwrap();
    let gap = max_abs(&(eff.matrix() - &third.value));
    assert!(gap < 1e-4 && gap > 1e-7, "order-3 band violated: {gap}");
    for _ in 0..20 {
        let x = random_generator(&mut rng, 4, 1.0);
        let y = random_generator(&mut rng, 4, 1.0);
        let eff = effective_mixture_generator(&x, &y, 0.5).unwrap();
        let flow = matrix_exp(&y, 0.5).unwrap() * matrix_exp(&x, 0.5).unwrap();
        assert!(max_abs(&(expm(eff.matrix()).unwrap() - flow)) < 1e-10);
    }
}

#[test]
fn generator_estimation_recovers_dynamics() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let a0 = random_generator(&mut rng, 4, 0.8).into_matrix();
        let a1 = random_generator(&mut rng, 4, 0.8).into_matrix();
        let d = ReferenceDynamics::new(a0.clone(), vec![a1.clone()], 1e-3).unwrap();
        let idle = |e: f64| Program::pulse(e, vec![0.0]).unwrap();
        let unit = |e: f64| Program::pulse(e, vec![1.0]).unwrap();
        let g0 = estimate_generator(idle, &d, 0.5).unwrap();
        assert!(max_abs(&(g0.matrix() - &a0)) < 1e-10);
        let g1 = estimate_generator(unit, &d, 0.5).unwrap();
        assert!(max_abs(&(g1.matrix() - (&a0 + &a1))) < 1e-10);
        let half = estimate_generator(unit, &d, 0.25).unwrap();
        assert!(max_abs(&(g1.matrix() - half.matrix())) < 1e-10);
    }
}

fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

proptest! {
    #[test]
    fn commutator_is_bilinear_and_antisymmetric(a in square(3), b in square(3), c in square(3), s in -3.0f64..3.0) {
        let g = |m: &DMatrix<f64>| Generator::new(m.clone()).unwrap();
        let ab = commutator(&g(&a), &g(&b)).unwrap().into_matrix();
        let ba = commutator(&g(&b), &g(&a)).unwrap().into_matrix();
        prop_assert!(max_abs(&(&ab + &ba)) < 1e-12);
        let lhs = commutator(&g(&(&a * s + &c)), &g(&b)).unwrap().into_matrix();
        let cb = commutator(&g(&c), &g(&b)).unwrap().into_matrix();
        prop_assert!(max_abs(&(lhs - (ab * s + cb))) < 1e-11);
    }

    #[test]
    fn exp_of_diagonal(d in prop::collection::vec(-4.0f64..4.0, 1..5)) {
        let n = d.len();
        let x = Generator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()))).unwrap();
        let e = matrix_exp(&x, 1.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { d[i].exp() } else { 0.0 };
                prop_assert!((e[(i, j)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }
}
