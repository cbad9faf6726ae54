//! Matrix Lie machinery behind the order-effect analysis.
//!
//! Composition convention used throughout: for two exposures `P` then `Q`
//! with generators `X_P`, `X_Q`, the composite flow is
//! `exp(ε·X_Q) · exp(ε·X_P)` (the first exposure acts first, so it sits on the
//! right).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::{all_finite, norm_1, norm_inf, row_major};
use crate::progsem::{Program, ProgramError, TransitionSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    ShapeMismatch(usize, usize),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("matrix logarithm undefined: {0}")]
    LogDomain(String),
    #[error("unsupported BCH order {0}; expected 1, 2 or 3")]
    UnsupportedOrder(u32),
    #[error("scale parameter must be a nonzero finite number, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Element of the matrix Lie algebra: a finite square matrix (units 1/time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub struct Generator(DMatrix<f64>);

#[derive(Serialize, Deserialize)]
struct GeneratorRepr(#[serde(with = "row_major")] DMatrix<f64>);

impl TryFrom<GeneratorRepr> for Generator {
    type Error = LieError;
    fn try_from(r: GeneratorRepr) -> Result<Self, LieError> {
        Generator::new(r.0)
    }
}

impl From<Generator> for GeneratorRepr {
    fn from(g: Generator) -> Self {
        GeneratorRepr(g.0)
    }
}

impl Generator {
    pub fn new(m: DMatrix<f64>) -> Result<Self, LieError> {
        check_square(&m)?;
        if !all_finite(&m) {
            return Err(LieError::NonFinite);
        }
        Ok(Generator(m))
    }

    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self, LieError> {
        if entries.len() != n * n {
            return Err(LieError::NotSquare(n, entries.len() / n.max(1)));
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn zeros(n: usize) -> Self {
        Generator(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }
}

/// Truncated BCH series with its per-order contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BchResult {
    pub order: u32,
    pub value: DMatrix<f64>,
    /// `(order, contribution)`, ascending in order.
    pub terms: Vec<(u32, DMatrix<f64>)>,
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, LieError> {
    if m.nrows() != m.ncols() {
        return Err(LieError::NotSquare(m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

fn check_same(x: &Generator, y: &Generator) -> Result<(), LieError> {
    if x.dim() != y.dim() {
        return Err(LieError::ShapeMismatch(x.dim(), y.dim()));
    }
    Ok(())
}

/// `exp(t·X)`.
pub fn matrix_exp(x: &Generator, t: f64) -> Result<DMatrix<f64>, LieError> {
    expm(&(x.matrix() * t))
}

// Padé coefficients and 1-norm thresholds (Higham 2005, Table 2.3).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.53939833006323e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068e0, 9),
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a diagonal Padé core.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = check_square(a)?;
    if !all_finite(a) {
        return Err(LieError::NonFinite);
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = norm_1(a);
    for (theta, m) in THETA {
        if norm <= theta {
            return pade_low(a, m);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !all_finite(&r) {
        return Err(LieError::NonFinite);
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>, LieError> {
    let b: &[f64] = match m {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        _ => &PADE9,
    };
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    // Even powers I, A², A⁴, ... up to A^(m-1).
    let mut powers = vec![id.clone(), a2.clone()];
    while powers.len() < m.div_ceil(2) {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        u += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    let u = a * u;
    solve_pade(&u, &v)
}

fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let b = &PADE13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    solve_pade(&u, &v)
}

/// Solves `(V − U) R = V + U`.
fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).ok_or(LieError::NonFinite)
}

/// Square root by the product form of the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = a.clone();
    let mut y = a.clone();
    for _ in 0..100 {
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| LieError::LogDomain("singular iterate in square root".into()))?;
        y = &y * (&id + &m_inv) * 0.5;
        m = (&id + (&m + &m_inv) * 0.5) * 0.5;
        if !all_finite(&m) || !all_finite(&y) {
            return Err(LieError::LogDomain("square root iteration diverged".into()));
        }
        if norm_1(&(&m - &id)) <= 1e-15 * (n as f64) {
            return Ok(y);
        }
    }
    Err(LieError::LogDomain("square root iteration did not converge".into()))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // Initial guess for the i-th root of P_m on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// `log(I + X)` via the Gauss–Legendre form of the diagonal Padé approximant.
fn log1p_pade(x: &DMatrix<f64>, nodes: usize) -> Result<DMatrix<f64>, LieError> {
    let n = x.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (t, w) in gauss_legendre(nodes) {
        let denom = &id + x * t;
        let term = denom
            .lu()
            .solve(x)
            .ok_or_else(|| LieError::LogDomain("singular Padé denominator".into()))?;
        acc += term * w;
    }
    Ok(acc)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Repeated square roots bring `M` within `‖M − I‖₁ ≤ 0.25`, where an
/// 8-point Padé approximant of `log(I + X)` is accurate to working precision.
pub fn matrix_log(m: &DMatrix<f64>) -> Result<Generator, LieError> {
    let n = check_square(m)?;
    if !all_finite(m) {
        return Err(LieError::NonFinite);
    }
    if n == 0 {
        return Ok(Generator(DMatrix::zeros(0, 0)));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let scale = norm_1(m).max(1.0);
    for ev in m.complex_eigenvalues().iter() {
        if ev.norm() <= 1e-14 * scale {
            return Err(LieError::LogDomain("matrix is singular".into()));
        }
        if ev.re <= 0.0 && ev.im.abs() <= 1e-12 * scale {
            return Err(LieError::LogDomain(format!(
                "eigenvalue {:.6e} on the closed negative real axis",
                ev.re
            )));
        }
    }
    let mut r = m.clone();
    let mut k = 0;
    while norm_1(&(&r - &id)) > 0.25 {
        if k >= 64 {
            return Err(LieError::LogDomain("inverse scaling did not reach the identity".into()));
        }
        r = sqrtm(&r)?;
        k += 1;
    }
    let log = log1p_pade(&(r - id), 8)? * 2f64.powi(k);
    Generator::new(log)
}

/// `[X, Y] = XY − YX`.
pub fn commutator(x: &Generator, y: &Generator) -> Result<Generator, LieError> {
    check_same(x, y)?;
    Ok(Generator(bracket(x.matrix(), y.matrix())))
}

fn bracket(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

/// BCH series of `log(exp(ε·Y) · exp(ε·X))` truncated at `order`, where `X`
/// is the generator of the exposure applied first:
///
/// `ε(X + Y) + ε²/2·[Y, X] + ε³/12·([Y,[Y,X]] + [X,[X,Y]])`.
pub fn bch_truncated(x: &Generator, y: &Generator, eps: f64, order: u32) -> Result<BchResult, LieError> {
    check_same(x, y)?;
    if !(1..=3).contains(&order) {
        return Err(LieError::UnsupportedOrder(order));
    }
    let (xm, ym) = (x.matrix(), y.matrix());
    let mut terms = vec![(1, (xm + ym) * eps)];
    if order >= 2 {
        terms.push((2, bracket(ym, xm) * (eps * eps / 2.0)));
    }
    if order >= 3 {
        let nested = bracket(ym, &bracket(ym, xm)) + bracket(xm, &bracket(xm, ym));
        terms.push((3, nested * (eps.powi(3) / 12.0)));
    }
    let mut value = DMatrix::zeros(x.dim(), x.dim());
    for (_, t) in &terms {
        value += t;
    }
    Ok(BchResult { order, value, terms })
}

/// Exact effective generator `log(exp(ε·Y) · exp(ε·X))` of `X` then `Y`.
pub fn effective_mixture_generator(x: &Generator, y: &Generator, eps: f64) -> Result<Generator, LieError> {
    check_same(x, y)?;
    let flow = matrix_exp(y, eps)? * matrix_exp(x, eps)?;
    matrix_log(&flow)
}

/// Recovers the generator of a pulse family from its flow:
/// `(1/ε) · log(flow(p_family(ε)))`.
pub fn estimate_generator<T, F>(p_family: F, dynamics: &T, eps: f64) -> Result<Generator, LieError>
where
    T: TransitionSystem + ?Sized,
    F: Fn(f64) -> Program,
{
    if eps == 0.0 || !eps.is_finite() {
        return Err(LieError::BadScale(eps));
    }
    let flow = dynamics.flow_matrix(&p_family(eps))?;
    let log = matrix_log(&flow)?;
    Generator::new(log.0 / eps)
}

/// Applies `exp(t·X)` to a vector.
pub fn flow_vector(x: &Generator, t: f64, v: &DVector<f64>) -> Result<DVector<f64>, LieError> {
    if v.len() != x.dim() {
        return Err(LieError::ShapeMismatch(x.dim(), v.len()));
    }
    Ok(matrix_exp(x, t)? * v)
}
