//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mycocat::dense::norm_inf;
use mycocat::experiments::{fit_loglog_slope, random_pulses, run_worked_example, ScalingMode, WorkedExampleConfig};
use mycocat::laws::{
    check_causality, check_compatibility, check_functor_laws, check_naturality, check_pushouts, random_program,
    random_state_values, DirectEmbedding, FieldEvolution, NaturalTransformationData, SpeciesFunctor,
};
use mycocat::lie::{bch_truncated, commutator, matrix_exp, matrix_log, Generator};
use mycocat::progsem::{BoundaryResetDynamics, Program};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn species() -> (WorkedExampleConfig, SpeciesFunctor) {
    let c = WorkedExampleConfig::shipped_default();
    let f = c.species().expect("shipped config builds");
    (c, f)
}

fn pushouts() -> Outcome {
    let r = check_pushouts(20, 4, 4, SEED).map_err(|e| e.to_string())?;
    ensure(
        r.passed() && r.samples == 20,
        format!("{} cospans, {} failures at probe bound 4", r.samples, r.max_residual),
    )
}

fn functor_laws() -> Outcome {
    let (c, f) = species();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut identities = 0;
    for _ in 0..100 {
        let s = f
            .state(random_state_values(&mut rng, f.layout.dim()))
            .map_err(|e| e.to_string())?;
        if f.apply(&s, &Program::null()).map_err(|e| e.to_string())?.is_identity() {
            identities += 1;
        }
    }
    let r = check_functor_laws(&f, 100, 1e-10, SEED, &c.weights).map_err(|e| e.to_string())?;
    let mutant = SpeciesFunctor::new(
        "reset",
        BoundaryResetDynamics(f.dynamics.clone()),
        f.layout.clone(),
        f.extractor.clone(),
    )
    .map_err(|e| e.to_string())?;
    let m = check_functor_laws(&mutant, 100, 1e-10, SEED, &c.weights).map_err(|e| e.to_string())?;
    ensure(
        identities == 100 && r.passed() && !m.passed(),
        format!(
            "identity exact {identities}/100, composition residual {:.2e} < 1e-10, non-causal mutant residual {:.2e} flagged {}",
            r.max_residual,
            m.max_residual,
            if m.passed() { "pass" } else { "fail" }
        ),
    )
}

fn causality() -> Outcome {
    let (_, f) = species();
    let r = check_causality(&f, 100, 1e-12, SEED).map_err(|e| e.to_string())?;
    ensure(
        r.passed(),
        format!("max residual {:.2e} < 1e-12 over {} samples", r.max_residual, r.samples),
    )
}

/// Exact `log(exp(εY)·exp(εX))` for the nilpotent pair `X = E12`, `Y = E21`.
fn exact_log_nilpotent(eps: f64) -> DMatrix<f64> {
    let mu = 2.0 * (eps / 2.0).asinh();
    let scale = mu / (eps * (1.0 + eps * eps / 4.0).sqrt());
    DMatrix::from_row_slice(2, 2, &[-eps * eps / 2.0, eps, eps, eps * eps / 2.0]) * scale
}

fn bch_order() -> Outcome {
    let x = Generator::from_row_slice(2, &[0.0, 1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let y = Generator::from_row_slice(2, &[0.0, 0.0, 1.0, 0.0]).map_err(|e| e.to_string())?;
    let grid = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3];
    let slope = |order: u32| -> Result<f64, String> {
        let rows: Vec<(f64, f64)> = grid
            .iter()
            .map(|&eps| {
                let t = bch_truncated(&x, &y, eps, order).expect("orders 1 to 3");
                (eps, (t.value - exact_log_nilpotent(eps)).amax())
            })
            .collect();
        Ok(fit_loglog_slope(&rows).map_err(|e| e.to_string())?.slope)
    };
    let (s1, s2) = (slope(1)?, slope(2)?);
    ensure(
        (s1 - 2.0).abs() <= 0.15 && (s2 - 3.0).abs() <= 0.15,
        format!("order-1 slope {s1:.4} (2 ± 0.15), order-2 slope {s2:.4} (3 ± 0.15)"),
    )
}

fn order_asymmetry() -> Outcome {
    let modes = [ScalingMode::Amplitude, ScalingMode::Duration];
    let d = run_worked_example(&WorkedExampleConfig::shipped_default(), &modes).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for s in &d.scans {
        let fit = s.fit.ok_or("default scan has no fit")?;
        ok &= (fit.slope - 2.0).abs() <= 0.1 && fit.r_squared >= 0.999;
        detail.push(format!(
            "{} slope {:.4} R² {:.6}",
            s.scaling.name(),
            fit.slope,
            fit.r_squared
        ));
    }
    let c = run_worked_example(&WorkedExampleConfig::shipped_commuting(), &modes).map_err(|e| e.to_string())?;
    for s in &c.scans {
        let small = s.rows.iter().all(|r| r.delta < 1e-12);
        let steep = s.fit.is_some_and(|f| f.slope >= 2.8);
        ok &= small || steep;
        let worst = s.rows.iter().map(|r| r.delta).fold(0.0, f64::max);
        detail.push(format!("commuting {} max Δ {worst:.1e}", s.scaling.name()));
    }
    ensure(ok, detail.join(", "))
}

fn random_generator(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Generator {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let norm = norm_inf(&m);
    Generator::new(m * (rng.random_range(0.0..=max_norm) / norm)).expect("finite")
}

fn lie_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let br = |a: &Generator, b: &Generator| commutator(a, b).expect("same size");
    let mut jacobi: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let [x, y, z] = [0, 1, 2].map(|_| random_generator(&mut rng, n, 1.0));
        let sum = br(&x, &br(&y, &z)).matrix() + br(&y, &br(&z, &x)).matrix() + br(&z, &br(&x, &y)).matrix();
        jacobi = jacobi.max(sum.amax());
    }
    let mut roundtrip: f64 = 0.0;
    for i in 0..100 {
        let x = random_generator(&mut rng, 2 + i % 5, 1.0);
        let back = matrix_log(&matrix_exp(&x, 1.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        roundtrip = roundtrip.max((back.matrix() - x.matrix()).amax());
    }
    let x = Generator::from_row_slice(2, &[0.0, 1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let y = Generator::from_row_slice(2, &[0.0, 0.0, 1.0, 0.0]).map_err(|e| e.to_string())?;
    let canonical = br(&x, &y).matrix() == &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    ensure(
        jacobi < 1e-12 && roundtrip < 1e-10 && canonical,
        format!("Jacobi {jacobi:.1e} < 1e-12, exp/log roundtrip {roundtrip:.1e} < 1e-10, [E12, E21] = diag(1, -1): {canonical}"),
    )
}

fn naturality() -> Outcome {
    let (c, f) = species();
    let n = f.layout.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let states = (0..4)
        .map(|_| f.state(random_state_values(&mut rng, n)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let programs: Vec<Program> = (0..5).map(|_| random_program(&mut rng, c.channels)).collect();

    let t = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)) * 0.05;
    let similar = SpeciesFunctor::new(
        "similar",
        f.dynamics.conjugated(&t).map_err(|e| e.to_string())?,
        f.layout.clone(),
        f.extractor.clone(),
    )
    .map_err(|e| e.to_string())?;
    let eta =
        NaturalTransformationData::linear_closed(&f, &similar, &t, &states, &programs).map_err(|e| e.to_string())?;
    let r = check_naturality(&f, &similar, &eta, &states, &programs, 1e-9, &c.weights).map_err(|e| e.to_string())?;

    let bump = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0)) * 0.1;
    let perturbed = SpeciesFunctor::new(
        "perturbed",
        f.dynamics
            .with_control(0, &f.dynamics.controls()[0] + bump)
            .map_err(|e| e.to_string())?,
        f.layout.clone(),
        f.extractor.clone(),
    )
    .map_err(|e| e.to_string())?;
    let id = DMatrix::identity(n, n);
    let eta =
        NaturalTransformationData::linear_closed(&f, &perturbed, &id, &states, &programs).map_err(|e| e.to_string())?;
    let m = check_naturality(&f, &perturbed, &eta, &states, &programs, 1e-9, &c.weights).map_err(|e| e.to_string())?;
    ensure(
        r.passed() && !m.passed() && m.max_residual > 0.0,
        format!(
            "similarity residual {:.2e} < 1e-9, perturbed species sensitivity {:.3e} flagged {}",
            r.max_residual,
            m.max_residual,
            if m.passed() { "pass" } else { "fail" }
        ),
    )
}

fn compatibility() -> Outcome {
    let (c, f) = species();
    let iota = DirectEmbedding::new(c.layout());
    let e = c.base_environment().map_err(|e| e.to_string())?;
    let pulses = random_pulses(SEED, 50, c.channels);
    let matched = FieldEvolution::matched(c.dynamics().map_err(|e| e.to_string())?);
    let r = check_compatibility(&iota, &matched, &f, std::slice::from_ref(&e), &pulses, 1e-8, &c.weights)
        .map_err(|e| e.to_string())?;
    let mutant = FieldEvolution {
        amplitude_gain: matched.amplitude_gain * 1.1,
        ..matched
    };
    let m = check_compatibility(&iota, &mutant, &f, &[e], &pulses, 1e-8, &c.weights).map_err(|e| e.to_string())?;
    ensure(
        r.passed() && r.samples == 50 && !m.passed(),
        format!(
            "matched residual {:.2e} < 1e-8 on {} pulses, amplitude mutant residual {:.2e} flagged {}",
            r.max_residual,
            r.samples,
            m.max_residual,
            if m.passed() { "pass" } else { "fail" }
        ),
    )
}

fn run_binary(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_mycocat"))
        .env_remove("MYCOCAT_SEED")
        .env_remove("MYCOCAT_OUT_DIR")
        .args(["--seed", &SEED.to_string(), "--out-dir"])
        .arg(out)
        .arg("worked-example")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("worked-example exited with {:?}", status.status.code()))
    }
}

fn determinism() -> Outcome {
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for d in &dirs {
        run_binary(d.path())?;
    }
    let names = ["scan_amplitude.csv", "scan_duration.csv", "report.json"];
    let mut same = 0;
    for name in names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        same += usize::from(a == b);
    }
    ensure(
        same == names.len(),
        format!("{same}/{} output files byte-identical across two runs", names.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("pushout correctness", pushouts),
        ("functor laws", functor_laws),
        ("causality", causality),
        ("BCH order", bch_order),
        ("order-asymmetry prediction", order_asymmetry),
        ("Lie algebra numerics", lie_numerics),
        ("naturality", naturality),
        ("compatibility square", compatibility),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
