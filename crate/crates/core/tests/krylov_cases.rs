use mpir_core::greens::{build_problem, Rhs};
use mpir_core::*;

fn max_err(x: &[f32], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (*a as f64 - b).abs()).fold(0.0, f64::max)
}

#[test]
fn extended_residual_krylov_reaches_promoted_solution() {
    let n = 4096;
    let p = build_problem::<f32>(n, 799.0, Rhs::Integral).unwrap();
    let b64: Vec<f64> = p.b.iter().map(|&v| v as f64).collect();
    let xp = solve_mps(&lu_factor(p.a.cast::<f64>()).unwrap(), &b64).unwrap();
    let opts = MpOptions::default().tf(Precision::B32).tr(Precision::B64);

    let mut g = mp_glu(&p.a, &opts, 20).unwrap();
    let rg = krylov_ir_solve(&mut g, &p.b).unwrap();
    let mut bi = mp_blu(&p.a, &opts, 10).unwrap();
    let rb = krylov_ir_solve(&mut bi, &p.b).unwrap();

    assert_eq!(rg.reason, Reason::CorrectionStagnation);
    assert_eq!(rb.reason, Reason::CorrectionStagnation);
    let (eg, eb) = (max_err(&rg.sol, &xp), max_err(&rb.sol, &xp));
    assert!(eg <= 1e-6, "gmres {eg:e}");
    assert!(eb <= 2.0 * eg, "bicgstab {eb:e} vs gmres {eg:e}");
    assert!(rg.khist.iter().all(|&k| k <= 20));
}

#[test]
fn well_conditioned_half_case() {
    let n = 4069;
    let p = build_problem::<f32>(n, 1.0, Rhs::Manufactured).unwrap();
    let err = |x: &[f32]| x.iter().map(|v| (v - 1.0).abs() as f64).fold(0.0, f64::max);

    let mut f = mp_lu(&p.a, &MpOptions::default()).unwrap();
    let plain = ir_solve(&mut f, &p.b).unwrap();
    let mut g = mp_glu(&p.a, &MpOptions::default(), 10).unwrap();
    let kry = krylov_ir_solve(&mut g, &p.b).unwrap();

    assert!(kry.reason.is_success(), "{:?}", kry.reason);
    assert!(err(&kry.sol) <= err(&plain.sol), "{} > {}", err(&kry.sol), err(&plain.sol));
    assert!(kry.khist.iter().all(|&k| (2..=6).contains(&k)), "{:?}", kry.khist);
}
