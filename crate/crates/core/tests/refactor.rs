use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use mpir_core::greens::build_matrix;
use mpir_core::*;

struct Counting;

static TRACK: AtomicBool = AtomicBool::new(false);
static COUNT: AtomicUsize = AtomicUsize::new(0);
static BYTES: AtomicUsize = AtomicUsize::new(0);
// the counters are global, so measured sections must not overlap
static SERIAL: Mutex<()> = Mutex::new(());

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if TRACK.load(Ordering::Relaxed) {
            COUNT.fetch_add(1, Ordering::Relaxed);
            BYTES.fetch_add(layout.size(), Ordering::Relaxed);
        }
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn measure<T>(f: impl FnOnce() -> T) -> (T, usize, usize) {
    COUNT.store(0, Ordering::SeqCst);
    BYTES.store(0, Ordering::SeqCst);
    TRACK.store(true, Ordering::SeqCst);
    let out = f();
    TRACK.store(false, Ordering::SeqCst);
    (out, COUNT.load(Ordering::SeqCst), BYTES.load(Ordering::SeqCst))
}

#[test]
fn small_refactor_allocates_nothing() {
    let _g = SERIAL.lock().unwrap();
    let a = build_matrix::<f64>(48, 1.0).unwrap();
    let b = build_matrix::<f64>(48, 5.0).unwrap();
    let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
    let (res, count, _) = measure(|| mp_refactor(&mut f, &b));
    res.unwrap();
    assert_eq!(count, 0);
}

#[test]
fn large_refactor_allocates_less_than_a_copy() {
    let _g = SERIAL.lock().unwrap();
    let n = 300;
    let a = build_matrix::<f64>(n, 1.0).unwrap();
    let b = build_matrix::<f64>(n, 3.0).unwrap();
    let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
    let (res, _, bytes) = measure(|| mp_refactor(&mut f, &b));
    res.unwrap();
    assert!(bytes < n * n * 4, "{bytes} bytes");
}

#[test]
fn buffered_solve_does_not_allocate_scratch_per_iteration() {
    let _g = SERIAL.lock().unwrap();
    let n = 40;
    let a = build_matrix::<f64>(n, 1.0).unwrap();
    let rhs = vec![1.0; n];
    let f = mp_lu(&a, &MpOptions::default()).unwrap();
    let mut bufs = SolveBuffers::for_factorization(&f);
    let term = TermParams::default();
    let (rep, count, bytes) = measure(|| ir_solve_buffered(&f, &rhs, &term, &mut bufs));
    let rep = rep.unwrap();
    // only the report itself: solution and two short histories
    assert!(count <= 3 + 2 * rep.rhist.len(), "{count} allocations");
    assert!(bytes < 2 * n * 8 + 64 * rep.rhist.len(), "{bytes} bytes");
}

#[test]
fn refactor_with_same_matrix_is_bitwise_idempotent() {
    let _g = SERIAL.lock().unwrap();
    let a = build_matrix::<f64>(70, 600.0).unwrap();
    let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
    let before = f.factors_b32().unwrap().clone();
    let norm = f.a_norm1();
    mp_refactor(&mut f, &a).unwrap();
    let after = f.factors_b32().unwrap();
    assert_eq!(before.pivots(), after.pivots());
    let same = before
        .packed()
        .as_slice()
        .iter()
        .zip(after.packed().as_slice())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    assert!(same);
    assert_eq!(f.a_norm1(), norm);
}

#[test]
fn refactor_with_doubled_matrix_halves_solution() {
    let _g = SERIAL.lock().unwrap();
    let n = 100;
    let a = build_matrix::<f64>(n, 1.0).unwrap();
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin() + 1.0).collect();
    let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
    let x1 = ir_solve(&mut f, &b).unwrap().sol;
    let a2 = Matrix::from_fn(n, n, |i, j| 2.0 * a[(i, j)]);
    mp_refactor(&mut f, &a2).unwrap();
    let x2 = ir_solve(&mut f, &b).unwrap().sol;
    let fresh = ir_solve(&mut mp_lu(&a2, &MpOptions::default()).unwrap(), &b).unwrap().sol;
    assert_eq!(x2, fresh);
    let tol = 10.0 * Precision::B64.unit_roundoff() * norm_inf(&x1);
    for (h, x) in x2.iter().zip(&x1) {
        assert!((2.0 * h - x).abs() <= tol);
    }
}

#[test]
fn refactor_rejects_wrong_size() {
    let _g = SERIAL.lock().unwrap();
    let mut f = mp_lu(&build_matrix::<f64>(10, 1.0).unwrap(), &MpOptions::default()).unwrap();
    let b = build_matrix::<f64>(11, 1.0).unwrap();
    assert!(matches!(mp_refactor(&mut f, &b), Err(MpError::DimensionMismatch { .. })));
}
