//! Multiprecision factorization objects: the working-precision matrix, its
//! factored low-precision copy, and the preallocated buffers the refinement
//! loop runs in.

use half::f16;

use crate::error::{MpError, Result};
use crate::ir::TermParams;
use crate::lu::{lu_factor, solve_lps_in_place, solve_mps_in_place, LuFactors};
use crate::matrix::{matrix_one_norm, Matrix};
use crate::precision::{demote_matrix, Precision, PrecisionConfig, Real};

/// Optional settings for [`mp_lu`] and friends. `None` selects the default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MpOptions {
    /// Factorization precision. Defaults to binary32, or binary16 when the
    /// working precision is binary32.
    pub tf: Option<Precision>,
    /// Residual precision. Defaults to the working precision.
    pub tr: Option<Precision>,
    /// Terminate on small residual (`true`) or small backward error.
    pub resid_term: Option<bool>,
    /// Promote factor entries during the solve instead of demoting the
    /// residual. Defaults to `true` only for binary16 factors.
    pub on_the_fly: Option<bool>,
}

impl MpOptions {
    pub fn tf(mut self, p: Precision) -> Self {
        self.tf = Some(p);
        self
    }

    pub fn tr(mut self, p: Precision) -> Self {
        self.tr = Some(p);
        self
    }

    pub fn resid_term(mut self, on: bool) -> Self {
        self.resid_term = Some(on);
        self
    }

    pub fn on_the_fly(mut self, on: bool) -> Self {
        self.on_the_fly = Some(on);
        self
    }
}

/// Settings after default resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedConfig {
    pub precisions: PrecisionConfig,
    pub on_the_fly: bool,
    pub resid_term: bool,
}

/// Apply the defaulting rules for working precision `tw`.
pub fn resolve_config(tw: Precision, opts: &MpOptions) -> Result<ResolvedConfig> {
    if tw == Precision::B16 {
        return Err(MpError::InvalidConfig("binary16 is not supported as the working precision".into()));
    }
    let tr = opts.tr.unwrap_or(tw);
    let tf = opts.tf.unwrap_or(if tw == Precision::B32 { Precision::B16 } else { Precision::B32 });
    let mut on_the_fly = opts.on_the_fly.unwrap_or(tf == Precision::B16);
    if tf == tw {
        on_the_fly = true;
    }
    let precisions = PrecisionConfig::new(tw, tf, tr, on_the_fly)?;
    Ok(ResolvedConfig {
        precisions,
        on_the_fly,
        resid_term: opts.resid_term.unwrap_or(true),
    })
}

/// Factors in whichever precision was selected at run time.
#[derive(Debug, Clone)]
pub(crate) enum LowLu {
    B64(LuFactors<f64>),
    B32(LuFactors<f32>),
    B16(LuFactors<f16>),
}

macro_rules! with_lu {
    ($lu:expr, $f:ident => $body:expr) => {
        match $lu {
            LowLu::B64($f) => $body,
            LowLu::B32($f) => $body,
            LowLu::B16($f) => $body,
        }
    };
}

impl LowLu {
    fn factor<W: Real>(a: &Matrix<W>, tf: Precision) -> Result<Self> {
        Ok(match tf {
            Precision::B64 => LowLu::B64(lu_factor(demote_matrix(a)?.matrix)?),
            Precision::B32 => LowLu::B32(lu_factor(demote_matrix(a)?.matrix)?),
            Precision::B16 => LowLu::B16(lu_factor(demote_matrix(a)?.matrix)?),
        })
    }

    fn refactor<W: Real>(&mut self, a: &Matrix<W>) -> Result<()> {
        with_lu!(self, f => f.refactor_from(a))
    }

    /// On-the-fly solve with arithmetic in `S`.
    pub(crate) fn solve_mps<S: Real>(&self, v: &mut [S]) -> Result<()> {
        with_lu!(self, f => solve_mps_in_place(f, v))
    }

    fn solve_lps<S: Real>(&self, v: &mut [S], scratch: &mut LowScratch) -> Result<()> {
        match (self, scratch) {
            (LowLu::B64(f), LowScratch::B64(s)) => solve_lps_in_place(f, v, s),
            (LowLu::B32(f), LowScratch::B32(s)) => solve_lps_in_place(f, v, s),
            (LowLu::B16(f), LowScratch::B16(s)) => solve_lps_in_place(f, v, s),
            _ => Err(MpError::InvalidConfig("scratch precision does not match the factors".into())),
        }
    }

    fn storage_bytes(&self) -> usize {
        with_lu!(self, f => f.packed().storage_bytes())
    }
}

#[derive(Debug, Clone)]
pub(crate) enum LowScratch {
    B64(Vec<f64>),
    B32(Vec<f32>),
    B16(Vec<f16>),
}

impl LowScratch {
    fn new(p: Precision, n: usize) -> Self {
        match p {
            Precision::B64 => LowScratch::B64(vec![0.0; n]),
            Precision::B32 => LowScratch::B32(vec![0.0; n]),
            Precision::B16 => LowScratch::B16(vec![f16::ZERO; n]),
        }
    }
}

/// Solution and residual vectors in the residual precision.
#[derive(Debug, Clone)]
pub(crate) enum TrBuffers {
    B64 { x: Vec<f64>, r: Vec<f64> },
    B32 { x: Vec<f32>, r: Vec<f32> },
}

/// Per-solve scratch: residual/solution in TR plus the low precision vector
/// used by in-place solves. The factorization owns one set; allocate more
/// with [`SolveBuffers::for_factorization`] to run solves concurrently.
#[derive(Debug, Clone)]
pub struct SolveBuffers {
    pub(crate) tr: TrBuffers,
    pub(crate) low: LowScratch,
}

impl SolveBuffers {
    fn new(cfg: &PrecisionConfig, n: usize) -> Self {
        let tr = match cfg.tr {
            Precision::B64 => TrBuffers::B64 {
                x: vec![0.0; n],
                r: vec![0.0; n],
            },
            _ => TrBuffers::B32 {
                x: vec![0.0; n],
                r: vec![0.0; n],
            },
        };
        SolveBuffers {
            tr,
            low: LowScratch::new(cfg.tf, n),
        }
    }

    pub fn for_factorization<W: Real>(mpf: &MpFactorization<W>) -> Self {
        Self::new(&mpf.core.config.precisions, mpf.n())
    }

    pub(crate) fn len(&self) -> usize {
        match &self.tr {
            TrBuffers::B64 { x, .. } => x.len(),
            TrBuffers::B32 { x, .. } => x.len(),
        }
    }
}

/// Krylov scratch in the working precision.
#[derive(Debug, Clone)]
pub enum KrylovWorkspace<W> {
    Gmres {
        /// `basissize + 1` columns of length `n`.
        basis: Matrix<W>,
        /// `(basissize + 1) x basissize` upper Hessenberg matrix.
        hessenberg: Matrix<W>,
        /// Givens cosines, sines and the rotated right side.
        givens: Vec<(W, W)>,
        g: Vec<W>,
        /// Right side / correction vector.
        rhs: Vec<W>,
        basissize: usize,
        /// Relative reduction of the preconditioned residual that ends a correction.
        tol: f64,
    },
    Bicgstab {
        /// `x, r, r̂, p, v, s, t`.
        vectors: [Vec<W>; 7],
        maxiters: usize,
        tol: f64,
    },
}

impl<W: Real> KrylovWorkspace<W> {
    pub fn gmres(n: usize, basissize: usize) -> Result<Self> {
        if basissize == 0 {
            return Err(MpError::InvalidParameter("basissize must be at least 1".into()));
        }
        Ok(KrylovWorkspace::Gmres {
            basis: Matrix::zeros(n, basissize + 1),
            hessenberg: Matrix::zeros(basissize + 1, basissize),
            givens: vec![(W::ZERO, W::ZERO); basissize],
            g: vec![W::ZERO; basissize + 1],
            rhs: vec![W::ZERO; n],
            basissize,
            tol: crate::krylov::GMRES_INNER_TOL,
        })
    }

    pub fn bicgstab(n: usize, maxiters: usize) -> Result<Self> {
        if maxiters == 0 {
            return Err(MpError::InvalidParameter("iteration budget must be at least 1".into()));
        }
        Ok(KrylovWorkspace::Bicgstab {
            vectors: std::array::from_fn(|_| vec![W::ZERO; n]),
            maxiters,
            tol: crate::krylov::BICGSTAB_INNER_TOL,
        })
    }

    /// Upper bound on Krylov iterations per correction.
    pub fn basissize(&self) -> usize {
        match self {
            KrylovWorkspace::Gmres { basissize, .. } => *basissize,
            KrylovWorkspace::Bicgstab { maxiters, .. } => *maxiters,
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            KrylovWorkspace::Gmres { tol, .. } | KrylovWorkspace::Bicgstab { tol, .. } => *tol,
        }
    }

    pub fn set_tolerance(&mut self, t: f64) -> Result<()> {
        if !(t > 0.0 && t < 1.0) {
            return Err(MpError::InvalidParameter(format!("inner tolerance must lie in (0, 1), got {t}")));
        }
        match self {
            KrylovWorkspace::Gmres { tol, .. } | KrylovWorkspace::Bicgstab { tol, .. } => *tol = t,
        }
        Ok(())
    }

    /// Number of length-`n` vectors held.
    pub fn vector_count(&self) -> usize {
        match self {
            KrylovWorkspace::Gmres { basis, .. } => basis.ncols(),
            KrylovWorkspace::Bicgstab { vectors, .. } => vectors.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MpCore<W> {
    pub(crate) a_high: Matrix<W>,
    pub(crate) lu: LowLu,
    pub(crate) a_norm1: f64,
    pub(crate) config: ResolvedConfig,
}

/// A working-precision matrix together with the LU factors of its low
/// precision copy. The copy is overwritten by the factors.
#[derive(Debug, Clone)]
pub struct MpFactorization<W> {
    pub(crate) core: MpCore<W>,
    pub(crate) bufs: SolveBuffers,
    pub(crate) krylov: Option<KrylovWorkspace<W>>,
    pub(crate) term: TermParams,
}

/// `‖A‖₁` with each entry rounded to `F` and summed in `F`, without forming
/// the rounded copy.
fn one_norm_as<W: Real, F: Real>(a: &Matrix<W>) -> f64 {
    let mut best = F::ZERO;
    for j in 0..a.ncols() {
        let mut s = F::ZERO;
        for &v in a.col(j) {
            s += v.cast::<F>().abs();
        }
        if s > best {
            best = s;
        }
    }
    best.to_f64()
}

fn cached_norm<W: Real>(a: &Matrix<W>, tf: Precision) -> f64 {
    match tf {
        Precision::B64 => one_norm_as::<W, f64>(a),
        Precision::B32 => one_norm_as::<W, f32>(a),
        Precision::B16 => matrix_one_norm(a).to_f64(),
    }
}

fn build<W: Real>(a: Matrix<W>, opts: &MpOptions, krylov: Option<KrylovWorkspace<W>>) -> Result<MpFactorization<W>> {
    if !a.is_square() {
        return Err(MpError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !a.all_finite() {
        return Err(MpError::InvalidParameter("matrix has non-finite entries".into()));
    }
    let config = resolve_config(W::PRECISION, opts)?;
    let tf = config.precisions.tf;
    let lu = LowLu::factor(&a, tf)?;
    let a_norm1 = cached_norm(&a, tf);
    let bufs = SolveBuffers::new(&config.precisions, a.nrows());
    Ok(MpFactorization {
        core: MpCore {
            a_high: a,
            lu,
            a_norm1,
            config,
        },
        bufs,
        krylov,
        term: TermParams::default(),
    })
}

/// Copy `a`, round the copy to the factorization precision and factor it.
pub fn mp_lu<W: Real>(a: &Matrix<W>, opts: &MpOptions) -> Result<MpFactorization<W>> {
    build(a.clone(), opts, None)
}

/// As [`mp_lu`] but takes ownership of `a`, avoiding the copy.
pub fn mp_lu_owned<W: Real>(a: Matrix<W>, opts: &MpOptions) -> Result<MpFactorization<W>> {
    build(a, opts, None)
}

/// Factorization plus a GMRES workspace of `basissize + 1` vectors.
pub fn mp_glu<W: Real>(a: &Matrix<W>, opts: &MpOptions, basissize: usize) -> Result<MpFactorization<W>> {
    let ws = KrylovWorkspace::gmres(a.nrows(), basissize)?;
    build(a.clone(), opts, Some(ws))
}

/// Factorization plus a BiCGSTAB workspace with an iteration budget.
pub fn mp_blu<W: Real>(a: &Matrix<W>, opts: &MpOptions, maxiters: usize) -> Result<MpFactorization<W>> {
    let ws = KrylovWorkspace::bicgstab(a.nrows(), maxiters)?;
    build(a.clone(), opts, Some(ws))
}

/// Replace the matrix with `b` and refactor, reusing all storage.
pub fn mp_refactor<W: Real>(mpf: &mut MpFactorization<W>, b: &Matrix<W>) -> Result<()> {
    let n = mpf.n();
    if b.nrows() != n || b.ncols() != n {
        return Err(MpError::DimensionMismatch {
            expected: n,
            found: if b.nrows() != n { b.nrows() } else { b.ncols() },
        });
    }
    if !b.all_finite() {
        return Err(MpError::InvalidParameter("matrix has non-finite entries".into()));
    }
    let core = &mut mpf.core;
    core.a_high.as_mut_slice().copy_from_slice(b.as_slice());
    core.a_norm1 = cached_norm(&core.a_high, core.config.precisions.tf);
    core.lu.refactor(&core.a_high)
}

impl<W: Real> MpFactorization<W> {
    pub fn n(&self) -> usize {
        self.core.a_high.nrows()
    }

    pub fn matrix(&self) -> &Matrix<W> {
        &self.core.a_high
    }

    pub fn precisions(&self) -> PrecisionConfig {
        self.core.config.precisions
    }

    pub fn on_the_fly(&self) -> bool {
        self.core.config.on_the_fly
    }

    pub fn resid_term(&self) -> bool {
        self.core.config.resid_term
    }

    /// Cached `‖A‖₁`.
    pub fn a_norm1(&self) -> f64 {
        self.core.a_norm1
    }

    pub fn term_params(&self) -> TermParams {
        self.term
    }

    pub fn set_term_params(&mut self, term: TermParams) {
        self.term = term;
    }

    pub fn krylov(&self) -> Option<&KrylovWorkspace<W>> {
        self.krylov.as_ref()
    }

    pub fn krylov_mut(&mut self) -> Option<&mut KrylovWorkspace<W>> {
        self.krylov.as_mut()
    }

    /// Factors of the low precision copy when they are binary32.
    pub fn factors_b32(&self) -> Option<&LuFactors<f32>> {
        match &self.core.lu {
            LowLu::B32(f) => Some(f),
            _ => None,
        }
    }

    pub fn factors_b16(&self) -> Option<&LuFactors<f16>> {
        match &self.core.lu {
            LowLu::B16(f) => Some(f),
            _ => None,
        }
    }

    pub fn factors_b64(&self) -> Option<&LuFactors<f64>> {
        match &self.core.lu {
            LowLu::B64(f) => Some(f),
            _ => None,
        }
    }

    /// Bytes held by the working matrix and the factored copy.
    pub fn matrix_storage_bytes(&self) -> usize {
        self.core.a_high.storage_bytes() + self.core.lu.storage_bytes()
    }

    /// Apply the factors: `v ← U⁻¹ L⁻¹ P v`, on the fly in `W`.
    pub fn apply_preconditioner(&self, v: &mut [W]) -> Result<()> {
        self.core.lu.solve_mps(v)
    }
}

impl<W: Real> MpCore<W> {
    pub(crate) fn n(&self) -> usize {
        self.a_high.nrows()
    }

    /// Correction `d` for residual `r` in place, per the configured solve mode.
    pub(crate) fn correct<R: Real>(&self, r: &mut [R], low: &mut LowScratch) -> Result<()> {
        if self.config.on_the_fly {
            self.lu.solve_mps(r)
        } else {
            self.lu.solve_lps(r, low)
        }
    }
}
