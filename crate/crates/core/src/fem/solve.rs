//! Sparse direct solution of the per-harmonic systems.
//!
//! Constrained unknowns are eliminated by restricting the shared pattern to
//! the free rows and columns. The restricted pattern and its symbolic analysis
//! are computed once per constraint class and reused by every harmonic of that
//! class. The matrices are complex symmetric and are factorized as `LDLᵀ`; a
//! pivoting LU takes over if a pivot vanishes.

use std::sync::{Arc, Mutex};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, MatMut, Par};

use crate::exec::Exec;
use crate::fem::assembly::{ConstraintClass, HarmonicSystem};
use crate::fem::ldlt::{Ldlt, SymbolicLdlt};
use crate::geometry::Mesh2D;
use crate::{Error, Result, C64};

/// Relative residual accepted after factorization.
pub const RESIDUAL_TOL: f64 = 1e-8;

const REFINEMENT_STEPS: usize = 3;

/// The pattern restricted to free unknowns.
#[derive(Debug)]
struct Reduced {
    /// Free unknown for each reduced index.
    dofs: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the full pattern of each reduced entry.
    entries: Vec<usize>,
    ldlt: Arc<SymbolicLdlt>,
    lu: Mutex<Option<SymbolicLu<usize>>>,
}

impl Reduced {
    fn build(sys: &HarmonicSystem, m: usize) -> Result<Self> {
        let n = sys.dim();
        let mut map = vec![usize::MAX; n];
        let mut dofs = Vec::new();
        for d in 0..n {
            if !sys.is_constrained(d, m) {
                map[d] = dofs.len();
                dofs.push(d);
            }
        }
        let (fc, fr) = (sys.col_ptr(), sys.row_idx());
        let mut col_ptr = Vec::with_capacity(dofs.len() + 1);
        let mut row_idx = Vec::new();
        let mut entries = Vec::new();
        col_ptr.push(0);
        for &col in &dofs {
            for p in fc[col]..fc[col + 1] {
                let r = map[fr[p]];
                if r != usize::MAX {
                    row_idx.push(r);
                    entries.push(p);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let ldlt = SymbolicLdlt::new(dofs.len(), &col_ptr, &row_idx).map_err(|e| Error::Solver {
            m,
            detail: format!("symbolic analysis failed: {e}"),
        })?;
        Ok(Reduced {
            dofs,
            col_ptr,
            row_idx,
            entries,
            ldlt: Arc::new(ldlt),
            lu: Mutex::new(None),
        })
    }

    fn symbolic_lu(&self, m: usize) -> Result<SymbolicLu<usize>> {
        let mut guard = self.lu.lock().expect("solver cache poisoned");
        if let Some(s) = guard.as_ref() {
            return Ok(s.clone());
        }
        let n = self.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx);
        let s = SymbolicLu::try_new(sym).map_err(|e| Error::Solver {
            m,
            detail: format!("symbolic analysis failed: {e:?}"),
        })?;
        *guard = Some(s.clone());
        Ok(s)
    }

    fn dim(&self) -> usize {
        self.dofs.len()
    }

    fn matvec(&self, vals: &[C64], x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        for (c, &xc) in x.iter().enumerate() {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += vals[p] * xc;
            }
        }
    }
}

/// Factorizes harmonics of one system, sharing symbolic analyses.
#[derive(Debug)]
pub struct HarmonicSolver<'a> {
    sys: &'a HarmonicSystem,
    exec: Exec,
    axisymmetric: Mutex<Option<Arc<Reduced>>>,
    harmonic: Mutex<Option<Arc<Reduced>>>,
}

/// Numeric factorization of one harmonic.
pub struct Factorization {
    m: usize,
    k0: f64,
    n: usize,
    reduced: Arc<Reduced>,
    values: Vec<C64>,
    numeric: Numeric,
    par: Par,
}

enum Numeric {
    Ldlt(Ldlt),
    Lu(Lu<usize, C64>),
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("m", &self.m)
            .field("free", &self.reduced.dim())
            .finish()
    }
}

fn parallelism(exec: Exec) -> Par {
    if exec.is_parallel() {
        Par::rayon(0)
    } else {
        Par::Seq
    }
}

impl<'a> HarmonicSolver<'a> {
    pub fn new(sys: &'a HarmonicSystem, exec: Exec) -> Self {
        HarmonicSolver {
            sys,
            exec,
            axisymmetric: Mutex::new(None),
            harmonic: Mutex::new(None),
        }
    }

    pub fn system(&self) -> &HarmonicSystem {
        self.sys
    }

    fn reduced(&self, m: usize) -> Result<Arc<Reduced>> {
        let slot = match ConstraintClass::of(m) {
            ConstraintClass::Axisymmetric => &self.axisymmetric,
            ConstraintClass::Harmonic => &self.harmonic,
        };
        let mut guard = slot.lock().expect("solver cache poisoned");
        if let Some(r) = guard.as_ref() {
            return Ok(r.clone());
        }
        let r = Arc::new(Reduced::build(self.sys, m)?);
        *guard = Some(r.clone());
        Ok(r)
    }

    /// Factorizes the harmonic-`m` matrix.
    pub fn factor(&self, m: usize) -> Result<Factorization> {
        let reduced = self.reduced(m)?;
        let full = self.sys.values(m);
        let values: Vec<C64> = reduced.entries.iter().map(|&p| full[p]).collect();
        drop(full);
        let par = parallelism(self.exec);
        let numeric = match Ldlt::factor(reduced.ldlt.clone(), &values, par) {
            Ok(f) => Numeric::Ldlt(f),
            Err(pivot) => {
                log::warn!(
                    "harmonic {m}: symmetric factorization met a zero pivot at unknown {}; using LU",
                    reduced.dofs[pivot.index]
                );
                faer::set_global_parallelism(par);
                let n = reduced.dim();
                let sym = SymbolicSparseColMatRef::new_checked(n, n, &reduced.col_ptr, None, &reduced.row_idx);
                let mat = SparseColMatRef::new(sym, &values);
                let lu = Lu::try_new_with_symbolic(reduced.symbolic_lu(m)?, mat).map_err(|e| Error::Solver {
                    m,
                    detail: match e {
                        LuError::SymbolicSingular { index } => format!(
                            "matrix is singular: pivot {index} of {n} vanished (unknown {})",
                            reduced.dofs.get(index).copied().unwrap_or(usize::MAX)
                        ),
                        LuError::Generic(g) => format!("numeric factorization failed: {g:?}"),
                    },
                })?;
                Numeric::Lu(lu)
            }
        };
        Ok(Factorization {
            m,
            k0: self.sys.k0(),
            n: self.sys.dim(),
            reduced,
            values,
            numeric,
            par,
        })
    }

    /// Factorizes then solves for a single right-hand side.
    pub fn solve(&self, m: usize, k: &[C64]) -> Result<Vec<C64>> {
        let f = self.factor(m)?;
        Ok(f.solve(&[k])?.pop().expect("one solution"))
    }
}

impl Factorization {
    pub fn harmonic(&self) -> usize {
        self.m
    }

    /// Whether the pivoting fallback was needed.
    pub fn is_pivoted(&self) -> bool {
        matches!(self.numeric, Numeric::Lu(_))
    }

    fn apply_inverse(&self, x: MatMut<'_, C64>) {
        match &self.numeric {
            Numeric::Ldlt(f) => f.solve_in_place(x, self.par),
            Numeric::Lu(f) => {
                faer::set_global_parallelism(self.par);
                f.solve_in_place(x)
            }
        }
    }

    /// Solves `(A − k₀²B + jωμ₀C) U = k₀² K` for each full-length `K`.
    /// Entries of `K` at constrained unknowns are ignored; the corresponding
    /// entries of `U` are zero.
    pub fn solve(&self, rhs: &[&[C64]]) -> Result<Vec<Vec<C64>>> {
        let r = &self.reduced;
        let nr = r.dim();
        let nrhs = rhs.len();
        for k in rhs {
            if k.len() != self.n {
                return Err(Error::Consistency(format!(
                    "right-hand side has {} entries, system has {}",
                    k.len(),
                    self.n
                )));
            }
        }
        let k2 = self.k0 * self.k0;
        let b = Mat::<C64>::from_fn(nr, nrhs, |i, j| k2 * rhs[j][r.dofs[i]]);
        let mut x = b.clone();
        self.apply_inverse(x.as_mut());

        let mut out = Vec::with_capacity(nrhs);
        let mut ax = vec![C64::new(0.0, 0.0); nr];
        for j in 0..nrhs {
            let bj: Vec<C64> = (0..nr).map(|i| b[(i, j)]).collect();
            let bnorm = norm(&bj);
            let mut xj: Vec<C64> = (0..nr).map(|i| x[(i, j)]).collect();
            let mut rel = 0.0;
            for step in 0..=REFINEMENT_STEPS {
                r.matvec(&self.values, &xj, &mut ax);
                let res: Vec<C64> = bj.iter().zip(&ax).map(|(b, a)| b - a).collect();
                rel = if bnorm == 0.0 { norm(&res) } else { norm(&res) / bnorm };
                if rel <= RESIDUAL_TOL * 0.1 || step == REFINEMENT_STEPS {
                    break;
                }
                let mut d = Mat::<C64>::from_fn(nr, 1, |i, _| res[i]);
                self.apply_inverse(d.as_mut());
                for (i, xi) in xj.iter_mut().enumerate() {
                    *xi += d[(i, 0)];
                }
            }
            if !(rel <= RESIDUAL_TOL) {
                return Err(Error::Solver {
                    m: self.m,
                    detail: format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOL:e}"),
                });
            }
            let mut u = vec![C64::new(0.0, 0.0); self.n];
            for (i, &d) in r.dofs.iter().enumerate() {
                u[d] = xj[i];
            }
            out.push(u);
        }
        Ok(out)
    }

    /// Relative residual of a full-length solution against `K`.
    pub fn residual(&self, k: &[C64], u: &[C64]) -> f64 {
        let r = &self.reduced;
        let k2 = self.k0 * self.k0;
        let x: Vec<C64> = r.dofs.iter().map(|&d| u[d]).collect();
        let b: Vec<C64> = r.dofs.iter().map(|&d| k2 * k[d]).collect();
        let mut ax = vec![C64::new(0.0, 0.0); r.dim()];
        r.matvec(&self.values, &x, &mut ax);
        let res: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let bn = norm(&b);
        if bn == 0.0 {
            norm(&res)
        } else {
            norm(&res) / bn
        }
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Harmonic coefficients `U^(m) = [U_t; U_φ]` for `m = 0..=M`.
#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub mesh: Arc<Mesh2D>,
    pub freq: f64,
    pub harmonics: Vec<Vec<C64>>,
}

impl HarmonicSolution {
    pub fn max_harmonic(&self) -> usize {
        self.harmonics.len() - 1
    }

    pub fn u_t(&self, m: usize) -> &[C64] {
        &self.harmonics[m][..self.mesh.num_t_dofs()]
    }

    pub fn u_phi(&self, m: usize) -> &[C64] {
        &self.harmonics[m][self.mesh.num_t_dofs()..]
    }
}

/// Solves harmonic `m` for one right-hand side.
pub fn solve_harmonic(sys: &HarmonicSystem, k: &[C64], m: usize) -> Result<Vec<C64>> {
    HarmonicSolver::new(sys, Exec::default()).solve(m, k)
}

/// Solves every harmonic `m = 0..rhs.len()`.
pub fn solve_all(sys: &HarmonicSystem, rhs: &[Vec<C64>], exec: Exec) -> Result<HarmonicSolution> {
    let solver = HarmonicSolver::new(sys, exec);
    let harmonics = rhs
        .iter()
        .enumerate()
        .map(|(m, k)| solver.solve(m, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicSolution {
        mesh: sys.mesh().clone(),
        freq: sys.freq(),
        harmonics,
    })
}
