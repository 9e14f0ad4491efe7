//! Sparse `LDLᵀ` for complex symmetric (not Hermitian) matrices.
//!
//! The fill-reducing ordering, supernode partition and row patterns come from
//! faer's symbolic Cholesky analysis. The numeric factorization is a
//! left-looking supernodal scheme without pivoting; the dense kernels are
//! faer's matrix product and triangular solves.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_unit_lower_triangular_in_place, solve_unit_upper_triangular_in_place};
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::SymbolicSparseColMatRef;
use faer::{Accum, MatMut, MatRef, Par, Side};

use std::sync::Arc;

use crate::C64;

const PANEL: usize = 32;

/// Ordering and supernodal structure of a structurally symmetric pattern.
#[derive(Debug)]
pub struct SymbolicLdlt {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    sn_begin: Vec<usize>,
    row_ptr: Vec<usize>,
    /// Off-diagonal row pattern of each supernode, permuted indices.
    rows: Vec<usize>,
    val_ptr: Vec<usize>,
    /// For supernode `s`: descendants `d` whose rows `rows_d[a..b]` fall in `s`.
    upd_ptr: Vec<usize>,
    upd: Vec<(usize, usize, usize)>,
    /// Lower-triangle input entries per permuted column: (permuted row, source position).
    a_ptr: Vec<usize>,
    a_entries: Vec<(usize, usize)>,
}

/// A pivot vanished during factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroPivot {
    /// Original (unpermuted) index of the failing unknown.
    pub index: usize,
}

#[derive(Debug)]
pub struct Ldlt {
    sym: Arc<SymbolicLdlt>,
    vals: Vec<C64>,
}

impl SymbolicLdlt {
    /// Analyzes an `n × n` column-compressed pattern with sorted rows. The
    /// pattern must be structurally symmetric.
    pub fn new(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Result<Self, String> {
        let a = SymbolicSparseColMatRef::new_checked(n, n, col_ptr, None, row_idx);
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let sym = factorize_symbolic_cholesky(a, Side::Lower, SymmetricOrdering::Amd, params)
            .map_err(|e| format!("{e:?}"))?;
        let perm: Vec<usize> = match sym.perm() {
            Some(p) => p.arrays().0.iter().map(|&i| i).collect(),
            None => (0..n).collect(),
        };
        let SymbolicCholeskyRaw::Supernodal(sn) = sym.raw() else {
            return Err("expected a supernodal analysis".into());
        };
        let ns = sn.n_supernodes();
        let mut sn_begin: Vec<usize> = sn.supernode_begin().to_vec();
        sn_begin.push(n);
        let row_ptr: Vec<usize> = sn.col_ptr_for_row_idx().to_vec();
        let rows: Vec<usize> = sn.row_idx().to_vec();

        let mut val_ptr = Vec::with_capacity(ns + 1);
        val_ptr.push(0usize);
        let mut col_super = vec![0usize; n];
        for s in 0..ns {
            let nc = sn_begin[s + 1] - sn_begin[s];
            let nr = nc + row_ptr[s + 1] - row_ptr[s];
            val_ptr.push(val_ptr[s] + nr * nc);
            col_super[sn_begin[s]..sn_begin[s + 1]].fill(s);
        }

        let mut lists: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); ns];
        for d in 0..ns {
            let rd = &rows[row_ptr[d]..row_ptr[d + 1]];
            let mut a = 0;
            while a < rd.len() {
                let s = col_super[rd[a]];
                let mut b = a + 1;
                while b < rd.len() && rd[b] < sn_begin[s + 1] {
                    b += 1;
                }
                lists[s].push((d, a, b));
                a = b;
            }
        }
        let mut upd_ptr = vec![0usize];
        let mut upd = Vec::new();
        for l in lists {
            upd.extend(l);
            upd_ptr.push(upd.len());
        }

        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut count = vec![0usize; n + 1];
        for c in 0..n {
            for &r in &row_idx[col_ptr[c]..col_ptr[c + 1]] {
                if inv[r] >= inv[c] {
                    count[inv[c] + 1] += 1;
                }
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let a_ptr = count.clone();
        let mut a_entries = vec![(0usize, 0usize); a_ptr[n]];
        let mut next = count;
        for c in 0..n {
            for p in col_ptr[c]..col_ptr[c + 1] {
                let (pr, pc) = (inv[row_idx[p]], inv[c]);
                if pr >= pc {
                    a_entries[next[pc]] = (pr, p);
                    next[pc] += 1;
                }
            }
        }

        Ok(SymbolicLdlt {
            n,
            perm,
            sn_begin,
            row_ptr,
            rows,
            val_ptr,
            upd_ptr,
            upd,
            a_ptr,
            a_entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn factor_len(&self) -> usize {
        *self.val_ptr.last().unwrap_or(&0)
    }

    fn n_supernodes(&self) -> usize {
        self.sn_begin.len() - 1
    }

    fn rows_of(&self, s: usize) -> &[usize] {
        &self.rows[self.row_ptr[s]..self.row_ptr[s + 1]]
    }
}

/// In-place `LDLᵀ` of the leading `nc` columns of a column-major `nr × nc`
/// panel. Strictly lower entries become `L`, the diagonal becomes `D`.
fn dense_ldlt(blk: &mut [C64], nr: usize, nc: usize, par: Par, tmp: &mut Vec<C64>) -> Result<(), usize> {
    let mut a = MatMut::from_column_major_slice_mut(blk, nr, nc);
    let mut k0 = 0;
    while k0 < nc {
        let kb = PANEL.min(nc - k0);
        for k in k0..k0 + kb {
            let d = a[(k, k)];
            if !(d.norm() > 0.0) || !d.re.is_finite() || !d.im.is_finite() {
                return Err(k);
            }
            let inv = 1.0 / d;
            for i in k + 1..nr {
                a[(i, k)] *= inv;
            }
            for j in k + 1..k0 + kb {
                let f = a[(j, k)] * d;
                for i in j..nr {
                    let lik = a[(i, k)];
                    a[(i, j)] -= lik * f;
                }
            }
        }
        let rest = k0 + kb;
        if rest < nc {
            let width = nc - rest;
            tmp.clear();
            tmp.resize(width * kb, C64::new(0.0, 0.0));
            let mut wd = MatMut::from_column_major_slice_mut(tmp, width, kb);
            for c in 0..kb {
                let dc = a[(k0 + c, k0 + c)];
                for i in 0..width {
                    wd[(i, c)] = a[(rest + i, k0 + c)] * dc;
                }
            }
            let (left, right) = a.as_mut().split_at_col_mut(rest);
            let lp = left.as_ref().submatrix(rest, k0, nr - rest, kb);
            matmul(
                right.submatrix_mut(rest, 0, nr - rest, width),
                Accum::Add,
                lp,
                wd.as_ref().transpose(),
                C64::new(-1.0, 0.0),
                par,
            );
        }
        k0 += kb;
    }
    Ok(())
}

impl Ldlt {
    /// Factorizes the matrix whose entries are `values`, in the order of the
    /// pattern given to [`SymbolicLdlt::new`].
    pub fn factor(sym: Arc<SymbolicLdlt>, values: &[C64], par: Par) -> Result<Self, ZeroPivot> {
        let this = &*sym;
        let mut vals = vec![C64::new(0.0, 0.0); this.factor_len()];
        let mut pos = vec![0usize; this.n];
        let mut wd: Vec<C64> = Vec::new();
        let mut prod: Vec<C64> = Vec::new();
        for s in 0..this.n_supernodes() {
            let (b, e) = (this.sn_begin[s], this.sn_begin[s + 1]);
            let nc = e - b;
            let rows_s = this.rows_of(s);
            let nr = nc + rows_s.len();
            for j in b..e {
                pos[j] = j - b;
            }
            for (i, &r) in rows_s.iter().enumerate() {
                pos[r] = nc + i;
            }
            let (head, tail) = vals.split_at_mut(this.val_ptr[s]);
            let blk = &mut tail[..nr * nc];
            for j in b..e {
                for &(r, src) in &this.a_entries[this.a_ptr[j]..this.a_ptr[j + 1]] {
                    blk[(j - b) * nr + pos[r]] += values[src];
                }
            }

            for &(d, a, bb) in &this.upd[this.upd_ptr[s]..this.upd_ptr[s + 1]] {
                let nd = this.sn_begin[d + 1] - this.sn_begin[d];
                let rows_d = this.rows_of(d);
                let nrd = nd + rows_d.len();
                let ld = MatRef::from_column_major_slice(
                    &head[this.val_ptr[d]..this.val_ptr[d] + nrd * nd],
                    nrd,
                    nd,
                );
                let (m, k) = (rows_d.len() - a, bb - a);
                wd.clear();
                wd.resize(k * nd, C64::new(0.0, 0.0));
                let mut wdm = MatMut::from_column_major_slice_mut(&mut wd, k, nd);
                for c in 0..nd {
                    let dc = ld[(c, c)];
                    for i in 0..k {
                        wdm[(i, c)] = ld[(nd + a + i, c)] * dc;
                    }
                }
                prod.clear();
                prod.resize(m * k, C64::new(0.0, 0.0));
                let mut pm = MatMut::from_column_major_slice_mut(&mut prod, m, k);
                matmul(
                    pm.as_mut(),
                    Accum::Replace,
                    ld.subrows(nd + a, m),
                    wdm.as_ref().transpose(),
                    C64::new(1.0, 0.0),
                    par,
                );
                for jj in 0..k {
                    let col = rows_d[a + jj] - b;
                    for ii in jj..m {
                        blk[col * nr + pos[rows_d[a + ii]]] -= pm[(ii, jj)];
                    }
                }
            }

            dense_ldlt(blk, nr, nc, par, &mut wd).map_err(|k| ZeroPivot { index: this.perm[b + k] })?;
        }
        Ok(Ldlt { sym: Arc::clone(&sym), vals })
    }

    /// Solves in place for each column of `x` (`n × k`, original ordering).
    pub fn solve_in_place(&self, mut x: MatMut<'_, C64>, par: Par) {
        let sym = &*self.sym;
        let (n, k) = (sym.n, x.ncols());
        let mut y = faer::Mat::<C64>::from_fn(n, k, |i, j| x[(sym.perm[i], j)]);
        let ns = sym.n_supernodes();
        let mut tmp: Vec<C64> = Vec::new();
        for s in 0..ns {
            let (b, e) = (sym.sn_begin[s], sym.sn_begin[s + 1]);
            let nc = e - b;
            let rows_s = sym.rows_of(s);
            let l = self.block(s);
            solve_unit_lower_triangular_in_place(l.subrows(0, nc), y.as_mut().subrows_mut(b, nc), par);
            if rows_s.is_empty() {
                continue;
            }
            tmp.clear();
            tmp.resize(rows_s.len() * k, C64::new(0.0, 0.0));
            let mut t = MatMut::from_column_major_slice_mut(&mut tmp, rows_s.len(), k);
            matmul(
                t.as_mut(),
                Accum::Replace,
                l.subrows(nc, rows_s.len()),
                y.as_ref().subrows(b, nc),
                C64::new(1.0, 0.0),
                par,
            );
            for j in 0..k {
                for (i, &r) in rows_s.iter().enumerate() {
                    y[(r, j)] -= t[(i, j)];
                }
            }
        }
        for s in 0..ns {
            let l = self.block(s);
            for c in 0..sym.sn_begin[s + 1] - sym.sn_begin[s] {
                let inv = 1.0 / l[(c, c)];
                let row = sym.sn_begin[s] + c;
                for j in 0..k {
                    y[(row, j)] *= inv;
                }
            }
        }
        for s in (0..ns).rev() {
            let (b, e) = (sym.sn_begin[s], sym.sn_begin[s + 1]);
            let nc = e - b;
            let rows_s = sym.rows_of(s);
            let l = self.block(s);
            if !rows_s.is_empty() {
                tmp.clear();
                tmp.resize(rows_s.len() * k, C64::new(0.0, 0.0));
                let mut t = MatMut::from_column_major_slice_mut(&mut tmp, rows_s.len(), k);
                for j in 0..k {
                    for (i, &r) in rows_s.iter().enumerate() {
                        t[(i, j)] = y[(r, j)];
                    }
                }
                matmul(
                    y.as_mut().subrows_mut(b, nc),
                    Accum::Add,
                    l.subrows(nc, rows_s.len()).transpose(),
                    t.as_ref(),
                    C64::new(-1.0, 0.0),
                    par,
                );
            }
            solve_unit_upper_triangular_in_place(l.subrows(0, nc).transpose(), y.as_mut().subrows_mut(b, nc), par);
        }
        for i in 0..n {
            for j in 0..k {
                x[(sym.perm[i], j)] = y[(i, j)];
            }
        }
    }

    fn block(&self, s: usize) -> MatRef<'_, C64> {
        let sym = &*self.sym;
        let nc = sym.sn_begin[s + 1] - sym.sn_begin[s];
        let nr = nc + sym.row_ptr[s + 1] - sym.row_ptr[s];
        MatRef::from_column_major_slice(&self.vals[sym.val_ptr[s]..sym.val_ptr[s + 1]], nr, nc)
    }
}
