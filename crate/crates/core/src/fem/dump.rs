//! Plain-text dump of a harmonic system for debugging.
//!
//! ```text
//! # borfem harmonic system
//! # m <m> dim <n> nnz <nnz> t_dofs <Q>
//! <row> <col> <re> <im>        one line per stored entry, column-major
//! # rhs <n>                    present when a right-hand side is given
//! <index> <re> <im>            one line per nonzero entry of k0²·K
//! # constrained <count>
//! <index>                      one line per eliminated unknown
//! ```
//!
//! Indices are zero-based over `[U_t; U_φ]`. Values are printed with 17
//! significant digits so they round-trip exactly.

use std::io::Write;

use crate::fem::assembly::HarmonicSystem;
use crate::{Result, C64};

pub fn write_system<W: Write>(out: &mut W, sys: &HarmonicSystem, m: usize, rhs: Option<&[C64]>) -> Result<()> {
    let values = sys.values(m);
    writeln!(out, "# borfem harmonic system")?;
    writeln!(out, "# m {m} dim {} nnz {} t_dofs {}", sys.dim(), sys.nnz(), sys.num_t())?;
    for col in 0..sys.dim() {
        for p in sys.col_ptr()[col]..sys.col_ptr()[col + 1] {
            let v = values[p];
            writeln!(out, "{} {col} {:.16e} {:.16e}", sys.row_idx()[p], v.re, v.im)?;
        }
    }
    if let Some(k) = rhs {
        let k2 = sys.k0() * sys.k0();
        writeln!(out, "# rhs {}", k.len())?;
        for (i, v) in k.iter().enumerate() {
            if *v != C64::new(0.0, 0.0) {
                writeln!(out, "{i} {:.16e} {:.16e}", k2 * v.re, k2 * v.im)?;
            }
        }
    }
    let fixed: Vec<usize> = (0..sys.dim()).filter(|&d| sys.is_constrained(d, m)).collect();
    writeln!(out, "# constrained {}", fixed.len())?;
    for d in fixed {
        writeln!(out, "{d}")?;
    }
    Ok(())
}

/// Reads the matrix section back as `(row, col, value)` triplets.
pub fn read_triplets(text: &str) -> Result<Vec<(usize, usize, C64)>> {
    let mut out = Vec::new();
    for line in text.lines().skip(2) {
        if line.starts_with('#') {
            break;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || crate::Error::Parse(format!("malformed triplet line '{line}'"));
        if f.len() != 4 {
            return Err(bad());
        }
        let row = f[0].parse().map_err(|_| bad())?;
        let col = f[1].parse().map_err(|_| bad())?;
        let re: f64 = f[2].parse().map_err(|_| bad())?;
        let im: f64 = f[3].parse().map_err(|_| bad())?;
        out.push((row, col, C64::new(re, im)));
    }
    Ok(out)
}
