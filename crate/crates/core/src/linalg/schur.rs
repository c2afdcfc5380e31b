use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{CscMatrix, LinearSystem, MultiplierBlock, TripletList};
use crate::{Error, Result};

struct EdgeCoupling {
    /// u-rows of the multiplier columns: `A_{u lambda}` restricted to the block.
    u_rows: Vec<usize>,
    a_ul: DMatrix<f64>,
    /// u-columns of the multiplier rows: `A_{lambda u}` restricted to the block.
    u_cols: Vec<usize>,
    a_lu: DMatrix<f64>,
    a_ll_inv: DMatrix<f64>,
}

fn coupling(a: &CscMatrix, at: &CscMatrix, n_u: usize, b: &MultiplierBlock) -> Result<EdgeCoupling> {
    let block = b.offset..b.offset + b.size;
    let mut a_ll: DMatrix<f64> = DMatrix::zeros(b.size, b.size);
    let mut ul: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (jl, c) in block.clone().enumerate() {
        let (rows, vals) = a.column(c);
        for (&r, &v) in rows.iter().zip(vals) {
            if r < n_u {
                ul.entry(r).or_insert_with(|| vec![0.0; b.size])[jl] += v;
            } else if block.contains(&r) {
                a_ll[(r - b.offset, jl)] += v;
            } else if v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "multiplier block of edge {} couples to another block",
                    b.edge
                )));
            }
        }
    }
    let mut lu: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (il, r) in block.clone().enumerate() {
        // column r of A^T is row r of A
        let (cols, vals) = at.column(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c < n_u {
                lu.entry(c).or_insert_with(|| vec![0.0; b.size])[il] += v;
            }
        }
    }
    let a_ll_inv = a_ll.try_inverse().ok_or(Error::SingularEdgeBlock { edge: b.edge })?;
    if !a_ll_inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularEdgeBlock { edge: b.edge });
    }
    let u_rows: Vec<usize> = ul.keys().copied().collect();
    let a_ul = DMatrix::from_fn(u_rows.len(), b.size, |i, j| ul[&u_rows[i]][j]);
    let u_cols: Vec<usize> = lu.keys().copied().collect();
    let a_lu = DMatrix::from_fn(b.size, u_cols.len(), |i, j| lu[&u_cols[j]][i]);
    Ok(EdgeCoupling { u_rows, a_ul, u_cols, a_lu, a_ll_inv })
}

/// Eliminates the multipliers edge by edge:
/// `A_uu - sum_f A_ul^f (A_ll^f)^-1 A_lu^f` with the matching right-hand side.
pub fn schur_condense_bh(system: &LinearSystem) -> Result<LinearSystem> {
    let p = system.partition.as_ref().ok_or_else(|| Error::InvalidArgument("system has no saddle partition".into()))?;
    let n_u = p.n_u;
    let a = &system.matrix;
    let at = a.transpose();
    let mut t = TripletList::new();
    for (r, c, v) in a.iter() {
        if r < n_u && c < n_u {
            t.push(r, c, v);
        }
    }
    let mut rhs = system.rhs.rows(0, n_u).into_owned();
    for b in &p.blocks {
        let e = coupling(a, &at, n_u, b)?;
        let left = &e.a_ul * &e.a_ll_inv;
        let mut update = &left * &e.a_lu;
        if system.symmetric && e.u_rows == e.u_cols {
            update = (&update + update.transpose()) * 0.5;
        }
        t.add_block(&e.u_rows, &e.u_cols, &(-update));
        let rl = system.rhs.rows(b.offset, b.size).into_owned();
        let r_update = &left * rl;
        for (i, &r) in e.u_rows.iter().enumerate() {
            rhs[r] -= r_update[i];
        }
    }
    LinearSystem::new(t.compress(n_u, n_u), rhs, system.symmetric, None)
}

/// Multipliers from the u-part of a saddle solution:
/// `lambda_f = (A_ll^f)^-1 (b_f - A_lu^f u)`.
pub fn schur_back_substitute(system: &LinearSystem, u: &DVector<f64>) -> Result<DVector<f64>> {
    let p = system.partition.as_ref().ok_or_else(|| Error::InvalidArgument("system has no saddle partition".into()))?;
    let a = &system.matrix;
    let at = a.transpose();
    let mut lambda = DVector::zeros(p.n_lambda());
    for b in &p.blocks {
        let e = coupling(a, &at, p.n_u, b)?;
        let uc = DVector::from_iterator(e.u_cols.len(), e.u_cols.iter().map(|&c| u[c]));
        let rl = system.rhs.rows(b.offset, b.size).into_owned() - &e.a_lu * uc;
        let l = &e.a_ll_inv * rl;
        lambda.rows_mut(b.offset - p.n_u, b.size).copy_from(&l);
    }
    Ok(lambda)
}
