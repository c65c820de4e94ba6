//! Low-rank factorization of a ratings table by alternating ridge regression.
//!
//! Minimizes `Σ_obs (r_ui − p_uᵀq_i)² + reg·(Σ‖p_u‖² + Σ‖q_i‖²)` over the
//! observed entries only. Each half-step solves every row's ridge system
//! exactly, so the objective never increases.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::ratings::RatingsTable;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    /// `|U|×k`, row `u` is user `user_ids[u]`.
    pub user_factors: DMatrix<f64>,
    /// `|I|×k`, row `i` is item `item_ids[i]`.
    pub item_factors: DMatrix<f64>,
    pub k: usize,
    pub reg: f64,
    pub iterations: usize,
    /// Objective after initialization, then after each iteration.
    pub loss_history: Vec<f64>,
}

impl FactorModel {
    pub fn user_index(&self) -> HashMap<u64, usize> {
        self.user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect()
    }

    pub fn item_index(&self) -> HashMap<u64, usize> {
        self.item_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.user_factors.row(user).dot(&self.item_factors.row(item))
    }
}

struct Observations {
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

fn index_table(table: &RatingsTable) -> Observations {
    let mut user_ids: Vec<u64> = table.triplets.iter().map(|r| r.user).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = table.triplets.iter().map(|r| r.item).collect();
    item_ids.sort_unstable();
    item_ids.dedup();
    let users: HashMap<u64, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let items: HashMap<u64, usize> = item_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut by_user = vec![Vec::new(); user_ids.len()];
    let mut by_item = vec![Vec::new(); item_ids.len()];
    for r in &table.triplets {
        let (u, i) = (users[&r.user], items[&r.item]);
        by_user[u].push((i, r.rating));
        by_item[i].push((u, r.rating));
    }
    Observations {
        user_ids,
        item_ids,
        by_user,
        by_item,
    }
}

/// Ridge solve for every row of `target` given the fixed `other` factors.
fn solve_rows(rows: &[Vec<(usize, f64)>], other: &DMatrix<f64>, k: usize, reg: f64) -> Result<DMatrix<f64>> {
    let solved: Vec<DVector<f64>> = rows
        .par_iter()
        .map(|obs| {
            let mut gram = DMatrix::<f64>::identity(k, k) * reg;
            let mut rhs = DVector::<f64>::zeros(k);
            for &(j, r) in obs {
                let q = other.row(j).transpose();
                gram.ger(1.0, &q, &q, 1.0);
                rhs.axpy(r, &q, 1.0);
            }
            match gram.clone().cholesky() {
                Some(c) => Ok(c.solve(&rhs)),
                // reg = 0 with fewer observations than k: least-norm fallback.
                None => gram
                    .pseudo_inverse(1e-12)
                    .map(|pinv| pinv * rhs)
                    .map_err(|e| Error::Numeric(format!("row solve failed: {e}"))),
            }
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(rows.len(), k);
    for (i, v) in solved.iter().enumerate() {
        out.set_row(i, &v.transpose());
    }
    Ok(out)
}

fn objective(obs: &Observations, users: &DMatrix<f64>, items: &DMatrix<f64>, reg: f64) -> f64 {
    let mut loss = 0.0;
    for (u, list) in obs.by_user.iter().enumerate() {
        for &(i, r) in list {
            let e = r - users.row(u).dot(&items.row(i));
            loss += e * e;
        }
    }
    loss + reg * (users.norm_squared() + items.norm_squared())
}

pub fn factorize(table: &RatingsTable, k: usize, reg: f64, iterations: usize, rng: &mut Rng) -> Result<FactorModel> {
    if k == 0 {
        return Err(Error::invalid("latent dimension k must be at least 1"));
    }
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    if !(reg >= 0.0) || !reg.is_finite() {
        return Err(Error::invalid(format!("regularization must be >= 0, got {reg}")));
    }
    if table.is_empty() {
        return Err(Error::data("cannot factorize an empty ratings table"));
    }
    let obs = index_table(table);
    let (n_users, n_items) = (obs.user_ids.len(), obs.item_ids.len());
    if k > n_users && k > n_items {
        return Err(Error::invalid(format!(
            "k={k} exceeds both the user count {n_users} and the item count {n_items}"
        )));
    }

    let hi = 1.0 / (k as f64).sqrt();
    let mut users = DMatrix::from_fn(n_users, k, |_, _| rng.uniform_range(0.0, hi));
    let mut items = DMatrix::from_fn(n_items, k, |_, _| rng.uniform_range(0.0, hi));
    let mut loss_history = vec![objective(&obs, &users, &items, reg)];

    for _ in 0..iterations {
        users = solve_rows(&obs.by_user, &items, k, reg)?;
        items = solve_rows(&obs.by_item, &users, k, reg)?;
        loss_history.push(objective(&obs, &users, &items, reg));
    }

    Ok(FactorModel {
        user_ids: obs.user_ids,
        item_ids: obs.item_ids,
        user_factors: users,
        item_factors: items,
        k,
        reg,
        iterations,
        loss_history,
    })
}

/// Root-mean-square reconstruction error over the table's observed entries.
pub fn rmse(model: &FactorModel, table: &RatingsTable) -> Result<f64> {
    if table.is_empty() {
        return Ok(0.0);
    }
    let users = model.user_index();
    let items = model.item_index();
    let mut sq = 0.0;
    for r in &table.triplets {
        let u = *users
            .get(&r.user)
            .ok_or_else(|| Error::data(format!("user {} not in model", r.user)))?;
        let i = *items
            .get(&r.item)
            .ok_or_else(|| Error::data(format!("item {} not in model", r.item)))?;
        let e = r.rating - model.predict(u, i);
        sq += e * e;
    }
    Ok((sq / table.len() as f64).sqrt())
}
