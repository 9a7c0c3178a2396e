use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::kinematics::KinematicModel;

use super::dataset::{CollisionDataset, Split};
use super::nets::{Ccn, Cpn};
use super::train::{correction_quality, train_ccn_from, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    /// Oracle collision rate of corrected colliding val configurations.
    pub val_collision_rate: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best_alpha: f64,
    pub best_beta: f64,
    pub cells: Vec<GridCell>,
    /// False when no cell met the MSE cap; the best cell is then simply the
    /// one with the lowest collision rate.
    pub feasible: bool,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,beta,val_collision_rate,val_mse\n");
        for c in &self.cells {
            s.push_str(&format!("{},{},{},{}\n", c.alpha, c.beta, c.val_collision_rate, c.val_mse));
        }
        s
    }
}

/// Trains one correction network per `(alpha, beta)` pair and keeps the one
/// with the lowest oracle collision rate among those whose val MSE stays at or
/// below `mse_cap`. Cells are independent single-threaded jobs; `exec`
/// decides whether they run side by side.
pub fn grid_search(
    model: &KinematicModel,
    alphas: &[f64],
    betas: &[f64],
    dataset: &CollisionDataset,
    cpn: &Cpn,
    config: &TrainingConfig,
    mse_cap: f64,
    exec: Exec,
) -> Result<GridResult> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidParameter("grid axes must be non-empty".into()));
    }
    let val = dataset.select_configs(&dataset.colliding_indices(Split::Val));
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    let cells = map_indexed(exec, pairs.len(), |k| -> Result<GridCell> {
        let (alpha, beta) = pairs[k];
        let cfg = TrainingConfig { alpha, beta, ..*config };
        // same initial weights in every cell
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ccn = Ccn::new(model, &mut rng);
        let (ccn, _) = train_ccn_from(model, ccn, dataset, cpn, &cfg, Exec::Sequential, &mut rng)?;
        let q = correction_quality(model, &ccn, &val, Exec::Sequential)?;
        Ok(GridCell {
            alpha,
            beta,
            val_collision_rate: q.collision_rate,
            val_mse: q.mse,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let by_rate = |a: &&GridCell, b: &&GridCell| {
        a.val_collision_rate
            .total_cmp(&b.val_collision_rate)
            .then(a.val_mse.total_cmp(&b.val_mse))
    };
    let feasible_best = cells.iter().filter(|c| c.val_mse <= mse_cap).min_by(by_rate);
    let (best, feasible) = match feasible_best {
        Some(c) => (c, true),
        None => {
            log::warn!("no grid cell meets the MSE cap {mse_cap}; falling back to the lowest collision rate");
            (cells.iter().min_by(by_rate).expect("non-empty grid"), false)
        }
    };
    Ok(GridResult {
        best_alpha: best.alpha,
        best_beta: best.beta,
        cells: cells.clone(),
        feasible,
    })
}
