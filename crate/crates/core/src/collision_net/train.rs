//! Minibatch training loops for both networks.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::kinematics::{labels_unchecked, KinematicModel};
use crate::nn::Adam;

use super::dataset::{CollisionDataset, Split};
use super::nets::{link_accuracy, Ccn, Cpn, LossParts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight of the MSE term in the correction loss.
    pub alpha: f64,
    /// Weight of the collision-probability term in the correction loss.
    pub beta: f64,
    pub seed: u64,
    /// Below this positive rate, batches are enriched with colliding samples.
    pub oversample_below: f64,
    /// Share of each enriched batch drawn from colliding samples.
    pub oversample_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 256,
            epochs: 50,
            alpha: 1.0,
            beta: 5.0,
            seed: 0,
            oversample_below: 0.05,
            oversample_fraction: 0.3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::TrainingConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment coefficients must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || (self.alpha == 0.0 && self.beta == 0.0) {
            return bad("loss weights must be non-negative and not both zero");
        }
        if !(0.0..=1.0).contains(&self.oversample_fraction) {
            return bad("oversample fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One row per epoch. `val_metric` is classification accuracy for the
/// prediction network and the oracle collision rate for the correction network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub epochs: Vec<EpochRecord>,
    /// Whether batches were enriched with colliding samples.
    pub oversampled: bool,
}

impl TrainingReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,val_metric")?;
        for r in &self.epochs {
            writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_metric)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }
}

/// Yields minibatches of indices for one epoch.
struct BatchPlan {
    batches: Vec<Vec<usize>>,
}

impl BatchPlan {
    fn new(rng: &mut ChaCha8Rng, pool: &[usize], positives: Option<&[usize]>, batch: usize, fraction: f64) -> Self {
        let mut order = pool.to_vec();
        order.shuffle(rng);
        let batches = match positives {
            Some(pos) if !pos.is_empty() => {
                let n_pos = ((batch as f64) * fraction).round() as usize;
                let n_rest = batch.saturating_sub(n_pos).max(1);
                order
                    .chunks(n_rest)
                    .map(|chunk| {
                        let mut b = chunk.to_vec();
                        for _ in 0..n_pos {
                            b.push(pos[rng.random_range(0..pos.len())]);
                        }
                        b
                    })
                    .collect()
            }
            _ => order.chunks(batch).map(|c| c.to_vec()).collect(),
        };
        Self { batches }
    }
}

fn check_finite(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

/// Trains a fresh prediction network on the train split; validation loss and
/// accuracy at threshold 0.5 are recorded on the val split every epoch.
pub fn train_cpn(model: &KinematicModel, dataset: &CollisionDataset, config: &TrainingConfig) -> Result<(Cpn, TrainingReport)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cpn = Cpn::new(model, &mut rng);
    train_cpn_from(cpn, dataset, config, &mut rng)
}

/// Continues training an existing prediction network.
pub fn train_cpn_from(
    mut cpn: Cpn,
    dataset: &CollisionDataset,
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Cpn, TrainingReport)> {
    config.validate()?;
    if dataset.dof() != cpn.dof() || dataset.link_count() != cpn.link_count() {
        return Err(Error::dim("dataset width", cpn.dof(), dataset.dof()));
    }
    let train = dataset.indices(Split::Train);
    let val = dataset.indices(Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::TrainingConfig("dataset needs non-empty train and val splits".into()));
    }
    let positives = dataset.colliding_indices(Split::Train);
    let oversampled = dataset.positive_rate(Split::Train) < config.oversample_below && !positives.is_empty();
    let val_q = dataset.select_configs(&val);
    let val_t = dataset.select_labels(&val);

    let mut opt = Adam::new(&cpn.net, config.learning_rate, config.beta1, config.beta2);
    let mut report = TrainingReport {
        epochs: Vec::with_capacity(config.epochs),
        oversampled,
    };
    for epoch in 1..=config.epochs {
        let plan = BatchPlan::new(
            rng,
            &train,
            oversampled.then_some(positives.as_slice()),
            config.batch_size,
            config.oversample_fraction,
        );
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in &plan.batches {
            let q = dataset.select_configs(idx);
            let t = dataset.select_labels(idx);
            let (l, g) = cpn.loss_and_grad(q.view(), t.view())?;
            check_finite(epoch, l)?;
            opt.update(&mut cpn.net, &g);
            sum += l * idx.len() as f64;
            count += idx.len();
        }
        let train_loss = sum / count as f64;
        let (val_loss, _) = cpn.loss_and_grad(val_q.view(), val_t.view())?;
        check_finite(epoch, val_loss)?;
        let acc = link_accuracy(&cpn, val_q.view(), val_t.view(), 0.5)?;
        let val_metric = acc.iter().sum::<f64>() / acc.len() as f64;
        log::debug!("cpn epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_metric:.4}");
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_metric,
        });
    }
    Ok((cpn, report))
}

/// Fraction of configurations (rows) that the geometric oracle reports as
/// colliding.
pub fn oracle_collision_rate(model: &KinematicModel, configs: &Array2<f64>, exec: Exec) -> f64 {
    if configs.nrows() == 0 {
        return 0.0;
    }
    let hits = map_indexed(exec, configs.nrows(), |i| {
        let row = configs.row(i);
        let q = row.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| row.to_vec());
        labels_unchecked(model, &q).into_iter().any(|c| c)
    });
    hits.into_iter().filter(|&c| c).count() as f64 / configs.nrows() as f64
}

/// Held-out quality of a correction network on a set of configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionQuality {
    pub collision_rate: f64,
    pub mse: f64,
    /// Mean over samples and joints of `|q_hat - q| / (upper - lower)`.
    pub mean_relative_deviation: f64,
}

pub fn correction_quality(model: &KinematicModel, ccn: &Ccn, configs: &Array2<f64>, exec: Exec) -> Result<CorrectionQuality> {
    let corrected = ccn.forward_batch(configs.view())?;
    let collision_rate = oracle_collision_rate(model, &corrected, exec);
    let diff = &corrected - configs;
    let total = diff.len() as f64;
    let mse = diff.iter().map(|d| d * d).sum::<f64>() / total;
    let ranges: Vec<f64> = model.joints().iter().map(|j| j.range()).collect();
    let mut rel = 0.0;
    for row in diff.rows() {
        for (d, r) in row.iter().zip(&ranges) {
            rel += d.abs() / r;
        }
    }
    Ok(CorrectionQuality {
        collision_rate,
        mse,
        mean_relative_deviation: rel / total,
    })
}

/// Trains a correction network on the colliding train configurations with
/// `cpn` frozen. Every epoch records the composite loss on colliding val
/// configurations and their collision rate after correction according to the
/// geometric oracle (not the network).
pub fn train_ccn(
    model: &KinematicModel,
    dataset: &CollisionDataset,
    cpn: &Cpn,
    config: &TrainingConfig,
    exec: Exec,
) -> Result<(Ccn, TrainingReport)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ccn = Ccn::new(model, &mut rng);
    train_ccn_from(model, ccn, dataset, cpn, config, exec, &mut rng)
}

pub fn train_ccn_from(
    model: &KinematicModel,
    mut ccn: Ccn,
    dataset: &CollisionDataset,
    cpn: &Cpn,
    config: &TrainingConfig,
    exec: Exec,
    rng: &mut ChaCha8Rng,
) -> Result<(Ccn, TrainingReport)> {
    config.validate()?;
    if dataset.dof() != ccn.dof() || cpn.dof() != ccn.dof() {
        return Err(Error::dim("correction network width", ccn.dof(), dataset.dof()));
    }
    let train = dataset.colliding_indices(Split::Train);
    let val = dataset.colliding_indices(Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(Error::TrainingConfig(
            "dataset needs colliding configurations in both train and val splits".into(),
        ));
    }
    let val_q = dataset.select_configs(&val);
    let mut opt = Adam::new(&ccn.net, config.learning_rate, config.beta1, config.beta2);
    let mut report = TrainingReport::default();
    for epoch in 1..=config.epochs {
        let plan = BatchPlan::new(rng, &train, None, config.batch_size, 0.0);
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in &plan.batches {
            let q = dataset.select_configs(idx);
            let (parts, g) = ccn.loss_and_grad(q.view(), cpn, config.alpha, config.beta)?;
            check_finite(epoch, parts.total)?;
            opt.update(&mut ccn.net, &g);
            sum += parts.total * idx.len() as f64;
            count += idx.len();
        }
        let train_loss = sum / count as f64;
        let (val_parts, _): (LossParts, _) = ccn.loss_and_grad(val_q.view(), cpn, config.alpha, config.beta)?;
        check_finite(epoch, val_parts.total)?;
        let corrected = ccn.forward_batch(val_q.view())?;
        let rate = oracle_collision_rate(model, &corrected, exec);
        log::debug!(
            "ccn epoch {epoch}: train {train_loss:.5} val {:.5} (mse {:.5}, col {:.4}) oracle rate {rate:.4}",
            val_parts.total,
            val_parts.mse,
            val_parts.collision
        );
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val_parts.total,
            val_metric: rate,
        });
    }
    Ok((ccn, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision_net::dataset::generate_dataset;
    use crate::kinematics::bundled;

    fn small() -> TrainingConfig {
        TrainingConfig {
            epochs: 3,
            batch_size: 64,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainingConfig::default();
        assert!(c.validate().is_ok());
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn cpn_training_is_deterministic_and_improves() {
        let model = bundled::toy_finger();
        let ds = generate_dataset(&model, 4000, 2, Exec::Parallel).unwrap();
        let (a, ra) = train_cpn(&model, &ds, &small()).unwrap();
        let (b, rb) = train_cpn(&model, &ds, &small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(ra.epochs[2].train_loss < ra.epochs[0].train_loss);
        assert_eq!(ra.epochs.len(), 3);
    }

    #[test]
    fn divergence_names_epoch() {
        let model = bundled::toy_finger();
        let ds = generate_dataset(&model, 2000, 2, Exec::Parallel).unwrap();
        let cfg = TrainingConfig {
            learning_rate: f64::MAX,
            ..small()
        };
        match train_cpn(&model, &ds, &cfg) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = TrainingReport {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_loss: 0.25,
                val_metric: 0.9,
            }],
            oversampled: false,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_loss,val_loss,val_metric\n1,0.5,0.25,0.9\n");
    }

    #[test]
    fn oversampling_kicks_in_for_rare_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool: Vec<usize> = (0..1000).collect();
        let plan = BatchPlan::new(&mut rng, &pool, Some(&[7, 8]), 100, 0.3);
        let first = &plan.batches[0];
        assert_eq!(first.len(), 100);
        assert!(first[70..].iter().all(|&i| i == 7 || i == 8));
    }
}
