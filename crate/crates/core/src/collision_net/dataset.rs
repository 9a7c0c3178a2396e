use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::kinematics::{labels_unchecked, KinematicModel};

/// Samples drawn per RNG stream. Fixed so results do not depend on thread count.
pub const SHARD_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Fractions of the dataset assigned to train and validation; the rest is test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1 }
    }
}

/// Uniformly sampled configurations with their geometric collision labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionDataset {
    /// n x dof, radians.
    configs: Array2<f64>,
    /// n x m, 1.0 = link collides.
    labels: Array2<f64>,
    splits: Vec<Split>,
}

impl CollisionDataset {
    pub fn from_parts(configs: Array2<f64>, labels: Array2<f64>, splits: Vec<Split>) -> Result<Self> {
        if configs.nrows() != labels.nrows() || configs.nrows() != splits.len() {
            return Err(Error::dim("dataset rows", configs.nrows(), labels.nrows().min(splits.len())));
        }
        Ok(Self { configs, labels, splits })
    }

    pub fn len(&self) -> usize {
        self.configs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dof(&self) -> usize {
        self.configs.ncols()
    }

    pub fn link_count(&self) -> usize {
        self.labels.ncols()
    }

    pub fn configs(&self) -> ArrayView2<'_, f64> {
        self.configs.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, f64> {
        self.labels.view()
    }

    pub fn config(&self, i: usize) -> ArrayView1<'_, f64> {
        self.configs.row(i)
    }

    pub fn label_row(&self, i: usize) -> Vec<bool> {
        self.labels.row(i).iter().map(|&v| v > 0.5).collect()
    }

    pub fn split(&self, i: usize) -> Split {
        self.splits[i]
    }

    pub fn is_colliding(&self, i: usize) -> bool {
        self.labels.row(i).iter().any(|&v| v > 0.5)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Indices in `split` whose configuration collides somewhere.
    pub fn colliding_indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.splits[i] == split && self.is_colliding(i))
            .collect()
    }

    /// Fraction of configurations in `split` with at least one colliding link.
    pub fn positive_rate(&self, split: Split) -> f64 {
        let idx = self.indices(split);
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().filter(|&&i| self.is_colliding(i)).count() as f64 / idx.len() as f64
    }

    /// Rows `idx` of the config matrix.
    pub fn select_configs(&self, idx: &[usize]) -> Array2<f64> {
        self.configs.select(Axis(0), idx)
    }

    pub fn select_labels(&self, idx: &[usize]) -> Array2<f64> {
        self.labels.select(Axis(0), idx)
    }
}

/// Draws `n` configurations uniformly inside the joint limits and labels
/// each with the capsule collision oracle.
///
/// Sample `i` comes from shard `i / SHARD_SIZE`, whose RNG is stream
/// `i / SHARD_SIZE` of a ChaCha8 generator keyed by `seed`; the output is the
/// same for any `exec`. The first 80% of rows are train, the next 10% val.
pub fn generate_dataset(model: &KinematicModel, n: usize, seed: u64, exec: Exec) -> Result<CollisionDataset> {
    generate_dataset_with_splits(model, n, seed, SplitFractions::default(), exec)
}

pub fn generate_dataset_with_splits(
    model: &KinematicModel,
    n: usize,
    seed: u64,
    fractions: SplitFractions,
    exec: Exec,
) -> Result<CollisionDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be at least 1".into()));
    }
    if !(fractions.train >= 0.0 && fractions.val >= 0.0 && fractions.train + fractions.val <= 1.0) {
        return Err(Error::InvalidParameter("split fractions must be non-negative and sum to at most 1".into()));
    }
    let dof = model.dof();
    let m = model.link_count();
    let shards = n.div_ceil(SHARD_SIZE);
    let parts = map_indexed(exec, shards, |k| {
        let start = k * SHARD_SIZE;
        let count = SHARD_SIZE.min(n - start);
        let mut rng = shard_rng(seed, k as u64);
        let mut cfg = Vec::with_capacity(count * dof);
        let mut lab = Vec::with_capacity(count * m);
        let mut q = vec![0.0; dof];
        for _ in 0..count {
            for (v, j) in q.iter_mut().zip(model.joints()) {
                *v = rng.random_range(j.lower..=j.upper);
            }
            lab.extend(labels_unchecked(model, &q).into_iter().map(|c| if c { 1.0 } else { 0.0 }));
            cfg.extend_from_slice(&q);
        }
        (cfg, lab)
    });
    let mut configs = Vec::with_capacity(n * dof);
    let mut labels = Vec::with_capacity(n * m);
    for (c, l) in parts {
        configs.extend(c);
        labels.extend(l);
    }
    let n_train = (n as f64 * fractions.train).round() as usize;
    let n_val = (n as f64 * fractions.val).round() as usize;
    let splits = (0..n)
        .map(|i| {
            if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            }
        })
        .collect();
    Ok(CollisionDataset {
        configs: Array2::from_shape_vec((n, dof), configs).expect("shape"),
        labels: Array2::from_shape_vec((n, m), labels).expect("shape"),
        splits,
    })
}

pub(crate) fn shard_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{bundled, check_self_collision, JointConfig};

    #[test]
    fn single_link_model_never_collides() {
        let doc = r#"{"joints":[{"name":"j","parent":null,"origin":{"quat":[1,0,0,0],"pos":[0,0,0]},
            "axis":[0,0,1],"lower":-1,"upper":1,"max_velocity":1}],
            "links":[{"joint":0,"capsule":{"a":[0,0,0],"b":[0.1,0,0],"radius":0.05}}]}"#;
        let m = KinematicModel::from_json_str(doc).unwrap();
        let ds = generate_dataset(&m, 1, 7, Exec::Sequential).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label_row(0), vec![false]);
    }

    #[test]
    fn seeded_runs_repeat_and_exec_does_not_matter() {
        let m = bundled::toy_finger();
        let a = generate_dataset(&m, 10_000, 42, Exec::Sequential).unwrap();
        let b = generate_dataset(&m, 10_000, 42, Exec::Parallel).unwrap();
        let c = generate_dataset(&m, 10_000, 42, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = generate_dataset(&m, 10_000, 43, Exec::Sequential).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn labels_match_oracle_and_configs_in_limits() {
        let m = bundled::hand16();
        let ds = generate_dataset(&m, 500, 1, Exec::Parallel).unwrap();
        for i in 0..ds.len() {
            let q = JointConfig(ds.config(i).to_vec());
            assert!(q.within_limits(&m));
            assert_eq!(ds.label_row(i), check_self_collision(&m, &q).unwrap());
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let m = bundled::toy_finger();
        let ds = generate_dataset(&m, 1000, 3, Exec::Sequential).unwrap();
        let (tr, va, te) = (ds.indices(Split::Train), ds.indices(Split::Val), ds.indices(Split::Test));
        assert_eq!((tr.len(), va.len(), te.len()), (800, 100, 100));
        assert!(tr.iter().all(|i| !va.contains(i) && !te.contains(i)));
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(generate_dataset(&bundled::toy_finger(), 0, 1, Exec::Sequential).is_err());
    }
}
