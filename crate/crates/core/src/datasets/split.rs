use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{hex_digest, rng_from_seed};

/// Redraws of the initial labelled pool before giving up.
pub const MAX_INITIAL_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub trial_seed: u64,
    pub train_fraction: f64,
    pub n_initial: usize,
}

impl SplitSpec {
    pub fn new(trial_seed: u64) -> Self {
        Self {
            trial_seed,
            train_fraction: 0.6,
            n_initial: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.n_initial < 2 {
            return Err(Error::InvalidArgument("n_initial must be at least 2".into()));
        }
        Ok(())
    }

    /// `ceil(train_fraction * n)`, robust to the representation error of the fraction.
    pub fn train_size(&self, n: usize) -> usize {
        let t = self.train_fraction * n as f64;
        ((t - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

/// Train/test partition plus the initial labelled indices. All index sets are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialSplit {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub initial_labeled_idx: Vec<usize>,
}

impl TrialSplit {
    /// Stable digest of the three index sets; equal splits hash equal on every platform.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::new();
        for set in [&self.train_idx, &self.test_idx, &self.initial_labeled_idx] {
            bytes.extend_from_slice(&(set.len() as u64).to_le_bytes());
            for &i in set {
                bytes.extend_from_slice(&(i as u64).to_le_bytes());
            }
        }
        hex_digest(&bytes)
    }
}

/// Seeded shuffle: the first `ceil(0.6 n)` indices train, the rest test; the
/// initial pool is drawn from train until it contains at least two classes.
pub fn make_split(ds: &Dataset, spec: &SplitSpec) -> Result<TrialSplit> {
    spec.validate()?;
    let n = ds.n_samples();
    let n_train = spec.train_size(n);
    if n_train >= n {
        return Err(Error::Split(format!(
            "train fraction {} leaves no test samples for n={n}",
            spec.train_fraction
        )));
    }
    if spec.n_initial > n_train {
        return Err(Error::Split(format!(
            "{} initial labels requested but the training split has {n_train} samples",
            spec.n_initial
        )));
    }

    let mut rng = rng_from_seed(spec.trial_seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();

    let mut pool = train_idx.clone();
    let mut initial = None;
    for _ in 0..MAX_INITIAL_REDRAWS {
        pool.shuffle(&mut rng);
        let draw = &pool[..spec.n_initial];
        let first = ds.labels[draw[0]];
        if draw.iter().any(|&i| ds.labels[i] != first) {
            initial = Some(draw.to_vec());
            break;
        }
    }
    let mut initial_labeled_idx = initial.ok_or_else(|| {
        Error::Split(format!(
            "could not draw an initial pool with two classes from `{}` after {MAX_INITIAL_REDRAWS} attempts",
            ds.name
        ))
    })?;

    train_idx.sort_unstable();
    test_idx.sort_unstable();
    initial_labeled_idx.sort_unstable();
    Ok(TrialSplit {
        train_idx,
        test_idx,
        initial_labeled_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::Origin;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn toy(n: usize, pos_every: usize) -> Dataset {
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let y = (0..n).map(|i| usize::from(i % pos_every == 0)).collect();
        Dataset::new("toy", x, y, Origin::Synthetic).unwrap()
    }

    #[test]
    fn sizes_follow_fraction() {
        let s = make_split(&toy(100, 2), &SplitSpec::new(1)).unwrap();
        assert_eq!(s.train_idx.len(), 60);
        assert_eq!(s.test_idx.len(), 40);
        assert_eq!(s.initial_labeled_idx.len(), 20);
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = toy(100, 3);
        assert_eq!(
            make_split(&ds, &SplitSpec::new(9)).unwrap(),
            make_split(&ds, &SplitSpec::new(9)).unwrap()
        );
        assert_ne!(
            make_split(&ds, &SplitSpec::new(9)).unwrap().fingerprint(),
            make_split(&ds, &SplitSpec::new(10)).unwrap().fingerprint()
        );
    }

    #[test]
    fn small_dataset_index_audit() {
        let ds = toy(50, 2);
        let s = make_split(&ds, &SplitSpec::new(4)).unwrap();
        assert_eq!(s.train_idx.len(), 30);
        assert_eq!(s.initial_labeled_idx.len(), 20);
        let mut seen = vec![0u8; 50];
        for &i in s.train_idx.iter().chain(&s.test_idx) {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(s
            .initial_labeled_idx
            .iter()
            .all(|i| s.train_idx.binary_search(i).is_ok()));
    }

    #[test]
    fn pathological_imbalance_errors() {
        // a single positive among 100: 20 of 60 train labels rarely include it,
        // and never when it falls into the test split
        let ds = toy(100, 1000);
        let mut failures = 0;
        for seed in 0..20 {
            if make_split(&ds, &SplitSpec::new(seed)).is_err() {
                failures += 1;
            }
        }
        assert!(failures > 0);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(seed in any::<u64>(), n in 40usize..300) {
            let ds = toy(n, 2);
            let s = make_split(&ds, &SplitSpec::new(seed)).unwrap();
            prop_assert_eq!(s.train_idx.len(), (0.6 * n as f64 - 1e-9).ceil() as usize);
            prop_assert_eq!(s.test_idx.len() + s.train_idx.len(), n);
            let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let classes: std::collections::BTreeSet<usize> =
                s.initial_labeled_idx.iter().map(|&i| ds.labels[i]).collect();
            prop_assert!(classes.len() >= 2);
        }
    }
}
