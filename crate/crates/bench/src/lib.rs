//! Shared fixtures for the criterion benches.

use albench_core::classifiers::{fit, ClassifierSpec, TrainedModel};
use albench_core::datasets::generate_xor_checkerboard;
use albench_core::strategies::QueryContext;
use albench_core::Matrix;

/// A pool with the first `n_labeled` points revealed and the evaluator fitted on them.
pub struct Pool {
    pub x: Matrix,
    pub labels: Vec<Option<usize>>,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub spec: ClassifierSpec,
    pub model: TrainedModel,
}

impl Pool {
    pub fn xor(n: usize, n_labeled: usize, spec: ClassifierSpec) -> Self {
        let ds = generate_xor_checkerboard(n, 7).expect("generator");
        let labeled: Vec<usize> = (0..n_labeled).collect();
        let unlabeled: Vec<usize> = (n_labeled..n).collect();
        let labels = (0..n).map(|i| (i < n_labeled).then(|| ds.labels[i])).collect();
        let lx = ds.features.select_rows(&labeled);
        let model = fit(&spec, &lx, &ds.labels[..n_labeled], ds.k_classes).expect("fit");
        Self {
            x: ds.features,
            labels,
            labeled,
            unlabeled,
            spec,
            model,
        }
    }

    pub fn context(&self, batch_size: usize) -> QueryContext<'_> {
        QueryContext {
            x: &self.x,
            labels: &self.labels,
            k_classes: 2,
            labeled: &self.labeled,
            unlabeled: &self.unlabeled,
            batch_size,
            step: 0,
            budget: 100,
            trial_seed: 1,
            step_seed: 2,
            evaluator: &self.spec,
            model: &self.model,
        }
    }
}
