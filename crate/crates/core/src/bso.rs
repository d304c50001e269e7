//! Beam-search oracle (BSO): a width-limited search over query orders that
//! scores every candidate pool by its accuracy on the test split. It reads
//! test labels on purpose and is only an upper-bound estimate, never a
//! strategy.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::classifiers::{fit, ClassifierSpec};
use crate::datasets::{Dataset, TrialSplit};
use crate::error::{Error, Result};
use crate::protocol::{
    curves_from, evaluate, CheckpointStore, ExperimentConfig, ExperimentOutput, FailureRow, RunOptions, TrialResult,
};
use crate::seed::{derive_seed, rng_from_seed};

pub const BSO_STRATEGY: &str = "bso";

/// Explicit acknowledgement that the caller lets a routine read test labels.
#[derive(Clone, Copy, Debug)]
pub struct TestSetOracle(());

impl TestSetOracle {
    pub fn acknowledge() -> Self {
        TestSetOracle(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BsoOptions {
    pub width: usize,
    /// Queries per trial; `None` follows the experiment's budget policy.
    pub budget: Option<usize>,
    /// Evaluate at most this many seeded candidates per beam and step.
    pub candidate_cap: Option<usize>,
}

impl Default for BsoOptions {
    fn default() -> Self {
        Self {
            width: 5,
            budget: None,
            candidate_cap: None,
        }
    }
}

/// One retained pool: its query order, its sorted label set and test metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    pub sequence: Vec<usize>,
    pub set: Vec<usize>,
    pub metrics: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamState {
    pub beams: Vec<Beam>,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BsoOutcome {
    /// Curves hold the best beam's metrics at every step; `selections` is the
    /// best final beam's query order.
    pub result: TrialResult,
    pub final_state: BeamState,
    /// Beam count after each prune.
    pub beam_sizes: Vec<usize>,
    /// Distinct pools that were trained.
    pub fits: usize,
}

/// Best first: higher accuracy, then the lexicographically smaller set.
fn beam_order(a: &Beam, b: &Beam) -> std::cmp::Ordering {
    b.metrics[0].total_cmp(&a.metrics[0]).then_with(|| a.set.cmp(&b.set))
}

struct Scorer<'a> {
    ds: &'a Dataset,
    test_x: crate::matrix::Matrix,
    test_y: Vec<usize>,
    evaluator: &'a ClassifierSpec,
    cache: HashMap<Vec<usize>, [f64; 3]>,
}

impl<'a> Scorer<'a> {
    fn score(&self, set: &[usize]) -> Result<[f64; 3]> {
        let x = self.ds.features.select_rows(set);
        let y: Vec<usize> = set.iter().map(|&i| self.ds.labels[i]).collect();
        let model = fit(self.evaluator, &x, &y, self.ds.k_classes)?;
        evaluate(&model, &self.test_x, &self.test_y, self.ds.k_classes)
    }

    /// Scores every set, fitting only the ones not seen before.
    fn score_all(&mut self, sets: &[Vec<usize>]) -> Result<Vec<[f64; 3]>> {
        let fresh: Vec<&Vec<usize>> = {
            let mut seen = BTreeSet::new();
            sets.iter()
                .filter(|s| !self.cache.contains_key(*s) && seen.insert(*s))
                .collect()
        };
        let scored: Vec<Result<[f64; 3]>> = fresh.par_iter().map(|s| self.score(s)).collect();
        for (s, r) in fresh.into_iter().zip(scored) {
            self.cache.insert(s.clone(), r?);
        }
        Ok(sets.iter().map(|s| self.cache[s]).collect())
    }
}

/// Runs the beam search on one split.
pub fn beam_search_oracle(
    ds: &Dataset,
    split: &TrialSplit,
    evaluator: &ClassifierSpec,
    budget: usize,
    opts: &BsoOptions,
    seed: u64,
    _oracle: TestSetOracle,
) -> Result<BsoOutcome> {
    if opts.width == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    let available = split.train_idx.len() - split.initial_labeled_idx.len();
    if budget > available {
        return Err(Error::PoolExhausted {
            requested: budget,
            available,
        });
    }
    if opts.candidate_cap == Some(0) {
        return Err(Error::InvalidArgument("candidate cap must be positive".into()));
    }
    let mut scorer = Scorer {
        ds,
        test_x: ds.features.select_rows(&split.test_idx),
        test_y: split.test_idx.iter().map(|&i| ds.labels[i]).collect(),
        evaluator,
        cache: HashMap::new(),
    };
    let initial = split.initial_labeled_idx.clone();
    let m0 = scorer.score_all(std::slice::from_ref(&initial))?[0];
    let mut state = BeamState {
        beams: vec![Beam {
            sequence: Vec::new(),
            set: initial.clone(),
            metrics: m0,
        }],
        step: 0,
    };
    let mut points = vec![(initial.len(), m0)];
    let mut beam_sizes = Vec::with_capacity(budget);

    for step in 0..budget {
        let mut children: Vec<Beam> = Vec::new();
        for (b, beam) in state.beams.iter().enumerate() {
            let mut cands: Vec<usize> = split
                .train_idx
                .iter()
                .copied()
                .filter(|i| beam.set.binary_search(i).is_err())
                .collect();
            if let Some(cap) = opts.candidate_cap.filter(|&c| c < cands.len()) {
                let mut rng = rng_from_seed(derive_seed(seed, &["bso-candidates".into(), step.into(), b.into()]));
                let mut keep: Vec<usize> = sample(&mut rng, cands.len(), cap)
                    .into_iter()
                    .map(|k| cands[k])
                    .collect();
                keep.sort_unstable();
                cands = keep;
            }
            let sets: Vec<Vec<usize>> = cands
                .iter()
                .map(|&c| {
                    let mut s = beam.set.clone();
                    let pos = s.binary_search(&c).unwrap_err();
                    s.insert(pos, c);
                    s
                })
                .collect();
            let scores = scorer.score_all(&sets)?;
            let mut own: Vec<Beam> = cands
                .iter()
                .zip(sets)
                .zip(scores)
                .map(|((&c, set), metrics)| {
                    let mut sequence = beam.sequence.clone();
                    sequence.push(c);
                    Beam { sequence, set, metrics }
                })
                .collect();
            own.sort_by(beam_order);
            own.truncate(opts.width);
            children.extend(own);
        }
        children.sort_by(|a, b| beam_order(a, b).then_with(|| a.sequence.cmp(&b.sequence)));
        children.dedup_by(|later, earlier| later.set == earlier.set);
        children.truncate(opts.width);
        beam_sizes.push(children.len());
        state = BeamState {
            beams: children,
            step: step + 1,
        };
        points.push((initial.len() + step + 1, state.beams[0].metrics));
    }

    let result = TrialResult {
        dataset: ds.name.clone(),
        strategy: BSO_STRATEGY.into(),
        trial: 0,
        split_hash: split.fingerprint(),
        curves: curves_from(&points)?,
        selections: state.beams[0].sequence.clone(),
        timings: Vec::new(),
    };
    Ok(BsoOutcome {
        result,
        final_state: state,
        beam_sizes,
        fits: scorer.cache.len(),
    })
}

/// BSO on every (dataset, trial) of an experiment, using the same splits as
/// the strategy runs. Records use strategy id `"bso"`.
pub fn run_bso(
    cfg: &ExperimentConfig,
    datasets: &[Dataset],
    bso: &BsoOptions,
    opts: &RunOptions,
) -> Result<ExperimentOutput> {
    if datasets.is_empty() || cfg.n_trials == 0 {
        return Err(Error::InvalidArgument(
            "BSO needs at least one dataset and one trial".into(),
        ));
    }
    let store = opts.out_dir.as_ref().map(CheckpointStore::open).transpose()?;
    let mut out = match &store {
        Some(s) => s.load()?,
        None => ExperimentOutput::default(),
    };
    let done: BTreeSet<(String, usize)> = out
        .records
        .iter()
        .filter(|r| r.strategy == BSO_STRATEGY)
        .map(|r| (r.dataset.clone(), r.trial))
        .collect();
    let mut units: Vec<(usize, usize)> = Vec::new();
    for (d, ds) in datasets.iter().enumerate() {
        for t in 0..cfg.n_trials {
            if !done.contains(&(ds.name.clone(), t)) {
                units.push((d, t));
            }
        }
    }
    if let Some(cap) = opts.max_new_trials {
        units.truncate(cap);
    }
    let work = |&(d, t): &(usize, usize)| -> std::result::Result<TrialResult, FailureRow> {
        let ds = &datasets[d];
        let fail = |e: Error| FailureRow {
            dataset: ds.name.clone(),
            strategy: BSO_STRATEGY.into(),
            trial: t,
            error: e.to_string(),
        };
        let split = cfg.trial_split(ds, t).map_err(fail)?;
        let available = split.train_idx.len() - split.initial_labeled_idx.len();
        let budget = match bso.budget {
            Some(b) => b,
            None => cfg.budget.resolve(available).map_err(fail)?,
        };
        let seed = derive_seed(cfg.master_seed, &["bso".into(), ds.name.as_str().into(), t.into()]);
        let mut r = beam_search_oracle(
            ds,
            &split,
            &cfg.evaluator,
            budget,
            bso,
            seed,
            TestSetOracle::acknowledge(),
        )
        .map_err(fail)?
        .result;
        r.trial = t;
        if let Some(st) = &store {
            st.append(&r).map_err(fail)?;
        }
        Ok(r)
    };
    // beams already parallelise candidate fits, so trials run one at a time
    let run_units = || units.iter().map(work).collect::<Vec<_>>();
    let results = if opts.workers == 1 {
        run_units()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?
            .install(run_units)
    };
    for r in results {
        match r {
            Ok(tr) => out.push_trial(&tr)?,
            Err(f) => {
                log::warn!("bso / {} / trial {} failed: {}", f.dataset, f.trial, f.error);
                out.failures.push(f);
            }
        }
    }
    out.sort();
    if let Some(st) = &store {
        st.finalize(&out)?;
    }
    Ok(out)
}

/// Mean BSO AUBC per dataset and metric, the input of the difficulty table.
pub fn bso_difficulty_inputs(out: &ExperimentOutput) -> BTreeMap<String, [f64; 3]> {
    let mut acc: BTreeMap<String, ([f64; 3], usize)> = BTreeMap::new();
    for r in out.records.iter().filter(|r| r.strategy == BSO_STRATEGY) {
        let e = acc.entry(r.dataset.clone()).or_insert(([0.0; 3], 0));
        for (m, v) in r.values().iter().enumerate() {
            e.0[m] += v;
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(d, (s, n))| (d, [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_gaussian_clouds, Origin};
    use crate::matrix::Matrix;
    use crate::metrics::aubc;
    use crate::protocol::{run_trial, BudgetPolicy};
    use crate::strategies::{StrategyFamily, StrategyId};

    /// 12 pool rows (2 initially labeled) and 10 test rows on an overlapping 2-D problem.
    fn tiny() -> (Dataset, TrialSplit) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..22 {
            let t = i as f64;
            let c = i % 2;
            let shift = if c == 0 { -0.4 } else { 0.4 };
            rows.push([shift + (t * 1.7).sin(), (t * 0.9).cos()]);
            y.push(c);
        }
        let ds = Dataset::new("tiny", Matrix::from_rows(&rows).unwrap(), y, Origin::Synthetic).unwrap();
        let split = TrialSplit {
            train_idx: (0..12).collect(),
            test_idx: (12..22).collect(),
            initial_labeled_idx: vec![0, 1],
        };
        (ds, split)
    }

    fn test_acc(ds: &Dataset, split: &TrialSplit, spec: &ClassifierSpec, set: &[usize]) -> f64 {
        let mut s = set.to_vec();
        s.sort_unstable();
        let x = ds.features.select_rows(&s);
        let y: Vec<usize> = s.iter().map(|&i| ds.labels[i]).collect();
        let model = fit(spec, &x, &y, 2).unwrap();
        let tx = ds.features.select_rows(&split.test_idx);
        let ty: Vec<usize> = split.test_idx.iter().map(|&i| ds.labels[i]).collect();
        evaluate(&model, &tx, &ty, 2).unwrap()[0]
    }

    fn permutations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for (i, &it) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut tail in permutations(&rest, k - 1) {
                tail.insert(0, it);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn wide_beam_matches_exhaustive_search_over_query_orders() {
        let (ds, split) = tiny();
        let spec = ClassifierSpec::new(crate::classifiers::ClassifierKind::Logreg);
        let budget = 3;
        let cands: Vec<usize> = (2..12).collect();
        let mut best = vec![0.0f64; budget + 1];
        best[0] = test_acc(&ds, &split, &spec, &[0, 1]);
        for order in permutations(&cands, budget) {
            for t in 1..=budget {
                let mut set = vec![0, 1];
                set.extend_from_slice(&order[..t]);
                best[t] = best[t].max(test_acc(&ds, &split, &spec, &set));
            }
        }
        let opts = BsoOptions {
            width: 1000,
            ..Default::default()
        };
        let out = beam_search_oracle(&ds, &split, &spec, budget, &opts, 0, TestSetOracle::acknowledge()).unwrap();
        let curve: Vec<f64> = out.result.curves[0].points.iter().map(|p| p.1).collect();
        assert_eq!(curve, best);
        // every retained pool has exactly initial + t labels
        assert!(out.final_state.beams.iter().all(|b| b.set.len() == 2 + budget));
    }

    #[test]
    fn one_query_returns_the_best_single_point() {
        let (ds, split) = tiny();
        let spec = ClassifierSpec::svm_rbf();
        let out = beam_search_oracle(
            &ds,
            &split,
            &spec,
            1,
            &BsoOptions::default(),
            0,
            TestSetOracle::acknowledge(),
        )
        .unwrap();
        let accs: Vec<f64> = (2..12).map(|c| test_acc(&ds, &split, &spec, &[0, 1, c])).collect();
        let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first_best = 2 + accs.iter().position(|&a| a == max).unwrap();
        assert_eq!(out.result.selections, vec![first_best]);
    }

    #[test]
    fn beam_never_exceeds_its_width() {
        let ds = generate_gaussian_clouds(true, 50, 4).unwrap();
        let cfg = ExperimentConfig {
            datasets: vec![ds.name.clone()],
            strategies: vec![StrategyId::new(StrategyFamily::Uniform, 1)],
            n_trials: 1,
            ..Default::default()
        };
        let split = cfg.trial_split(&ds, 0).unwrap();
        let out = beam_search_oracle(
            &ds,
            &split,
            &cfg.evaluator,
            10,
            &BsoOptions::default(),
            1,
            TestSetOracle::acknowledge(),
        )
        .unwrap();
        assert_eq!(out.beam_sizes.len(), 10);
        assert!(out.beam_sizes.iter().all(|&w| (1..=5).contains(&w)));
        let mut seen = BTreeSet::new();
        assert!(out.final_state.beams.iter().all(|b| seen.insert(b.set.clone())));
    }

    #[test]
    fn greedy_oracle_beats_every_strategy_on_a_separable_set() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64;
            let c = i % 2;
            let m = if c == 0 { -2.0 } else { 2.0 };
            rows.push([m + 0.8 * (t * 2.3).sin(), 1.5 * (t * 0.7).cos()]);
            y.push(c);
        }
        let ds = Dataset::new("sep", Matrix::from_rows(&rows).unwrap(), y, Origin::Synthetic).unwrap();
        let split = TrialSplit {
            train_idx: (0..30).collect(),
            test_idx: (30..40).collect(),
            initial_labeled_idx: vec![0, 1, 2, 3],
        };
        let cfg = ExperimentConfig {
            datasets: vec!["sep".into()],
            strategies: vec![StrategyId::new(StrategyFamily::Uniform, 1)],
            n_trials: 1,
            budget: BudgetPolicy::Fixed(8),
            ..Default::default()
        };
        let opts = BsoOptions {
            width: 1,
            ..Default::default()
        };
        let oracle =
            beam_search_oracle(&ds, &split, &cfg.evaluator, 8, &opts, 0, TestSetOracle::acknowledge()).unwrap();
        let bso_aubc = aubc(&oracle.result.curves[0]).unwrap();
        for family in StrategyFamily::ALL {
            let id = StrategyId::new(family, 1);
            let r = run_trial(&ds, &id, &split, 0, &cfg).unwrap();
            let a = aubc(&r.curves[0]).unwrap();
            assert!(bso_aubc >= a - 1e-12, "{id}: {a} > bso {bso_aubc}");
        }
    }

    #[test]
    fn bso_runs_share_protocol_splits() {
        let mut ds = generate_gaussian_clouds(true, 50, 2).unwrap();
        ds.name = "g".into();
        let cfg = ExperimentConfig {
            datasets: vec!["g".into()],
            strategies: vec![StrategyId::new(StrategyFamily::Uniform, 1)],
            n_trials: 2,
            budget: BudgetPolicy::Fixed(3),
            ..Default::default()
        };
        let data = vec![ds];
        let opts = RunOptions {
            workers: 1,
            ..Default::default()
        };
        let runs = crate::protocol::run_experiment(&cfg, &data, &opts).unwrap();
        let bso = run_bso(
            &cfg,
            &data,
            &BsoOptions {
                width: 2,
                candidate_cap: Some(5),
                ..Default::default()
            },
            &opts,
        )
        .unwrap();
        let mut all = runs.splits.clone();
        all.extend(bso.splits.clone());
        assert!(crate::protocol::audit_fair_comparison(&all).is_empty());
        assert_eq!(bso.records.len(), 2);
        assert!(bso.records.iter().all(|r| r.strategy == BSO_STRATEGY));
        let means = bso_difficulty_inputs(&bso);
        assert!(means.contains_key("g"));
    }
}
