use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fit, ClassifierSpec, Confusion, Dataset, EvalReport, MlError};
use crate::{derive_seed, Label};

/// Duplicates random minority rows (uniformly, with replacement) until both
/// classes have the same count. Original rows keep their positions.
pub fn oversample_minority(data: &Dataset, seed: u64) -> Result<Dataset, MlError> {
    let [safe, unsafe_] = data.class_counts();
    if safe == 0 || unsafe_ == 0 {
        return Err(MlError::SingleClassDataset);
    }
    let minority = if safe < unsafe_ { Label::Safe } else { Label::Unsafe };
    let pool: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == minority).collect();
    let missing = safe.abs_diff(unsafe_);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for _ in 0..missing {
        let i = pool[rng.gen_range(0..pool.len())];
        out.ids.push(data.ids[i].clone());
        out.rows.push(data.rows[i].clone());
        out.labels.push(data.labels[i]);
    }
    Ok(out)
}

fn class_indices(labels: &[Label], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut safe: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_unsafe()).collect();
    let mut unsafe_: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_unsafe()).collect();
    safe.shuffle(rng);
    unsafe_.shuffle(rng);
    [safe, unsafe_]
}

/// Stratified, seeded train/test split. Returns raw rows on both sides;
/// callers rebalance the training side with [`oversample_minority`].
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MlError::EmptySplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = class_indices(&data.labels, &mut rng);
    let n_train = (train_fraction * data.len() as f64).round() as usize;
    // largest-remainder allocation keeps both the total and the proportions
    let exact: Vec<f64> = classes
        .iter()
        .map(|c| c.len() as f64 * n_train as f64 / data.len().max(1) as f64)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &c in &order {
        if take.iter().sum::<usize>() < n_train && take[c] < classes[c].len() {
            take[c] += 1;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, idx) in classes.iter().enumerate() {
        train.extend_from_slice(&idx[..take[c]]);
        test.extend_from_slice(&idx[take[c]..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(MlError::EmptySplit);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// `k` stratified folds: disjoint, covering every row, sizes within one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [safe, unsafe_] = class_indices(labels, &mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in unsafe_.into_iter().chain(safe).enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// K-fold evaluation of an arbitrary learner. `fit_predict` receives the
/// training part (oversampled when `oversample` is set) and the raw held-out
/// fold and returns one label per held-out row.
pub fn kfold_evaluate_with<F>(
    data: &Dataset,
    k: usize,
    seed: u64,
    oversample: bool,
    fit_predict: F,
) -> Result<EvalReport, MlError>
where
    F: Fn(&Dataset, &Dataset) -> Result<Vec<Label>, MlError> + Sync,
{
    if k < 2 || data.len() < k {
        return Err(MlError::TooFewRows {
            needed: k.max(2),
            have: data.len(),
            k,
        });
    }
    let folds = stratified_folds(&data.labels, k, seed);
    let confusions = folds
        .par_iter()
        .enumerate()
        .map(|(f, held_out)| {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let mut train = data.subset(&train_idx);
            if oversample {
                train = oversample_minority(&train, derive_seed(seed, f as u64))?;
            }
            let test = data.subset(held_out);
            let predicted = fit_predict(&train, &test)?;
            Ok(Confusion::from_pairs(&test.labels, &predicted))
        })
        .collect::<Result<Vec<_>, MlError>>()?;
    let mut total = Confusion::default();
    for c in &confusions {
        total.merge(c);
    }
    Ok(EvalReport::from_confusion(total))
}

/// Stratified K-fold cross-validation with oversampled training folds;
/// confusion counts are summed over folds before rates are derived.
pub fn kfold_evaluate(data: &Dataset, spec: &ClassifierSpec, k: usize, seed: u64) -> Result<EvalReport, MlError> {
    spec.resolve()?;
    kfold_evaluate_with(data, k, seed, true, |train, test| {
        let model = fit(spec, train)?;
        Ok(test.rows.iter().map(|r| model.predict_row(r)).collect())
    })
}
