//! Forest training: bootstrap bagging plus greedy CART growth on Gini
//! impurity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::featureset::LabeledDataset;
use crate::rng::SplitMix64;

use super::{ForestModel, ForestParams, Tree, TreeNode, FORMAT_VERSION};

/// Training diagnostics. `oob_error` is the out-of-bag misclassification
/// rate at the 0.5 threshold, absent when no row was ever out of bag.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub oob_error: Option<f64>,
    /// Training data carried only one class.
    pub single_class: bool,
    /// Leaves closed with mixed labels because no drawn feature offered an
    /// improving split.
    pub forced_impure_leaves: u64,
}

/// Column-major copy of the dataset: one contiguous slice per feature.
struct Columns {
    cols: Vec<Vec<f64>>,
    labels: Vec<bool>,
    n_rows: usize,
}

impl Columns {
    fn from_dataset(ds: &LabeledDataset) -> Self {
        let n_rows = ds.rows.len();
        let n_features = ds.feature_names.len();
        let mut cols = vec![Vec::with_capacity(n_rows); n_features];
        let mut labels = Vec::with_capacity(n_rows);
        for row in &ds.rows {
            for (f, col) in cols.iter_mut().enumerate() {
                col.push(row.features[f]);
            }
            labels.push(row.label);
        }
        Columns {
            cols,
            labels,
            n_rows,
        }
    }
}

pub fn train(ds: &LabeledDataset, params: &ForestParams) -> Result<ForestModel> {
    train_inner(ds, params, false).map(|(model, _)| model)
}

/// Train and also compute out-of-bag diagnostics.
pub fn train_with_report(
    ds: &LabeledDataset,
    params: &ForestParams,
) -> Result<(ForestModel, TrainReport)> {
    train_inner(ds, params, true)
}

fn train_inner(
    ds: &LabeledDataset,
    params: &ForestParams,
    compute_oob: bool,
) -> Result<(ForestModel, TrainReport)> {
    let n_features = ds.feature_names.len();
    params.validate(n_features)?;
    if ds.rows.len() < 2 {
        return Err(Error::EmptyDataset);
    }

    let data = Columns::from_dataset(ds);
    let single_class =
        data.labels.iter().all(|&l| l) || data.labels.iter().all(|&l| !l);

    // One seed per tree, drawn from a single stream, so tree t is the same
    // whether trees build in parallel or one by one.
    let mut seeder = SplitMix64::new(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| seeder.next_u64()).collect();

    let grown: Vec<GrownTree> = seeds
        .par_iter()
        .map(|&seed| grow_tree(&data, params, n_features, seed, compute_oob))
        .collect();

    let mut report = TrainReport {
        single_class,
        ..TrainReport::default()
    };

    if compute_oob {
        let mut proba_sum = vec![0.0f64; data.n_rows];
        let mut votes = vec![0u32; data.n_rows];
        for tree in &grown {
            for &(row, fraction) in &tree.oob {
                proba_sum[row as usize] += fraction;
                votes[row as usize] += 1;
            }
        }
        let mut wrong = 0usize;
        let mut counted = 0usize;
        for row in 0..data.n_rows {
            if votes[row] == 0 {
                continue;
            }
            counted += 1;
            let vessel = proba_sum[row] / votes[row] as f64 >= 0.5;
            if vessel != data.labels[row] {
                wrong += 1;
            }
        }
        report.oob_error = (counted > 0).then(|| wrong as f64 / counted as f64);
    }

    let mut trees = Vec::with_capacity(grown.len());
    for tree in grown {
        report.forced_impure_leaves += tree.forced_impure_leaves;
        trees.push(tree.tree);
    }

    Ok((
        ForestModel {
            trees,
            n_features,
            params: *params,
            feature_names: ds.feature_names.clone(),
            format_version: FORMAT_VERSION,
        },
        report,
    ))
}

struct GrownTree {
    tree: Tree,
    /// (row index, leaf fraction) for rows outside this tree's bootstrap.
    oob: Vec<(u32, f64)>,
    forced_impure_leaves: u64,
}

struct Task {
    lo: usize,
    hi: usize,
    depth: usize,
    slot: usize,
}

fn grow_tree(
    data: &Columns,
    params: &ForestParams,
    n_features: usize,
    seed: u64,
    compute_oob: bool,
) -> GrownTree {
    let n = data.n_rows;
    let mut rng = SplitMix64::new(seed);

    let mut in_bag = vec![false; n];
    let mut rows: Vec<u32> = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = rng.next_below(n);
        in_bag[pick] = true;
        rows.push(pick as u32);
    }

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut forced_impure_leaves = 0u64;
    nodes.push(TreeNode::Leaf {
        vessel_fraction: 0.0,
        sample_count: 0,
    });
    let mut tasks = vec![Task {
        lo: 0,
        hi: n,
        depth: 0,
        slot: 0,
    }];
    let mut scratch: Vec<(f64, bool)> = Vec::with_capacity(n);

    while let Some(task) = tasks.pop() {
        let span = &rows[task.lo..task.hi];
        let count = span.len();
        let positives = span.iter().filter(|&&r| data.labels[r as usize]).count();

        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes[task.slot] = TreeNode::Leaf {
                vessel_fraction: positives as f64 / count as f64,
                sample_count: count as u32,
            };
        };

        let pure = positives == 0 || positives == count;
        let depth_capped = params.max_depth.is_some_and(|d| task.depth >= d);
        if pure || depth_capped || count < 2 * params.min_leaf {
            if !pure {
                forced_impure_leaves += 1;
            }
            make_leaf(&mut nodes);
            continue;
        }

        let parent_gini = gini(positives, count);
        let candidates = rng.sample_indices(n_features, params.mtry);
        let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)

        for &feature in &candidates {
            let col = &data.cols[feature];
            scratch.clear();
            scratch.extend(
                span.iter()
                    .map(|&r| (col[r as usize], data.labels[r as usize])),
            );
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_pos = 0usize;
            for i in 1..count {
                if scratch[i - 1].1 {
                    left_pos += 1;
                }
                let (lo_v, hi_v) = (scratch[i - 1].0, scratch[i].0);
                if lo_v >= hi_v {
                    continue;
                }
                if i < params.min_leaf || count - i < params.min_leaf {
                    continue;
                }
                let threshold = (lo_v + hi_v) * 0.5;
                // Adjacent floats can round the midpoint onto the upper
                // value; such a split would leave the right side empty.
                if threshold >= hi_v {
                    continue;
                }
                let right_pos = positives - left_pos;
                let weighted = (i as f64 * gini(left_pos, i)
                    + (count - i) as f64 * gini(right_pos, count - i))
                    / count as f64;
                if best.is_none_or(|(g, _, _)| weighted < g) {
                    best = Some((weighted, feature, threshold));
                }
            }
        }

        match best {
            Some((weighted, feature, threshold)) if weighted < parent_gini => {
                let col = &data.cols[feature];
                let mid = partition(&mut rows[task.lo..task.hi], |r| {
                    col[r as usize] <= threshold
                }) + task.lo;
                debug_assert!(mid > task.lo && mid < task.hi);

                let left_slot = nodes.len();
                nodes.push(TreeNode::Leaf {
                    vessel_fraction: 0.0,
                    sample_count: 0,
                });
                let right_slot = nodes.len();
                nodes.push(TreeNode::Leaf {
                    vessel_fraction: 0.0,
                    sample_count: 0,
                });
                nodes[task.slot] = TreeNode::Internal {
                    feature: feature as u16,
                    threshold,
                    left: left_slot as u32,
                    right: right_slot as u32,
                };
                tasks.push(Task {
                    lo: mid,
                    hi: task.hi,
                    depth: task.depth + 1,
                    slot: right_slot,
                });
                tasks.push(Task {
                    lo: task.lo,
                    hi: mid,
                    depth: task.depth + 1,
                    slot: left_slot,
                });
            }
            _ => {
                forced_impure_leaves += 1;
                make_leaf(&mut nodes);
            }
        }
    }

    let tree = Tree { nodes };

    let oob = if compute_oob {
        let mut vector = vec![0.0f64; n_features];
        (0..n)
            .filter(|&r| !in_bag[r])
            .map(|r| {
                for (f, v) in vector.iter_mut().enumerate() {
                    *v = data.cols[f][r];
                }
                (r as u32, tree.predict(&vector))
            })
            .collect()
    } else {
        Vec::new()
    };

    GrownTree {
        tree,
        oob,
        forced_impure_leaves,
    }
}

#[inline]
fn gini(positives: usize, count: usize) -> f64 {
    let p = positives as f64 / count as f64;
    2.0 * p * (1.0 - p)
}

/// In-place partition; returns the number of elements satisfying `pred`,
/// which end up in the front.
fn partition(slice: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut store = 0usize;
    for i in 0..slice.len() {
        if pred(slice[i]) {
            slice.swap(store, i);
            store += 1;
        }
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featureset::{LabeledRow, FEATURE_COUNT};

    fn dataset_from(points: &[([f64; 2], bool)]) -> LabeledDataset {
        let mut ds = LabeledDataset::new();
        for (i, &(xy, label)) in points.iter().enumerate() {
            let mut features = [0.0; FEATURE_COUNT];
            features[0] = xy[0];
            features[1] = xy[1];
            ds.rows.push(LabeledRow {
                features,
                label,
                image_id: "toy".into(),
                x: i as u32,
                y: 0,
            });
        }
        ds
    }

    fn xor_points(n_per_cluster: usize, seed: u64) -> Vec<([f64; 2], bool)> {
        let mut rng = SplitMix64::new(seed);
        let centers = [
            ([0.25, 0.25], false),
            ([0.75, 0.75], false),
            ([0.25, 0.75], true),
            ([0.75, 0.25], true),
        ];
        let mut out = Vec::new();
        for &(c, label) in &centers {
            for _ in 0..n_per_cluster {
                let x = c[0] + (rng.next_f64() - 0.5) * 0.3;
                let y = c[1] + (rng.next_f64() - 0.5) * 0.3;
                out.push(([x, y], label));
            }
        }
        out
    }

    #[test]
    fn all_vessel_gives_unit_fractions() {
        let points: Vec<([f64; 2], bool)> = (0..20).map(|i| ([i as f64, 0.0], true)).collect();
        let ds = dataset_from(&points);
        let params = ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        };
        let (model, report) = train_with_report(&ds, &params).unwrap();
        assert!(report.single_class);
        for tree in model.trees() {
            for node in tree.nodes() {
                if let TreeNode::Leaf {
                    vessel_fraction, ..
                } = node
                {
                    assert_eq!(*vessel_fraction, 1.0);
                }
            }
        }
        assert_eq!(model.predict_proba(&[0.0; FEATURE_COUNT]).unwrap(), 1.0);
    }

    #[test]
    fn xor_training_accuracy() {
        let points = xor_points(50, 17);
        let ds = dataset_from(&points);
        let params = ForestParams {
            n_trees: 50,
            mtry: FEATURE_COUNT,
            seed: 7,
            ..ForestParams::default()
        };
        let model = train(&ds, &params).unwrap();
        let correct = ds
            .rows
            .iter()
            .filter(|r| (model.predict_proba(&r.features).unwrap() >= 0.5) == r.label)
            .count();
        assert!(
            correct as f64 / ds.rows.len() as f64 >= 0.95,
            "training accuracy {} below 0.95",
            correct as f64 / ds.rows.len() as f64
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let points = xor_points(25, 3);
        let ds = dataset_from(&points);
        let params = ForestParams {
            n_trees: 20,
            seed: 99,
            ..ForestParams::default()
        };
        let a = train(&ds, &params).unwrap();
        let b = train(&ds, &params).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn empty_and_single_row_rejected() {
        let ds = LabeledDataset::new();
        assert!(matches!(
            train(&ds, &ForestParams::default()),
            Err(Error::EmptyDataset)
        ));
        let ds = dataset_from(&[([0.0, 0.0], true)]);
        assert!(matches!(
            train(&ds, &ForestParams::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn depth_one_split_lands_in_gap() {
        // Feature 0 is 2.0 for background and 3.0 for vessel; any bootstrap
        // with both classes splits at the midpoint 2.5.
        let mut points = Vec::new();
        for _ in 0..20 {
            points.push(([2.0, 0.0], false));
            points.push(([3.0, 0.0], true));
        }
        let ds = dataset_from(&points);
        let params = ForestParams {
            n_trees: 1,
            mtry: FEATURE_COUNT,
            max_depth: Some(1),
            seed: 5,
            ..ForestParams::default()
        };
        let model = train(&ds, &params).unwrap();
        match model.trees()[0].nodes()[0] {
            TreeNode::Internal {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert!(threshold > 2.0 && threshold < 3.0);
            }
            TreeNode::Leaf { .. } => panic!("expected a root split"),
        }
    }

    #[test]
    fn oob_error_shrinks_with_more_trees() {
        let points = xor_points(50, 29);
        let ds = dataset_from(&points);
        let small = ForestParams {
            n_trees: 5,
            mtry: 8,
            seed: 11,
            ..ForestParams::default()
        };
        let large = ForestParams {
            n_trees: 100,
            ..small
        };
        let (_, rs) = train_with_report(&ds, &small).unwrap();
        let (_, rl) = train_with_report(&ds, &large).unwrap();
        let (oob_small, oob_large) = (rs.oob_error.unwrap(), rl.oob_error.unwrap());
        assert!(
            oob_large <= oob_small + 0.02,
            "oob at 100 trees {oob_large} vs at 5 trees {oob_small}"
        );
    }

    #[test]
    fn mixed_labels_on_identical_features_become_majority_leaf() {
        let mut points = Vec::new();
        for i in 0..30 {
            points.push(([1.0, 1.0], i % 3 == 0)); // 10 vessel, 20 background
        }
        let ds = dataset_from(&points);
        let params = ForestParams {
            n_trees: 3,
            mtry: FEATURE_COUNT,
            seed: 2,
            ..ForestParams::default()
        };
        let (model, report) = train_with_report(&ds, &params).unwrap();
        assert!(report.forced_impure_leaves > 0);
        let p = model.predict_proba(&{
            let mut v = [0.0; FEATURE_COUNT];
            v[0] = 1.0;
            v[1] = 1.0;
            v
        })
        .unwrap();
        assert!(p < 0.5, "majority is background, got {p}");
    }

    #[test]
    fn partition_counts() {
        let mut v = vec![5u32, 1, 4, 2, 3];
        let m = partition(&mut v, |x| x <= 2);
        assert_eq!(m, 2);
        let (left, right) = v.split_at(m);
        assert!(left.iter().all(|&x| x <= 2));
        assert!(right.iter().all(|&x| x > 2));
    }
}
