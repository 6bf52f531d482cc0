//! Windowed feature extraction and a from-scratch random-forest
//! classifier over the weight classes.
//!
//! Features are per-axis mean / population std / min / max / RMS plus the
//! magnitude mean (16 scalars). Trees use Gini-impurity greedy splits on
//! a per-node random feature subset, with midpoint thresholds and
//! deterministic tie-breaking (lowest feature index, then lowest
//! threshold). Everything is reproducible from the training seed.

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledTrace;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sensor::SensorFrame;
use crate::Scalar;

pub const N_FEATURES: usize = 16;
/// Index of the z-axis mean feature (used by distribution-shift checks).
pub const Z_MEAN_FEATURE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseFilter {
    DwellOnly,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub window_len: usize,
    pub stride: usize,
    pub phase_filter: PhaseFilter,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            window_len: 100,
            stride: 50,
            phase_filter: PhaseFilter::DwellOnly,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.stride == 0 {
            return Err(Error::Invariant(
                "window_len and stride must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [Scalar; N_FEATURES]);

/// Labeled feature vectors, the unit both training and evaluation take.
pub type FeatureSet = Vec<(FeatureVector, usize)>;

impl FeatureVector {
    pub fn z_mean(&self) -> Scalar {
        self.0[Z_MEAN_FEATURE]
    }
}

/// Statistics over the measured force of one window. Std is the
/// population standard deviation.
pub fn extract_features(window: &[SensorFrame], spec: &WindowSpec) -> Result<FeatureVector> {
    if window.len() != spec.window_len {
        return Err(Error::WindowLength {
            got: window.len(),
            want: spec.window_len,
        });
    }
    let n = window.len() as Scalar;
    let mut out = [0.0; N_FEATURES];
    for axis in 0..3 {
        let values = window.iter().map(|f| f.measured_force.as_array()[axis]);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut min = Scalar::INFINITY;
        let mut max = Scalar::NEG_INFINITY;
        for v in values {
            sum += v;
            sum_sq += v * v;
            min = min.min(v);
            max = max.max(v);
        }
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        let base = axis * 5;
        out[base] = mean;
        out[base + 1] = var.sqrt();
        out[base + 2] = min;
        out[base + 3] = max;
        out[base + 4] = (sum_sq / n).sqrt();
    }
    out[15] = window
        .iter()
        .map(|f| f.measured_force.magnitude())
        .sum::<Scalar>()
        / n;
    Ok(FeatureVector(out))
}

/// All labeled windows of one trace under the spec's phase filter.
pub fn windows_from_trace(
    trace: &LabeledTrace,
    spec: &WindowSpec,
) -> Result<Vec<(FeatureVector, usize)>> {
    spec.validate()?;
    let frames: &[SensorFrame] = match spec.phase_filter {
        PhaseFilter::DwellOnly => trace.dwell_frames(),
        PhaseFilter::All => &trace.frames,
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + spec.window_len <= frames.len() {
        out.push((
            extract_features(&frames[start..start + spec.window_len], spec)?,
            trace.label,
        ));
        start += spec.stride;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per node.
    pub feature_subsample: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            feature_subsample: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Node {
    Split {
        feature: usize,
        threshold: Scalar,
        /// Indices into the tree's node array; `< threshold` goes left.
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training sample counts per class.
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Class vote of this tree (leaf majority, ties to lowest class).
    pub fn predict(&self, features: &FeatureVector) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features.0[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { counts } => {
                    let mut best = 0;
                    for (c, &n) in counts.iter().enumerate() {
                        if n > counts[best] {
                            best = c;
                        }
                    }
                    return best;
                }
            }
        }
    }

    fn depth_from(&self, idx: usize) -> usize {
        match &self.nodes[idx] {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => {
                1 + self.depth_from(*left).max(self.depth_from(*right))
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.depth_from(0)
    }
}

/// Serialized as a versioned JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub n_classes: usize,
    pub params: ForestParams,
    pub training_seed: u64,
    pub trees: Vec<Tree>,
}

pub const FOREST_FORMAT_VERSION: u32 = 1;

fn gini(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

struct TreeBuilder<'a> {
    samples: &'a [(FeatureVector, usize)],
    n_classes: usize,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn class_counts(&self, indices: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in indices {
            counts[self.samples[i].1] += 1;
        }
        counts
    }

    /// Choose `feature_subsample` distinct features, then consider them in
    /// ascending index order so Gini ties break toward the lowest feature.
    fn feature_subset(&self, rng: &mut RngStream) -> Vec<usize> {
        let k = self.params.feature_subsample.min(N_FEATURES);
        let mut all: Vec<usize> = (0..N_FEATURES).collect();
        for i in 0..k {
            let j = i + rng.next_index(N_FEATURES - i);
            all.swap(i, j);
        }
        let mut subset = all[..k].to_vec();
        subset.sort_unstable();
        subset
    }

    fn best_split(
        &self,
        indices: &[usize],
        features: &[usize],
    ) -> Option<(usize, Scalar, f64)> {
        let total = indices.len() as u32;
        let parent_counts = self.class_counts(indices);
        let parent_gini = gini(&parent_counts, total);
        let mut best: Option<(usize, Scalar, f64)> = None;

        for &feature in features {
            let mut order: Vec<usize> = indices.to_vec();
            order.sort_by(|&a, &b| {
                self.samples[a].0 .0[feature]
                    .partial_cmp(&self.samples[b].0 .0[feature])
                    .unwrap()
            });
            let mut left_counts = vec![0u32; self.n_classes];
            for split_at in 1..order.len() {
                left_counts[self.samples[order[split_at - 1]].1] += 1;
                let lo = self.samples[order[split_at - 1]].0 .0[feature];
                let hi = self.samples[order[split_at]].0 .0[feature];
                if lo == hi {
                    continue;
                }
                let n_left = split_at as u32;
                let n_right = total - n_left;
                if (n_left as usize) < self.params.min_leaf
                    || (n_right as usize) < self.params.min_leaf
                {
                    continue;
                }
                let right_counts: Vec<u32> = parent_counts
                    .iter()
                    .zip(&left_counts)
                    .map(|(&p, &l)| p - l)
                    .collect();
                let weighted = (n_left as f64 * gini(&left_counts, n_left)
                    + n_right as f64 * gini(&right_counts, n_right))
                    / total as f64;
                let threshold = lo + (hi - lo) / 2.0;
                // Strict improvement keeps the first (lowest feature,
                // lowest threshold) candidate on ties.
                let better = match best {
                    None => weighted < parent_gini,
                    Some((_, _, b)) => weighted < b,
                };
                if better {
                    best = Some((feature, threshold, weighted));
                }
            }
        }
        best
    }

    fn build(&mut self, indices: Vec<usize>, depth: usize, rng: &mut RngStream) -> usize {
        let counts = self.class_counts(&indices);
        let n_nonzero = counts.iter().filter(|&&c| c > 0).count();
        let make_leaf = depth >= self.params.max_depth
            || n_nonzero <= 1
            || indices.len() < 2 * self.params.min_leaf;

        let split = if make_leaf {
            None
        } else {
            let subset = self.feature_subset(rng);
            self.best_split(&indices, &subset)
        };

        match split {
            None => {
                self.nodes.push(Node::Leaf { counts });
                self.nodes.len() - 1
            }
            Some((feature, threshold, _)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.samples[i].0 .0[feature] < threshold);
                let here = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let left = self.build(left_idx, depth + 1, rng);
                let right = self.build(right_idx, depth + 1, rng);
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut self.nodes[here]
                {
                    *l = left;
                    *r = right;
                }
                here
            }
        }
    }
}

/// Train `n_trees` trees, each on a bootstrap sample drawn with
/// replacement from a seeded substream. Deterministic given the seed.
pub fn train_forest(
    samples: &[(FeatureVector, usize)],
    params: &ForestParams,
    seed: u64,
) -> Result<Forest> {
    if samples.is_empty() {
        return Err(Error::DegenerateDataset("no training samples".into()));
    }
    for (f, _) in samples {
        if f.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateDataset(
                "non-finite feature value in training set".into(),
            ));
        }
    }
    let n_classes = samples.iter().map(|(_, l)| l + 1).max().unwrap();
    let distinct = {
        let mut seen = vec![false; n_classes];
        for &(_, l) in samples {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::DegenerateDataset(
            "training set has fewer than 2 classes".into(),
        ));
    }
    if params.n_trees == 0 || params.min_leaf == 0 || params.feature_subsample == 0 {
        return Err(Error::Invariant(
            "forest params must be positive".into(),
        ));
    }

    let root = RngStream::new(seed, "forest");
    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = root.derive(&format!("tree-{t}"));
        let bootstrap: Vec<usize> = (0..samples.len())
            .map(|_| rng.next_index(samples.len()))
            .collect();
        let mut builder = TreeBuilder {
            samples,
            n_classes,
            params,
            nodes: Vec::new(),
        };
        builder.build(bootstrap, 0, &mut rng);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        n_classes,
        params: params.clone(),
        training_seed: seed,
        trees,
    })
}

/// Majority vote across trees; ties break to the lowest class index.
/// The returned distribution sums to 1.
pub fn predict(forest: &Forest, features: &FeatureVector) -> (usize, Vec<Scalar>) {
    let mut votes = vec![0usize; forest.n_classes];
    for tree in &forest.trees {
        votes[tree.predict(features)] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    let n = forest.trees.len() as Scalar;
    (best, votes.iter().map(|&v| v as Scalar / n).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Scalar,
    pub recall: Scalar,
    pub f1: Scalar,
    /// False when no predictions were made for this class (precision
    /// reported as 0).
    pub precision_defined: bool,
    /// False when the test set holds no samples of this class.
    pub recall_defined: bool,
    /// False when precision + recall is 0 (f1 reported as 0).
    pub f1_defined: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u32>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: Scalar,
    pub macro_recall: Scalar,
    /// None when every per-class F1 is undefined.
    pub macro_f1: Option<Scalar>,
    pub accuracy: Scalar,
    pub n_samples: usize,
}

/// Standard precision/recall/F1 from the confusion matrix. Undefined
/// per-class values are reported as 0 and flagged; macro F1 is omitted
/// when all per-class F1 are undefined.
pub fn evaluate(forest: &Forest, test: &[(FeatureVector, usize)]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::DegenerateDataset("empty test set".into()));
    }
    let n_classes = forest.n_classes;
    let mut confusion = vec![vec![0u32; n_classes]; n_classes];
    for (features, label) in test {
        if *label >= n_classes {
            return Err(Error::Invariant(format!(
                "test label {label} outside the forest's {n_classes} classes"
            )));
        }
        let (pred, _) = predict(forest, features);
        confusion[*label][pred] += 1;
    }
    Ok(evaluation_from_confusion(confusion, test.len()))
}

#[allow(clippy::needless_range_loop)] // c indexes both rows and columns
pub fn evaluation_from_confusion(confusion: Vec<Vec<u32>>, n_samples: usize) -> Evaluation {
    let n_classes = confusion.len();
    let mut per_class = Vec::with_capacity(n_classes);
    let mut correct = 0u32;
    for c in 0..n_classes {
        let tp = confusion[c][c];
        correct += tp;
        let predicted: u32 = (0..n_classes).map(|t| confusion[t][c]).sum();
        let actual: u32 = confusion[c].iter().sum();
        let precision_defined = predicted > 0;
        let recall_defined = actual > 0;
        let precision = if precision_defined {
            tp as Scalar / predicted as Scalar
        } else {
            0.0
        };
        let recall = if recall_defined {
            tp as Scalar / actual as Scalar
        } else {
            0.0
        };
        let f1_defined = precision + recall > 0.0;
        let f1 = if f1_defined {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            precision_defined,
            recall_defined,
            f1_defined,
        });
    }
    let k = n_classes as Scalar;
    let macro_precision = per_class.iter().map(|m| m.precision).sum::<Scalar>() / k;
    let macro_recall = per_class.iter().map(|m| m.recall).sum::<Scalar>() / k;
    let macro_f1 = if per_class.iter().any(|m| m.f1_defined) {
        Some(per_class.iter().map(|m| m.f1).sum::<Scalar>() / k)
    } else {
        None
    };
    Evaluation {
        confusion,
        per_class,
        macro_precision,
        macro_recall,
        macro_f1,
        accuracy: correct as Scalar / n_samples as Scalar,
        n_samples,
    }
}
