//! Bagged CART ensemble over the 30-value feature vectors.
//!
//! Training is deterministic for a fixed (dataset order, seed) pair: every
//! tree derives its own SplitMix64 stream from the forest seed, so parallel
//! and sequential builds produce identical models.

mod serialize;
mod train;

pub use train::{train, train_with_report, TrainReport};

use crate::error::{Error, Result};
use crate::featureset::{FEATURE_COUNT, CONN_IMMEDIATE, CONN_RADIAL};

/// Current model file format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features drawn per split.
    pub mtry: usize,
    /// None = grow to purity.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: 5, // floor(sqrt(30))
            max_depth: None,
            min_leaf: 1,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Param("forest needs at least one tree".into()));
        }
        if self.mtry == 0 || self.mtry > n_features {
            return Err(Error::Param(format!(
                "mtry must be in 1..={n_features}, got {}",
                self.mtry
            )));
        }
        if self.min_leaf == 0 {
            return Err(Error::Param("min_leaf must be >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Param("max_depth of 0 cannot hold a split".into()));
        }
        Ok(())
    }
}

/// One node of a decision tree, indices into the owning tree's arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: u16,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        vessel_fraction: f64,
        sample_count: u32,
    },
}

/// A single CART; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Leaf vessel fraction for a feature vector.
    #[inline]
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
                TreeNode::Leaf {
                    vessel_fraction, ..
                } => return vessel_fraction,
            }
        }
    }
}

/// Trained ensemble with everything needed to reproduce and reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) trees: Vec<Tree>,
    pub(crate) n_features: usize,
    pub(crate) params: ForestParams,
    pub(crate) feature_names: Vec<String>,
    pub(crate) format_version: u32,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    /// Mean leaf vessel fraction over all trees.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::Dimension(format!(
                "feature vector has {} values, model expects {}",
                features.len(),
                self.n_features
            )));
        }
        Ok(self.predict_unchecked(features))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        sum / self.trees.len() as f64
    }
}

/// Anything that turns a feature vector into a vessel probability. The
/// region-growing engine is generic over this so synthetic rule-based
/// models can drive it in tests.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;

    /// `features.len()` must equal [`Classifier::n_features`].
    fn predict(&self, features: &[f64]) -> f64;
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.n_features);
        self.predict_unchecked(features)
    }
}

impl<C: Classifier> Classifier for &C {
    fn n_features(&self) -> usize {
        (*self).n_features()
    }

    fn predict(&self, features: &[f64]) -> f64 {
        (*self).predict(features)
    }
}

/// Wrapper that hides the connectivity flags from the wrapped model; used
/// for the ablation experiment.
pub struct ConnectivityAblated<C>(pub C);

impl<C: Classifier> Classifier for ConnectivityAblated<C> {
    fn n_features(&self) -> usize {
        self.0.n_features()
    }

    fn predict(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), FEATURE_COUNT);
        let mut masked = [0.0; FEATURE_COUNT];
        masked.copy_from_slice(features);
        masked[CONN_IMMEDIATE] = 0.0;
        masked[CONN_RADIAL] = 0.0;
        self.0.predict(&masked)
    }
}
