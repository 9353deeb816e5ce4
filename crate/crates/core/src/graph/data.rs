use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Graph};
use crate::error::{Error, Result};

/// Per-node class labels; `-1` marks an unlabeled node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<i32>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<i32>, num_classes: usize) -> Result<Self> {
        for (i, &l) in labels.iter().enumerate() {
            if l < -1 || (l >= 0 && l as usize >= num_classes) {
                return Err(Error::IndexOutOfRange {
                    what: "class label",
                    index: i as u64,
                    bound: num_classes as u64,
                });
            }
        }
        Ok(Self { labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.labels
    }

    pub fn get(&self, n: usize) -> Option<usize> {
        let l = self.labels[n];
        (l >= 0).then_some(l as usize)
    }

    /// Labels of the given nodes. Panics if any of them is unlabeled.
    pub fn gather(&self, nodes: &[usize]) -> Vec<usize> {
        nodes
            .iter()
            .map(|&n| self.get(n).expect("node in split is unlabeled"))
            .collect()
    }

    /// Row-major `nodes.len() x num_classes` one-hot encoding.
    pub fn one_hot(&self, nodes: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; nodes.len() * self.num_classes];
        for (row, c) in self.gather(nodes).into_iter().enumerate() {
            out[row * self.num_classes + c] = 1.0;
        }
        out
    }
}

/// Disjoint train/validation/test node lists.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self, labels: &LabelVector) -> Result<()> {
        let n = labels.len();
        let mut owner = vec![0u8; n];
        for (tag, list) in [(1u8, &self.train), (2, &self.val), (3, &self.test)] {
            for &i in list {
                if i >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "split node",
                        index: i as u64,
                        bound: n as u64,
                    });
                }
                if owner[i] != 0 {
                    return Err(Error::InvalidSplit(format!(
                        "node {i} appears in more than one split (or twice)"
                    )));
                }
                owner[i] = tag;
                if labels.get(i).is_none() {
                    return Err(Error::InvalidSplit(format!("node {i} is unlabeled")));
                }
            }
        }
        Ok(())
    }
}

/// A graph together with features, labels, and splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub splits: SplitSpec,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        labels: LabelVector,
        splits: SplitSpec,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.num_nodes() != n {
            return Err(Error::Shape(format!(
                "graph has {n} nodes, features have {}",
                features.num_nodes()
            )));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "graph has {n} nodes, labels have {}",
                labels.len()
            )));
        }
        splits.validate(&labels)?;
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            splits,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    /// The same dataset with L1 row-normalized features.
    pub fn row_normalized(&self) -> Dataset {
        Dataset {
            features: self.features.row_normalized(),
            ..self.clone()
        }
    }
}
