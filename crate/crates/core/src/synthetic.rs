//! Seeded synthetic graphs and datasets for tests, probes and examples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, FeatureMatrix, Graph, LabelVector, SplitSpec};

/// The 3-node path `0 - 1 - 2` with `X = [[1],[0],[2]]`, labels `[0,1,0]`,
/// every node in the training split.
pub fn path_fixture() -> Dataset {
    let graph = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let features = FeatureMatrix::from_rows(&[[1.0], [0.0], [2.0]]);
    let labels = LabelVector::new(vec![0, 1, 0], 2).unwrap();
    let splits = SplitSpec {
        train: vec![0, 1, 2],
        val: vec![],
        test: vec![],
    };
    Dataset::new("path", graph, features, labels, splits).unwrap()
}

/// Uniform random graph with `num_edges` distinct undirected edges.
pub fn random_graph<R: Rng + ?Sized>(num_nodes: usize, num_edges: usize, rng: &mut R) -> Result<Graph> {
    let max = num_nodes * num_nodes.saturating_sub(1) / 2;
    if num_edges > max {
        return Err(Error::InvalidParameter(format!(
            "{num_edges} edges requested, a simple graph on {num_nodes} nodes holds {max}"
        )));
    }
    let mut seen = std::collections::HashSet::with_capacity(num_edges);
    let mut edges = Vec::with_capacity(num_edges);
    while edges.len() < num_edges {
        let u = rng.gen_range(0..num_nodes);
        let v = rng.gen_range(0..num_nodes);
        if u != v && seen.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    Graph::from_edges(num_nodes, edges)
}

/// Dense features with i.i.d. standard normal entries.
pub fn random_features<R: Rng + ?Sized>(num_nodes: usize, num_features: usize, rng: &mut R) -> FeatureMatrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values = (0..num_nodes * num_features)
        .map(|_| rng.sample(normal))
        .collect();
    FeatureMatrix::new(num_nodes, num_features, values).unwrap()
}

/// Parameters of a contextual stochastic block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbmParams {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub avg_degree: f64,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Scale of the class means relative to unit noise.
    pub signal: f64,
    pub train_per_class: usize,
    pub num_val: usize,
}

impl Default for CsbmParams {
    fn default() -> Self {
        Self {
            num_nodes: 600,
            num_features: 32,
            num_classes: 3,
            avg_degree: 6.0,
            homophily: 0.8,
            signal: 0.3,
            train_per_class: 20,
            num_val: 150,
        }
    }
}

/// A seeded CSBM dataset: class-dependent Gaussian features and edges that
/// stay inside a class with probability `homophily`. The remaining nodes
/// after train and val form the test split.
pub fn csbm(p: &CsbmParams, seed: u64) -> Result<Dataset> {
    if p.num_classes < 2 || p.num_nodes < p.num_classes * p.train_per_class + p.num_val {
        return Err(Error::InvalidParameter(format!("inconsistent CSBM sizes {p:?}")));
    }
    if !(0.0..=1.0).contains(&p.homophily) {
        return Err(Error::InvalidParameter("homophily must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..p.num_nodes).map(|i| i % p.num_classes).collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); p.num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }

    let num_edges = (p.avg_degree * p.num_nodes as f64 / 2.0).round() as usize;
    let mut edges = Vec::with_capacity(num_edges);
    while edges.len() < num_edges {
        let u = rng.gen_range(0..p.num_nodes);
        let pool = if rng.gen_bool(p.homophily) {
            &by_class[labels[u]]
        } else {
            let mut c = rng.gen_range(0..p.num_classes - 1);
            if c >= labels[u] {
                c += 1;
            }
            &by_class[c]
        };
        let v = *pool.choose(&mut rng).unwrap();
        if u != v {
            edges.push((u, v));
        }
    }
    let graph = Graph::from_edges(p.num_nodes, edges)?;

    let normal = Normal::new(0.0, 1.0).unwrap();
    let means: Vec<Vec<f64>> = (0..p.num_classes)
        .map(|_| {
            (0..p.num_features)
                .map(|_| if rng.gen_bool(0.5) { p.signal } else { -p.signal })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(p.num_nodes * p.num_features);
    for &y in &labels {
        for m in &means[y] {
            values.push(m + rng.sample(normal));
        }
    }
    let features = FeatureMatrix::new(p.num_nodes, p.num_features, values)?;

    let mut train = Vec::new();
    let mut rest = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..p.train_per_class]);
        rest.extend_from_slice(&members[p.train_per_class..]);
    }
    rest.shuffle(&mut rng);
    let test = rest.split_off(p.num_val);
    train.sort_unstable();
    let splits = SplitSpec {
        train,
        val: rest,
        test,
    };
    let labels = LabelVector::new(labels.iter().map(|&y| y as i32).collect(), p.num_classes)?;
    Dataset::new(format!("csbm-{seed}"), graph, features, labels, splits)
}

/// Disjoint paths `v_0 - v_1 - ... - v_h`. Only `v_h` carries a feature
/// (`±1 + noise` in dimension 0, pure noise in dimension 1) and the sign is
/// the label of `v_0`, the only labeled node of the path. Reading the label
/// therefore needs information from exactly `distance` hops away.
pub fn hop_chain(num_samples: usize, distance: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if distance == 0 || num_samples < 10 {
        return Err(Error::InvalidParameter(
            "hop chain needs distance ≥ 1 and at least 10 samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0) + f64::MIN_POSITIVE).unwrap();
    let len = distance + 1;
    let n = num_samples * len;
    let mut edges = Vec::with_capacity(num_samples * distance);
    let mut values = vec![0.0; n * 2];
    let mut labels = vec![-1i32; n];
    for s in 0..num_samples {
        let base = s * len;
        for j in 0..distance {
            edges.push((base + j, base + j + 1));
        }
        let y = (s % 2) as i32;
        labels[base] = y;
        let end = base + distance;
        values[end * 2] = if y == 1 { 1.0 } else { -1.0 } + rng.sample(normal);
        values[end * 2 + 1] = rng.sample(normal);
    }
    let mut samples: Vec<usize> = (0..num_samples).map(|s| s * len).collect();
    samples.shuffle(&mut rng);
    let n_train = num_samples / 2;
    let n_val = num_samples / 4;
    let mut train = samples[..n_train].to_vec();
    let mut val = samples[n_train..n_train + n_val].to_vec();
    let mut test = samples[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Dataset::new(
        format!("hop-chain-{distance}"),
        Graph::from_edges(n, edges)?,
        FeatureMatrix::new(n, 2, values)?,
        LabelVector::new(labels, 2)?,
        SplitSpec { train, val, test },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_fixture_shape() {
        let d = path_fixture();
        assert_eq!(d.graph.degrees(), &[1, 2, 1]);
        assert_eq!(d.features.values(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn csbm_is_seeded_and_homophilous() {
        let p = CsbmParams::default();
        let a = csbm(&p, 4).unwrap();
        let b = csbm(&p, 4).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.splits, b.splits);
        assert_eq!(a.splits.train.len(), 60);
        assert_eq!(a.splits.val.len(), 150);
        let same = a
            .graph
            .edges()
            .filter(|&(u, v)| a.labels.get(u) == a.labels.get(v))
            .count();
        let frac = same as f64 / a.graph.num_edges() as f64;
        assert!((0.7..0.9).contains(&frac), "{frac}");
    }

    #[test]
    fn hop_chain_layout() {
        let d = hop_chain(20, 3, 0.0, 1).unwrap();
        assert_eq!(d.graph.num_nodes(), 80);
        assert_eq!(d.graph.num_edges(), 60);
        // sample 1 has label 1 and its far end at node 7
        assert_eq!(d.labels.get(4), Some(1));
        assert_eq!(d.labels.get(5), None);
        assert_eq!(d.features.get(7, 0), 1.0);
        assert_eq!(d.features.get(4, 0), 0.0);
    }

    #[test]
    fn random_graph_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_graph(50, 100, &mut rng).unwrap();
        assert_eq!(g.num_edges(), 100);
        assert!(random_graph(3, 4, &mut rng).is_err());
    }
}
