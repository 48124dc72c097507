//! Multi-way decision trees over three-valued features.
//!
//! Every internal node has exactly three children, one per truth value of
//! its feature. Splits are chosen C4.5-style by information gain; features
//! with equal gain (within [`GAIN_TOLERANCE`]) are ordered by cost, then by
//! index. There is no pruning: the tree must classify its training rows
//! exactly whenever the rows allow it.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::tvl::{Conjunction, FeatureId, FeatureVector, LabeledDataset, Literal, Polarity, TruthValue};

pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecisionTree {
    Leaf(TruthValue),
    Internal {
        feature: FeatureId,
        /// Indexed by [`TruthValue::index`]: T, F, U.
        children: Box<[DecisionTree; 3]>,
    },
}

impl DecisionTree {
    pub fn child(&self, edge: TruthValue) -> Option<&DecisionTree> {
        match self {
            DecisionTree::Leaf(_) => None,
            DecisionTree::Internal { children, .. } => Some(&children[edge.index()]),
        }
    }

    pub fn classify(&self, v: &FeatureVector) -> TruthValue {
        let mut node = self;
        loop {
            match node {
                DecisionTree::Leaf(l) => return *l,
                DecisionTree::Internal { feature, children } => {
                    node = &children[v.get(*feature).index()];
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Internal { children, .. } => {
                1 + children.iter().map(DecisionTree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Indented text rendering, one node per line.
    pub fn render(&self, data: &LabeledDataset) -> String {
        let mut out = String::new();
        self.render_into(data, 0, None, &mut out);
        out
    }

    fn render_into(&self, data: &LabeledDataset, depth: usize, edge: Option<TruthValue>, out: &mut String) {
        let indent = "  ".repeat(depth);
        let prefix = edge.map(|e| format!("[{e}] ")).unwrap_or_default();
        match self {
            DecisionTree::Leaf(l) => {
                let _ = writeln!(out, "{indent}{prefix}-> {l}");
            }
            DecisionTree::Internal { feature, children } => {
                let _ = writeln!(out, "{indent}{prefix}{}?", data.label(*feature));
                for t in TruthValue::ALL {
                    children[t.index()].render_into(data, depth + 1, Some(t), out);
                }
            }
        }
    }

    /// DOT graph description.
    pub fn to_dot(&self, data: &LabeledDataset) -> String {
        let mut out = String::from("digraph tree {\n");
        let mut next = 0usize;
        self.dot_into(data, &mut next, &mut out);
        out.push_str("}\n");
        out
    }

    fn dot_into(&self, data: &LabeledDataset, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        match self {
            DecisionTree::Leaf(l) => {
                let _ = writeln!(out, "  n{id} [shape=box,style=filled,label=\"{l}\"];");
            }
            DecisionTree::Internal { feature, children } => {
                let label = data.label(*feature).replace('"', "\\\"");
                let _ = writeln!(out, "  n{id} [shape=box,label=\"{label}\"];");
                for t in TruthValue::ALL {
                    let c = children[t.index()].dot_into(data, next, out);
                    let _ = writeln!(out, "  n{id} -> n{c} [label=\"{t}\"];");
                }
            }
        }
        id
    }
}

impl fmt::Display for DecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionTree::Leaf(l) => write!(f, "{l}"),
            DecisionTree::Internal { feature, children } => {
                write!(f, "{feature}(T:{}, F:{}, U:{})", children[0], children[1], children[2])
            }
        }
    }
}

fn entropy(counts: &[usize; 3]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain of splitting `rows` three ways on `f`, using Shannon
/// entropy (base 2) of the label distribution.
pub fn information_gain(data: &LabeledDataset, rows: &[usize], f: FeatureId) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    // partition[value][label]
    let mut partition = [[0usize; 3]; 3];
    for &i in rows {
        let r = &data.rows[i];
        partition[r.values.get(f).index()][r.label.index()] += 1;
    }
    let total = rows.len() as f64;
    let mut parent = [0usize; 3];
    for p in &partition {
        for l in 0..3 {
            parent[l] += p[l];
        }
    }
    let remainder: f64 = partition
        .iter()
        .map(|p| {
            let n: usize = p.iter().sum();
            n as f64 / total * entropy(p)
        })
        .sum();
    // Clamp rounding noise such as 1e-16 for an uninformative split.
    (entropy(&parent) - remainder).max(0.0)
}

/// Highest-gain candidate; ties by lower cost, then lower index.
///
/// Panics if `candidates` is empty.
pub fn choose_split(data: &LabeledDataset, rows: &[usize], candidates: &[FeatureId]) -> FeatureId {
    let mut best: Option<(FeatureId, f64)> = None;
    for &f in candidates {
        let g = information_gain(data, rows, f);
        best = match best {
            None => Some((f, g)),
            Some((b, bg)) => {
                let better = if (g - bg).abs() <= GAIN_TOLERANCE {
                    (data.cost(f), f) < (data.cost(b), b)
                } else {
                    g > bg
                };
                if better {
                    Some((f, g))
                } else {
                    Some((b, bg))
                }
            }
        };
    }
    best.expect("choose_split needs at least one candidate").0
}

/// Learns a tree for all rows of `data`, never splitting on `excluded`.
pub fn build_tree(data: &LabeledDataset, excluded: &BTreeSet<FeatureId>) -> DecisionTree {
    let rows: Vec<usize> = (0..data.rows.len()).collect();
    build_tree_on(data, &rows, excluded)
}

/// Learns a tree for the given subset of rows.
pub fn build_tree_on(data: &LabeledDataset, rows: &[usize], excluded: &BTreeSet<FeatureId>) -> DecisionTree {
    let mut on_path = vec![false; data.num_features()];
    for f in excluded {
        if f.0 < on_path.len() {
            on_path[f.0] = true;
        }
    }
    grow(data, rows, &mut on_path)
}

fn grow(data: &LabeledDataset, rows: &[usize], unavailable: &mut [bool]) -> DecisionTree {
    let Some(first) = rows.first() else {
        return DecisionTree::Leaf(TruthValue::F);
    };
    let label = data.rows[*first].label;
    if rows.iter().all(|&i| data.rows[i].label == label) {
        return DecisionTree::Leaf(label);
    }
    // A feature that is constant on these rows cannot separate them.
    let candidates: Vec<FeatureId> = data
        .feature_ids()
        .filter(|f| !unavailable[f.0])
        .filter(|&f| {
            let v0 = data.rows[*first].values.get(f);
            rows.iter().any(|&i| data.rows[i].values.get(f) != v0)
        })
        .collect();
    if candidates.is_empty() {
        return DecisionTree::Leaf(TruthValue::F);
    }
    let feature = choose_split(data, rows, &candidates);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for &i in rows {
        parts[data.rows[i].values.get(feature).index()].push(i);
    }
    unavailable[feature.0] = true;
    let children = parts.map(|part| grow(data, &part, unavailable));
    unavailable[feature.0] = false;
    DecisionTree::Internal { feature, children: Box::new(children) }
}

/// One conjunction per root-to-leaf path ending in a T leaf; edges T, F, U
/// contribute `f`, `!f` and `f = U` respectively.
pub fn extract_true_paths(tree: &DecisionTree) -> Vec<Conjunction> {
    let mut out = Vec::new();
    let mut path = Conjunction::new();
    collect_paths(tree, &mut path, &mut out);
    out
}

fn collect_paths(node: &DecisionTree, path: &mut Conjunction, out: &mut Vec<Conjunction>) {
    match node {
        DecisionTree::Leaf(TruthValue::T) => out.push(path.clone()),
        DecisionTree::Leaf(_) => {}
        DecisionTree::Internal { feature, children } => {
            for t in TruthValue::ALL {
                let polarity = match t {
                    TruthValue::T => Polarity::Positive,
                    TruthValue::F => Polarity::Negative,
                    TruthValue::U => Polarity::IsUnknown,
                };
                path.insert(Literal { feature: *feature, polarity });
                collect_paths(&children[t.index()], path, out);
                path.remove(*feature);
            }
        }
    }
}
