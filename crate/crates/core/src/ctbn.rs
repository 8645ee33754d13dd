//! Conditional tree-structured Bayesian network (CTBN) experts.
//!
//! Each class node has at most one class parent. A root node's CPD is a
//! single logistic model of `x`; a child node's CPD is a pair of logistic
//! models selected by the parent's label. The joint conditional probability
//! of a label vector is the product of the node CPDs, and its mode is found
//! exactly by max-sum on the forest.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::logreg::{train_weighted_from, LinearModel, OptimizerConfig, Problem};

/// Parent map over the `d` class nodes. `None` marks a root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeStructure {
    parent: Vec<Option<usize>>,
}

impl TreeStructure {
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self> {
        let d = parent.len();
        for (i, p) in parent.iter().enumerate() {
            match *p {
                Some(j) if j == i => return Err(Error::Argument(format!("node {i} is its own parent"))),
                Some(j) if j >= d => return Err(Error::Argument(format!("node {i} has parent {j} >= d = {d}"))),
                _ => {}
            }
        }
        if !is_acyclic(&parent) {
            return Err(Error::Argument(format!("parent map {parent:?} contains a cycle")));
        }
        Ok(TreeStructure { parent })
    }

    /// All nodes are roots.
    pub fn empty(d: usize) -> Self {
        TreeStructure { parent: vec![None; d] }
    }

    /// The chain `0 -> 1 -> ... -> d-1`.
    pub fn chain(d: usize) -> Self {
        TreeStructure {
            parent: (0..d).map(|i| i.checked_sub(1)).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.parent.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(i, _)| i)
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.d()];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(j) = *p {
                ch[j].push(i);
            }
        }
        ch
    }

    /// Nodes ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let children = self.children();
        let mut order: Vec<usize> = self.roots().collect();
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            order.extend_from_slice(&children[node]);
            head += 1;
        }
        order
    }

    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }
}

/// True when following parent links from every node terminates.
pub fn is_acyclic(parent: &[Option<usize>]) -> bool {
    let d = parent.len();
    // 0 = unvisited, 1 = on current path, 2 = known to reach a root
    let mut state = vec![0u8; d];
    for start in 0..d {
        let mut path = Vec::new();
        let mut node = start;
        loop {
            match state[node] {
                2 => break,
                1 => return false,
                _ => {}
            }
            state[node] = 1;
            path.push(node);
            match parent[node] {
                Some(p) if p < d => node = p,
                Some(_) => return false,
                None => break,
            }
        }
        for n in path {
            state[n] = 2;
        }
    }
    true
}

/// Conditional distribution of one class node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cpd {
    Root(LinearModel),
    Conditional {
        parent_zero: LinearModel,
        parent_one: LinearModel,
    },
}

impl Cpd {
    pub fn model(&self, parent_value: bool) -> &LinearModel {
        match self {
            Cpd::Root(m) => m,
            Cpd::Conditional { parent_zero, parent_one } => {
                if parent_value {
                    parent_one
                } else {
                    parent_zero
                }
            }
        }
    }

    fn models(&self) -> Vec<&LinearModel> {
        match self {
            Cpd::Root(m) => vec![m],
            Cpd::Conditional { parent_zero, parent_one } => vec![parent_zero, parent_one],
        }
    }
}

/// Log-CPD table of one node for a fixed `x`: `table[parent_value][label]`.
/// Root nodes have identical rows.
pub type NodeTable = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtbnExpert {
    pub structure: TreeStructure,
    pub cpds: Vec<Cpd>,
}

impl CtbnExpert {
    pub fn new(structure: TreeStructure, cpds: Vec<Cpd>) -> Result<Self> {
        if cpds.len() != structure.d() {
            return Err(Error::Argument(format!("{} CPDs for d = {}", cpds.len(), structure.d())));
        }
        let mut dim = None;
        for (i, cpd) in cpds.iter().enumerate() {
            let shape_ok = matches!(
                (structure.parent(i), cpd),
                (None, Cpd::Root(_)) | (Some(_), Cpd::Conditional { .. })
            );
            if !shape_ok {
                return Err(Error::Argument(format!("CPD of node {i} does not match its parent set")));
            }
            for m in cpd.models() {
                if *dim.get_or_insert(m.params.len()) != m.params.len() {
                    return Err(Error::Argument("CPD parameter vectors differ in length".into()));
                }
            }
        }
        Ok(CtbnExpert { structure, cpds })
    }

    pub fn d(&self) -> usize {
        self.structure.d()
    }

    /// Feature dimensionality including the bias.
    pub fn input_dim(&self) -> usize {
        self.cpds.first().map_or(0, |c| c.model(false).params.len())
    }

    /// Number of stored CPD parameters (roots keep a single model).
    pub fn parameter_count(&self) -> usize {
        self.cpds.iter().map(|c| c.models().len()).sum::<usize>() * self.input_dim()
    }

    pub fn node_tables(&self, x: &[f64]) -> Vec<NodeTable> {
        self.cpds
            .iter()
            .map(|cpd| match cpd {
                Cpd::Root(m) => {
                    let (l0, l1) = m.log_probs(x);
                    [[l0, l1], [l0, l1]]
                }
                Cpd::Conditional { parent_zero, parent_one } => {
                    let (a0, a1) = parent_zero.log_probs(x);
                    let (b0, b1) = parent_one.log_probs(x);
                    [[a0, a1], [b0, b1]]
                }
            })
            .collect()
    }

    /// `log P(y | x, T)`.
    pub fn joint_log_prob(&self, x: &[f64], y: &[bool]) -> f64 {
        tables_log_prob(&self.structure, &self.node_tables(x), y)
    }

    /// Most probable label vector and its log-probability.
    pub fn exact_map(&self, x: &[f64]) -> (Vec<bool>, f64) {
        let tables = self.node_tables(x);
        let y = max_sum(&self.structure, &tables);
        let lp = tables_log_prob(&self.structure, &tables, &y);
        (y, lp)
    }
}

pub fn joint_log_prob(expert: &CtbnExpert, x: &[f64], y: &[bool]) -> f64 {
    expert.joint_log_prob(x, y)
}

pub fn exact_map(expert: &CtbnExpert, x: &[f64]) -> (Vec<bool>, f64) {
    expert.exact_map(x)
}

/// Sums node log-CPDs in node index order.
pub fn tables_log_prob(structure: &TreeStructure, tables: &[NodeTable], y: &[bool]) -> f64 {
    let mut total = 0.0;
    for (i, t) in tables.iter().enumerate() {
        let pv = structure.parent(i).is_some_and(|p| y[p]);
        total += t[usize::from(pv)][usize::from(y[i])];
    }
    total
}

/// Max-sum on the forest: one leaves-to-roots pass, one backtracking pass.
/// At equal scores the label 0 is kept.
pub fn max_sum(structure: &TreeStructure, tables: &[NodeTable]) -> Vec<bool> {
    let d = structure.d();
    let order = structure.topological_order();
    let children = structure.children();
    // best[i][v]: max over the subtree of i given parent value v.
    let mut best = vec![[0.0f64; 2]; d];
    let mut choice = vec![[false; 2]; d];
    for &i in order.iter().rev() {
        for v in 0..2 {
            let mut score = [tables[i][v][0], tables[i][v][1]];
            for &c in &children[i] {
                score[0] += best[c][0];
                score[1] += best[c][1];
            }
            let pick_one = score[1] > score[0];
            choice[i][v] = pick_one;
            best[i][v] = if pick_one { score[1] } else { score[0] };
        }
    }
    let mut y = vec![false; d];
    for &i in &order {
        let pv = structure.parent(i).is_some_and(|p| y[p]);
        y[i] = choice[i][usize::from(pv)];
    }
    y
}

/// Weighted logistic problem for node `i` restricted to instances whose
/// parent label equals `parent_value` (all instances for roots).
fn node_problem<'a>(
    data: &'a Dataset,
    weights: &[f64],
    node: usize,
    parent: Option<(usize, bool)>,
) -> Result<Problem<'a>> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut w = Vec::new();
    for (inst, &wn) in data.iter().zip(weights) {
        if let Some((p, v)) = parent {
            if inst.labels[p] != v {
                continue;
            }
        }
        rows.push(inst.features.as_slice());
        targets.push(inst.labels[node]);
        w.push(wn);
    }
    Problem::new(rows, targets, w)
}

/// Trains the CPD of `node` given an optional parent; `init` warm-starts it.
pub fn train_cpd(
    data: &Dataset,
    weights: &[f64],
    node: usize,
    parent: Option<usize>,
    lambda: f64,
    cfg: &OptimizerConfig,
    init: Option<&Cpd>,
) -> Result<Cpd> {
    let dim = data.m() + 1;
    let start = |v: bool| -> Vec<f64> {
        match init {
            Some(c) => c.model(v).params.clone(),
            None => vec![0.0; dim],
        }
    };
    match parent {
        None => {
            let p = node_problem(data, weights, node, None)?;
            Ok(Cpd::Root(train_weighted_from(&p, start(false), lambda, cfg)?))
        }
        Some(j) => {
            let p0 = node_problem(data, weights, node, Some((j, false)))?;
            let p1 = node_problem(data, weights, node, Some((j, true)))?;
            Ok(Cpd::Conditional {
                parent_zero: train_weighted_from(&p0, start(false), lambda, cfg)?,
                parent_one: train_weighted_from(&p1, start(true), lambda, cfg)?,
            })
        }
    }
}

/// Fits every CPD of `structure` on weighted data.
pub fn train_parameters(
    structure: &TreeStructure,
    data: &Dataset,
    weights: &[f64],
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<CtbnExpert> {
    train_parameters_from(structure, data, weights, lambda, cfg, None)
}

/// As [`train_parameters`], warm-starting from `init` when it has the same structure.
pub fn train_parameters_from(
    structure: &TreeStructure,
    data: &Dataset,
    weights: &[f64],
    lambda: f64,
    cfg: &OptimizerConfig,
    init: Option<&CtbnExpert>,
) -> Result<CtbnExpert> {
    if structure.d() != data.d() {
        return Err(Error::Schema(format!("structure has d = {}, data has d = {}", structure.d(), data.d())));
    }
    if weights.len() != data.len() {
        return Err(Error::Argument(format!("{} weights for {} instances", weights.len(), data.len())));
    }
    let init = init.filter(|e| e.structure == *structure && e.input_dim() == data.m() + 1);
    let cpds = (0..structure.d())
        .map(|i| {
            let warm = init.map(|e| &e.cpds[i]);
            train_cpd(data, weights, i, structure.parent(i), lambda, cfg, warm)
        })
        .collect::<Result<Vec<_>>>()?;
    CtbnExpert::new(structure.clone(), cpds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logreg::sigmoid;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    /// Model whose probability on the bias-only input `[1.0]` is `p`.
    fn const_model(p: f64) -> LinearModel {
        LinearModel {
            params: vec![logit(p)],
            lambda: 0.0,
        }
    }

    #[test]
    fn structure_validation() {
        assert!(TreeStructure::new(vec![Some(0)]).is_err());
        assert!(TreeStructure::new(vec![Some(1), Some(0)]).is_err());
        assert!(TreeStructure::new(vec![None, Some(5)]).is_err());
        let t = TreeStructure::new(vec![Some(2), Some(2), None, Some(1)]).unwrap();
        assert_eq!(t.topological_order(), vec![2, 0, 1, 3]);
        assert_eq!(t.roots().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn single_factor() {
        let e = CtbnExpert::new(TreeStructure::empty(1), vec![Cpd::Root(const_model(0.8))]).unwrap();
        assert!((e.joint_log_prob(&[1.0], &[true]) - 0.8f64.ln()).abs() < 1e-12);
        assert_eq!(e.exact_map(&[1.0]).0, vec![true]);
    }

    #[test]
    fn chain_product() {
        let e = CtbnExpert::new(
            TreeStructure::chain(2),
            vec![
                Cpd::Root(const_model(0.6)),
                Cpd::Conditional {
                    parent_zero: const_model(0.9),
                    parent_one: const_model(0.5),
                },
            ],
        )
        .unwrap();
        assert!((e.joint_log_prob(&[1.0], &[true, true]) - 0.3f64.ln()).abs() < 1e-12);
        assert!((e.joint_log_prob(&[1.0], &[false, true]) - (0.4f64 * 0.9).ln()).abs() < 1e-12);
    }

    #[test]
    fn tie_prefers_zero() {
        let t = TreeStructure::new(vec![None, Some(0), Some(0), Some(2)]).unwrap();
        let cpds = (0..4)
            .map(|i| {
                if i == 0 {
                    Cpd::Root(const_model(0.5))
                } else {
                    Cpd::Conditional {
                        parent_zero: const_model(0.5),
                        parent_one: const_model(0.5),
                    }
                }
            })
            .collect();
        let e = CtbnExpert::new(t, cpds).unwrap();
        assert_eq!(e.exact_map(&[1.0]).0, vec![false; 4]);
    }

    #[test]
    fn cpd_shape_mismatch_rejected() {
        let r = CtbnExpert::new(TreeStructure::chain(2), vec![Cpd::Root(const_model(0.5)), Cpd::Root(const_model(0.5))]);
        assert!(r.is_err());
    }

    #[test]
    fn single_root_training_reduces_to_logreg() {
        let data = Dataset::from_rows(
            (0..12).map(|i| vec![i as f64 / 6.0 - 1.0]).collect(),
            (0..12).map(|i| vec![i % 3 != 0 && i > 3]).collect(),
        )
        .unwrap();
        let w: Vec<f64> = (0..12).map(|i| 0.5 + i as f64 / 12.0).collect();
        let cfg = OptimizerConfig::default();
        let e = train_parameters(&TreeStructure::empty(1), &data, &w, 0.3, &cfg).unwrap();
        let rows: Vec<&[f64]> = data.iter().map(|i| i.features.as_slice()).collect();
        let p = Problem::new(rows, data.label_column(0), w.clone()).unwrap();
        let direct = crate::logreg::train_weighted(&p, 2, 0.3, &cfg).unwrap();
        assert_eq!(e.cpds[0], Cpd::Root(direct));
    }

    #[test]
    fn unseen_parent_value_gives_penalty_only_branch() {
        // Node 0 is always 0, so node 1's parent_one branch has no data.
        let data = Dataset::from_rows(
            (0..10).map(|i| vec![i as f64 / 5.0 - 1.0]).collect(),
            (0..10).map(|i| vec![false, i % 2 == 0]).collect(),
        )
        .unwrap();
        let e = train_parameters(&TreeStructure::chain(2), &data, &[1.0; 10], 1.0, &OptimizerConfig::default()).unwrap();
        match &e.cpds[1] {
            Cpd::Conditional { parent_one, .. } => {
                assert!(parent_one.params.iter().all(|v| v.abs() < 1e-12));
                assert_eq!(sigmoid(parent_one.params[0]), 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
