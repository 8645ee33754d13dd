//! Structure learning for a single CTBN from weighted data.
//!
//! Every ordered class pair `(j, i)` gets the weighted hold-out
//! log-likelihood of `P(Y_i | X, Y_j)` as an edge weight, and every node gets
//! the hold-out log-likelihood of `P(Y_i | X)` as its "no parent" weight. The
//! best forest is then a maximum branching, found with the Chu-Liu/Edmonds
//! algorithm on the graph augmented with a virtual root whose outgoing edges
//! carry the "no parent" weights.

use crate::ctbn::{train_cpd, Cpd, TreeStructure};
use crate::dataset::{holdout_split, Dataset, WeightVector, WeightedDataset};
use crate::error::{Error, Result};
use crate::logreg::OptimizerConfig;

/// Complete class-dependency digraph. `edge_weight[j][i]` is the weight of
/// `j -> i`; the diagonal is unused. `self_weight[i]` is the weight of
/// leaving `i` without a class parent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    pub d: usize,
    pub edge_weight: Vec<Vec<f64>>,
    pub self_weight: Vec<f64>,
}

impl WeightedDigraph {
    pub fn new(edge_weight: Vec<Vec<f64>>, self_weight: Vec<f64>) -> Result<Self> {
        let d = self_weight.len();
        if edge_weight.len() != d || edge_weight.iter().any(|r| r.len() != d) {
            return Err(Error::Argument(format!("edge matrix must be {d} x {d}")));
        }
        for (j, row) in edge_weight.iter().enumerate() {
            for (i, w) in row.iter().enumerate() {
                if i != j && !w.is_finite() {
                    return Err(Error::Argument(format!("edge {j} -> {i} has non-finite weight")));
                }
            }
        }
        if self_weight.iter().any(|w| !w.is_finite()) {
            return Err(Error::Argument("non-finite self weight".into()));
        }
        Ok(WeightedDigraph { d, edge_weight, self_weight })
    }

    /// Sum of the weights chosen by `parents`, accumulated in node order.
    pub fn score(&self, parents: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        for (i, p) in parents.iter().enumerate() {
            total += match *p {
                Some(j) => self.edge_weight[j][i],
                None => self.self_weight[i],
            };
        }
        total
    }
}

/// Weighted hold-out log-likelihood of one trained CPD.
fn holdout_wcll(cpd: &Cpd, holdout: &WeightedDataset, node: usize, parent: Option<usize>) -> f64 {
    holdout
        .data
        .iter()
        .zip(holdout.weights.as_slice())
        .filter(|(_, &w)| w != 0.0)
        .map(|(inst, &w)| {
            let pv = parent.is_some_and(|p| inst.labels[p]);
            w * cpd.model(pv).log_prob(&inst.features, inst.labels[node])
        })
        .sum()
}

/// Trains all `d²` candidate CPDs on `train` and scores them on `holdout`.
///
/// Training weights are rescaled to mean one before fitting so that the
/// penalty strength means the same thing whatever the weights sum to.
pub fn build_graph(
    train: &WeightedDataset,
    holdout: &WeightedDataset,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<WeightedDigraph> {
    let d = train.data.d();
    if holdout.data.d() != d || holdout.data.m() != train.data.m() {
        return Err(Error::Schema("train and hold-out sets differ in shape".into()));
    }
    let fit_weights = train.weights.rescaled_to_mean_one();
    let mut edge_weight = vec![vec![0.0; d]; d];
    let mut self_weight = vec![0.0; d];
    for i in 0..d {
        let root = train_cpd(&train.data, fit_weights.as_slice(), i, None, lambda, cfg, None)?;
        self_weight[i] = holdout_wcll(&root, holdout, i, None);
        for j in (0..d).filter(|&j| j != i) {
            let cpd = train_cpd(&train.data, fit_weights.as_slice(), i, Some(j), lambda, cfg, None)?;
            edge_weight[j][i] = holdout_wcll(&cpd, holdout, i, Some(j));
        }
    }
    WeightedDigraph::new(edge_weight, self_weight)
}

/// Maximum-weight branching (forest with in-degree at most one).
///
/// Exact ties prefer "no parent" and then the smaller parent index.
#[allow(clippy::needless_range_loop)]
pub fn maximum_branching(g: &WeightedDigraph) -> TreeStructure {
    let d = g.d;
    let root = d;
    let mut w = vec![vec![f64::NEG_INFINITY; d + 1]; d + 1];
    for i in 0..d {
        w[root][i] = g.self_weight[i];
        for j in (0..d).filter(|&j| j != i) {
            w[j][i] = g.edge_weight[j][i];
        }
    }
    let parent = max_arborescence(&w, root);
    let parents = parent[..d]
        .iter()
        .map(|&p| if p == root { None } else { Some(p) })
        .collect();
    TreeStructure::new(parents).expect("arborescence is acyclic by construction")
}

/// Chu-Liu/Edmonds maximum spanning arborescence on a dense weight matrix
/// (`w[u][v]` is `u -> v`, `-inf` marks a missing edge). Every non-root node
/// must be reachable. Returns the parent of each node; the root maps to itself.
fn max_arborescence(w: &[Vec<f64>], root: usize) -> Vec<usize> {
    let n = w.len();
    let candidates = || std::iter::once(root).chain((0..n).filter(move |&u| u != root));

    let mut best = vec![root; n];
    for v in (0..n).filter(|&v| v != root) {
        let mut b: Option<usize> = None;
        for u in candidates().filter(|&u| u != v && w[u][v] > f64::NEG_INFINITY) {
            if b.is_none_or(|bu| w[u][v] > w[bu][v]) {
                b = Some(u);
            }
        }
        best[v] = b.expect("every node has an incoming edge");
    }

    let cycle = match find_cycle(&best, root) {
        Some(c) => c,
        None => return best,
    };
    let mut in_cycle = vec![false; n];
    cycle.iter().for_each(|&v| in_cycle[v] = true);

    // Renumber: nodes outside the cycle keep their relative order, the
    // contracted node comes last.
    let mut map = vec![usize::MAX; n];
    let mut inv = Vec::new();
    for v in (0..n).filter(|&v| !in_cycle[v]) {
        map[v] = inv.len();
        inv.push(v);
    }
    let c = inv.len();
    cycle.iter().for_each(|&v| map[v] = c);
    let m = c + 1;

    let mut nw = vec![vec![f64::NEG_INFINITY; m]; m];
    let mut enter = vec![usize::MAX; m]; // for a source a: cycle node entered by a -> c
    let mut leave = vec![usize::MAX; m]; // for a target b: cycle node leaving c -> b
    for u in 0..n {
        for v in 0..n {
            if u == v || w[u][v] == f64::NEG_INFINITY {
                continue;
            }
            match (in_cycle[u], in_cycle[v]) {
                (true, true) => {}
                (false, true) => {
                    let val = w[u][v] - w[best[v]][v];
                    let a = map[u];
                    if val > nw[a][c] {
                        nw[a][c] = val;
                        enter[a] = v;
                    }
                }
                (true, false) => {
                    let b = map[v];
                    if w[u][v] > nw[c][b] {
                        nw[c][b] = w[u][v];
                        leave[b] = u;
                    }
                }
                (false, false) => nw[map[u]][map[v]] = w[u][v],
            }
        }
    }

    let sub = max_arborescence(&nw, map[root]);
    let mut parent = best.clone();
    for v in (0..n).filter(|&v| !in_cycle[v] && v != root) {
        let p = sub[map[v]];
        parent[v] = if p == c { leave[map[v]] } else { inv[p] };
    }
    let a = sub[c];
    parent[enter[a]] = inv[a];
    parent[root] = root;
    parent
}

fn find_cycle(parent: &[usize], root: usize) -> Option<Vec<usize>> {
    let n = parent.len();
    let mut mark = vec![usize::MAX; n];
    for start in 0..n {
        let mut v = start;
        while v != root && mark[v] == usize::MAX {
            mark[v] = start;
            v = parent[v];
        }
        if v != root && mark[v] == start {
            let mut cycle = vec![v];
            let mut u = parent[v];
            while u != v {
                cycle.push(u);
                u = parent[u];
            }
            cycle.sort_unstable();
            return Some(cycle);
        }
    }
    None
}

/// Learned structure together with the graph it was extracted from.
#[derive(Debug, Clone)]
pub struct StructureFit {
    pub structure: TreeStructure,
    pub graph: WeightedDigraph,
    pub score: f64,
}

/// Hold-out split, graph construction and maximum branching.
pub fn learn_structure(
    data: &Dataset,
    weights: &WeightVector,
    lambda: f64,
    holdout_ratio: f64,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<TreeStructure> {
    Ok(learn_structure_detailed(data, weights, lambda, holdout_ratio, seed, cfg)?.structure)
}

pub fn learn_structure_detailed(
    data: &Dataset,
    weights: &WeightVector,
    lambda: f64,
    holdout_ratio: f64,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<StructureFit> {
    if data.d() == 1 {
        return Ok(StructureFit {
            structure: TreeStructure::empty(1),
            graph: WeightedDigraph::new(vec![vec![0.0]], vec![0.0])?,
            score: 0.0,
        });
    }
    let (train, holdout) = holdout_split(data, weights, holdout_ratio, seed)?;
    let graph = build_graph(&train, &holdout, lambda, cfg)?;
    let structure = maximum_branching(&graph);
    let score = graph.score(structure.parents());
    Ok(StructureFit { structure, graph, score })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        let g = WeightedDigraph::new(vec![vec![0.0]], vec![-3.0]).unwrap();
        assert_eq!(maximum_branching(&g).parents(), &[None]);
    }

    #[test]
    fn dominant_self_weights() {
        let g = WeightedDigraph::new(
            vec![vec![0.0, -5.0, -4.0], vec![-6.0, 0.0, -9.0], vec![-7.0, -2.5, 0.0]],
            vec![-1.0, -2.0, -3.0],
        )
        .unwrap();
        assert_eq!(maximum_branching(&g).parents(), &[None, None, None]);
    }

    #[test]
    fn cycle_is_broken_optimally() {
        // Greedy picks 0 <- 1 and 1 <- 0; the best forest keeps one of them.
        let g = WeightedDigraph::new(vec![vec![0.0, 5.0], vec![4.0, 0.0]], vec![1.0, 0.0]).unwrap();
        let t = maximum_branching(&g);
        assert_eq!(t.parents(), &[None, Some(0)]);
        assert_eq!(g.score(t.parents()), 6.0);
    }

    #[test]
    fn ties_prefer_no_parent() {
        let g = WeightedDigraph::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(maximum_branching(&g).parents(), &[None, None]);
    }

    #[test]
    fn nested_contraction() {
        // 3-cycle 0->1->2->0 with strong weights, plus node 3 pointing in.
        let ninf = -100.0;
        let e = vec![
            vec![0.0, 10.0, ninf, ninf],
            vec![ninf, 0.0, 10.0, ninf],
            vec![10.0, ninf, 0.0, 1.0],
            vec![ninf, 3.0, ninf, 0.0],
        ];
        let g = WeightedDigraph::new(e, vec![0.0, 0.0, 0.0, 0.5]).unwrap();
        let t = maximum_branching(&g);
        // Best: drop one cycle edge; enter at 1 from 3 (3 > 0 loss of 10 vs root 0).
        // Score options: root->0: 0+10+10 + node3 self 0.5 = 20.5 (drop 2->0)
        //                3->1 (3) + 1->2 + 2->0 + root->3 (0.5) = 23.5
        assert_eq!(g.score(t.parents()), 23.5);
        assert_eq!(t.parents(), &[Some(2), Some(3), Some(1), None]);
    }
}
