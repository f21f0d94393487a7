//! Spanning trees, distributions over them, and edge appearance
//! probabilities.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{grid_edges, Incidence, PairwiseMrf};

/// Default cap on the number of trees `enumerate_spanning_trees` will list.
pub const TREE_ENUMERATION_LIMIT: usize = 100_000;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A spanning tree given as a subset of the graph's edge indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    edges: Vec<usize>,
    member: Vec<bool>,
}

/// A rooted view of a spanning tree: BFS order from the root and each
/// node's parent link.
#[derive(Clone, Debug)]
pub struct TreeLayout {
    pub root: usize,
    pub order: Vec<usize>,
    pub parent: Vec<Option<Incidence>>,
}

impl SpanningTree {
    pub fn new(mrf: &PairwiseMrf, mut edges: Vec<usize>) -> Result<Self> {
        let n = mrf.node_count();
        edges.sort_unstable();
        edges.dedup();
        if let Some(&e) = edges.iter().find(|&&e| e >= mrf.edge_count()) {
            return Err(Error::InvalidTree(format!(
                "edge index {e} is out of range"
            )));
        }
        if edges.len() + 1 != n {
            return Err(Error::InvalidTree(format!(
                "a spanning tree on {n} nodes has {} edges, found {}",
                n - 1,
                edges.len()
            )));
        }
        let mut dsu = Dsu::new(n);
        for &e in &edges {
            let (s, t) = mrf.edge(e);
            if !dsu.union(s, t) {
                return Err(Error::InvalidTree(format!(
                    "edge ({s}, {t}) closes a cycle"
                )));
            }
        }
        let mut member = vec![false; mrf.edge_count()];
        for &e in &edges {
            member[e] = true;
        }
        Ok(SpanningTree { edges, member })
    }

    /// Builds a tree from node pairs; each pair must be a graph edge.
    pub fn from_pairs(mrf: &PairwiseMrf, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut idx = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let e = mrf
                .edge_index(a, b)
                .ok_or_else(|| Error::InvalidTree(format!("({a}, {b}) is not a graph edge")))?;
            idx.push(e);
        }
        SpanningTree::new(mrf, idx)
    }

    /// The whole graph, when the graph is itself a tree.
    pub fn whole(mrf: &PairwiseMrf) -> Result<Self> {
        SpanningTree::new(mrf, (0..mrf.edge_count()).collect())
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn contains(&self, e: usize) -> bool {
        self.member.get(e).copied().unwrap_or(false)
    }

    pub fn layout(&self, mrf: &PairwiseMrf, root: usize) -> Result<TreeLayout> {
        let n = mrf.node_count();
        if root >= n {
            return Err(Error::InvalidRoot(root));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for inc in mrf.neighbors(u) {
                if self.contains(inc.edge) && !seen[inc.neighbor] {
                    seen[inc.neighbor] = true;
                    parent[inc.neighbor] = Some(Incidence {
                        neighbor: u,
                        edge: inc.edge,
                    });
                    queue.push_back(inc.neighbor);
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidTree("tree does not match this graph".into()));
        }
        Ok(TreeLayout {
            root,
            order,
            parent,
        })
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// A finite distribution over spanning trees of one graph.
#[derive(Clone, Debug)]
pub struct TreeDistribution {
    trees: Vec<SpanningTree>,
    weights: Vec<f64>,
    edge_count: usize,
}

impl TreeDistribution {
    pub fn new(mrf: &PairwiseMrf, trees: Vec<SpanningTree>, weights: Vec<f64>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidDistribution("no trees".into()));
        }
        if trees.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} trees but {} weights",
                trees.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        if trees.iter().any(|t| t.member.len() != mrf.edge_count()) {
            return Err(Error::InvalidDistribution(
                "tree built for a different graph".into(),
            ));
        }
        Ok(TreeDistribution {
            trees,
            weights,
            edge_count: mrf.edge_count(),
        })
    }

    /// Equal weight on every tree.
    pub fn uniform(mrf: &PairwiseMrf, trees: Vec<SpanningTree>) -> Result<Self> {
        let w = 1.0 / trees.len().max(1) as f64;
        let weights = vec![w; trees.len()];
        TreeDistribution::new(mrf, trees, weights)
    }

    /// Uniform distribution over every spanning tree of the graph.
    pub fn uniform_all(mrf: &PairwiseMrf) -> Result<Self> {
        TreeDistribution::uniform(mrf, enumerate_spanning_trees(mrf)?)
    }

    pub fn trees(&self) -> &[SpanningTree] {
        &self.trees
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trees with positive weight, paired with their weights.
    pub fn support(&self) -> impl Iterator<Item = (&SpanningTree, f64)> {
        self.trees
            .iter()
            .zip(self.weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
    }

    pub(crate) fn check_graph(&self, mrf: &PairwiseMrf) -> Result<()> {
        if self.edge_count != mrf.edge_count() {
            return Err(Error::InvalidDistribution(
                "distribution belongs to a different graph".into(),
            ));
        }
        Ok(())
    }
}

/// Per-edge weights `rho_e` used by the reweighted updates.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeAppearance {
    rho: Vec<f64>,
    validated: bool,
}

impl EdgeAppearance {
    /// Raw weights with no tree distribution behind them. Membership in the
    /// spanning tree polytope is not checked, so the result is marked
    /// unvalidated.
    pub fn from_raw(mrf: &PairwiseMrf, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != mrf.edge_count() {
            return Err(Error::InvalidDistribution(format!(
                "{} edge weights for {} edges",
                rho.len(),
                mrf.edge_count()
            )));
        }
        for (e, &r) in rho.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                let (s, t) = mrf.edge(e);
                return Err(Error::InvalidDistribution(format!(
                    "edge ({s}, {t}) has weight {r}, expected a value in (0, 1]"
                )));
            }
        }
        Ok(EdgeAppearance {
            rho,
            validated: false,
        })
    }

    /// `rho_e = (n - 1) / |E|` on every edge. Marked validated when the
    /// weights are checked to lie in the spanning tree polytope, which is
    /// done by subset enumeration for graphs of up to
    /// [`UNIFORM_CHECK_LIMIT`] nodes.
    pub fn uniform(mrf: &PairwiseMrf) -> Self {
        let r = if mrf.edge_count() == 0 {
            1.0
        } else {
            (mrf.node_count() as f64 - 1.0) / mrf.edge_count() as f64
        };
        EdgeAppearance {
            rho: vec![r.min(1.0); mrf.edge_count()],
            validated: mrf.is_connected() && uniform_in_tree_polytope(mrf) == Some(true),
        }
    }

    /// All ones: ordinary max-product.
    pub fn ones(mrf: &PairwiseMrf) -> Self {
        EdgeAppearance {
            rho: vec![1.0; mrf.edge_count()],
            validated: mrf.edge_count() + 1 == mrf.node_count() && mrf.is_connected(),
        }
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }
}

pub const UNIFORM_CHECK_LIMIT: usize = 16;

/// Whether equal weights `(n - 1) / |E|` satisfy `rho(E(S)) <= |S| - 1` on
/// every node subset `S`. `None` above [`UNIFORM_CHECK_LIMIT`] nodes.
fn uniform_in_tree_polytope(mrf: &PairwiseMrf) -> Option<bool> {
    let n = mrf.node_count();
    if n > UNIFORM_CHECK_LIMIT {
        return None;
    }
    let m = mrf.edge_count();
    Some((1u32..1 << n).all(|set| {
        let size = set.count_ones() as usize;
        if size < 2 {
            return true;
        }
        let inside = mrf
            .edges()
            .iter()
            .filter(|&&(s, t)| set >> s & 1 == 1 && set >> t & 1 == 1)
            .count();
        inside * (n - 1) <= (size - 1) * m
    }))
}

/// `rho_e = sum of rho(T) over trees containing e`.
pub fn edge_appearance(dist: &TreeDistribution, mrf: &PairwiseMrf) -> Result<EdgeAppearance> {
    dist.check_graph(mrf)?;
    let mut rho = vec![0.0; mrf.edge_count()];
    for (tree, w) in dist.support() {
        for &e in tree.edges() {
            rho[e] += w;
        }
    }
    if let Some(e) = rho.iter().position(|&r| r <= 0.0) {
        let (s, t) = mrf.edge(e);
        return Err(Error::UncoveredEdge(s, t));
    }
    Ok(EdgeAppearance {
        rho,
        validated: true,
    })
}

/// Either an explicit tree distribution or bare edge weights.
#[derive(Clone, Debug)]
pub enum Reweighting {
    Trees(TreeDistribution),
    Edges(EdgeAppearance),
}

impl Reweighting {
    pub fn edge_appearance(&self, mrf: &PairwiseMrf) -> Result<EdgeAppearance> {
        match self {
            Reweighting::Trees(d) => edge_appearance(d, mrf),
            Reweighting::Edges(r) => {
                if r.rho.len() != mrf.edge_count() {
                    return Err(Error::InvalidDistribution(
                        "edge weights belong to a different graph".into(),
                    ));
                }
                Ok(r.clone())
            }
        }
    }

    pub fn trees(&self) -> Option<&TreeDistribution> {
        match self {
            Reweighting::Trees(d) => Some(d),
            Reweighting::Edges(_) => None,
        }
    }
}

pub fn enumerate_spanning_trees(mrf: &PairwiseMrf) -> Result<Vec<SpanningTree>> {
    enumerate_spanning_trees_with_limit(mrf, TREE_ENUMERATION_LIMIT)
}

/// Lists every spanning tree by include/exclude backtracking over the edge
/// list, pruning branches that can no longer connect the graph.
pub fn enumerate_spanning_trees_with_limit(
    mrf: &PairwiseMrf,
    limit: usize,
) -> Result<Vec<SpanningTree>> {
    if !mrf.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut search = TreeSearch {
        mrf,
        limit,
        chosen: Vec::new(),
        excluded: vec![false; mrf.edge_count()],
        out: Vec::new(),
    };
    search.visit(0)?;
    let out = search
        .out
        .into_iter()
        .map(|edges| {
            let mut member = vec![false; mrf.edge_count()];
            for &e in &edges {
                member[e] = true;
            }
            SpanningTree { edges, member }
        })
        .collect();
    Ok(out)
}

struct TreeSearch<'a> {
    mrf: &'a PairwiseMrf,
    limit: usize,
    chosen: Vec<usize>,
    excluded: Vec<bool>,
    out: Vec<Vec<usize>>,
}

impl TreeSearch<'_> {
    fn visit(&mut self, next: usize) -> Result<()> {
        let n = self.mrf.node_count();
        if self.chosen.len() + 1 == n {
            if self.out.len() == self.limit {
                return Err(Error::Capacity(format!(
                    "more than {} spanning trees",
                    self.limit
                )));
            }
            self.out.push(self.chosen.clone());
            return Ok(());
        }
        if next == self.mrf.edge_count() {
            return Ok(());
        }
        if !self.closes_cycle(next) {
            self.chosen.push(next);
            self.visit(next + 1)?;
            self.chosen.pop();
        }
        self.excluded[next] = true;
        if self.still_connected() {
            self.visit(next + 1)?;
        }
        self.excluded[next] = false;
        Ok(())
    }

    fn closes_cycle(&self, e: usize) -> bool {
        let mut dsu = Dsu::new(self.mrf.node_count());
        for &c in &self.chosen {
            let (s, t) = self.mrf.edge(c);
            dsu.union(s, t);
        }
        let (s, t) = self.mrf.edge(e);
        !dsu.union(s, t)
    }

    fn still_connected(&self) -> bool {
        let n = self.mrf.node_count();
        let mut dsu = Dsu::new(n);
        let mut parts = n;
        for e in 0..self.mrf.edge_count() {
            if !self.excluded[e] {
                let (s, t) = self.mrf.edge(e);
                if dsu.union(s, t) {
                    parts -= 1;
                }
            }
        }
        parts == 1
    }
}

/// Two spanning trees of a `rows x cols` grid with weight 1/2 each: all
/// horizontal edges plus the first column, and all vertical edges plus the
/// first row. Edge indices follow [`grid_edges`].
pub fn grid_two_tree_distribution(rows: usize, cols: usize) -> Result<TreeDistribution> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidModel(
            "grid needs at least 2 rows and 2 columns".into(),
        ));
    }
    let edges = grid_edges(rows, cols);
    let graph = PairwiseMrf::zeros(vec![1; rows * cols], edges.clone())?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (e, &(s, t)) in edges.iter().enumerate() {
        let horizontal = t == s + 1;
        let (r, c) = (s / cols, s % cols);
        if horizontal || c == 0 {
            first.push(e);
        }
        if !horizontal || r == 0 {
            second.push(e);
        }
    }
    let trees = vec![
        SpanningTree::new(&graph, first)?,
        SpanningTree::new(&graph, second)?,
    ];
    TreeDistribution::new(&graph, trees, vec![0.5, 0.5])
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TreeDocument {
    Trees(Vec<TreeRecord>),
    Rho { rho_e: BTreeMap<String, f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    edges: Vec<[usize; 2]>,
    weight: f64,
}

/// Parses a tree-distribution document, either a list of
/// `{"edges": [[s, t], ...], "weight": r}` records or
/// `{"rho_e": {"s,t": r, ...}}`.
pub fn load_reweighting(bytes: &[u8], mrf: &PairwiseMrf) -> Result<Reweighting> {
    let doc: TreeDocument = serde_json::from_slice(bytes).map_err(|e| {
        Error::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    match doc {
        TreeDocument::Trees(records) => {
            let mut trees = Vec::with_capacity(records.len());
            let mut weights = Vec::with_capacity(records.len());
            for (i, rec) in records.iter().enumerate() {
                let pairs: Vec<(usize, usize)> = rec.edges.iter().map(|&[s, t]| (s, t)).collect();
                let tree = SpanningTree::from_pairs(mrf, &pairs)
                    .map_err(|e| Error::parse(format!("trees[{i}]"), e.to_string()))?;
                trees.push(tree);
                weights.push(rec.weight);
            }
            Ok(Reweighting::Trees(TreeDistribution::new(
                mrf, trees, weights,
            )?))
        }
        TreeDocument::Rho { rho_e } => {
            let mut rho = vec![f64::NAN; mrf.edge_count()];
            for (key, r) in rho_e {
                let loc = format!("rho_e[\"{key}\"]");
                let parsed: Option<(usize, usize)> = key
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                let (a, b) = parsed.ok_or_else(|| Error::parse(&loc, "expected key \"s,t\""))?;
                let e = mrf
                    .edge_index(a, b)
                    .ok_or_else(|| Error::parse(&loc, "not a graph edge"))?;
                rho[e] = r;
            }
            if let Some(e) = rho.iter().position(|r| r.is_nan()) {
                let (s, t) = mrf.edge(e);
                return Err(Error::parse(
                    "rho_e",
                    format!("missing weight for edge ({s}, {t})"),
                ));
            }
            Ok(Reweighting::Edges(EdgeAppearance::from_raw(mrf, rho)?))
        }
    }
}

/// Distinct trees in a list, for duplicate checks.
pub fn distinct_trees(trees: &[SpanningTree]) -> usize {
    trees
        .iter()
        .map(|t| t.edges.clone())
        .collect::<HashSet<_>>()
        .len()
}
