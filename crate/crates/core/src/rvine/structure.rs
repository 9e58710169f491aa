use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One edge of a vine tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VineEdge {
    /// Conditioned pair (a, b). `a` comes from the first endpoint.
    pub conditioned: [usize; 2],
    /// Conditioning set D, sorted ascending.
    pub conditioning: Vec<usize>,
    /// Tree 1: the two variables. Higher trees: indices of the two joined
    /// edges in the previous tree.
    pub endpoints: [usize; 2],
}

impl VineEdge {
    /// Conditioned ∪ conditioning, sorted.
    pub fn union(&self) -> Vec<usize> {
        let mut u = self.conditioning.clone();
        u.extend_from_slice(&self.conditioned);
        u.sort_unstable();
        u
    }
}

/// Trees 1..T of a (possibly truncated) regular vine on `m` variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureRepr")]
pub struct RVineStructure {
    m: usize,
    trees: Vec<Vec<VineEdge>>,
}

#[derive(Deserialize)]
struct StructureRepr {
    m: usize,
    trees: Vec<Vec<VineEdge>>,
}

impl TryFrom<StructureRepr> for RVineStructure {
    type Error = Error;
    fn try_from(r: StructureRepr) -> Result<Self> {
        Self::new(r.m, r.trees)
    }
}

/// Where an edge reads one of its two arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Input {
    Var(usize),
    /// Output `side` of the edge with this flat index.
    Edge(usize, usize),
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; false if they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Maximum spanning forest by Kruskal. Ties are broken by the
/// lexicographic order of `(i, j)`; pairs are returned in acceptance order.
pub fn maximum_spanning_tree(n: usize, candidates: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (&candidates[x], &candidates[y]);
        b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    let mut uf = UnionFind::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for k in order {
        let (i, j, _) = candidates[k];
        if uf.union(i, j) {
            out.push((i, j));
        }
    }
    out
}

/// Builds the next-tree edge joining edges `p` and `q` of `prev`, or `None`
/// when they do not share a node.
pub(crate) fn join_edges(prev: &[VineEdge], p: usize, q: usize, tree: usize) -> Option<VineEdge> {
    let (ep, eq) = (&prev[p], &prev[q]);
    let shares = if tree == 1 {
        ep.endpoints.iter().any(|x| eq.endpoints.contains(x))
    } else {
        ep.endpoints.iter().any(|x| eq.endpoints.contains(x))
    };
    if !shares {
        return None;
    }
    let (up, uq) = (ep.union(), eq.union());
    let only_p: Vec<usize> = up.iter().copied().filter(|x| !uq.contains(x)).collect();
    let only_q: Vec<usize> = uq.iter().copied().filter(|x| !up.contains(x)).collect();
    if only_p.len() != 1 || only_q.len() != 1 {
        return None;
    }
    let conditioning: Vec<usize> = up.iter().copied().filter(|x| uq.contains(x)).collect();
    Some(VineEdge {
        conditioned: [only_p[0], only_q[0]],
        conditioning,
        endpoints: [p, q],
    })
}

impl RVineStructure {
    pub fn new(m: usize, trees: Vec<Vec<VineEdge>>) -> Result<Self> {
        let s = Self { m, trees };
        s.validate()?;
        Ok(s)
    }

    /// Vine with no trees: every pair copula is independence.
    pub fn empty(m: usize) -> Self {
        Self { m, trees: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of explicitly stored trees.
    pub fn truncation(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Vec<VineEdge>] {
        &self.trees
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    /// Checks edge counts, spanning-tree shape, the proximity condition
    /// and conditioned/conditioning sets.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("invalid vine structure: {msg}")));
        if self.m == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.trees.len() > self.m.saturating_sub(1) {
            return bad(format!("{} trees exceed m - 1 = {}", self.trees.len(), self.m - 1));
        }
        for (ti, tree) in self.trees.iter().enumerate() {
            let t = ti + 1;
            if tree.len() != self.m - t {
                return bad(format!("tree {t} has {} edges, expected {}", tree.len(), self.m - t));
            }
            let n_nodes = if t == 1 { self.m } else { self.trees[ti - 1].len() };
            let mut uf = UnionFind::new(n_nodes);
            for (k, e) in tree.iter().enumerate() {
                let [p, q] = e.endpoints;
                if p >= n_nodes || q >= n_nodes || p == q {
                    return bad(format!("tree {t} edge {k} has invalid endpoints {:?}", e.endpoints));
                }
                if !uf.union(p, q) {
                    return bad(format!("tree {t} contains a cycle at edge {k}"));
                }
                if t == 1 {
                    if e.conditioned != e.endpoints || !e.conditioning.is_empty() {
                        return bad(format!("tree 1 edge {k} must condition on nothing and join its endpoints"));
                    }
                } else {
                    match join_edges(&self.trees[ti - 1], p, q, t - 1) {
                        Some(expect) if expect == *e => {}
                        Some(_) => return bad(format!("tree {t} edge {k} has inconsistent conditioned/conditioning sets")),
                        None => return bad(format!("tree {t} edge {k} violates the proximity condition")),
                    }
                }
            }
        }
        Ok(())
    }

    /// Input slots of every edge in flat (tree-major) order.
    pub(crate) fn inputs(&self) -> Vec<[Input; 2]> {
        let mut out = Vec::with_capacity(self.n_edges());
        let mut offset = 0;
        for (ti, tree) in self.trees.iter().enumerate() {
            for e in tree {
                if ti == 0 {
                    out.push([Input::Var(e.conditioned[0]), Input::Var(e.conditioned[1])]);
                } else {
                    let prev = &self.trees[ti - 1];
                    let side = |edge: usize, var: usize| {
                        let c = prev[edge].conditioned;
                        if c[0] == var {
                            0
                        } else {
                            debug_assert_eq!(c[1], var);
                            1
                        }
                    };
                    let [p, q] = e.endpoints;
                    let base = offset - prev.len();
                    out.push([
                        Input::Edge(base + p, side(p, e.conditioned[0])),
                        Input::Edge(base + q, side(q, e.conditioned[1])),
                    ]);
                }
            }
            offset += tree.len();
        }
        out
    }

    /// Extends the structure to all m - 1 trees. Added trees are spanning
    /// trees of the proximity graph chosen in lexicographic order.
    pub fn complete(&self) -> RVineStructure {
        let mut trees = self.trees.clone();
        if trees.is_empty() && self.m >= 2 {
            trees.push(
                (1..self.m)
                    .map(|j| VineEdge {
                        conditioned: [0, j],
                        conditioning: Vec::new(),
                        endpoints: [0, j],
                    })
                    .collect(),
            );
        }
        while trees.len() < self.m.saturating_sub(1) {
            let t = trees.len();
            let prev = &trees[t - 1];
            let mut cands = Vec::new();
            for p in 0..prev.len() {
                for q in p + 1..prev.len() {
                    if join_edges(prev, p, q, t).is_some() {
                        cands.push((p, q, 0.0));
                    }
                }
            }
            let next: Vec<VineEdge> = maximum_spanning_tree(prev.len(), &cands)
                .into_iter()
                .map(|(p, q)| join_edges(prev, p, q, t).expect("candidate was checked"))
                .collect();
            trees.push(next);
        }
        RVineStructure { m: self.m, trees }
    }

    /// Drops trees above `t`.
    pub fn truncated(&self, t: usize) -> RVineStructure {
        RVineStructure {
            m: self.m,
            trees: self.trees.iter().take(t).cloned().collect(),
        }
    }
}
