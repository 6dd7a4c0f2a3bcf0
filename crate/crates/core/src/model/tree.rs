use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Unordered node pair, normalized so that `.0 < .1`.
pub type Edge = (usize, usize);

fn normalize((u, v): Edge) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Spanning tree on nodes `0..n`. Edges are stored normalized and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc", into = "TreeDoc")]
pub struct UndirectedTree {
    n: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<TreeDoc> for UndirectedTree {
    type Error = Error;

    fn try_from(doc: TreeDoc) -> Result<Self> {
        UndirectedTree::new(doc.n, doc.edges.into_iter().map(|[u, v]| (u, v)).collect())
    }
}

impl From<UndirectedTree> for TreeDoc {
    fn from(t: UndirectedTree) -> Self {
        TreeDoc {
            n: t.n,
            edges: t.edges.into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl UndirectedTree {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotATree("a tree needs at least one node".into()));
        }
        if edges.len() != n - 1 {
            return Err(Error::NotATree(format!(
                "{} edges for {n} nodes, expected {}",
                edges.len(),
                n - 1
            )));
        }
        let mut edges: Vec<Edge> = edges.into_iter().map(normalize).collect();
        edges.sort_unstable();
        let mut uf = UnionFind::new(n);
        for &(u, v) in &edges {
            if v >= n {
                return Err(Error::InvalidNode { node: v, n });
            }
            if u == v {
                return Err(Error::NotATree(format!("self-loop at node {u}")));
            }
            if !uf.union(u, v) {
                return Err(Error::NotATree(format!("edge ({u}, {v}) closes a cycle")));
            }
        }
        Ok(Self { n, edges })
    }

    /// Path `0 - 1 - … - n−1`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    pub fn star(n: usize, center: usize) -> Result<Self> {
        if center >= n {
            return Err(Error::InvalidNode { node: center, n });
        }
        Self::new(n, (0..n).filter(|&v| v != center).map(|v| (center, v)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&normalize((u, v))).is_ok()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Nodes on the unique path from `u` to `v`, both ends included.
    pub fn path_between(&self, u: usize, v: usize) -> Result<Vec<usize>> {
        for node in [u, v] {
            if node >= self.n {
                return Err(Error::InvalidNode { node, n: self.n });
            }
        }
        let rooted = self.rooted_at(v)?;
        let mut path = vec![u];
        let mut cur = u;
        while let Some(p) = rooted.parent(cur) {
            path.push(p);
            cur = p;
        }
        Ok(path)
    }

    pub fn rooted_at(&self, root: usize) -> Result<RootedTree> {
        if root >= self.n {
            return Err(Error::InvalidNode { node: root, n: self.n });
        }
        let adj = self.adjacency();
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(u);
                    queue.push_back(w);
                }
            }
        }
        RootedTree::new(root, parent)
    }

    /// `self ∪ {add} \ {remove}`, if that is again a spanning tree.
    pub fn swapped(&self, remove: Edge, add: Edge) -> Result<Self> {
        let remove = normalize(remove);
        if !self.contains(remove.0, remove.1) {
            return Err(Error::NotATree(format!("edge {remove:?} not in tree")));
        }
        let mut edges: Vec<Edge> = self.edges.iter().copied().filter(|&e| e != remove).collect();
        edges.push(add);
        Self::new(self.n, edges)
    }

    /// Sum of `weight(u, v)` over the tree's edges.
    pub fn weight<W: std::iter::Sum<W>>(&self, mut weight: impl FnMut(usize, usize) -> W) -> W {
        self.edges.iter().map(|&(u, v)| weight(u, v)).sum()
    }
}

/// A tree with a chosen root; every other node has a parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    root: usize,
    parent: Vec<Option<usize>>,
    order: Vec<usize>,
}

impl RootedTree {
    pub fn new(root: usize, parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if root >= n {
            return Err(Error::InvalidNode { node: root, n });
        }
        if parent[root].is_some() {
            return Err(Error::NotATree(format!("root {root} has a parent")));
        }
        for (v, p) in parent.iter().enumerate() {
            match *p {
                None if v != root => {
                    return Err(Error::NotATree(format!("node {v} has no parent and is not the root")))
                }
                Some(p) if p >= n => return Err(Error::InvalidNode { node: p, n }),
                Some(p) if p == v => return Err(Error::Cycle(v)),
                _ => {}
            }
        }
        // Every node must reach the root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::Cycle(start));
                }
            }
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(v);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            queue.extend(children[u].iter().copied());
        }
        Ok(Self { root, parent, order })
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Nodes with every parent before its children (breadth-first).
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn skeleton(&self) -> UndirectedTree {
        let edges = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (p, v)))
            .collect();
        UndirectedTree::new(self.n(), edges).expect("rooted tree skeleton is a tree")
    }
}
