//! Heavy path decomposition of the `E1`/`E2` structure.
//!
//! At every node the heavy child is the leftmost child of maximal subtree
//! size. Paths are numbered in discovery order, so path 0 holds the root,
//! and every path is discovered after the path it hangs off.

use serde::{Deserialize, Serialize};

use crate::tree::{LabeledTree, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathId(pub u32);

impl PathId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeavyPathDecomposition {
    /// Top-down node sequences; each ends at a leaf.
    paths: Vec<Vec<NodeId>>,
    path_of: Vec<PathId>,
    /// Position of a node in its path, counted from the top.
    pos: Vec<u32>,
    subtree_size: Vec<u32>,
    /// The node a path's head is cut off from.
    attach: Vec<Option<NodeId>>,
    /// Dependencies first.
    topo_order: Vec<PathId>,
}

impl HeavyPathDecomposition {
    pub fn new(tree: &LabeledTree) -> Self {
        let n = tree.len();
        let subtree_size: Vec<u32> = tree.nodes().map(|u| tree.struct_size(u) as u32).collect();
        let mut paths = Vec::new();
        let mut path_of = vec![PathId(0); n];
        let mut pos = vec![0u32; n];
        let mut attach = Vec::new();
        let mut heads = vec![(tree.root(), None)];
        while let Some((head, from)) = heads.pop() {
            let pid = PathId(paths.len() as u32);
            let mut path = Vec::new();
            let mut u = Some(head);
            while let Some(x) = u {
                path_of[x.index()] = pid;
                pos[x.index()] = path.len() as u32;
                path.push(x);
                let (h, c) = split(tree, &subtree_size, x);
                if let Some(c) = c {
                    heads.push((c, Some(x)));
                }
                u = h;
            }
            paths.push(path);
            attach.push(from);
        }
        let topo_order = (0..paths.len() as u32).rev().map(PathId).collect();
        HeavyPathDecomposition { paths, path_of, pos, subtree_size, attach, topo_order }
    }

    pub fn paths(&self) -> &[Vec<NodeId>] {
        &self.paths
    }

    pub fn path(&self, p: PathId) -> &[NodeId] {
        &self.paths[p.index()]
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn path_of(&self, u: NodeId) -> PathId {
        self.path_of[u.index()]
    }

    pub fn pos(&self, u: NodeId) -> usize {
        self.pos[u.index()] as usize
    }

    pub fn subtree_size(&self, u: NodeId) -> usize {
        self.subtree_size[u.index()] as usize
    }

    /// The node on the parent path from which path `p` is cut off.
    pub fn attach(&self, p: PathId) -> Option<NodeId> {
        self.attach[p.index()]
    }

    pub fn topo_order(&self) -> &[PathId] {
        &self.topo_order
    }

    /// Position of `p` in [`Self::topo_order`].
    pub fn topo_rank(&self, p: PathId) -> usize {
        self.paths.len() - 1 - p.index()
    }

    pub fn heavy_child(&self, tree: &LabeledTree, u: NodeId) -> Option<NodeId> {
        split(tree, &self.subtree_size, u).0
    }

    /// The child of `u` that is not on `u`'s heavy path.
    pub fn cutoff_child(&self, tree: &LabeledTree, u: NodeId) -> Option<NodeId> {
        split(tree, &self.subtree_size, u).1
    }

    /// Number of distinct heavy paths met from the root down to `u`.
    pub fn root_path_intersections(&self, u: NodeId) -> usize {
        let mut p = self.path_of(u);
        let mut count = 1;
        while let Some(a) = self.attach(p) {
            p = self.path_of(a);
            count += 1;
        }
        count
    }
}

/// (heavy child, cut-off child) of `u`.
fn split(tree: &LabeledTree, size: &[u32], u: NodeId) -> (Option<NodeId>, Option<NodeId>) {
    match (tree.e1(u), tree.e2(u)) {
        (Some(a), Some(b)) => {
            if size[a.index()] >= size[b.index()] {
                (Some(a), Some(b))
            } else {
                (Some(b), Some(a))
            }
        }
        (a, b) => (a.or(b), None),
    }
}
