use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::QueryGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    /// Index into `QueryGraph::nodes`.
    pub graph_node: usize,
    /// Triple linking this node to its parent; `None` for the root.
    pub via: Option<usize>,
    /// Tree node indices, in ascending order of their linking triple.
    pub children: Vec<usize>,
    /// Set when this occurrence re-enters an already placed graph node.
    pub duplicate: bool,
}

/// A spanning tree of a query graph rooted at the question node.
///
/// Built breadth-first from the question node, visiting incident triples in
/// ascending index. A triple that reaches an already placed node creates a
/// duplicate leaf for it, so every triple is exactly one tree edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingTree {
    pub nodes: Vec<TreeNode>,
}

impl EncodingTree {
    /// `g` must have a question node and in-range triple endpoints.
    pub fn build(g: &QueryGraph) -> Self {
        let root = g.question_node().unwrap_or(0);
        let inc = g.incidence();
        let mut used = vec![false; g.triples.len()];
        let mut placed = vec![false; g.nodes.len()];
        let mut nodes = vec![TreeNode {
            graph_node: root,
            via: None,
            children: Vec::new(),
            duplicate: false,
        }];
        placed[root] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(ti) = queue.pop_front() {
            let gn = nodes[ti].graph_node;
            for &tr in &inc[gn] {
                if used[tr] {
                    continue;
                }
                used[tr] = true;
                let t = &g.triples[tr];
                let other = if t.subject == gn { t.object } else { t.subject };
                let duplicate = placed[other];
                placed[other] = true;
                let child = nodes.len();
                nodes.push(TreeNode {
                    graph_node: other,
                    via: Some(tr),
                    children: Vec::new(),
                    duplicate,
                });
                nodes[ti].children.push(child);
                if !duplicate {
                    queue.push_back(child);
                }
            }
        }
        EncodingTree { nodes }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tree node indices with every child before its parent.
    pub fn post_order(&self) -> Vec<usize> {
        // Breadth-first construction puts parents before children.
        (0..self.nodes.len()).rev().collect()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.nodes.len()];
        for i in 0..self.nodes.len() {
            for &c in &self.nodes[i].children {
                d[c] = d[i] + 1;
            }
        }
        d.into_iter().max().unwrap_or(0)
    }

    /// Tree node indices of occurrences of `graph_node`.
    pub fn occurrences(&self, graph_node: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].graph_node == graph_node)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{star_wars_example, GraphBuilder};

    #[test]
    fn chain_is_already_a_tree() {
        let g = GraphBuilder::new()
            .question("x")
            .triple("z", "directed_by", "x")
            .triple("E", "sequel", "z")
            .build();
        let t = EncodingTree::build(&g);
        let x = g.node_index("x").unwrap();
        let z = g.node_index("z").unwrap();
        let e = g.node_index("E").unwrap();
        assert_eq!(t.nodes[0].graph_node, x);
        assert_eq!(t.nodes[t.nodes[0].children[0]].graph_node, z);
        let zc = &t.nodes[t.nodes[0].children[0]].children;
        assert_eq!(t.nodes[zc[0]].graph_node, e);
        assert!(t.nodes.iter().all(|n| !n.duplicate));
    }

    #[test]
    fn diamond_duplicates_shared_node() {
        let g = GraphBuilder::new()
            .triple("x", "a", "y")
            .triple("x", "b", "z")
            .triple("y", "c", "w")
            .triple("z", "d", "w")
            .build();
        let t = EncodingTree::build(&g);
        let w = g.node_index("w").unwrap();
        let occ = t.occurrences(w);
        assert_eq!(occ.len(), 2);
        let parent_of = |c: usize| t.nodes.iter().position(|n| n.children.contains(&c)).unwrap();
        let parents: Vec<usize> = occ.iter().map(|&o| t.nodes[parent_of(o)].graph_node).collect();
        assert_eq!(parents, vec![g.node_index("y").unwrap(), g.node_index("z").unwrap()]);
        assert!(t.nodes[occ[1]].duplicate && t.nodes[occ[1]].children.is_empty());
    }

    #[test]
    fn example_tree_has_depth_three() {
        let g = star_wars_example();
        let t = EncodingTree::build(&g);
        assert_eq!(t.nodes[0].graph_node, g.node_index("x").unwrap());
        assert_eq!(t.depth(), 3);
        assert_eq!(t.len(), g.triples.len() + 1);
    }
}
