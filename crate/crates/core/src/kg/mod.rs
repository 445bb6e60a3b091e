//! Query graphs: relation triples over question, variable and terminal nodes.

mod matcher;
mod tree;

pub use matcher::{find_pseudo_pool, is_pseudo_subquestion, is_subquestion, isomorphism};
pub use tree::{EncodingTree, TreeNode};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRole {
    Question,
    Variable,
    Terminal,
}

impl NodeRole {
    /// Row of the role embedding table.
    pub fn index(self) -> usize {
        match self {
            NodeRole::Question => 0,
            NodeRole::Variable => 1,
            NodeRole::Terminal => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Question => "question",
            NodeRole::Variable => "variable",
            NodeRole::Terminal => "terminal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "question" => Some(NodeRole::Question),
            "variable" => Some(NodeRole::Variable),
            "terminal" => Some(NodeRole::Terminal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    /// Variable label, or the entity identifier for terminals.
    pub id: String,
    pub role: NodeRole,
    pub entity_type: String,
    pub type_name: Vec<String>,
}

/// The entity a terminal endpoint of a triple is bound to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grounding {
    pub node: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: usize,
    pub predicate: String,
    pub predicate_name: Vec<String>,
    pub inverse_name: Vec<String>,
    pub object: usize,
    pub grounded: Option<Grounding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QueryGraph {
    pub nodes: Vec<Node>,
    pub triples: Vec<Triple>,
}

/// A broken [`QueryGraph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoTriples,
    NoQuestionNode,
    MultipleQuestionNodes,
    DuplicateNodeId(String),
    NodeOutOfRange { triple: usize },
    TwoGroundedEntities { triple: usize },
    MissingGrounding { triple: usize },
    BadGrounding { triple: usize },
    EmptyName { triple: usize },
    EmptyTypeName { node: usize },
    Disconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTriples => write!(f, "graph has no triples"),
            Violation::NoQuestionNode => write!(f, "no question node"),
            Violation::MultipleQuestionNodes => write!(f, "multiple question nodes"),
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id {id}"),
            Violation::NodeOutOfRange { triple } => {
                write!(f, "triple {triple} references an unknown node")
            }
            Violation::TwoGroundedEntities { triple } => {
                write!(f, "triple {triple} has two grounded entities")
            }
            Violation::MissingGrounding { triple } => {
                write!(f, "triple {triple} has a terminal endpoint but no grounding")
            }
            Violation::BadGrounding { triple } => {
                write!(f, "triple {triple} grounding does not name its terminal endpoint")
            }
            Violation::EmptyName { triple } => write!(f, "triple {triple} has an empty name"),
            Violation::EmptyTypeName { node } => write!(f, "node {node} has an empty type name"),
            Violation::Disconnected => write!(f, "graph is not connected"),
        }
    }
}

impl QueryGraph {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        self.triples.len() > 1
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn question_node(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == NodeRole::Question)
    }

    /// Indices of triples that carry a grounded entity, ascending.
    pub fn grounded_triples(&self) -> Vec<usize> {
        (0..self.triples.len())
            .filter(|&i| self.triples[i].grounded.is_some())
            .collect()
    }

    /// Distinct forward predicate ids.
    pub fn predicates(&self) -> BTreeSet<&str> {
        self.triples.iter().map(|t| t.predicate.as_str()).collect()
    }

    /// Every violated invariant, in a fixed order; empty for a valid graph.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.triples.is_empty() {
            out.push(Violation::NoTriples);
        }
        match self.nodes.iter().filter(|n| n.role == NodeRole::Question).count() {
            0 => out.push(Violation::NoQuestionNode),
            1 => {}
            _ => out.push(Violation::MultipleQuestionNodes),
        }
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                out.push(Violation::DuplicateNodeId(n.id.clone()));
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.type_name.is_empty() {
                out.push(Violation::EmptyTypeName { node: i });
            }
        }
        let mut in_range = true;
        for (i, t) in self.triples.iter().enumerate() {
            if t.subject >= self.nodes.len() || t.object >= self.nodes.len() {
                out.push(Violation::NodeOutOfRange { triple: i });
                in_range = false;
                continue;
            }
            let terminal = |n: usize| self.nodes[n].role == NodeRole::Terminal;
            match (terminal(t.subject), terminal(t.object), &t.grounded) {
                (true, true, _) => out.push(Violation::TwoGroundedEntities { triple: i }),
                (false, false, Some(_)) => out.push(Violation::BadGrounding { triple: i }),
                (false, false, None) => {}
                (_, _, None) => out.push(Violation::MissingGrounding { triple: i }),
                (s, _, Some(gr)) => {
                    let end = if s { t.subject } else { t.object };
                    if gr.node != end || gr.name.trim().is_empty() {
                        out.push(Violation::BadGrounding { triple: i });
                    }
                }
            }
            if t.predicate_name.is_empty() || t.inverse_name.is_empty() || t.predicate.is_empty() {
                out.push(Violation::EmptyName { triple: i });
            }
        }
        if in_range && !self.nodes.is_empty() && !self.is_connected() {
            out.push(Violation::Disconnected);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(Error::Data(msgs.join("; ")))
        }
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for t in &self.triples {
            adj[t.subject].push(t.object);
            adj[t.object].push(t.subject);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Incident triple indices per node, ascending.
    pub(crate) fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (i, t) in self.triples.iter().enumerate() {
            inc[t.subject].push(i);
            if t.object != t.subject {
                inc[t.object].push(i);
            }
        }
        inc
    }
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| c == '_' || c == '.' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Terse construction of graphs, deriving names from identifiers.
///
/// Node ids starting with an uppercase letter become terminals; the first
/// lowercase node added is the question node unless set otherwise.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    graph: QueryGraph,
    ids: BTreeMap<String, usize>,
    question: Option<String>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks `id` as the question node.
    pub fn question(mut self, id: &str) -> Self {
        self.question = Some(id.into());
        self
    }

    /// Adds a node with an explicit role and entity type.
    pub fn node(mut self, id: &str, role: NodeRole, entity_type: &str) -> Self {
        self.add_node(id, Some(role), entity_type);
        self
    }

    fn add_node(&mut self, id: &str, role: Option<NodeRole>, entity_type: &str) -> usize {
        if let Some(&i) = self.ids.get(id) {
            return i;
        }
        let role = role.unwrap_or_else(|| {
            if id.chars().next().is_some_and(|c| c.is_uppercase()) {
                NodeRole::Terminal
            } else if self.question.as_deref() == Some(id)
                || (self.question.is_none()
                    && !self.graph.nodes.iter().any(|n| n.role == NodeRole::Question))
            {
                NodeRole::Question
            } else {
                NodeRole::Variable
            }
        });
        let i = self.graph.nodes.len();
        let ty = if entity_type.is_empty() { "thing" } else { entity_type };
        self.graph.nodes.push(Node {
            id: id.into(),
            role,
            entity_type: ty.into(),
            type_name: words(ty),
        });
        self.ids.insert(id.into(), i);
        i
    }

    /// Adds a triple; unknown endpoints are created with default roles.
    pub fn triple(mut self, s: &str, p: &str, o: &str) -> Self {
        let si = self.add_node(s, None, "");
        let oi = self.add_node(o, None, "");
        let grounded = [si, oi]
            .into_iter()
            .find(|&n| self.graph.nodes[n].role == NodeRole::Terminal)
            .map(|n| Grounding {
                node: n,
                name: display_name(&self.graph.nodes[n].id),
            });
        let mut pname = words(p);
        if pname.is_empty() {
            pname.push(p.to_lowercase());
        }
        let mut inv = pname.clone();
        inv.insert(0, "inverse".into());
        self.graph.triples.push(Triple {
            subject: si,
            predicate: p.into(),
            predicate_name: pname,
            inverse_name: inv,
            object: oi,
            grounded,
        });
        self
    }

    pub fn build(self) -> QueryGraph {
        self.graph
    }
}

/// "LeiaOrgana" → "Leia Organa".
fn display_name(id: &str) -> String {
    let mut out = String::new();
    for (i, c) in id.chars().enumerate() {
        if i > 0 && c.is_uppercase() {
            out.push(' ');
        }
        out.push(if c == '_' { ' ' } else { c });
    }
    out
}

/// The complex query graph of the running Star Wars example: who played a
/// film character whose child is Leia Organa and who got an award nomination.
pub fn star_wars_example() -> QueryGraph {
    GraphBuilder::new()
        .question("x")
        .triple("x", "award_nomination", "c")
        .triple("c", "award", "Award")
        .triple("x", "film", "z")
        .triple("z", "character", "y")
        .triple("y", "children", "LeiaOrgana")
        .triple("y", "gender", "Female")
        .build()
}
