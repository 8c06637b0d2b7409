//! Directed acyclic graphs over schema variables, and arc constraints.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::NetworkSchema;
use crate::error::{Error, Result};

/// A DAG as written in files: variable names and named arcs. Nothing is
/// checked until [`validate_dag`] or [`NamedDag::to_dag`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedDag {
    #[serde(default)]
    pub nodes: Vec<String>,
    pub arcs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DagViolation {
    /// Witness path; first and last entries are equal.
    Cycle { path: Vec<String> },
    UnknownNode { name: String },
    DuplicateArc { parent: String, child: String },
    SelfLoop { name: String },
}

impl fmt::Display for DagViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DagViolation::Cycle { path } => write!(f, "cycle {}", path.join("->")),
            DagViolation::UnknownNode { name } => write!(f, "unknown node {name}"),
            DagViolation::DuplicateArc { parent, child } => {
                write!(f, "duplicate arc {parent}->{child}")
            }
            DagViolation::SelfLoop { name } => write!(f, "self-loop on {name}"),
        }
    }
}

/// Lists every way `dag` breaks the DAG invariants against `schema`.
/// An empty list means the graph is valid.
pub fn validate_dag(dag: &NamedDag, schema: &NetworkSchema) -> Vec<DagViolation> {
    let mut out = Vec::new();
    let mut unknown = BTreeSet::new();
    for n in &dag.nodes {
        if schema.index_of(n).is_none() && unknown.insert(n.clone()) {
            out.push(DagViolation::UnknownNode { name: n.clone() });
        }
    }
    let mut seen = BTreeSet::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); schema.len()];
    for (p, c) in &dag.arcs {
        let mut known = true;
        for name in [p, c] {
            if schema.index_of(name).is_none() {
                known = false;
                if unknown.insert(name.clone()) {
                    out.push(DagViolation::UnknownNode { name: name.clone() });
                }
            }
        }
        if p == c {
            out.push(DagViolation::SelfLoop { name: p.clone() });
            continue;
        }
        if !seen.insert((p.clone(), c.clone())) {
            out.push(DagViolation::DuplicateArc {
                parent: p.clone(),
                child: c.clone(),
            });
            continue;
        }
        if known {
            let (pi, ci) = (schema.index_of(p).unwrap(), schema.index_of(c).unwrap());
            parents[ci].push(pi);
        }
    }
    if let Some(cycle) = find_cycle(&parents) {
        out.push(DagViolation::Cycle {
            path: cycle.iter().map(|&i| schema.name(i).to_owned()).collect(),
        });
    }
    out
}

/// Returns a directed cycle `[a, b, ..., a]` if one exists.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    for ch in &mut children {
        ch.sort_unstable();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        color[root] = 1;
        stack.push((root, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&child) = children[node].get(*next) {
                *next += 1;
                match color[child] {
                    0 => {
                        color[child] = 1;
                        stack.push((child, 0));
                    }
                    1 => {
                        let start = stack.iter().position(|&(v, _)| v == child).unwrap();
                        let mut path: Vec<usize> = stack[start..].iter().map(|&(v, _)| v).collect();
                        path.push(child);
                        return Some(path);
                    }
                    _ => {}
                }
            } else {
                color[node] = 2;
                stack.pop();
            }
        }
    }
    None
}

impl NamedDag {
    pub fn new(arcs: impl IntoIterator<Item = (impl Into<String>, impl Into<String>)>) -> Self {
        Self {
            nodes: Vec::new(),
            arcs: arcs.into_iter().map(|(p, c)| (p.into(), c.into())).collect(),
        }
    }

    pub fn to_dag(&self, schema: &NetworkSchema) -> Result<Dag> {
        let violations = validate_dag(self, schema);
        if !violations.is_empty() {
            return Err(Error::InvalidDag(violations));
        }
        let mut dag = Dag::empty(schema.len());
        for (p, c) in &self.arcs {
            let (p, c) = (schema.index_of(p).unwrap(), schema.index_of(c).unwrap());
            dag.add_arc(p, c)?;
        }
        Ok(dag)
    }
}

/// Validated DAG over variable indices `0..n`. Parent lists are kept sorted
/// ascending, which fixes the CPT parent-configuration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(n: usize) -> Self {
        Self {
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        }
    }

    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut dag = Self::empty(n);
        for (p, c) in arcs {
            dag.add_arc(p, c)?;
        }
        Ok(dag)
    }

    /// Builds a DAG from parent lists indexed by child.
    pub fn from_parents(parents: &[Vec<usize>]) -> Result<Self> {
        let arcs = parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)));
        Self::from_arcs(parents.len(), arcs)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn has_arc(&self, parent: usize, child: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All arcs sorted by (parent, child).
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut arcs: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        arcs.sort_unstable();
        arcs
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.len() {
            return Err(Error::contract(format!("node index {node} out of range")));
        }
        Ok(())
    }

    /// Is there a directed path `from ⇝ to` (length ≥ 0)?
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    pub fn add_arc(&mut self, parent: usize, child: usize) -> Result<()> {
        self.check_node(parent)?;
        self.check_node(child)?;
        if parent == child {
            return Err(Error::contract(format!("self-loop on node {parent}")));
        }
        if self.has_arc(parent, child) {
            return Err(Error::contract(format!("duplicate arc {parent}->{child}")));
        }
        if self.has_path(child, parent) {
            return Err(Error::contract(format!("arc {parent}->{child} closes a cycle")));
        }
        insert_sorted(&mut self.parents[child], parent);
        insert_sorted(&mut self.children[parent], child);
        Ok(())
    }

    pub fn remove_arc(&mut self, parent: usize, child: usize) -> Result<()> {
        self.check_node(parent)?;
        self.check_node(child)?;
        let pos = self.parents[child]
            .binary_search(&parent)
            .map_err(|_| Error::contract(format!("no arc {parent}->{child}")))?;
        self.parents[child].remove(pos);
        let pos = self.children[parent].binary_search(&child).unwrap();
        self.children[parent].remove(pos);
        Ok(())
    }

    /// Replaces `parent → child` by `child → parent`.
    pub fn reverse_arc(&mut self, parent: usize, child: usize) -> Result<()> {
        self.remove_arc(parent, child)?;
        if let Err(e) = self.add_arc(child, parent) {
            self.add_arc(parent, child).expect("restoring a removed arc");
            return Err(e);
        }
        Ok(())
    }

    /// Kahn's algorithm; ties resolved by smallest index.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// Marks every node that is in `seeds` or an ancestor of one.
    pub fn ancestral_closure(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.into_iter().collect();
        for &s in &stack {
            mark[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !mark[p] {
                    mark[p] = true;
                    stack.push(p);
                }
            }
        }
        mark
    }

    pub fn to_named(&self, schema: &NetworkSchema) -> NamedDag {
        NamedDag {
            nodes: schema.variables().iter().map(|v| v.name().to_owned()).collect(),
            arcs: self
                .arcs()
                .into_iter()
                .map(|(p, c)| (schema.name(p).to_owned(), schema.name(c).to_owned()))
                .collect(),
        }
    }

    /// Structural Hamming distance: missing + extra + reversed arcs.
    pub fn shd(&self, other: &Dag) -> usize {
        let a: BTreeSet<_> = self.arcs().into_iter().collect();
        let b: BTreeSet<_> = other.arcs().into_iter().collect();
        let mut d = 0;
        for &(p, c) in &a {
            if !b.contains(&(p, c)) {
                // reversed arcs count once, from this side
                d += 1;
            }
        }
        for &(p, c) in &b {
            if !a.contains(&(p, c)) && !a.contains(&(c, p)) {
                d += 1;
            }
        }
        d
    }

    /// Undirected edge set with endpoints ordered (min, max).
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.arcs()
            .into_iter()
            .map(|(p, c)| (p.min(c), p.max(c)))
            .collect()
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    let pos = v.binary_search(&x).unwrap_or_else(|p| p);
    v.insert(pos, x);
}

/// Arcs the search must keep and arcs it must never add.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArcConstraints {
    required: BTreeSet<(usize, usize)>,
    forbidden: BTreeSet<(usize, usize)>,
}

/// File form of [`ArcConstraints`]. `"*"` in a forbidden arc matches any variable.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NamedConstraints {
    #[serde(default)]
    pub required: Vec<(String, String)>,
    #[serde(default)]
    pub forbidden: Vec<(String, String)>,
}

impl ArcConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(
        n: usize,
        required: impl IntoIterator<Item = (usize, usize)>,
        forbidden: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let required: BTreeSet<_> = required.into_iter().collect();
        let forbidden: BTreeSet<_> = forbidden.into_iter().collect();
        for &(p, c) in required.iter().chain(&forbidden) {
            if p >= n || c >= n {
                return Err(Error::contract(format!("constraint arc {p}->{c} out of range")));
            }
        }
        if let Some(&(p, c)) = required.intersection(&forbidden).next() {
            return Err(Error::contract(format!(
                "arc {p}->{c} is both required and forbidden"
            )));
        }
        // required arcs alone must be acyclic
        Dag::from_arcs(n, required.iter().copied())
            .map_err(|e| Error::contract(format!("required arcs are not acyclic: {e}")))?;
        Ok(Self {
            required,
            forbidden,
        })
    }

    pub fn from_named(named: &NamedConstraints, schema: &NetworkSchema) -> Result<Self> {
        let resolve = |name: &str| -> Result<Vec<usize>> {
            if name == "*" {
                Ok((0..schema.len()).collect())
            } else {
                Ok(vec![schema.require(name)?])
            }
        };
        let mut required = Vec::new();
        for (p, c) in &named.required {
            required.push((schema.require(p)?, schema.require(c)?));
        }
        let mut forbidden = Vec::new();
        for (p, c) in &named.forbidden {
            for &pi in &resolve(p)? {
                for &ci in &resolve(c)? {
                    if pi != ci {
                        forbidden.push((pi, ci));
                    }
                }
            }
        }
        Self::new(schema.len(), required, forbidden)
    }

    pub fn is_required(&self, parent: usize, child: usize) -> bool {
        self.required.contains(&(parent, child))
    }

    pub fn is_forbidden(&self, parent: usize, child: usize) -> bool {
        self.forbidden.contains(&(parent, child))
    }

    pub fn required(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.required.iter().copied()
    }

    pub fn forbidden(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forbidden.iter().copied()
    }

    /// Describes the first way `dag` breaks these constraints, if any.
    pub fn check(&self, dag: &Dag) -> Option<String> {
        if let Some(&(p, c)) = self.required.iter().find(|&&(p, c)| !dag.has_arc(p, c)) {
            return Some(format!("required arc {p}->{c} is missing"));
        }
        if let Some(&(p, c)) = self.forbidden.iter().find(|&&(p, c)| dag.has_arc(p, c)) {
            return Some(format!("forbidden arc {p}->{c} is present"));
        }
        None
    }
}
