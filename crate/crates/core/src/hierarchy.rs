//! Rooted trees shared by frailty trees, hierarchical d-norm generators and
//! nested stable tail dependence functions.
//!
//! A [`HierarchyTree`] owns a list of nodes (id, parent, opaque parameters)
//! and an explicit leaf order. Leaf `leaf_order[j]` is coordinate `j`
//! (zero-based) of the model; nothing is sorted implicitly, so two trees over
//! the same coordinates may group them differently.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Parameters attached to a node. Interpreted by the consuming module.
pub type Params = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: Params,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, parent: Option<&str>, params: Params) -> Self {
        NodeRecord {
            id: id.into(),
            parent: parent.map(str::to_owned),
            params,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    nodes: Vec<NodeRecord>,
    leaf_order: Vec<String>,
}

/// Validated rooted tree with an ordered set of leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct HierarchyTree {
    nodes: Vec<NodeRecord>,
    leaf_order: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    leaf_nodes: Vec<usize>,
    coordinate: Vec<Option<usize>>,
}

impl TryFrom<RawTree> for HierarchyTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        HierarchyTree::new(raw.nodes, raw.leaf_order)
    }
}

impl From<HierarchyTree> for RawTree {
    fn from(tree: HierarchyTree) -> Self {
        RawTree {
            nodes: tree.nodes,
            leaf_order: tree.leaf_order,
        }
    }
}

impl HierarchyTree {
    pub fn new(nodes: Vec<NodeRecord>, leaf_order: Vec<String>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::structure("tree has no nodes"));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(Error::structure(format!("duplicate node id '{}'", n.id)));
            }
        }

        let mut parent = vec![None; nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        let mut roots = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            match &n.parent {
                None => roots.push(i),
                Some(p) => {
                    let &pi = index.get(p.as_str()).ok_or_else(|| {
                        Error::structure(format!("node '{}' has unknown parent '{p}'", n.id))
                    })?;
                    if pi == i {
                        return Err(Error::structure(format!("node '{}' is its own parent", n.id)));
                    }
                    parent[i] = Some(pi);
                    children[pi].push(i);
                }
            }
        }
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::structure("tree has no root")),
            _ => return Err(Error::structure(format!("tree has {} roots", roots.len()))),
        };

        // reachability from the root rules out cycles
        let mut seen = vec![false; nodes.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                if seen[c] {
                    return Err(Error::structure("cycle detected"));
                }
                seen[c] = true;
                queue.push_back(c);
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::structure(format!(
                "node '{}' is not reachable from the root",
                nodes[i].id
            )));
        }
        if children[root].is_empty() {
            return Err(Error::structure("root has no children"));
        }

        let leaf_count = children.iter().filter(|c| c.is_empty()).count();
        if leaf_order.len() != leaf_count {
            return Err(Error::structure(format!(
                "leaf_order lists {} ids but the tree has {leaf_count} leaves",
                leaf_order.len()
            )));
        }
        let mut leaf_nodes = Vec::with_capacity(leaf_count);
        let mut coordinate = vec![None; nodes.len()];
        for (j, id) in leaf_order.iter().enumerate() {
            let &i = index
                .get(id.as_str())
                .ok_or_else(|| Error::structure(format!("leaf_order names unknown node '{id}'")))?;
            if !children[i].is_empty() {
                return Err(Error::structure(format!("leaf_order names internal node '{id}'")));
            }
            if coordinate[i].is_some() {
                return Err(Error::structure(format!("leaf '{id}' listed twice")));
            }
            coordinate[i] = Some(j);
            leaf_nodes.push(i);
        }

        Ok(HierarchyTree {
            nodes,
            leaf_order,
            parent,
            children,
            root,
            leaf_nodes,
            coordinate,
        })
    }

    /// Root with `d` leaf children.
    pub fn flat(d: usize, root_params: Params) -> Result<Self> {
        Self::two_level_with_root_leaves(&[], d, root_params, &[])
    }

    /// Root whose children are sectors of the given sizes; sector `s` holds
    /// the next `sizes[s]` coordinates.
    pub fn two_level(sizes: &[usize], root_params: Params, sector_params: &[Params]) -> Result<Self> {
        Self::two_level_with_root_leaves(sizes, 0, root_params, sector_params)
    }

    fn two_level_with_root_leaves(
        sizes: &[usize],
        direct: usize,
        root_params: Params,
        sector_params: &[Params],
    ) -> Result<Self> {
        if sector_params.len() != sizes.len() {
            return Err(Error::structure("one parameter record per sector is required"));
        }
        let mut nodes = vec![NodeRecord::new("root", None, root_params)];
        let mut order = Vec::new();
        let mut leaf = 0;
        for _ in 0..direct {
            leaf += 1;
            let id = format!("leaf{leaf}");
            nodes.push(NodeRecord::new(id.clone(), Some("root"), Params::new()));
            order.push(id);
        }
        for (s, (&size, params)) in sizes.iter().zip(sector_params).enumerate() {
            let sid = format!("sector{}", s + 1);
            nodes.push(NodeRecord::new(sid.clone(), Some("root"), params.clone()));
            for _ in 0..size {
                leaf += 1;
                let id = format!("leaf{leaf}");
                nodes.push(NodeRecord::new(id.clone(), Some(&sid), Params::new()));
                order.push(id);
            }
        }
        HierarchyTree::new(nodes, order)
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Number of leaves, i.e. the model dimension.
    pub fn dimension(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &NodeRecord {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn leaf_order(&self) -> &[String] {
        &self.leaf_order
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.children[i].is_empty()
    }

    /// Node index of coordinate `j`.
    pub fn leaf_node(&self, j: usize) -> Result<usize> {
        self.leaf_nodes.get(j).copied().ok_or(Error::Index {
            index: j,
            dimension: self.dimension(),
        })
    }

    /// Coordinate of a leaf node, `None` for internal nodes.
    pub fn coordinate_of(&self, node: usize) -> Option<usize> {
        self.coordinate[node]
    }

    /// Node indices from the root down to the leaf of coordinate `j`,
    /// both ends included.
    pub fn path_to_leaf(&self, j: usize) -> Result<Vec<usize>> {
        let mut v = self.leaf_node(j)?;
        let mut path = vec![v];
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Same as [`path_to_leaf`](Self::path_to_leaf) but with node ids.
    pub fn path_ids(&self, j: usize) -> Result<Vec<&str>> {
        Ok(self
            .path_to_leaf(j)?
            .into_iter()
            .map(|i| self.nodes[i].id.as_str())
            .collect())
    }

    /// Internal nodes in breadth-first order starting at the root.
    pub fn internal_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([self.root]);
        while let Some(v) = queue.pop_front() {
            if self.is_leaf(v) {
                continue;
            }
            out.push(v);
            queue.extend(self.children[v].iter().copied());
        }
        out
    }

    /// Deepest internal ancestor (the parent) of each coordinate's leaf.
    pub fn leaf_parents(&self) -> Vec<usize> {
        self.leaf_nodes
            .iter()
            .map(|&l| self.parent[l].expect("leaves are never the root"))
            .collect()
    }

    /// Coordinates below node `i`, in coordinate order.
    pub fn coordinates_below(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            match self.coordinate[v] {
                Some(j) => out.push(j),
                None => stack.extend(self.children[v].iter().copied()),
            }
        }
        out.sort_unstable();
        out
    }

    /// Lowest common ancestor of two distinct coordinates.
    pub fn lowest_common_ancestor(&self, i: usize, j: usize) -> Result<usize> {
        let pi = self.path_to_leaf(i)?;
        let pj = self.path_to_leaf(j)?;
        let common = pi.iter().zip(&pj).take_while(|(a, b)| a == b).count();
        Ok(pi[common - 1])
    }

    /// Sector sizes of a root → sectors → leaves tree, in leaf order.
    ///
    /// Every child of the root must be an internal node whose children are all
    /// leaves, and the leaves of each sector must be contiguous in leaf order.
    pub fn validate_two_level(&self) -> Result<Vec<usize>> {
        for &s in &self.children[self.root] {
            if self.is_leaf(s) {
                return Err(Error::structure(format!(
                    "leaf '{}' hangs directly off the root; expected two levels",
                    self.nodes[s].id
                )));
            }
            if let Some(&deep) = self.children[s].iter().find(|&&c| !self.is_leaf(c)) {
                return Err(Error::structure(format!(
                    "node '{}' below sector '{}' is internal; tree is deeper than two levels",
                    self.nodes[deep].id, self.nodes[s].id
                )));
            }
        }
        let parents = self.leaf_parents();
        let mut sizes = Vec::new();
        let mut seen = Vec::new();
        for (j, &p) in parents.iter().enumerate() {
            if j > 0 && parents[j - 1] == p {
                *sizes.last_mut().expect("non-empty") += 1;
            } else {
                if seen.contains(&p) {
                    return Err(Error::structure(format!(
                        "sector '{}' is not contiguous in leaf order",
                        self.nodes[p].id
                    )));
                }
                seen.push(p);
                sizes.push(1);
            }
        }
        Ok(sizes)
    }

    /// Numeric parameter `key` of node `i`.
    pub fn param_f64(&self, i: usize, key: &str) -> Option<f64> {
        self.nodes[i].params.get(key).and_then(Value::as_f64)
    }
}

/// Shorthand for building a parameter record from `(key, number)` pairs.
pub fn params(entries: &[(&str, f64)]) -> Params {
    entries
        .iter()
        .map(|(k, v)| ((*k).to_owned(), Value::from(*v)))
        .collect()
}
