use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

use super::{Adg, AdgError};

/// How a path step relates to the direction of the edge it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Walked from `src` to `dst`.
    Forward,
    /// Walked from `dst` to `src`.
    Backward,
    Undirected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub edge_index: usize,
    pub from: String,
    pub to: String,
    pub label: String,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationPath {
    pub steps: Vec<PathStep>,
}

impl RelationPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The step leaving the starting node.
    pub fn first(&self) -> Option<&PathStep> {
        self.steps.first()
    }

    /// Node ids visited, starting node included.
    pub fn nodes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.steps.iter().map(|s| s.from.as_str()).collect();
        if let Some(last) = self.steps.last() {
            out.push(&last.to);
        }
        out
    }
}

/// Shortest undirected path from `from` to `to`.
///
/// Among equally short paths the one with the lexicographically smallest
/// node-id sequence wins; parallel edges between the same two nodes are
/// chosen by label, then edge index. Returns `None` when disconnected and an
/// empty path when `from == to`.
pub fn relation_between(adg: &Adg, from: &str, to: &str) -> Result<Option<RelationPath>, AdgError> {
    for id in [from, to] {
        if adg.node(id).is_none() {
            return Err(AdgError::UnknownNode(id.to_string()));
        }
    }
    if from == to {
        return Ok(Some(RelationPath::default()));
    }

    // neighbor -> candidate edge indices, per node; BTreeMap keeps ids ordered
    let mut adjacency: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, e) in adg.edges.iter().enumerate() {
        if e.src == e.dst || adg.node(&e.src).is_none() || adg.node(&e.dst).is_none() {
            continue;
        }
        adjacency.entry(&e.src).or_default().entry(&e.dst).or_default().push(i);
        adjacency.entry(&e.dst).or_default().entry(&e.src).or_default().push(i);
    }

    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    dist.insert(to, 0);
    let mut queue = VecDeque::from([to]);
    while let Some(cur) = queue.pop_front() {
        let d = dist[cur];
        for &next in adjacency.get(cur).into_iter().flat_map(|m| m.keys()) {
            if !dist.contains_key(next) {
                dist.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    if !dist.contains_key(from) {
        return Ok(None);
    }

    let mut steps = Vec::new();
    let mut cur = from;
    while cur != to {
        let want = dist[cur] - 1;
        let (&next, edges) =
            adjacency[cur].iter().find(|(n, _)| dist.get(*n) == Some(&want)).expect("bfs layer has a predecessor");
        let edge_index = *edges
            .iter()
            .min_by(|&&a, &&b| (&adg.edges[a].label, a).cmp(&(&adg.edges[b].label, b)))
            .expect("adjacent nodes share an edge");
        let edge = &adg.edges[edge_index];
        let orientation = if !edge.directed {
            Orientation::Undirected
        } else if edge.src == cur {
            Orientation::Forward
        } else {
            Orientation::Backward
        };
        steps.push(PathStep {
            edge_index,
            from: cur.to_string(),
            to: next.to_string(),
            label: edge.label.clone(),
            orientation,
        });
        cur = next;
    }
    Ok(Some(RelationPath { steps }))
}
