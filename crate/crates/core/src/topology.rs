//! Kinematic graph: limbs, spanning trees and fundamental cycles.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Vertex id of the ground body.
pub const GROUND: usize = 0;

/// A joint connecting bodies `a` and `b`.
///
/// For tree joints the direction is fixed by the spanning tree. For a cut joint
/// `a` is the body `k` and `b` the body `r` of the cut-joint frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: usize,
    pub a: usize,
    pub b: usize,
    pub dof: usize,
}

impl Edge {
    pub fn new(id: usize, a: usize, b: usize, dof: usize) -> Self {
        Self { id, a, b, dof }
    }

    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

#[derive(Clone, Debug)]
pub struct MechanismGraph {
    pub vertices: Vec<usize>,
    pub edges: Vec<Edge>,
    pub platform: usize,
}

impl MechanismGraph {
    pub fn new(vertices: Vec<usize>, edges: Vec<Edge>, platform: usize) -> Result<Self> {
        let vset: BTreeSet<usize> = vertices.iter().copied().collect();
        if vset.len() != vertices.len() {
            return Err(Error::Topology("duplicate vertex id".into()));
        }
        if !vset.contains(&GROUND) {
            return Err(Error::Topology("graph has no ground vertex 0".into()));
        }
        if !vset.contains(&platform) || platform == GROUND {
            return Err(Error::Topology(format!("platform vertex {platform} missing or equal to ground")));
        }
        let mut ids = BTreeSet::new();
        for e in &edges {
            if !ids.insert(e.id) {
                return Err(Error::Topology(format!("duplicate edge id {}", e.id)));
            }
            if e.a == e.b || !vset.contains(&e.a) || !vset.contains(&e.b) {
                return Err(Error::Topology(format!("edge {} has invalid endpoints ({}, {})", e.id, e.a, e.b)));
            }
            if e.dof == 0 || e.dof > 6 {
                return Err(Error::Topology(format!("edge {} has invalid dof {}", e.id, e.dof)));
            }
        }
        let g = Self { vertices, edges, platform };
        let reached = g.reachable(GROUND, &BTreeSet::new());
        if reached.len() != vset.len() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(g)
    }

    fn reachable(&self, start: usize, blocked: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if blocked.contains(&v) && v != start {
                continue;
            }
            for e in self.edges.iter().filter(|e| e.touches(v)) {
                let w = e.other(v);
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Number of fundamental cycles `E - V + 1`.
    pub fn cycle_rank(&self) -> usize {
        (self.edges.len() + 1).saturating_sub(self.vertices.len())
    }
}

/// Subgraph of one limb; always contains the ground and the platform vertex.
#[derive(Clone, Debug)]
pub struct LimbSubgraph {
    pub index: usize,
    pub vertices: Vec<usize>,
    pub edges: Vec<Edge>,
    pub platform: usize,
    pub gamma: usize,
}

impl LimbSubgraph {
    /// Wraps a single-limb graph.
    pub fn from_graph(g: &MechanismGraph) -> Self {
        let gamma = g.cycle_rank();
        Self { index: 0, vertices: g.vertices.clone(), edges: g.edges.clone(), platform: g.platform, gamma }
    }

    pub fn edge(&self, id: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Total joint DOF `N_l`.
    pub fn total_dof(&self) -> usize {
        self.edges.iter().map(|e| e.dof).sum()
    }
}

/// Splits the graph into the limbs joining ground and platform.
pub fn partition_limbs(g: &MechanismGraph) -> Result<Vec<LimbSubgraph>> {
    let inner: BTreeSet<usize> = g.vertices.iter().copied().filter(|&v| v != GROUND && v != g.platform).collect();
    let mut assigned = BTreeSet::new();
    let mut groups: Vec<(BTreeSet<usize>, Vec<Edge>)> = Vec::new();
    for &v in &inner {
        if assigned.contains(&v) {
            continue;
        }
        let mut comp = BTreeSet::from([v]);
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for e in g.edges.iter().filter(|e| e.touches(u)) {
                let w = e.other(u);
                if inner.contains(&w) && comp.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        assigned.extend(comp.iter().copied());
        let edges: Vec<Edge> = g.edges.iter().filter(|e| comp.contains(&e.a) || comp.contains(&e.b)).copied().collect();
        groups.push((comp, edges));
    }
    for e in &g.edges {
        if (e.a == GROUND && e.b == g.platform) || (e.b == GROUND && e.a == g.platform) {
            groups.push((BTreeSet::new(), vec![*e]));
        }
    }
    for (comp, edges) in &groups {
        let to_ground = edges.iter().any(|e| e.touches(GROUND));
        let to_platform = edges.iter().any(|e| e.touches(g.platform));
        if !to_ground || !to_platform {
            return Err(Error::Topology(format!(
                "bodies {:?} do not connect ground with the platform",
                comp.iter().collect::<Vec<_>>()
            )));
        }
    }
    groups.sort_by_key(|(_, edges)| edges.iter().map(|e| e.id).min());
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(index, (comp, mut edges))| {
            edges.sort_by_key(|e| e.id);
            let mut vertices = vec![GROUND];
            vertices.extend(comp.iter().copied());
            vertices.push(g.platform);
            let gamma = (edges.len() + 1).saturating_sub(vertices.len());
            LimbSubgraph { index, vertices, edges, platform: g.platform, gamma }
        })
        .collect())
}

/// Ground-directed spanning tree of a limb with canonical body numbering.
///
/// Bodies and tree joints are indexed from 0; joint `i` connects `parent[i]`
/// (or ground) with body `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    /// Graph vertex of body `i`.
    pub bodies: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    /// Graph edge of tree joint `i`.
    pub tree_edges: Vec<usize>,
    /// Cut edges, numbered after the tree joints in this order.
    pub cut_edges: Vec<usize>,
    /// True if the supplied numbering was not canonical and bodies were renumbered.
    pub renumbered: bool,
}

impl SpanningTree {
    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn body_of_vertex(&self, v: usize) -> Option<usize> {
        self.bodies.iter().position(|&b| b == v)
    }

    pub fn joint_of_edge(&self, id: usize) -> Option<usize> {
        self.tree_edges.iter().position(|&e| e == id)
    }

    /// Joints on the path from ground to body `i`, ascending.
    pub fn path(&self, i: usize) -> Vec<usize> {
        let mut p = vec![i];
        let mut cur = i;
        while let Some(j) = self.parent[cur] {
            p.push(j);
            cur = j;
        }
        p.reverse();
        p
    }

    /// `j ≼ i`: joint `j` lies on the path of body `i`.
    pub fn precedes(&self, j: usize, i: usize) -> bool {
        let mut cur = Some(i);
        while let Some(c) = cur {
            if c == j {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }

    pub fn is_canonical(&self) -> bool {
        self.parent.iter().enumerate().all(|(i, p)| p.is_none_or(|p| p < i))
    }
}

/// Cut edges chosen by a minimum spanning forest over `(dof, id)`:
/// high-DOF joints are preferably cut.
pub fn auto_cut_edges(limb: &LimbSubgraph) -> Vec<usize> {
    let mut sorted = limb.edges.clone();
    sorted.sort_by_key(|e| (e.dof, e.id));
    let mut root: BTreeMap<usize, usize> = limb.vertices.iter().map(|&v| (v, v)).collect();
    fn find(root: &mut BTreeMap<usize, usize>, v: usize) -> usize {
        let mut r = v;
        while root[&r] != r {
            r = root[&r];
        }
        root.insert(v, r);
        r
    }
    let mut cuts = Vec::new();
    for e in sorted {
        let (ra, rb) = (find(&mut root, e.a), find(&mut root, e.b));
        if ra == rb {
            cuts.push(e.id);
        } else {
            root.insert(ra, rb);
        }
    }
    cuts.sort_unstable();
    cuts
}

/// Builds the spanning tree left after removing `cut_edges`.
pub fn build_spanning_tree(limb: &LimbSubgraph, cut_edges: &[usize]) -> Result<SpanningTree> {
    for c in cut_edges {
        if limb.edge(*c).is_none() {
            return Err(Error::Topology(format!("cut edge {c} is not part of limb {}", limb.index)));
        }
    }
    if cut_edges.len() != limb.gamma {
        return Err(Error::Topology(format!(
            "limb {} has {} independent cycles but {} cut edges were given",
            limb.index,
            limb.gamma,
            cut_edges.len()
        )));
    }
    let tree: Vec<Edge> = limb.edges.iter().filter(|e| !cut_edges.contains(&e.id)).copied().collect();
    // Orient tree edges away from ground.
    let mut parent_of: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    let mut seen = BTreeSet::from([GROUND]);
    let mut queue = VecDeque::from([GROUND]);
    while let Some(v) = queue.pop_front() {
        let mut incident: Vec<&Edge> = tree.iter().filter(|e| e.touches(v)).collect();
        incident.sort_by_key(|e| e.id);
        for e in incident {
            let w = e.other(v);
            if seen.insert(w) {
                parent_of.insert(w, (v, e.id));
                order.push(w);
                queue.push_back(w);
            } else if parent_of.get(&v).map(|p| p.1) != Some(e.id) {
                return Err(Error::Topology(format!(
                    "cut edges {cut_edges:?} do not open all cycles of limb {}",
                    limb.index
                )));
            }
        }
    }
    if order.len() + 1 != limb.vertices.len() {
        return Err(Error::Topology(format!("cut edges {cut_edges:?} disconnect limb {}", limb.index)));
    }
    let platform_degree = tree.iter().filter(|e| e.touches(limb.platform)).count();
    if platform_degree != 1 {
        return Err(Error::Topology(format!("platform is not a leaf of the spanning tree of limb {}", limb.index)));
    }
    // Keep the user numbering (edges sorted by id) if it is canonical.
    let mut by_id: Vec<usize> = order.clone();
    by_id.sort_by_key(|v| parent_of[v].1);
    let canonical = by_id.iter().enumerate().all(|(i, v)| {
        let p = parent_of[v].0;
        p == GROUND || by_id.iter().position(|&u| u == p).is_some_and(|pi| pi < i)
    });
    let (bodies, renumbered) = if canonical { (by_id, false) } else { (order, true) };
    let parent = bodies
        .iter()
        .map(|v| {
            let p = parent_of[v].0;
            if p == GROUND {
                None
            } else {
                bodies.iter().position(|&u| u == p)
            }
        })
        .collect();
    let tree_edges = bodies.iter().map(|v| parent_of[v].1).collect();
    Ok(SpanningTree { bodies, parent, tree_edges, cut_edges: cut_edges.to_vec(), renumbered })
}

/// A fundamental cycle in traversal order: the cut edge, the tree edges from
/// body `k` up to the common ancestor, then down to body `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FundamentalCycle {
    pub cut_edge: usize,
    /// Body `k` (None = ground).
    pub k: Option<usize>,
    /// Body `r` (None = ground).
    pub r: Option<usize>,
    pub edges: Vec<usize>,
    pub sigma: Vec<i8>,
    /// Graph vertices of the cycle.
    pub vertices: BTreeSet<usize>,
}

impl FundamentalCycle {
    /// Canonical tree joints of the cycle, ascending.
    pub fn tree_joints(&self, tree: &SpanningTree) -> Vec<usize> {
        let mut j: Vec<usize> = self.edges[1..].iter().filter_map(|e| tree.joint_of_edge(*e)).collect();
        j.sort_unstable();
        j
    }

    pub fn sigma_of(&self, edge: usize) -> i8 {
        self.edges.iter().position(|&e| e == edge).map_or(0, |i| self.sigma[i])
    }
}

/// Fundamental cycles of `limb` for the given cut edges (one per cut edge).
pub fn fundamental_cycles(limb: &LimbSubgraph, cut_edges: &[usize]) -> Result<Vec<FundamentalCycle>> {
    let tree = build_spanning_tree(limb, cut_edges)?;
    Ok(cycles_of_tree(limb, &tree))
}

pub fn cycles_of_tree(limb: &LimbSubgraph, tree: &SpanningTree) -> Vec<FundamentalCycle> {
    let mut out = Vec::new();
    for &c in &tree.cut_edges {
        let Some(e) = limb.edge(c) else { continue };
        let k = tree.body_of_vertex(e.a);
        let r = tree.body_of_vertex(e.b);
        let pk = k.map(|k| tree.path(k)).unwrap_or_default();
        let pr = r.map(|r| tree.path(r)).unwrap_or_default();
        let common = pk.iter().zip(pr.iter()).take_while(|(a, b)| a == b).count();
        let mut edges = vec![c];
        let mut sigma = vec![1i8];
        let mut vertices = BTreeSet::from([e.a, e.b]);
        for &j in pk[common..].iter().rev() {
            edges.push(tree.tree_edges[j]);
            sigma.push(1);
            vertices.insert(tree.bodies[j]);
            vertices.insert(tree.parent[j].map_or(GROUND, |p| tree.bodies[p]));
        }
        for &j in &pr[common..] {
            edges.push(tree.tree_edges[j]);
            sigma.push(-1);
            vertices.insert(tree.bodies[j]);
            vertices.insert(tree.parent[j].map_or(GROUND, |p| tree.bodies[p]));
        }
        out.push(FundamentalCycle { cut_edge: c, k, r, edges, sigma, vertices });
    }
    out
}

/// True iff every pair of cycles shares at most one vertex.
pub fn is_hybrid(cycles: &[FundamentalCycle]) -> bool {
    cycles.iter().enumerate().all(|(i, a)| cycles[i + 1..].iter().all(|b| a.vertices.intersection(&b.vertices).count() <= 1))
}
