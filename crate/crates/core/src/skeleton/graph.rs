use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Skeleton, SkeletonError};
use crate::geom::Point2;
use crate::pcd_io::{GeoFeature, GeoFeatureSet, Geometry};
use crate::raster::{label_components, BinaryImage, GridGeometry};

pub type Pixel = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Junction,
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    /// Representative pixel: the cluster member nearest the cluster centroid.
    pub pixel: Pixel,
    /// All pixels merged into this node (a single pixel for endpoints).
    pub members: Vec<Pixel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub pixels: Vec<Pixel>,
    pub start_node: Option<usize>,
    pub end_node: Option<usize>,
}

impl Branch {
    /// Chain length in pixel units (sum of 1 / √2 steps).
    pub fn pixel_length(&self) -> f64 {
        self.pixels
            .windows(2)
            .map(|w| {
                let dx = w[0].0.abs_diff(w[1].0);
                let dy = w[0].1.abs_diff(w[1].1);
                if dx + dy == 2 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                }
            })
            .sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.start_node.into_iter().chain(self.end_node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    /// Spanning forest over branch/junction incidences, as (branch, node) pairs.
    pub tree_edges: Vec<(usize, usize)>,
}

fn neighbors(img: &BinaryImage, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
    crate::raster::NEIGHBORS8.iter().filter_map(move |&(di, dj)| {
        let (ni, nj) = (p.0 as isize + di, p.1 as isize + dj);
        img.get_signed(ni, nj).then_some((ni as usize, nj as usize))
    })
}

/// Endpoints (one neighbour) and junctions (three or more, adjacent ones
/// merged). Nodes are numbered in raster order of their representative pixel.
pub fn detect_nodes(skel: &Skeleton) -> Vec<Node> {
    let img = &skel.image;
    let mut junction = BinaryImage::new(img.width(), img.height());
    let mut endpoints = Vec::new();
    for p in img.ones() {
        match neighbors(img, p).count() {
            1 => endpoints.push(p),
            d if d >= 3 => junction.set(p.0, p.1, true),
            _ => {}
        }
    }
    let (labels, n) = label_components(&junction);
    let mut clusters: Vec<Vec<Pixel>> = vec![Vec::new(); n as usize];
    for p in junction.ones() {
        clusters[labels[junction.index(p.0, p.1)] as usize - 1].push(p);
    }
    let mut nodes: Vec<Node> = clusters
        .into_iter()
        .map(|members| {
            let k = members.len() as f64;
            let cx = members.iter().map(|p| p.0 as f64).sum::<f64>() / k;
            let cy = members.iter().map(|p| p.1 as f64).sum::<f64>() / k;
            let pixel = *members
                .iter()
                .min_by(|a, b| {
                    let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                    let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            Node {
                id: 0,
                kind: NodeKind::Junction,
                pixel,
                members,
            }
        })
        .chain(endpoints.into_iter().map(|p| Node {
            id: 0,
            kind: NodeKind::Endpoint,
            pixel: p,
            members: vec![p],
        }))
        .collect();
    nodes.sort_by_key(|n| (n.pixel.1, n.pixel.0));
    for (k, n) in nodes.iter_mut().enumerate() {
        n.id = k;
    }
    nodes
}

/// Orders a path- or cycle-shaped component by walking from a terminal.
fn order_chain(img: &BinaryImage, comp: &[Pixel]) -> Vec<Pixel> {
    let start = comp
        .iter()
        .copied()
        .find(|&p| neighbors(img, p).count() <= 1)
        .unwrap_or(comp[0]);
    let mut seen: HashSet<Pixel> = HashSet::from([start]);
    let mut chain = vec![start];
    let mut cur = start;
    loop {
        // Prefer 4-neighbours so a step never skips a pixel of the chain.
        let next = neighbors(img, cur)
            .filter(|q| !seen.contains(q))
            .min_by_key(|q| q.0.abs_diff(cur.0) + q.1.abs_diff(cur.1));
        match next {
            Some(q) => {
                seen.insert(q);
                chain.push(q);
                cur = q;
            }
            None => break,
        }
    }
    if chain.len() < comp.len() {
        // Defensive: append anything the walk missed, nearest first.
        let rest: Vec<Pixel> = comp.iter().copied().filter(|p| !seen.contains(p)).collect();
        chain.extend(rest);
    }
    chain
}

/// Removes junction pixels, labels what is left and attaches each resulting
/// branch to the nodes at its ends. Builds the spanning tree afterwards.
pub fn split_branches(skel: &Skeleton, nodes: &[Node]) -> SkeletonGraph {
    let img = &skel.image;
    let mut owner: HashMap<Pixel, usize> = HashMap::new();
    let mut rest = img.clone();
    for n in nodes {
        if n.kind == NodeKind::Junction {
            for &p in &n.members {
                owner.insert(p, n.id);
                rest.set(p.0, p.1, false);
            }
        }
    }
    let endpoint_at: HashMap<Pixel, usize> = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Endpoint)
        .map(|n| (n.pixel, n.id))
        .collect();

    let (labels, count) = label_components(&rest);
    let mut comps: Vec<Vec<Pixel>> = vec![Vec::new(); count as usize];
    for p in rest.ones() {
        comps[labels[rest.index(p.0, p.1)] as usize - 1].push(p);
    }

    let touching = |p: Pixel| -> Vec<usize> {
        let mut ids: Vec<usize> = neighbors(img, p).filter_map(|q| owner.get(&q).copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };

    let mut branches = Vec::with_capacity(comps.len());
    for (id, comp) in comps.iter().enumerate() {
        let pixels = order_chain(&rest, comp);
        let first = pixels[0];
        let last = *pixels.last().unwrap();
        let start_j = touching(first);
        let end_j = touching(last);
        let (start_node, end_node) = if pixels.len() == 1 {
            let mut it = start_j.iter().copied();
            let s = it.next().or_else(|| endpoint_at.get(&first).copied());
            let e = it.next().or_else(|| {
                endpoint_at
                    .get(&first)
                    .copied()
                    .filter(|&ep| Some(ep) != s)
            });
            (s, e)
        } else {
            let s = start_j
                .first()
                .copied()
                .or_else(|| endpoint_at.get(&first).copied());
            let e = end_j
                .iter()
                .copied()
                .find(|&n| Some(n) != s)
                .or_else(|| end_j.first().copied())
                .or_else(|| endpoint_at.get(&last).copied());
            (s, e)
        };
        branches.push(Branch {
            id,
            pixels,
            start_node,
            end_node,
        });
    }

    let tree_edges = spanning_tree(&branches, nodes, skel.geometry.resolution);
    SkeletonGraph {
        nodes: nodes.to_vec(),
        branches,
        tree_edges,
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
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
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Kruskal over branch–junction incidences, weighted by branch length in
/// meters; ties resolve towards the lower branch id.
fn spanning_tree(branches: &[Branch], nodes: &[Node], resolution: f64) -> Vec<(usize, usize)> {
    let nb = branches.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for b in branches {
        let mut seen = Vec::new();
        for n in b.nodes() {
            if nodes[n].kind == NodeKind::Junction && !seen.contains(&n) {
                seen.push(n);
                edges.push((b.pixel_length() * resolution, b.id, n));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut dsu = DisjointSet::new(nb + nodes.len());
    let mut tree = Vec::new();
    for (_, b, n) in edges {
        if dsu.union(b, nb + n) {
            tree.push((b, n));
        }
    }
    tree
}

impl SkeletonGraph {
    pub fn branch(&self, id: usize) -> Result<&Branch, SkeletonError> {
        self.branches.get(id).ok_or(SkeletonError::UnknownBranch(id))
    }

    pub fn junction_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Junction).count()
    }

    pub fn endpoint_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Endpoint).count()
    }

    /// Number of branches attached to each node.
    pub fn incidence(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for b in &self.branches {
            for n in b.nodes() {
                deg[n] += 1;
            }
        }
        deg
    }

    /// Branches whose every junction incidence survived in the spanning tree,
    /// i.e. the edges of the node-level tree.
    fn tree_branches(&self) -> Vec<bool> {
        let kept: HashSet<(usize, usize)> = self.tree_edges.iter().copied().collect();
        self.branches
            .iter()
            .map(|b| {
                b.nodes().all(|n| {
                    self.nodes[n].kind == NodeKind::Endpoint || kept.contains(&(b.id, n))
                })
            })
            .collect()
    }

    /// Longest path (by pixel length) through the node-level tree, as a list
    /// of branch ids with a flag telling whether each is traversed reversed.
    pub fn longest_path(&self) -> Vec<(usize, bool)> {
        let usable = self.tree_branches();
        let mut adj: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let mut best: (f64, Vec<(usize, bool)>) = (0.0, Vec::new());
        for b in &self.branches {
            let len = b.pixel_length() + 1.0;
            match (b.start_node, b.end_node) {
                (Some(s), Some(e)) if usable[b.id] && s != e => {
                    adj.entry(s).or_default().push((e, b.id, len));
                    adj.entry(e).or_default().push((s, b.id, len));
                }
                _ => {
                    if len > best.0 {
                        best = (len, vec![(b.id, false)]);
                    }
                }
            }
        }
        let farthest = |start: usize| -> (usize, f64, HashMap<usize, (usize, usize)>) {
            let mut dist: HashMap<usize, f64> = HashMap::from([(start, 0.0)]);
            let mut via: HashMap<usize, (usize, usize)> = HashMap::new();
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, b, w) in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if !dist.contains_key(&v) {
                        dist.insert(v, dist[&u] + w);
                        via.insert(v, (u, b));
                        queue.push_back(v);
                    }
                }
            }
            let (&far, &d) = dist
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                .unwrap();
            (far, d, via)
        };
        let mut done: HashSet<usize> = HashSet::new();
        for &root in adj.keys() {
            if done.contains(&root) {
                continue;
            }
            let (a, _, via0) = farthest(root);
            done.insert(root);
            done.extend(via0.keys().copied());
            let (b, d, via) = farthest(a);
            if d > best.0 {
                let mut path = Vec::new();
                let mut cur = b;
                while cur != a {
                    let (prev, br) = via[&cur];
                    let reversed = self.branches[br].start_node != Some(prev);
                    path.push((br, reversed));
                    cur = prev;
                }
                path.reverse();
                best = (d, path);
            }
        }
        best.1
    }

    /// Pixel chain along a branch path, bridging each junction with the
    /// shortest 8-path through its member pixels.
    pub fn path_pixels(&self, path: &[(usize, bool)]) -> Vec<Pixel> {
        let mut out: Vec<Pixel> = Vec::new();
        for (k, &(b, rev)) in path.iter().enumerate() {
            let mut px = self.branches[b].pixels.clone();
            if rev {
                px.reverse();
            }
            if k > 0 {
                let prev = *out.last().unwrap();
                let next = px[0];
                let shared = {
                    let pb = &self.branches[path[k - 1].0];
                    let nb = &self.branches[b];
                    pb.nodes().find(|n| nb.nodes().any(|m| m == *n))
                };
                if let Some(n) = shared {
                    out.extend(bridge(&self.nodes[n].members, prev, next));
                }
            }
            out.extend(px);
        }
        out
    }

    /// Branch chains as LineStrings with id and terminal node kinds.
    pub fn to_geojson(&self, geometry: &GridGeometry, crs_epsg: u32) -> GeoFeatureSet {
        let kind = |n: Option<usize>| match n.map(|n| self.nodes[n].kind) {
            Some(NodeKind::Junction) => "junction",
            Some(NodeKind::Endpoint) => "endpoint",
            None => "none",
        };
        let mut set = GeoFeatureSet::new(crs_epsg);
        for b in &self.branches {
            let mut pts: Vec<Point2> = b.pixels.iter().map(|&(i, j)| geometry.pixel_center(i, j)).collect();
            if pts.len() == 1 {
                pts.push(pts[0]);
            }
            set.features.push(
                GeoFeature::new(Geometry::LineString(pts))
                    .with_property("branch_id", b.id.to_string())
                    .with_property("start_kind", kind(b.start_node))
                    .with_property("end_kind", kind(b.end_node)),
            );
        }
        set
    }
}

fn adjacent(a: Pixel, b: Pixel) -> bool {
    a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

/// Shortest sequence of `members` leading from a pixel next to `from` to a
/// pixel next to `to`.
fn bridge(members: &[Pixel], from: Pixel, to: Pixel) -> Vec<Pixel> {
    let set: HashSet<Pixel> = members.iter().copied().collect();
    let mut prev: HashMap<Pixel, Option<Pixel>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &m in members.iter().filter(|&&m| adjacent(m, from)) {
        prev.insert(m, None);
        queue.push_back(m);
    }
    while let Some(u) = queue.pop_front() {
        if adjacent(u, to) {
            let mut path = vec![u];
            let mut cur = u;
            while let Some(Some(p)) = prev.get(&cur) {
                path.push(*p);
                cur = *p;
            }
            path.reverse();
            return path;
        }
        for (di, dj) in crate::raster::NEIGHBORS8 {
            let v = ((u.0 as isize + di) as usize, (u.1 as isize + dj) as usize);
            if set.contains(&v) && !prev.contains_key(&v) {
                prev.insert(v, Some(u));
                queue.push_back(v);
            }
        }
    }
    Vec::new()
}

/// Pixel centres of a branch in world coordinates.
pub fn branch_world_coords(
    graph: &SkeletonGraph,
    id: usize,
    geometry: &GridGeometry,
) -> Result<Vec<Point2>, SkeletonError> {
    Ok(graph
        .branch(id)?
        .pixels
        .iter()
        .map(|&(i, j)| geometry.pixel_center(i, j))
        .collect())
}
