//! Centreline extraction: thinning, node detection, branch splitting and the
//! spanning tree over branches and junctions.

mod graph;
mod thin;

pub use graph::{
    branch_world_coords, detect_nodes, split_branches, Branch, Node, NodeKind, Pixel,
    SkeletonGraph,
};
pub use thin::{is_unit_width, skeletonize, Skeleton};

use crate::raster::{remove_small_features, BinaryImage, FeatureMode, GridGeometry};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("no branch with id {0}")]
    UnknownBranch(usize),
}

/// Thin, prune spurs shorter than `spur_px` and build the branch graph.
pub fn extract_graph(
    img: &BinaryImage,
    geometry: GridGeometry,
    spur_px: usize,
) -> (Skeleton, SkeletonGraph) {
    let mut skel = skeletonize(img, geometry);
    if spur_px > 0 {
        skel.image = remove_small_features(&skel.image, spur_px, FeatureMode::Length);
    }
    let nodes = detect_nodes(&skel);
    let graph = split_branches(&skel, &nodes);
    (skel, graph)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::raster::label_components;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn geo(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            origin: Point2::new(0.0, 0.0),
            resolution: 1.0,
            width: w,
            height: h,
        }
    }

    fn as_skeleton(rows: &[&str]) -> Skeleton {
        let image = BinaryImage::from_ascii(rows);
        let geometry = geo(image.width(), image.height());
        Skeleton { image, geometry }
    }

    /// Neighbour count by direct scan of the 3×3 window.
    fn scan_degrees(img: &BinaryImage) -> Vec<((usize, usize), usize)> {
        let mut out = Vec::new();
        for j in 0..img.height() {
            for i in 0..img.width() {
                if !img.get(i, j) {
                    continue;
                }
                let mut d = 0;
                for dj in -1i32..=1 {
                    for di in -1i32..=1 {
                        if (di, dj) != (0, 0) && img.get_signed(i as isize + di as isize, j as isize + dj as isize) {
                            d += 1;
                        }
                    }
                }
                out.push(((i, j), d));
            }
        }
        out
    }

    fn y_shape() -> Skeleton {
        as_skeleton(&[
            "#.....#",
            ".#...#.",
            "..#.#..",
            "...#...",
            "...#...",
            "...#...",
            "...#...",
        ])
    }

    fn h_shape() -> Skeleton {
        as_skeleton(&[
            "#.......#",
            "#.......#",
            "#.......#",
            "#.......#",
            "#########",
            "#.......#",
            "#.......#",
            "#.......#",
            "#.......#",
        ])
    }

    #[test]
    fn chain_has_two_endpoints() {
        let s = as_skeleton(&["..........", "##########", ".........."]);
        let nodes = detect_nodes(&s);
        assert_eq!(nodes.len(), 2);
        assert!(nodes.iter().all(|n| n.kind == NodeKind::Endpoint));
        let g = split_branches(&s, &nodes);
        assert_eq!(g.branches.len(), 1);
        assert_eq!(g.branches[0].pixels.len(), 10);
        assert!(g.tree_edges.is_empty());
    }

    #[test]
    fn ring_has_no_nodes() {
        let s = as_skeleton(&[".###.", "#...#", "#...#", ".###."]);
        assert!(detect_nodes(&s).is_empty());
        let g = split_branches(&s, &[]);
        assert_eq!(g.branches.len(), 1);
        assert_eq!(g.branches[0].pixels.len(), 10);
        assert_eq!(g.branches[0].start_node, None);
    }

    #[test]
    fn y_shape_nodes_match_scan() {
        let s = y_shape();
        let nodes = detect_nodes(&s);
        let scan = scan_degrees(&s.image);
        let ends: HashSet<_> = scan.iter().filter(|(_, d)| *d == 1).map(|(p, _)| *p).collect();
        let junc: HashSet<_> = scan.iter().filter(|(_, d)| *d >= 3).map(|(p, _)| *p).collect();
        let got_ends: HashSet<_> = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Endpoint)
            .map(|n| n.pixel)
            .collect();
        assert_eq!(got_ends, ends);
        assert_eq!(ends.len(), 3);
        assert_eq!(junc.len(), 1);
        assert_eq!(nodes.iter().filter(|n| n.kind == NodeKind::Junction).count(), 1);

        let g = split_branches(&s, &nodes);
        assert_eq!(g.branches.len(), 3);
        let j = nodes.iter().find(|n| n.kind == NodeKind::Junction).unwrap().id;
        for b in &g.branches {
            assert!(b.nodes().any(|n| n == j));
            assert!(b.nodes().any(|n| nodes[n].kind == NodeKind::Endpoint));
        }
        assert_eq!(g.incidence()[j], 3);
        assert_eq!(g.tree_edges.len(), 3);
    }

    #[test]
    fn h_shape_topology() {
        let s = h_shape();
        let nodes = detect_nodes(&s);
        let g = split_branches(&s, &nodes);
        assert_eq!(g.branches.len(), 5);
        assert_eq!(g.junction_count(), 2);
        assert_eq!(g.endpoint_count(), 4);
        assert_eq!(g.tree_edges.len(), 6);
        let deg = g.incidence();
        for n in &g.nodes {
            match n.kind {
                NodeKind::Junction => assert!(deg[n.id] >= 3),
                NodeKind::Endpoint => assert_eq!(deg[n.id], 1),
            }
        }
        // Longest path runs leg, crossbar, leg.
        let path = g.longest_path();
        assert_eq!(path.len(), 3);
        let px = g.path_pixels(&path);
        for w in px.windows(2) {
            assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1, "{w:?}");
        }
    }

    #[test]
    fn doubled_branch_drops_one_tree_edge() {
        // Two junctions joined by two parallel paths form a cycle.
        let s = as_skeleton(&[
            "...........",
            "...#####...",
            "..#.....#..",
            "###.....###",
            "..#.....#..",
            "...#####...",
            "...........",
        ]);
        let nodes = detect_nodes(&s);
        let g = split_branches(&s, &nodes);
        assert_eq!(g.junction_count(), 2);
        assert_eq!(g.branches.len(), 4);
        // 6 incidences on 6 vertices: the tree keeps 5.
        assert_eq!(g.tree_edges.len(), 5);
    }

    #[test]
    fn world_coords_formula() {
        let s = as_skeleton(&["###"]);
        let nodes = detect_nodes(&s);
        let g = split_branches(&s, &nodes);
        let geometry = GridGeometry {
            origin: Point2::new(100.0, 200.0),
            resolution: 0.4,
            width: 3,
            height: 1,
        };
        let pts = branch_world_coords(&g, 0, &geometry).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 100.2).abs() < 1e-9);
        assert!((sorted[1] - sorted[0] - 0.4).abs() < 1e-9);
        assert!(pts.iter().all(|p| (p.y - 200.2).abs() < 1e-9));
        assert!(matches!(
            branch_world_coords(&g, 7, &geometry),
            Err(SkeletonError::UnknownBranch(7))
        ));
    }

    #[test]
    fn geojson_debug_export() {
        let s = y_shape();
        let g = split_branches(&s, &detect_nodes(&s));
        let set = g.to_geojson(&s.geometry, 25833);
        assert_eq!(set.features.len(), 3);
        assert!(set.features.iter().all(|f| f.properties.contains_key("branch_id")));
    }

    proptest! {
        #[test]
        fn branches_partition_the_skeleton(seed in any::<u64>()) {
            let img = test_shapes::strokes(seed, 48, 48);
            let (skel, g) = extract_graph(&img, geo(img.width(), img.height()), 0);
            let mut seen = HashSet::new();
            for b in &g.branches {
                for w in b.pixels.windows(2) {
                    prop_assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1);
                }
                for p in &b.pixels {
                    prop_assert!(seen.insert(*p));
                }
            }
            let junction: Vec<_> = g
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Junction)
                .flat_map(|n| n.members.iter().copied())
                .collect();
            for p in &junction {
                prop_assert!(seen.insert(*p));
            }
            let all: HashSet<_> = skel.pixels().collect();
            prop_assert_eq!(seen, all);
            let deg = g.incidence();
            for n in &g.nodes {
                match n.kind {
                    NodeKind::Junction => prop_assert!(deg[n.id] >= 3, "junction {:?}", n),
                    NodeKind::Endpoint => prop_assert_eq!(deg[n.id], 1),
                }
            }
        }

        #[test]
        fn pruning_keeps_component_count(seed in any::<u64>()) {
            let img = test_shapes::strokes(seed, 48, 48);
            let skel = skeletonize(&img, geo(img.width(), img.height()));
            let (skel2, _) = extract_graph(&img, geo(img.width(), img.height()), 5);
            prop_assert!(skel2.image.is_subset_of(&skel.image));
            prop_assert!(label_components(&skel2.image).1 <= label_components(&skel.image).1);
        }
    }
}
