//! Deterministic KD-tree for k-nearest-neighbor queries.
//!
//! Median splits with axis cycling X, Y, Z by depth. Ties (equal
//! coordinates, equal distances) are broken by original point index, so
//! build and query results are fully deterministic.

use crate::scene::Point3;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf {
        indices: Vec<usize>,
    },
    Inner {
        axis: usize,
        split: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub struct KdTree {
    points: Vec<Point3>,
    root: Node,
}

fn coord(p: Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn build(points: &[Point3], mut indices: Vec<usize>, depth: usize) -> Node {
    if indices.len() <= LEAF_SIZE {
        return Node::Leaf { indices };
    }
    let axis = depth % 3;
    let mid = indices.len() / 2;
    indices.select_nth_unstable_by(mid, |&a, &b| {
        coord(points[a], axis)
            .partial_cmp(&coord(points[b], axis))
            .unwrap()
            .then(a.cmp(&b))
    });
    let split = coord(points[indices[mid]], axis);
    let right_idx = indices.split_off(mid);
    Node::Inner {
        axis,
        split,
        left: Box::new(build(points, indices, depth + 1)),
        right: Box::new(build(points, right_idx, depth + 1)),
    }
}

impl KdTree {
    /// Builds a tree over a copy of the points. Coordinates must be finite.
    pub fn build(points: &[Point3]) -> KdTree {
        let indices: Vec<usize> = (0..points.len()).collect();
        let root = build(points, indices, 0);
        KdTree {
            points: points.to_vec(),
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest neighbors of `query`, sorted by ascending distance
    /// (ties by point index). `skip` excludes one index, for self-queries.
    /// Returns fewer than `k` entries only when the tree is too small.
    pub fn k_nearest(&self, query: Point3, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        // Max-heap substitute: a sorted Vec of (dist2, idx) capped at k.
        // Desk-scale k keeps insert cost trivial.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(&self.root, query, k, skip, &mut best);
        best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn search(
        &self,
        node: &Node,
        query: Point3,
        k: usize,
        skip: Option<usize>,
        best: &mut Vec<(f64, usize)>,
    ) {
        match node {
            Node::Leaf { indices } => {
                for &i in indices {
                    if Some(i) == skip {
                        continue;
                    }
                    let d = self.points[i].sub(query);
                    let d2 = d.x * d.x + d.y * d.y + d.z * d.z;
                    let entry = (d2, i);
                    let pos = best.partition_point(|&e| e < entry);
                    if pos < k {
                        best.insert(pos, entry);
                        best.truncate(k);
                    }
                }
            }
            Node::Inner {
                axis,
                split,
                left,
                right,
            } => {
                let q = coord(query, *axis);
                let (near, far) = if q < *split {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, skip, best);
                let gap = q - *split;
                let worst = best.last().map(|&(d2, _)| d2).unwrap_or(f64::INFINITY);
                if best.len() < k || gap * gap <= worst {
                    self.search(far, query, k, skip, best);
                }
            }
        }
    }
}
