//! Bounding volume hierarchy over scene facets.
//!
//! Built once with a median split on the longest centroid axis; queries walk
//! the tree with an explicit stack and are safe to share across threads.

use crate::geometry::{Aabb, Ray, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Facet indices referenced by leaves.
    order: Vec<usize>,
}

impl Bvh {
    /// Builds the hierarchy from per-facet bounding boxes.
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len().max(1));
        if !boxes.is_empty() {
            build_node(boxes, &mut order, 0, boxes.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    /// Calls `visit` for every facet whose leaf box is crossed by the ray
    /// between `t_min` and the current `t_max`. `visit` returns an updated
    /// upper bound (the distance of the best hit so far).
    pub fn traverse<F>(&self, ray: &Ray, t_min: f64, mut t_max: f64, mut visit: F)
    where
        F: FnMut(usize, f64) -> f64,
    {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds().hit(ray, &inv, t_min, t_max).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &facet in &self.order[start..start + len] {
                        t_max = visit(facet, t_max);
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }
}

fn build_node(boxes: &[Aabb], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let mut bounds = Aabb::empty();
    let mut centroids = Aabb::empty();
    for &i in &order[start..end] {
        bounds = bounds.union(&boxes[i]);
        centroids.grow(&boxes[i].center());
    }
    let index = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start,
            len: end - start,
        });
        return index;
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            let ea = centroids.max[a] - centroids.min[a];
            let eb = centroids.max[b] - centroids.min[b];
            ea.total_cmp(&eb)
        })
        .unwrap_or(0);
    // stable, deterministic ordering: by centroid then by facet index
    order[start..end].sort_by(|&a, &b| {
        boxes[a].center()[axis]
            .total_cmp(&boxes[b].center()[axis])
            .then(a.cmp(&b))
    });
    let mid = start + (end - start) / 2;
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        len: 0,
    });
    let left = build_node(boxes, order, start, mid, nodes);
    let right = build_node(boxes, order, mid, end, nodes);
    nodes[index] = Node::Inner { bounds, left, right };
    index
}
