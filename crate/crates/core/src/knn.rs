//! Exact k-nearest-neighbor search over a point cloud.
//!
//! Neighbors are ordered by `(squared Euclidean distance, row index)`, so
//! ties always resolve to the lower row index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grid::PointCloud;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Static kd-tree borrowing its points.
#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a PointCloud,
    order: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a PointCloud) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(points, &mut order, 0);
        KdTree { points, order, root }
    }

    pub fn points(&self) -> &PointCloud {
        self.points
    }

    /// The `k` nearest rows to `query`, nearest first. Row `exclude`, if
    /// given, is skipped (use it for self-queries).
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, exclude, &mut heap);
        let mut found = heap.into_vec();
        found.sort();
        found.into_iter().map(|c| c.index).collect()
    }

    fn search(&self, node: &Node, query: &[f64], k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    if Some(index) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        dist2: dist2(self.points.row(index), query),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().expect("heap is full").dist2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn build(points: &PointCloud, order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let dim = points.dim();
    let axis = (0..dim)
        .max_by(|&a, &b| spread(points, order, a).total_cmp(&spread(points, order, b)))
        .unwrap_or(0);
    if spread(points, order, axis) == 0.0 {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points.row(a)[axis].total_cmp(&points.row(b)[axis]));
    let value = points.row(order[mid])[axis];
    // Left holds coordinates ≤ value, right ≥ value; search visits the far
    // side whenever the splitting plane is within the current radius.
    let (left, right) = order.split_at_mut(mid);
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, left, offset)),
        right: Box::new(build(points, right, offset + mid)),
    }
}

fn spread(points: &PointCloud, order: &[usize], axis: usize) -> f64 {
    let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let v = points.row(i)[axis];
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Brute-force reference used by tests and for tiny inputs.
pub fn brute_force_nearest(points: &PointCloud, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut all: Vec<Candidate> = (0..points.len())
        .filter(|&i| Some(i) != exclude)
        .map(|index| Candidate {
            dist2: dist2(points.row(index), query),
            index,
        })
        .collect();
    all.sort();
    all.into_iter().take(k).map(|c| c.index).collect()
}
