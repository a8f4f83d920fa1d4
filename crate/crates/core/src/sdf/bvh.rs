//! Median-split AABB tree over triangles with exact closest-distance queries
//! and a hierarchical generalized winding number.

use std::f64::consts::PI;

use crate::geom::{Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::num::Real;

const LEAF_SIZE: usize = 4;

/// Far-field acceptance ratio: a cluster is replaced by its dipole when the
/// query point is farther than `BETA` times the cluster radius.
const BETA: f64 = 2.0;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    /// Leaf: `[start, start + count)` into the reordered triangles.
    /// Interior: `start` is the right child, the left child is `self + 1`.
    start: u32,
    count: u32,
    /// Area-weighted normal sum (half the sum of edge cross products).
    normal_sum: Vec3<f64>,
    /// Area-weighted centroid.
    center: Vec3<f64>,
    /// Max distance from `center` to any triangle vertex below this node.
    radius: f64,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Vec3<f64>; 3]>,
}

impl Bvh {
    pub fn new<T: Real>(mesh: &TriangleMesh<T>) -> Self {
        let all: Vec<[Vec3<f64>; 3]> = (0..mesh.triangles().len())
            .map(|t| mesh.triangle(t).map(Vec3::cast::<f64>))
            .collect();
        let centroids: Vec<Vec3<f64>> = all.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..all.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * all.len() / LEAF_SIZE + 1);
        if !all.is_empty() {
            build(&mut nodes, &mut order, 0, &centroids, &all);
        }
        let tris = order.iter().map(|&i| all[i as usize]).collect();
        Self { nodes, tris }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Squared distance to the closest triangle, or `max_d2` if nothing lies
    /// closer than that.
    pub fn closest_distance_squared(&self, p: Vec3<f64>, max_d2: f64) -> f64 {
        let mut best = max_d2;
        if self.nodes.is_empty() {
            return best;
        }
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bbox.distance_squared(p) >= best {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for tri in &self.tris[s..s + node.count as usize] {
                    let d2 = point_triangle_distance_squared(p, tri);
                    if d2 < best {
                        best = d2;
                    }
                }
            } else {
                let left = ni + 1;
                let right = node.start;
                let dl = self.nodes[left as usize].bbox.distance_squared(p);
                let dr = self.nodes[right as usize].bbox.distance_squared(p);
                // Push the farther child first so the nearer one is popped next.
                if dl <= dr {
                    stack.push(right);
                    stack.push(left);
                } else {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        best
    }

    /// Generalized winding number with far-field dipole approximation.
    pub fn winding_number(&self, p: Vec3<f64>) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let r = node.center - p;
            let dist = r.norm();
            if node.count == 0 && dist > BETA * node.radius {
                total += r.dot(node.normal_sum) / (dist * dist * dist);
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for tri in &self.tris[s..s + node.count as usize] {
                    total += triangle_solid_angle(p, tri);
                }
            } else {
                stack.push(node.start);
                stack.push(ni + 1);
            }
        }
        total / (4.0 * PI)
    }

    /// Exact winding number summed over every triangle.
    pub fn winding_number_exact(&self, p: Vec3<f64>) -> f64 {
        self.tris.iter().map(|t| triangle_solid_angle(p, t)).sum::<f64>() / (4.0 * PI)
    }

    /// Signed distance: negative where the winding number exceeds 0.5.
    pub fn signed_distance(&self, p: Vec3<f64>) -> f64 {
        let d = self.closest_distance_squared(p, f64::INFINITY).sqrt();
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }
}

fn build(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    offset: usize,
    centroids: &[Vec3<f64>],
    tris: &[[Vec3<f64>; 3]],
) -> usize {
    let mut bbox = Aabb::empty();
    let mut cbox = Aabb::empty();
    let mut normal_sum = Vec3::zero();
    let mut weighted = Vec3::zero();
    let mut area_sum = 0.0;
    for &t in order.iter() {
        let tri = &tris[t as usize];
        for v in tri {
            bbox.grow(*v);
        }
        cbox.grow(centroids[t as usize]);
        let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]) * 0.5;
        let area = n.norm();
        normal_sum += n;
        weighted += centroids[t as usize] * area;
        area_sum += area;
    }
    let center = if area_sum > 0.0 {
        weighted / area_sum
    } else {
        bbox.center()
    };
    let radius = order
        .iter()
        .flat_map(|&t| tris[t as usize].iter())
        .map(|v| (*v - center).norm())
        .fold(0.0, f64::max);

    let index = nodes.len();
    nodes.push(Node {
        bbox,
        start: offset as u32,
        count: order.len() as u32,
        normal_sum,
        center,
        radius,
    });
    if order.len() <= LEAF_SIZE {
        return index;
    }
    let ext = cbox.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    build(nodes, lo, offset, centroids, tris);
    let right = build(nodes, hi, offset + mid, centroids, tris);
    nodes[index].start = right as u32;
    nodes[index].count = 0;
    index
}

/// Squared distance from `p` to a triangle using the Voronoi-region
/// decomposition of the triangle's vertices, edges and face.
pub fn point_triangle_distance_squared(p: Vec3<f64>, tri: &[Vec3<f64>; 3]) -> f64 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm_squared();
    }
    let denom = va + vb + vc;
    if !(denom.abs() > 0.0) {
        // Collinear triangle: fall back to its edges.
        return segment_distance_squared(p, a, b)
            .min(segment_distance_squared(p, b, c))
            .min(segment_distance_squared(p, c, a));
    }
    let v = vb / denom;
    let w = vc / denom;
    (p - (a + ab * v + ac * w)).norm_squared()
}

fn segment_distance_squared(p: Vec3<f64>, a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm_squared()
}

/// Signed solid angle subtended by a triangle at `p` (Van Oosterom–Strackee).
/// Positive when the triangle's counter-clockwise side faces away from `p`.
pub fn triangle_solid_angle(p: Vec3<f64>, tri: &[Vec3<f64>; 3]) -> f64 {
    let a = tri[0] - p;
    let b = tri[1] - p;
    let c = tri[2] - p;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * num.atan2(den)
}
