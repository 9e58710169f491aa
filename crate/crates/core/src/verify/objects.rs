//! Precipitation objects and structure metrics built on them.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Cells at or above this value (mm) belong to objects.
pub const OBJECT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecipObject {
    /// (row, col) cells in raster order.
    pub cells: Vec<(usize, usize)>,
    pub mass: f64,
    pub max: f64,
    /// Mass-weighted centroid in gridpoint units.
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSet {
    /// 0 for background, otherwise 1 + object index.
    pub labels: Array2<u32>,
    pub objects: Vec<PrecipObject>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// 4-connected components of cells with value >= `threshold`.
/// Objects are numbered in raster order of their first cell.
pub fn label_objects(field: ArrayView2<'_, f64>, threshold: f64) -> ObjectSet {
    let (nr, nc) = field.dim();
    let mut provisional = Array2::<u32>::zeros((nr, nc));
    let mut parent: Vec<u32> = vec![0];
    for r in 0..nr {
        for c in 0..nc {
            if field[[r, c]] < threshold {
                continue;
            }
            let up = if r > 0 { provisional[[r - 1, c]] } else { 0 };
            let left = if c > 0 { provisional[[r, c - 1]] } else { 0 };
            provisional[[r, c]] = match (up, left) {
                (0, 0) => {
                    let l = parent.len() as u32;
                    parent.push(l);
                    l
                }
                (a, 0) | (0, a) => a,
                (a, b) => {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi as usize] = lo;
                    lo
                }
            };
        }
    }
    let mut final_label = vec![0u32; parent.len()];
    let mut labels = Array2::<u32>::zeros((nr, nc));
    let mut objects: Vec<PrecipObject> = Vec::new();
    for r in 0..nr {
        for c in 0..nc {
            let p = provisional[[r, c]];
            if p == 0 {
                continue;
            }
            let root = find(&mut parent, p) as usize;
            if final_label[root] == 0 {
                objects.push(PrecipObject {
                    cells: Vec::new(),
                    mass: 0.0,
                    max: f64::NEG_INFINITY,
                    centroid: (0.0, 0.0),
                });
                final_label[root] = objects.len() as u32;
            }
            let l = final_label[root];
            labels[[r, c]] = l;
            let v = field[[r, c]];
            let o = &mut objects[l as usize - 1];
            o.cells.push((r, c));
            o.mass += v;
            o.max = o.max.max(v);
            o.centroid.0 += v * r as f64;
            o.centroid.1 += v * c as f64;
        }
    }
    for o in &mut objects {
        if o.mass > 0.0 {
            o.centroid = (o.centroid.0 / o.mass, o.centroid.1 / o.mass);
        } else {
            // Only reachable with a non-positive threshold.
            let n = o.cells.len() as f64;
            let (sr, sc) = o.cells.iter().fold((0.0, 0.0), |a, &(r, c)| (a.0 + r as f64, a.1 + c as f64));
            o.centroid = (sr / n, sc / n);
        }
    }
    ObjectSet { labels, objects }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

impl ObjectSet {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Number of cells covered by objects.
    pub fn area(&self) -> usize {
        self.objects.iter().map(|o| o.cells.len()).sum()
    }

    fn total_mass(&self) -> f64 {
        self.objects.iter().map(|o| o.mass).sum()
    }
}

/// Σ P_n·(P_n / max_n) / Σ P_n; `None` without objects or mass.
pub fn sal_scaled_volume(set: &ObjectSet) -> Option<f64> {
    let total = set.total_mass();
    (total > 0.0).then(|| set.objects.iter().map(|o| o.mass * (o.mass / o.max)).sum::<f64>() / total)
}

/// Mass-weighted mean distance of object centroids from the overall centroid.
pub fn sal_weighted_centre_distance(set: &ObjectSet) -> Option<f64> {
    let total = set.total_mass();
    if total <= 0.0 {
        return None;
    }
    let centre = set.objects.iter().fold((0.0, 0.0), |a, o| {
        (a.0 + o.mass * o.centroid.0, a.1 + o.mass * o.centroid.1)
    });
    let centre = (centre.0 / total, centre.1 / total);
    Some(set.objects.iter().map(|o| o.mass * dist(o.centroid, centre)).sum::<f64>() / total)
}

/// Geometric (D0) and arithmetic (D1) mean of pairwise centroid distances;
/// `None` with fewer than two objects.
pub fn scai_d0_d1(set: &ObjectSet) -> Option<(f64, f64)> {
    let n = set.objects.len();
    if n < 2 {
        return None;
    }
    let (mut log_sum, mut sum, mut pairs) = (0.0, 0.0, 0usize);
    for a in 0..n {
        for b in a + 1..n {
            let d = dist(set.objects[a].centroid, set.objects[b].centroid);
            log_sum += d.ln();
            sum += d;
            pairs += 1;
        }
    }
    Some(((log_sum / pairs as f64).exp(), sum / pairs as f64))
}
