//! Chain recurrence on the landing section: the pseudo-orbit graph, its
//! recurrent cells, tiled cubes, perturbation-box certificates and
//! transition-norm bounds.

use std::collections::VecDeque;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow;
use crate::linalg::{left_inverse, op_norm, Point};
use crate::semiflow::{first_hit, hit_from_chart, poincare, ImpulsiveSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum CellImage {
    Point(Vec<f64>),
    NoReturn,
    Error(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbitGraph {
    pub lo: Vec<f64>,
    pub cell_width: Vec<f64>,
    pub counts: Vec<usize>,
    pub periodic: Vec<bool>,
    pub resolution: f64,
    pub delta: f64,
    pub images: Vec<CellImage>,
    pub edges: Vec<Vec<usize>>,
}

impl PseudoOrbitGraph {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn multi_index(&self, mut id: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for i in (0..self.counts.len()).rev() {
            idx[i] = id % self.counts[i];
            id /= self.counts[i];
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn bounds(&self, id: usize) -> Vec<[f64; 2]> {
        self.multi_index(id)
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let a = self.lo[i] + self.cell_width[i] * k as f64;
                [a, a + self.cell_width[i]]
            })
            .collect()
    }

    pub fn center(&self, id: usize) -> Point {
        DVector::from_iterator(self.counts.len(), self.bounds(id).iter().map(|[a, b]| 0.5 * (a + b)))
    }

    /// Cell containing a chart point, if any.
    pub fn cell_of(&self, p: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(p.len());
        for (i, &v) in p.iter().enumerate() {
            let mut k = ((v - self.lo[i]) / self.cell_width[i]).floor() as i64;
            let n = self.counts[i] as i64;
            if self.periodic[i] {
                k = k.rem_euclid(n);
            } else if k == n && v <= self.lo[i] + self.cell_width[i] * n as f64 + 1e-12 {
                k = n - 1;
            }
            if k < 0 || k >= n {
                return None;
            }
            idx.push(k as usize);
        }
        Some(self.flat(&idx))
    }

    /// Chart distance from a point to a cell (periodic axes the short way round).
    pub fn distance_to_cell(&self, p: &[f64], id: usize) -> f64 {
        let b = self.bounds(id);
        let mut d2 = 0.0;
        for i in 0..p.len() {
            let [a, c] = b[i];
            let gap = if self.periodic[i] {
                let period = self.cell_width[i] * self.counts[i] as f64;
                let mid = 0.5 * (a + c);
                let off = (p[i] - mid).rem_euclid(period);
                let off = off.min(period - off);
                (off - 0.5 * (c - a)).max(0.0)
            } else if p[i] < a {
                a - p[i]
            } else if p[i] > c {
                p[i] - c
            } else {
                0.0
            };
            d2 += gap * gap;
        }
        d2.sqrt()
    }

    /// Cells within `delta` of a chart point.
    fn cells_near(&self, p: &[f64], delta: f64) -> Vec<usize> {
        let ranges: Vec<Vec<usize>> = (0..p.len())
            .map(|i| {
                let n = self.counts[i] as i64;
                let a = ((p[i] - delta - self.lo[i]) / self.cell_width[i]).floor() as i64;
                let b = ((p[i] + delta - self.lo[i]) / self.cell_width[i]).floor() as i64;
                let mut ks: Vec<usize> = if self.periodic[i] {
                    (a..=b.min(a + n - 1)).map(|k| k.rem_euclid(n) as usize).collect()
                } else {
                    (a.max(0)..=b.min(n - 1)).map(|k| k as usize).collect()
                };
                ks.sort_unstable();
                ks.dedup();
                ks
            })
            .collect();
        let mut out = vec![vec![]];
        for r in &ranges {
            out = out
                .into_iter()
                .flat_map(|pre: Vec<usize>| {
                    r.iter().map(move |&k| {
                        let mut v = pre.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        let mut ids: Vec<usize> = out
            .iter()
            .map(|idx| self.flat(idx))
            .filter(|&id| self.distance_to_cell(p, id) <= delta)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Adjacency rows `from,to`.
    pub fn adjacency_csv(&self) -> String {
        let mut s = String::from("from,to\n");
        for (a, row) in self.edges.iter().enumerate() {
            for b in row {
                s.push_str(&format!("{a},{b}\n"));
            }
        }
        s
    }

    /// Rows `cell_id, lo_1, hi_1, ...`.
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("cell");
        for i in 1..=self.counts.len() {
            s.push_str(&format!(",lo{i},hi{i}"));
        }
        s.push('\n');
        for id in 0..self.len() {
            s.push_str(&id.to_string());
            for [a, b] in self.bounds(id) {
                s.push_str(&format!(",{a},{b}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Pseudo-orbit graph over the landing chart at resolution `h` and jump size `delta`.
pub fn build_graph(sys: &ImpulsiveSystem, h: f64, delta: f64) -> PseudoOrbitGraph {
    let dhat = &sys.dhat;
    let k = dhat.chart_dim();
    let mut counts = Vec::with_capacity(k);
    let mut width = Vec::with_capacity(k);
    let mut lo = Vec::with_capacity(k);
    for i in 0..k {
        let [a, b] = dhat.chart_box[i];
        let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
        counts.push(n);
        width.push((b - a) / n as f64);
        lo.push(a);
    }
    let total: usize = counts.iter().product();
    let mut graph = PseudoOrbitGraph {
        lo,
        cell_width: width,
        counts,
        periodic: (0..k).map(|i| dhat.periodic.get(i).copied().unwrap_or(false)).collect(),
        resolution: h,
        delta,
        images: Vec::new(),
        edges: Vec::new(),
    };
    let images: Vec<CellImage> = (0..total)
        .into_par_iter()
        .map(|id| match poincare(sys, &graph.center(id)) {
            Ok((v, _)) => CellImage::Point(v.iter().copied().collect()),
            Err(crate::Error::NoReturn { .. }) => CellImage::NoReturn,
            Err(e) => CellImage::Error(e.to_string()),
        })
        .collect();
    let edges: Vec<Vec<usize>> = images
        .par_iter()
        .map(|img| match img {
            CellImage::Point(p) => graph.cells_near(p, delta),
            _ => Vec::new(),
        })
        .collect();
    graph.images = images;
    graph.edges = edges;
    graph
}

/// Whether a chain of at least one edge leads from `a` to `b`.
pub fn chain_reaches(graph: &PseudoOrbitGraph, a: usize, b: usize) -> bool {
    let mut seen = vec![false; graph.len()];
    let mut queue: VecDeque<usize> = graph.edges[a].iter().copied().collect();
    while let Some(c) = queue.pop_front() {
        if c == b {
            return true;
        }
        if !seen[c] {
            seen[c] = true;
            queue.extend(graph.edges[c].iter().copied().filter(|n| !seen[*n]));
        }
    }
    false
}

/// Strongly connected components (iterative Tarjan), in discovery order.
pub fn strongly_connected_components(edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = edges.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < edges[v].len() {
                let w = edges[v][*next];
                *next += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Cells lying on a cycle of the graph, sorted.
pub fn chain_recurrent_cells(graph: &PseudoOrbitGraph) -> Vec<usize> {
    let mut out: Vec<usize> = strongly_connected_components(&graph.edges)
        .into_iter()
        .filter(|c| c.len() > 1 || graph.edges[c[0]].contains(&c[0]))
        .flatten()
        .collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaLevel {
    pub h: f64,
    pub delta: f64,
    pub cells: usize,
    pub recurrent: Vec<usize>,
    pub recurrent_centers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub levels: Vec<OmegaLevel>,
    /// `nested[i]`: level `i + 1` lies inside level `i` dilated by one cell.
    pub nested: Vec<bool>,
}

/// Chain-recurrent cells across a sequence of decreasing scales.
pub fn omega_estimate(sys: &ImpulsiveSystem, hs: &[f64], deltas: &[f64]) -> OmegaReport {
    let mut levels = Vec::new();
    let mut graphs = Vec::new();
    for (&h, &delta) in hs.iter().zip(deltas) {
        let g = build_graph(sys, h, delta);
        let rec = chain_recurrent_cells(&g);
        levels.push(OmegaLevel {
            h,
            delta,
            cells: g.len(),
            recurrent_centers: rec.iter().map(|&c| g.center(c).iter().copied().collect()).collect(),
            recurrent: rec,
        });
        graphs.push(g);
    }
    let nested = (1..levels.len())
        .map(|i| {
            let coarse = &graphs[i - 1];
            let dil = coarse.cell_width.iter().fold(0.0_f64, |m, w| m.max(*w)) * (coarse.counts.len() as f64).sqrt();
            levels[i].recurrent_centers.iter().all(|p| {
                levels[i - 1]
                    .recurrent
                    .iter()
                    .any(|&c| coarse.distance_to_cell(p, c) <= dil + 1e-12)
            })
        })
        .collect();
    OmegaReport { levels, nested }
}

/// Ambient surrogate of the non-wandering set: flight arcs from recurrent
/// cell centres to their hits, plus the equilibria of the field.
pub fn ambient_recurrent_set(sys: &ImpulsiveSystem, graph: &PseudoOrbitGraph, samples: usize) -> Vec<Point> {
    let rec = chain_recurrent_cells(graph);
    let arcs: Vec<Vec<Point>> = rec
        .par_iter()
        .map(|&c| {
            let v = graph.center(c);
            let Ok(x) = sys.dhat.chart_to_ambient(&v) else {
                return vec![];
            };
            let Ok(hit) = first_hit(sys, &x, sys.opts.horizon) else {
                return vec![x];
            };
            if !hit.is_finite() {
                return vec![x];
            }
            let n = samples.max(1);
            (0..=n)
                .filter_map(|j| {
                    let t = hit.tau1 * j as f64 / n as f64;
                    flow::flow(&sys.system, &x, t, &sys.opts.integrator).ok().map(|r| r.endpoint)
                })
                .collect()
        })
        .collect();
    let mut pts: Vec<Point> = arcs.into_iter().flatten().collect();
    pts.extend(sys.system.equilibria());
    pts
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> f64 {
    let one_way = |p: &[Point], q: &[Point]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    one_way(a, b).max(one_way(b, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub level: Option<u32>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiledCube {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub depth: u32,
    pub tiles: Vec<Tile>,
}

/// `alpha_i = 1 + sum_{j <= i} 2^{-j}`.
pub fn tiling_radius(i: u32) -> f64 {
    3.0 - 0.5f64.powi(i as i32)
}

impl TiledCube {
    pub fn measure(&self) -> f64 {
        self.tiles
            .iter()
            .map(|t| t.lo.iter().zip(&t.hi).map(|(a, b)| b - a).product::<f64>())
            .sum()
    }

    /// Measure of the region `center + (half_width / 3) [-alpha_depth, alpha_depth]^k`.
    pub fn region_measure(&self) -> f64 {
        let side = 2.0 * tiling_radius(self.depth) * self.half_width / 3.0;
        side.powi(self.center.len() as i32)
    }
}

/// Tiling of the cube `center +/- half_width` (identified with `]-3, 3[^k`):
/// the central cube `[-1, 1]^k` plus, for each level `i <= depth`, the
/// outermost layer of side-`2^{-i}` tiles inside `[-alpha_i, alpha_i]^k`.
pub fn tile_cube(center: &[f64], half_width: f64, depth: u32) -> TiledCube {
    let depth = depth.min(8);
    let k = center.len();
    let scale = half_width / 3.0;
    let to_chart = |y: &[f64]| -> Vec<f64> { y.iter().zip(center).map(|(v, c)| c + scale * v).collect() };
    let mut tiles = vec![Tile {
        level: None,
        lo: to_chart(&vec![-1.0; k]),
        hi: to_chart(&vec![1.0; k]),
    }];
    for i in 0..=depth {
        let m = (3i64 << i) - 1; // 2^i alpha_i
        let side = 0.5f64.powi(i as i32);
        let mut idx = vec![-m; k];
        loop {
            if idx.iter().any(|&v| v == -m || v == m - 1) {
                let lo: Vec<f64> = idx.iter().map(|&v| v as f64 * side).collect();
                let hi: Vec<f64> = lo.iter().map(|v| v + side).collect();
                tiles.push(Tile {
                    level: Some(i),
                    lo: to_chart(&lo),
                    hi: to_chart(&hi),
                });
            }
            // odometer over [-m, m-1]^k
            let mut j = 0;
            loop {
                if j == k {
                    break;
                }
                idx[j] += 1;
                if idx[j] <= m - 1 {
                    break;
                }
                idx[j] = -m;
                j += 1;
            }
            if j == k {
                break;
            }
        }
    }
    TiledCube {
        center: center.to_vec(),
        half_width,
        depth,
        tiles,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Overlap,
    Containment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCertificate {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub order: usize,
    pub epsilon: f64,
    pub disjoint: bool,
    pub witness: Option<(usize, usize)>,
    pub witness_kind: Option<WitnessKind>,
}

/// `f_I = I^{-1} o P_I o I` on the impulsive region: the `D`-chart hit of the
/// orbit landing at `I(u)`.
pub fn section_map(sys: &ImpulsiveSystem, u: &Point) -> crate::Result<Point> {
    let v = sys.impulse.apply(u)?;
    let hit = hit_from_chart(sys, &v)?;
    hit.hit_chart.ok_or(crate::Error::NoReturn {
        horizon: sys.opts.horizon,
    })
}

/// Boundary samples of the inflated cube, as a closed polygon in 2-D.
fn cube_samples(center: &[f64], hw: f64) -> Vec<Point> {
    match center.len() {
        1 => (0..=400)
            .map(|i| DVector::from_vec(vec![center[0] - hw + 2.0 * hw * i as f64 / 400.0]))
            .collect(),
        _ => {
            let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
            let mut pts = Vec::new();
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                for j in 0..100 {
                    let s = j as f64 / 100.0;
                    pts.push(DVector::from_vec(vec![
                        center[0] + hw * (a.0 + s * (b.0 - a.0)),
                        center[1] + hw * (a.1 + s * (b.1 - a.1)),
                    ]));
                }
            }
            pts
        }
    }
}

fn segments_cross(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let orient = |a: &Point, b: &Point, c: &Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

fn inside_polygon(p: &Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn sets_overlap(a: &[Point], b: &[Point]) -> bool {
    if a[0].len() == 1 {
        let span = |s: &[Point]| {
            s.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])))
        };
        let (a0, a1) = span(a);
        let (b0, b1) = span(b);
        return a0 <= b1 && b0 <= a1;
    }
    let (na, nb) = (a.len(), b.len());
    for i in 0..na {
        for j in 0..nb {
            if segments_cross(&a[i], &a[(i + 1) % na], &b[j], &b[(j + 1) % nb]) {
                return true;
            }
        }
    }
    inside_polygon(&a[0], b) || inside_polygon(&b[0], a)
}

/// Certify that `f_I^l((1 + 2 eps) C)`, `0 <= l <= N`, are pairwise disjoint
/// and inside the interior of `D`. Overlaps are reported before containment failures.
pub fn verify_box(sys: &ImpulsiveSystem, center: &[f64], half_width: f64, order: usize, epsilon: f64) -> BoxCertificate {
    let hw = (1.0 + 2.0 * epsilon) * half_width;
    let inside = |p: &Point| sys.d.contains(p) && sys.d.boundary_distance(p) > 0.0;
    let base: Vec<Point> = cube_samples(center, hw);
    let mut contained = vec![base.iter().all(inside)];
    let mut layers = vec![base];
    for _ in 0..order {
        let prev = layers.last().unwrap();
        // points whose image is undefined have left the region
        let next: Vec<Point> = prev.iter().filter_map(|u| section_map(sys, u).ok()).collect();
        contained.push(next.len() == prev.len() && !next.is_empty() && next.iter().all(inside));
        layers.push(next);
    }
    let mut cert = BoxCertificate {
        center: center.to_vec(),
        half_width,
        order,
        epsilon,
        disjoint: true,
        witness: None,
        witness_kind: None,
    };
    if center.len() > 2 {
        cert.disjoint = false;
        return cert;
    }
    for l in 0..=order {
        for m in l + 1..=order {
            let (a, b) = (&layers[l], &layers[m]);
            if !a.is_empty() && !b.is_empty() {
                if sets_overlap(a, b) {
                    cert.disjoint = false;
                    cert.witness = Some((l, m));
                    cert.witness_kind = Some(WitnessKind::Overlap);
                    return cert;
                }
            }
        }
    }
    if let Some(l) = contained.iter().position(|c| !c) {
        cert.disjoint = false;
        cert.witness = Some((l, l));
        cert.witness_kind = Some(WitnessKind::Containment);
    }
    cert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    /// `|T_k T_{k-1}^{-1}|` for `k = 1..N`.
    pub forward: Vec<f64>,
    /// `|T_{k-1} T_k^{-1}|`.
    pub backward: Vec<f64>,
    /// Per-step a-priori bound `|Dchart^-1| (|X| |dtau| + |Dphi|) |Dchart| |DI|`.
    pub step_bounds: Vec<f64>,
    pub max: f64,
    pub unbounded: bool,
}

/// Quotients of `T_k = DI^{-1} . DP^k . DI` along the orbit of `u` in `D`.
pub fn transition_norm_bound(sys: &ImpulsiveSystem, u: &Point, n: usize) -> crate::Result<TransitionReport> {
    let mut forward = Vec::with_capacity(n);
    let mut backward = Vec::with_capacity(n);
    let mut bounds = Vec::with_capacity(n);
    let mut cur = u.clone();
    for _ in 0..n {
        let di = sys.impulse.jacobian(&cur)?;
        let v = sys.impulse.apply(&cur)?;
        let hit = hit_from_chart(sys, &v)?;
        let y = hit.hit_chart.clone().ok_or(crate::Error::NoReturn {
            horizon: sys.opts.horizon,
        })?;
        let hp = hit.hit_point.clone().unwrap();
        let hj = hit.hit_jacobian.clone().unwrap();
        let dt = hit.dtau1.clone().unwrap();
        let xf = sys.system.field(&hp);
        let dphi = &hj - &xf * dt.transpose();
        let linv = left_inverse(&sys.d.chart_jacobian(&y)).ok_or(crate::Error::Singularity {
            section: sys.d.name.clone(),
        })?;
        let dc = sys.dhat.chart_jacobian(&v);
        // T_k T_{k-1}^{-1} = D f_I at the current point
        let step = &linv * &hj * &dc * &di;
        forward.push(op_norm(&step));
        backward.push(step.clone().try_inverse().map(|m| op_norm(&m)).unwrap_or(f64::INFINITY));
        bounds.push(op_norm(&linv) * (xf.norm() * dt.norm() + op_norm(&dphi)) * op_norm(&dc) * op_norm(&di));
        cur = y;
    }
    let max = forward.iter().chain(&backward).fold(0.0_f64, |m, v| m.max(*v));
    let unbounded = bounds.iter().any(|b| !b.is_finite() || *b > 1e6) || !max.is_finite();
    Ok(TransitionReport {
        forward,
        backward,
        step_bounds: bounds,
        max,
        unbounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_example, make_example};
    use crate::linalg::point;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn example(name: &str) -> ImpulsiveSystem {
        default_example(name).unwrap().build().unwrap()
    }

    fn brute_recurrent(edges: &[Vec<usize>]) -> Vec<usize> {
        let n = edges.len();
        (0..n)
            .filter(|&a| {
                let mut seen = vec![false; n];
                let mut stack: Vec<usize> = edges[a].clone();
                while let Some(c) = stack.pop() {
                    if c == a {
                        return true;
                    }
                    if !seen[c] {
                        seen[c] = true;
                        stack.extend(edges[c].iter().copied());
                    }
                }
                false
            })
            .collect()
    }

    proptest! {
        #[test]
        fn tarjan_matches_reachability(raw in proptest::collection::vec(proptest::collection::vec(0usize..12, 0..3), 12)) {
            let mut g = PseudoOrbitGraph {
                lo: vec![0.0], cell_width: vec![1.0], counts: vec![12], periodic: vec![false],
                resolution: 1.0, delta: 0.0, images: vec![CellImage::NoReturn; 12], edges: raw,
            };
            for row in &mut g.edges { row.sort_unstable(); row.dedup(); }
            prop_assert_eq!(chain_recurrent_cells(&g), brute_recurrent(&g.edges));
        }
    }

    #[test]
    fn annulus_graph() {
        let an = example("annulus");
        let g = build_graph(&an, 0.01, 0.01);
        assert_eq!(g.len(), 50);
        let rec = chain_recurrent_cells(&g);
        assert!(!rec.is_empty());
        // the fixed radius, dilated by delta / (1 - slope) plus one cell
        for &c in &rec {
            assert!((g.center(c)[0] - 1.0).abs() <= 0.02 + 0.01 + 1e-12);
        }
        let fixed = g.cell_of(&[1.0]).unwrap();
        let far = g.cell_of(&[1.45]).unwrap();
        assert!(chain_reaches(&g, far, fixed));
        assert!(!chain_reaches(&g, fixed, far));
        // edge invariant
        for (a, row) in g.edges.iter().enumerate() {
            let CellImage::Point(p) = &g.images[a] else { continue };
            for &b in row {
                assert!((p[0] - g.center(b)[0]).abs() <= g.delta + g.resolution / 2.0 + 1e-12);
            }
        }
        assert!(g.adjacency_csv().starts_with("from,to\n"));
        assert_eq!(g.cells_csv().lines().count(), 51);
    }

    #[test]
    fn radial_graph_all_recurrent() {
        let rd = example("radial_disk");
        let g = build_graph(&rd, 0.1, 0.05);
        assert_eq!(chain_recurrent_cells(&g).len(), g.len());
        let mut p = BTreeMap::new();
        p.insert("delta".to_string(), 0.0);
        let flat = make_example("radial_disk", &p).unwrap().build().unwrap();
        let g0 = build_graph(&flat, 0.1, 0.05);
        let bad: Vec<_> = g0.images.iter().enumerate().filter(|(_, i)| **i != CellImage::NoReturn).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert!(chain_recurrent_cells(&g0).is_empty());
        assert!(!chain_reaches(&g0, 0, 0));
    }

    #[test]
    fn omega_nested() {
        let an = example("annulus");
        let rep = omega_estimate(&an, &[0.04, 0.02, 0.01], &[0.04, 0.02, 0.01]);
        assert!(rep.nested.iter().all(|b| *b));
        let counts: Vec<usize> = rep.levels.iter().map(|l| l.recurrent.len()).collect();
        assert!(counts.iter().all(|c| *c >= 1));
        let pp = example("predator_prey");
        let rep = omega_estimate(&pp, &[0.05, 0.025], &[0.05, 0.025]);
        for l in &rep.levels {
            assert!(l.recurrent_centers.iter().all(|c| c[0] < 2.0 * l.h + l.delta));
        }
    }

    #[test]
    fn tiles_partition() {
        let t = tile_cube(&[0.0], 3.0, 0);
        // central tile plus the two side-1 tiles of the ring
        assert_eq!(t.tiles.len(), 3);
        for depth in 0..=4 {
            for c in [vec![0.5], vec![0.1, -0.2]] {
                let t = tile_cube(&c, 0.3, depth);
                assert!((t.measure() - t.region_measure()).abs() < 1e-12);
                for tile in t.tiles.iter().filter(|t| t.level.is_some()) {
                    let side = (tile.hi[0] - tile.lo[0]) * 3.0 / 0.3;
                    assert!((side - 0.5f64.powi(tile.level.unwrap() as i32)).abs() < 1e-12);
                }
            }
        }
        let t = tile_cube(&[0.0, 0.0], 3.0, 0);
        assert_eq!(t.tiles.len(), 1 + 12);
    }

    #[test]
    fn box_certificates() {
        let an = example("annulus");
        let ok = verify_box(&an, &[1.6], 0.02, 2, 0.1);
        assert!(ok.disjoint, "{ok:?}");
        let smaller = verify_box(&an, &[1.6], 0.01, 2, 0.1);
        assert!(smaller.disjoint);
        let bad = verify_box(&an, &[1.0], 0.05, 1, 0.1);
        assert!(!bad.disjoint);
        assert_eq!(bad.witness, Some((0, 1)));
        let exits = verify_box(&an, &[1.9], 0.05, 1, 1.0);
        assert!(!exits.disjoint);
        assert_eq!(exits.witness_kind, Some(WitnessKind::Containment));
    }

    #[test]
    fn transitions() {
        let an = example("annulus");
        let rep = transition_norm_bound(&an, &point(&[1.6]), 5).unwrap();
        for (f, b) in rep.forward.iter().zip(&rep.step_bounds) {
            assert!((f - 0.5).abs() < 1e-9);
            assert!(*f <= b + 1e-12);
        }
        assert!(!rep.unbounded);
        let bi = example("disk_billiard");
        let rep = transition_norm_bound(&bi, &point(&[0.1, 0.5]), 3).unwrap();
        assert!(rep.max.is_finite());
        let mut p = BTreeMap::new();
        p.insert("interchanged".to_string(), 1.0);
        let lz = make_example("lorenz_skew", &p).unwrap().build().unwrap();
        let rep = transition_norm_bound(&lz, &point(&[1e-8, 0.2]), 1).unwrap();
        assert!(rep.unbounded);
    }
}
