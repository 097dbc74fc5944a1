//! Connected-component labeling (26-connectivity) and skeletonization of binary
//! masks into ordered medial-axis polylines.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::volume::Volume3;

/// Side branches shorter than this many voxels are pruned.
pub const PRUNE_LENGTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// 1-based label; label 1 is the largest component.
    pub label: u32,
    /// Flat voxel indices in ascending order.
    pub voxels: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.voxels.len()
    }
}

#[derive(Debug, Clone)]
pub struct Labeling {
    pub dims: [usize; 3],
    /// Per-voxel label, 0 for background.
    pub labels: Vec<u32>,
    /// Sorted by size descending, ties by smallest voxel index.
    pub components: Vec<Component>,
}

impl Labeling {
    /// Labels as a volume sharing the mask's geometry.
    pub fn to_volume(&self, like: &Volume3) -> Result<Volume3> {
        like.with_data(self.labels.iter().map(|&l| l as f32).collect())
    }
}

fn neighbors26(dims: [usize; 3], idx: usize, out: &mut Vec<usize>) {
    out.clear();
    let [nx, ny, nz] = dims;
    let i = idx % nx;
    let j = (idx / nx) % ny;
    let k = idx / (nx * ny);
    for dk in -1i64..=1 {
        let kk = k as i64 + dk;
        if kk < 0 || kk >= nz as i64 {
            continue;
        }
        for dj in -1i64..=1 {
            let jj = j as i64 + dj;
            if jj < 0 || jj >= ny as i64 {
                continue;
            }
            for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= nx as i64 || (di == 0 && dj == 0 && dk == 0) {
                    continue;
                }
                out.push(ii as usize + nx * (jj as usize + ny * kk as usize));
            }
        }
    }
}

/// Labels the nonzero voxels of `mask` by 26-connectivity.
pub fn connected_components(mask: &Volume3) -> Labeling {
    let fg: Vec<bool> = mask.data().iter().map(|&v| v != 0.0).collect();
    label_bool(mask.dims(), &fg)
}

/// Labels a flat boolean mask, largest component first.
pub fn label_bool(dims: [usize; 3], fg: &[bool]) -> Labeling {
    let mut labels = vec![0u32; fg.len()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut nb = Vec::with_capacity(26);
    for start in 0..fg.len() {
        if !fg[start] || labels[start] != 0 {
            continue;
        }
        let tmp = comps.len() as u32 + 1;
        labels[start] = tmp;
        queue.push_back(start);
        let mut vox = Vec::new();
        while let Some(v) = queue.pop_front() {
            vox.push(v);
            neighbors26(dims, v, &mut nb);
            for &w in &nb {
                if fg[w] && labels[w] == 0 {
                    labels[w] = tmp;
                    queue.push_back(w);
                }
            }
        }
        vox.sort_unstable();
        comps.push(vox);
    }
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by(|&a, &b| comps[b].len().cmp(&comps[a].len()).then(comps[a][0].cmp(&comps[b][0])));
    let mut remap = vec![0u32; comps.len() + 1];
    for (rank, &c) in order.iter().enumerate() {
        remap[c + 1] = rank as u32 + 1;
    }
    for l in labels.iter_mut() {
        *l = remap[*l as usize];
    }
    let mut slots: Vec<Option<Vec<usize>>> = comps.into_iter().map(Some).collect();
    let components = order
        .iter()
        .enumerate()
        .map(|(rank, &c)| Component { label: rank as u32 + 1, voxels: slots[c].take().unwrap() })
        .collect();
    Labeling { dims, labels, components }
}

/// Ordered medial axis of one region, in world coordinates (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct MedialAxisLine {
    pub points: Vec<Vec3>,
    pub roi: usize,
}

impl MedialAxisLine {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn reversed(&self) -> MedialAxisLine {
        let mut points = self.points.clone();
        points.reverse();
        MedialAxisLine { points, roi: self.roi }
    }
}

/// Skeleton of the nonzero voxels of `mask` (expected to be one component).
pub fn skeletonize(mask: &Volume3) -> Result<MedialAxisLine> {
    let voxels: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
        .collect();
    skeletonize_voxels(mask, &voxels, 0)
}

/// Skeleton of a voxel set given by flat indices into `grid`'s geometry.
pub fn skeletonize_voxels(grid: &Volume3, voxels: &[usize], roi: usize) -> Result<MedialAxisLine> {
    if voxels.is_empty() {
        return Err(Error::Empty("skeleton of an empty region".into()));
    }
    let local = LocalGrid::new(grid, voxels);
    let skel = local.thin();
    if skel.is_empty() {
        return Err(Error::Empty("region thinned to nothing".into()));
    }
    let path = local.longest_path(&skel);
    let points = path
        .iter()
        .map(|&l| {
            let [i, j, k] = local.global_coords(l);
            grid.voxel_to_world([i as f64, j as f64, k as f64])
        })
        .collect();
    Ok(MedialAxisLine { points, roi })
}

/// Padded bounding-box subgrid around a voxel set.
struct LocalGrid {
    dims: [usize; 3],
    offset: [i64; 3],
    spacing: [f64; 3],
    fg: Vec<bool>,
}

impl LocalGrid {
    fn new(grid: &Volume3, voxels: &[usize]) -> Self {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for &v in voxels {
            let c = grid.coords(v);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let dims = [hi[0] - lo[0] + 3, hi[1] - lo[1] + 3, hi[2] - lo[2] + 3];
        let offset = [lo[0] as i64 - 1, lo[1] as i64 - 1, lo[2] as i64 - 1];
        let mut fg = vec![false; dims.iter().product()];
        for &v in voxels {
            let c = grid.coords(v);
            let l = (c[0] as i64 - offset[0]) as usize
                + dims[0] * ((c[1] as i64 - offset[1]) as usize + dims[1] * (c[2] as i64 - offset[2]) as usize);
            fg[l] = true;
        }
        LocalGrid { dims, offset, spacing: grid.spacing(), fg }
    }

    fn coords(&self, l: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [l % nx, (l / nx) % ny, l / (nx * ny)]
    }

    fn global_coords(&self, l: usize) -> [usize; 3] {
        let c = self.coords(l);
        [
            (c[0] as i64 + self.offset[0]) as usize,
            (c[1] as i64 + self.offset[1]) as usize,
            (c[2] as i64 + self.offset[2]) as usize,
        ]
    }

    /// Global x-fastest flat index, used for tie-breaking.
    fn global_key(&self, l: usize) -> [usize; 3] {
        let [i, j, k] = self.global_coords(l);
        [k, j, i]
    }

    /// Squared Euclidean distance (mm^2) of each foreground voxel to the background.
    fn distance_transform(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.fg.iter().map(|&f| if f { f64::INFINITY } else { 0.0 }).collect();
        let [nx, ny, nz] = self.dims;
        let mut line = Vec::new();
        let mut out = Vec::new();
        for axis in 0..3 {
            let h2 = self.spacing[axis] * self.spacing[axis];
            let (n, stride, lines): (usize, usize, Vec<usize>) = match axis {
                0 => (nx, 1, (0..ny * nz).map(|r| r * nx).collect()),
                1 => (ny, nx, (0..nz).flat_map(|k| (0..nx).map(move |i| i + k * nx * ny)).collect()),
                _ => (nz, nx * ny, (0..nx * ny).collect()),
            };
            for start in lines {
                line.clear();
                line.extend((0..n).map(|t| d[start + t * stride]));
                edt_1d(&line, h2, &mut out);
                for t in 0..n {
                    d[start + t * stride] = out[t];
                }
            }
        }
        d
    }

    /// Iterative thinning: border voxels are removed in increasing distance
    /// order while they are simple and not line endpoints.
    fn thin(&self) -> Vec<bool> {
        let dt = self.distance_transform();
        let mut fg = self.fg.clone();
        let [nx, ny, _] = self.dims;
        let six = [1isize, -1, nx as isize, -(nx as isize), (nx * ny) as isize, -((nx * ny) as isize)];
        loop {
            let mut border: Vec<usize> = (0..fg.len())
                .filter(|&l| fg[l] && six.iter().any(|&o| !fg[(l as isize + o) as usize]))
                .collect();
            border.sort_by(|&a, &b| dt[a].total_cmp(&dt[b]).then(self.global_key(a).cmp(&self.global_key(b))));
            let mut removed = 0;
            for l in border {
                let cube = self.cube(&fg, l);
                let count = cube.iter().filter(|&&b| b).count() - 1;
                if count <= 1 {
                    continue; // isolated point or line end
                }
                if is_simple(&cube) {
                    fg[l] = false;
                    removed += 1;
                }
            }
            if removed == 0 {
                break;
            }
        }
        fg
    }

    /// 3x3x3 neighborhood around an interior voxel, index `a + 3b + 9c`.
    fn cube(&self, fg: &[bool], l: usize) -> [bool; 27] {
        let [nx, ny, _] = self.dims;
        let mut out = [false; 27];
        for c in 0..3 {
            for b in 0..3 {
                for a in 0..3 {
                    let idx = l as isize + (a as isize - 1) + (b as isize - 1) * nx as isize + (c as isize - 1) * (nx * ny) as isize;
                    out[a + 3 * b + 9 * c] = fg[idx as usize];
                }
            }
        }
        out
    }

    fn step_length(&self, a: [usize; 3], b: [usize; 3]) -> f64 {
        (0..3)
            .map(|t| ((a[t] as f64 - b[t] as f64) * self.spacing[t]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn adjacency(&self, skel: &[bool]) -> (Vec<usize>, Vec<Vec<usize>>) {
        let nodes: Vec<usize> = (0..skel.len()).filter(|&l| skel[l]).collect();
        let mut pos = vec![usize::MAX; skel.len()];
        for (n, &l) in nodes.iter().enumerate() {
            pos[l] = n;
        }
        let mut nb = Vec::with_capacity(26);
        let adj = nodes
            .iter()
            .map(|&l| {
                neighbors26(self.dims, l, &mut nb);
                let mut v: Vec<usize> = nb.iter().filter(|&&w| skel[w]).map(|&w| pos[w]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        (nodes, adj)
    }

    /// Removes side branches shorter than [`PRUNE_LENGTH`], then returns the
    /// longest geodesic path between skeleton endpoints.
    fn longest_path(&self, skel: &[bool]) -> Vec<usize> {
        let mut skel = skel.to_vec();
        loop {
            let (nodes, adj) = self.adjacency(&skel);
            let mut pruned = false;
            for start in 0..nodes.len() {
                if adj[start].len() != 1 {
                    continue;
                }
                // walk to the first junction
                let mut branch = vec![start];
                let mut prev = usize::MAX;
                let mut cur = start;
                let mut junction = false;
                loop {
                    let next: Vec<usize> = adj[cur].iter().copied().filter(|&w| w != prev && !branch.contains(&w)).collect();
                    if adj[cur].len() >= 3 && cur != start {
                        junction = true;
                        branch.pop();
                        break;
                    }
                    match next.first() {
                        Some(&w) if next.len() == 1 => {
                            prev = cur;
                            cur = w;
                            branch.push(w);
                        }
                        _ => break,
                    }
                    if branch.len() > PRUNE_LENGTH {
                        break;
                    }
                }
                if junction && branch.len() < PRUNE_LENGTH {
                    for &b in &branch {
                        skel[nodes[b]] = false;
                    }
                    pruned = true;
                }
            }
            if !pruned {
                break;
            }
        }
        let (nodes, adj) = self.adjacency(&skel);
        let coords: Vec<[usize; 3]> = nodes.iter().map(|&l| self.coords(l)).collect();
        let keys: Vec<[usize; 3]> = nodes.iter().map(|&l| self.global_key(l)).collect();
        let mut ends: Vec<usize> = (0..nodes.len()).filter(|&n| adj[n].len() <= 1).collect();
        if ends.is_empty() {
            ends = (0..nodes.len()).collect();
        }
        ends.sort_by_key(|&n| keys[n]);
        let mut best: Option<(f64, usize, usize, Vec<usize>)> = None;
        for &s in &ends {
            let (dist, pred) = dijkstra(&adj, &coords, s, |a, b| self.step_length(a, b), &keys);
            for &t in &ends {
                if !dist[t].is_finite() || (t != s && keys[t] < keys[s]) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((d, _, _, _)) => dist[t] > *d + 1e-12,
                };
                if better {
                    let mut path = vec![t];
                    let mut c = t;
                    while c != s {
                        c = pred[c];
                        path.push(c);
                    }
                    path.reverse();
                    best = Some((dist[t], s, t, path));
                }
            }
        }
        best.map(|(_, _, _, p)| p.into_iter().map(|n| nodes[n]).collect()).unwrap_or_default()
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, [usize; 3], usize);
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

fn dijkstra(
    adj: &[Vec<usize>],
    coords: &[[usize; 3]],
    s: usize,
    w: impl Fn([usize; 3], [usize; 3]) -> f64,
    keys: &[[usize; 3]],
) -> (Vec<f64>, Vec<usize>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(HeapItem(0.0, keys[s], s));
    while let Some(HeapItem(d, _, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in &adj[u] {
            let nd = d + w(coords[u], coords[v]);
            if nd < dist[v] - 1e-12 {
                dist[v] = nd;
                pred[v] = u;
                heap.push(HeapItem(nd, keys[v], v));
            } else if nd <= dist[v] + 1e-12 && v != s && keys[u] < keys[pred[v]] {
                pred[v] = u;
            }
        }
    }
    (dist, pred)
}

/// Lower-envelope squared distance transform of one line (Felzenszwalb-Huttenlocher).
pub fn edt_1d(f: &[f64], h2: f64, out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k: usize = 0;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else { return };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sep = |q: usize, p: usize| -> f64 {
        ((f[q] / h2 + (q * q) as f64) - (f[p] / h2 + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = sep(q, v[k]);
        while s <= z[k] {
            if k == 0 {
                break;
            }
            k -= 1;
            s = sep(q, v[k]);
        }
        if s <= z[k] {
            // k == 0 and the new parabola dominates everywhere
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = d * d * h2 + f[v[k]];
    }
}

/// Simple-point test for (26, 6) topology on a 3x3x3 cube with the center set.
pub fn is_simple(cube: &[bool; 27]) -> bool {
    // foreground: exactly one 26-component among the 26 neighbors
    let mut seen = [false; 27];
    let mut fg_comps = 0;
    for s in 0..27 {
        if s == 13 || !cube[s] || seen[s] {
            continue;
        }
        fg_comps += 1;
        if fg_comps > 1 {
            return false;
        }
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            let (ua, ub, uc) = ((u % 3) as i32, ((u / 3) % 3) as i32, (u / 9) as i32);
            for w in 0..27 {
                if w == 13 || seen[w] || !cube[w] {
                    continue;
                }
                let (wa, wb, wc) = ((w % 3) as i32, ((w / 3) % 3) as i32, (w / 9) as i32);
                if (ua - wa).abs() <= 1 && (ub - wb).abs() <= 1 && (uc - wc).abs() <= 1 {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    if fg_comps != 1 {
        return false;
    }
    // background: exactly one 6-component within the 18-neighborhood touching a face neighbor
    let in18 = |w: usize| {
        let (a, b, c) = (w % 3, (w / 3) % 3, w / 9);
        let ones = [a, b, c].iter().filter(|&&x| x == 1).count();
        ones >= 1 && w != 13
    };
    let faces = [4usize, 10, 12, 14, 16, 22];
    let mut seen = [false; 27];
    let mut bg_comps = 0;
    for &s in &faces {
        if cube[s] || seen[s] {
            continue;
        }
        bg_comps += 1;
        if bg_comps > 1 {
            return false;
        }
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            let (ua, ub, uc) = ((u % 3) as i32, ((u / 3) % 3) as i32, (u / 9) as i32);
            for (da, db, dc) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
                let (wa, wb, wc) = (ua + da, ub + db, uc + dc);
                if !(0..3).contains(&wa) || !(0..3).contains(&wb) || !(0..3).contains(&wc) {
                    continue;
                }
                let w = (wa + 3 * wb + 9 * wc) as usize;
                if seen[w] || cube[w] || !in18(w) {
                    continue;
                }
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    bg_comps == 1
}
