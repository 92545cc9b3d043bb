//! Boundary-fitted simplicial meshes built from a structured template of
//! the unit ball: a cube (square) core surrounded by layers that blend the
//! cube surface into the equiangular sphere, mapped onto the domain.
//! Triangles are Delaunay-flipped; hexahedra are split into 12 tetrahedra
//! around a centre vertex with face diagonals chosen through the smallest
//! global vertex id, which keeps shared faces conforming.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

use super::{DomainSpec, GeometryError};

pub const MAX_ASPECT_RATIO: f64 = 20.0;
const CORE_HALF_WIDTH: f64 = 0.5;

/// Compressed adjacency lists.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Csr {
    fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut items = Vec::new();
        for l in lists {
            items.extend(l);
            offsets.push(items.len());
        }
        Self { offsets, items }
    }

    fn get(&self, i: usize) -> &[usize] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Debug, Clone)]
struct Locator {
    origin: Vec<f64>,
    size: f64,
    dims: Vec<usize>,
    buckets: Csr,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    /// Target edge length.
    pub h: f64,
    /// Vertex coordinates, `dim` per vertex.
    pub coords: Vec<f64>,
    /// Vertex ids, `dim + 1` per cell, positively oriented.
    pub cells: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Outward unit normals aligned with `boundary`, `dim` per entry.
    pub normals: Vec<f64>,
    is_boundary: Vec<bool>,
    vertex_cells: Csr,
    neighbors: Csr,
    locator: Locator,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub cells: usize,
    pub boundary_vertices: usize,
    pub total_volume: f64,
    pub min_volume: f64,
    pub max_aspect_ratio: f64,
    pub max_edge: f64,
}

impl Mesh {
    /// Assembles a mesh from raw tables; cells are reoriented to positive
    /// volume and adjacency is rebuilt.
    pub fn from_parts(
        dim: usize,
        h: f64,
        coords: Vec<f64>,
        mut cells: Vec<usize>,
        boundary: Vec<usize>,
        normals: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let k = dim + 1;
        let nv = coords.len() / dim;
        for c in 0..cells.len() / k {
            let vol = signed_volume(dim, &coords, &cells[c * k..(c + 1) * k]);
            if vol < 0.0 {
                cells.swap(c * k, c * k + 1);
            } else if vol == 0.0 {
                return Err(GeometryError::InvertedCell { cell: c, volume: vol });
            }
        }
        let mut vc = vec![Vec::new(); nv];
        let mut nb = vec![Vec::new(); nv];
        for (c, cell) in cells.chunks(k).enumerate() {
            for &a in cell {
                vc[a].push(c);
                for &b in cell {
                    if a != b {
                        nb[a].push(b);
                    }
                }
            }
        }
        for l in nb.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let mut is_boundary = vec![false; nv];
        for &b in &boundary {
            is_boundary[b] = true;
        }
        let locator = build_locator(dim, h, &coords, &cells);
        Ok(Self {
            dim,
            h,
            coords,
            cells,
            boundary,
            normals,
            is_boundary,
            vertex_cells: Csr::from_lists(vc),
            neighbors: Csr::from_lists(nb),
            locator,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    /// Cells containing vertex `i`, in increasing order.
    pub fn vertex_cells(&self, i: usize) -> &[usize] {
        self.vertex_cells.get(i)
    }

    /// Vertices sharing a cell with `i`, sorted.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.neighbors.get(i)
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_volume(self.dim, &self.coords, self.cell(c))
    }

    pub fn aspect_ratio(&self, c: usize) -> f64 {
        aspect_ratio(self.dim, &self.coords, self.cell(c))
    }

    pub fn stats(&self) -> MeshStats {
        let mut total = crate::numerics::CompensatedSum::default();
        let mut min_volume = f64::INFINITY;
        let mut max_aspect: f64 = 0.0;
        let mut max_edge: f64 = 0.0;
        for c in 0..self.n_cells() {
            let v = self.cell_volume(c);
            total.add(v);
            min_volume = min_volume.min(v);
            max_aspect = max_aspect.max(self.aspect_ratio(c));
            let cell = self.cell(c);
            for i in 0..cell.len() {
                for j in i + 1..cell.len() {
                    max_edge = max_edge.max(super::dist(self.vertex(cell[i]), self.vertex(cell[j])));
                }
            }
        }
        MeshStats {
            vertices: self.n_vertices(),
            cells: self.n_cells(),
            boundary_vertices: self.boundary.len(),
            total_volume: total.value(),
            min_volume,
            max_aspect_ratio: max_aspect,
            max_edge,
        }
    }

    /// Barycentric coordinates of `x` in cell `c`.
    pub fn barycentric(&self, c: usize, x: &[f64]) -> Vec<f64> {
        let cell = self.cell(c);
        let v0 = self.vertex(cell[0]);
        let d = self.dim;
        let mut lam = vec![0.0; d + 1];
        if d == 2 {
            let (a, b) = (self.vertex(cell[1]), self.vertex(cell[2]));
            let m = [[a[0] - v0[0], b[0] - v0[0]], [a[1] - v0[1], b[1] - v0[1]]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let r = [x[0] - v0[0], x[1] - v0[1]];
            lam[1] = (r[0] * m[1][1] - m[0][1] * r[1]) / det;
            lam[2] = (m[0][0] * r[1] - r[0] * m[1][0]) / det;
        } else {
            let cols: Vec<[f64; 3]> = (1..4)
                .map(|k| {
                    let p = self.vertex(cell[k]);
                    [p[0] - v0[0], p[1] - v0[1], p[2] - v0[2]]
                })
                .collect();
            let r = [x[0] - v0[0], x[1] - v0[1], x[2] - v0[2]];
            let det = det3(cols[0], cols[1], cols[2]);
            lam[1] = det3(r, cols[1], cols[2]) / det;
            lam[2] = det3(cols[0], r, cols[2]) / det;
            lam[3] = det3(cols[0], cols[1], r) / det;
        }
        lam[0] = 1.0 - lam[1..].iter().sum::<f64>();
        lam
    }

    fn bucket_of(&self, x: &[f64]) -> usize {
        let loc = &self.locator;
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            let i = ((x[k] - loc.origin[k]) / loc.size).floor().clamp(0.0, (loc.dims[k] - 1) as f64) as usize;
            idx = idx * loc.dims[k] + i;
        }
        idx
    }

    /// Cell containing `x` with its barycentric coordinates. Points slightly
    /// outside the mesh are attributed to the nearest cell in their bucket
    /// with clamped coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let cand = self.locator.buckets.get(self.bucket_of(x));
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for &c in cand {
            let lam = self.barycentric(c, x);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((c, lam));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((c, lam, worst));
            }
        }
        best.map(|(c, lam, _)| {
            let clamped: Vec<f64> = lam.iter().map(|v| v.max(0.0)).collect();
            let s: f64 = clamped.iter().sum();
            (c, clamped.into_iter().map(|v| v / s).collect())
        })
    }

    /// P1 interpolation of nodal `values` at `x`; zero far outside the mesh.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        match self.locate(x) {
            Some((c, lam)) => self.cell(c).iter().zip(&lam).map(|(&v, l)| values[v] * l).sum(),
            None => 0.0,
        }
    }
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn point(dim: usize, coords: &[f64], i: usize) -> &[f64] {
    &coords[i * dim..(i + 1) * dim]
}

fn signed_volume(dim: usize, coords: &[f64], cell: &[usize]) -> f64 {
    let p0 = point(dim, coords, cell[0]);
    if dim == 2 {
        let (a, b) = (point(dim, coords, cell[1]), point(dim, coords, cell[2]));
        0.5 * ((a[0] - p0[0]) * (b[1] - p0[1]) - (a[1] - p0[1]) * (b[0] - p0[0]))
    } else {
        let e = |k: usize| {
            let p = point(dim, coords, cell[k]);
            [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]]
        };
        det3(e(1), e(2), e(3)) / 6.0
    }
}

/// Longest edge over the inradius, normalised to 1 for the regular simplex.
fn aspect_ratio(dim: usize, coords: &[f64], cell: &[usize]) -> f64 {
    let vol = signed_volume(dim, coords, cell).abs();
    let mut longest: f64 = 0.0;
    for i in 0..cell.len() {
        for j in i + 1..cell.len() {
            longest = longest.max(super::dist(point(dim, coords, cell[i]), point(dim, coords, cell[j])));
        }
    }
    if dim == 2 {
        let e = |i: usize, j: usize| super::dist(point(dim, coords, cell[i]), point(dim, coords, cell[j]));
        let perimeter = e(0, 1) + e(1, 2) + e(2, 0);
        let r_in = 2.0 * vol / perimeter;
        longest / (2.0 * 3f64.sqrt() * r_in)
    } else {
        let mut area = 0.0;
        for skip in 0..4 {
            let f: Vec<&[f64]> = (0..4).filter(|&k| k != skip).map(|k| point(dim, coords, cell[k])).collect();
            let u = [f[1][0] - f[0][0], f[1][1] - f[0][1], f[1][2] - f[0][2]];
            let v = [f[2][0] - f[0][0], f[2][1] - f[0][1], f[2][2] - f[0][2]];
            let cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            area += 0.5 * (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
        }
        let r_in = 3.0 * vol / area;
        longest / (2.0 * 6f64.sqrt() * r_in)
    }
}

fn build_locator(dim: usize, h: f64, coords: &[f64], cells: &[usize]) -> Locator {
    let nv = coords.len() / dim;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for i in 0..nv {
        for k in 0..dim {
            lo[k] = lo[k].min(coords[i * dim + k]);
            hi[k] = hi[k].max(coords[i * dim + k]);
        }
    }
    let size = 2.0 * h;
    let dims: Vec<usize> = (0..dim).map(|k| (((hi[k] - lo[k]) / size).ceil() as usize).max(1)).collect();
    let total: usize = dims.iter().product();
    let mut lists = vec![Vec::new(); total];
    let k = dim + 1;
    for (c, cell) in cells.chunks(k).enumerate() {
        let mut blo = vec![usize::MAX; dim];
        let mut bhi = vec![0usize; dim];
        for &v in cell {
            for d in 0..dim {
                let i = ((coords[v * dim + d] - lo[d]) / size).floor().clamp(0.0, (dims[d] - 1) as f64) as usize;
                blo[d] = blo[d].min(i);
                bhi[d] = bhi[d].max(i);
            }
        }
        let mut idx = blo.clone();
        loop {
            let mut flat = 0;
            for d in (0..dim).rev() {
                flat = flat * dims[d] + idx[d];
            }
            lists[flat].push(c);
            let mut d = 0;
            loop {
                if d == dim {
                    break;
                }
                if idx[d] < bhi[d] {
                    idx[d] += 1;
                    break;
                }
                idx[d] = blo[d];
                d += 1;
            }
            if d == dim {
                break;
            }
        }
    }
    Locator {
        origin: lo,
        size,
        dims,
        buckets: Csr::from_lists(lists),
    }
}

/// Equiangular sphere direction for a lattice point on the surface of the
/// cube `[−half, half]^d`.
fn sphere_direction(lattice: &[i64], half: i64) -> Vec<f64> {
    let major = lattice.iter().position(|v| v.abs() == half).unwrap();
    let d: Vec<f64> = lattice
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if k == major {
                v.signum() as f64
            } else {
                (FRAC_PI_4 * v as f64 / half as f64).tan()
            }
        })
        .collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.into_iter().map(|x| x / norm).collect()
}

/// Template position of a lattice point at shell layer `layer` of `layers`.
fn template_position(lattice: &[i64], half: i64, layer: usize, layers: usize) -> Vec<f64> {
    let core: Vec<f64> = lattice.iter().map(|&v| CORE_HALF_WIDTH * v as f64 / half as f64).collect();
    if layer == 0 {
        return core;
    }
    let t = layer as f64 / layers as f64;
    let d = sphere_direction(lattice, half);
    core.iter().zip(&d).map(|(c, s)| (1.0 - t) * c + t * s).collect()
}

struct Template {
    half: i64,
    layers: usize,
    ids: HashMap<(Vec<i64>, usize), usize>,
    positions: Vec<Vec<f64>>,
}

impl Template {
    fn add(&mut self, lattice: Vec<i64>, layer: usize) {
        let pos = template_position(&lattice, self.half, layer, self.layers);
        self.ids.insert((lattice, layer), self.positions.len());
        self.positions.push(pos);
    }

    fn id(&self, lattice: &[i64], layer: usize) -> usize {
        self.ids[&(lattice.to_vec(), layer)]
    }
}

/// Conforming simplicial mesh of `domain` with target edge length `h`.
/// Deterministic for fixed inputs.
pub fn generate_mesh(domain: &DomainSpec, h: f64) -> Result<Mesh, GeometryError> {
    let limit = domain.min_feature() / 4.0;
    if !(h > 0.0 && h <= limit * (1.0 + 1e-12)) {
        return Err(GeometryError::MeshTooCoarse { h, limit });
    }
    let dim = domain.dim();
    let delta = h / domain.max_extent();
    let n = 2 * (FRAC_PI_4 / delta).ceil() as i64;
    let half = n / 2;
    let layers = (0.5 / delta).ceil() as usize;
    let mut tpl = Template {
        half,
        layers,
        ids: HashMap::new(),
        positions: Vec::new(),
    };

    let range = || -half..=half;
    let mut core: Vec<Vec<i64>> = Vec::new();
    if dim == 2 {
        for j in range() {
            for i in range() {
                core.push(vec![i, j]);
            }
        }
    } else {
        for k in range() {
            for j in range() {
                for i in range() {
                    core.push(vec![i, j, k]);
                }
            }
        }
    }
    let surface: Vec<Vec<i64>> = core.iter().filter(|p| p.iter().any(|v| v.abs() == half)).cloned().collect();
    for p in &core {
        tpl.add(p.clone(), 0);
    }
    for layer in 1..=layers {
        for p in &surface {
            tpl.add(p.clone(), layer);
        }
    }
    let boundary_template: Vec<usize> = surface.iter().map(|p| tpl.id(p, layers)).collect();

    let mut coords: Vec<f64> = Vec::new();
    for y in &tpl.positions {
        coords.extend(domain.map_from_unit_ball(y));
    }

    let cells = if dim == 2 {
        triangulate_2d(&tpl, &coords)
    } else {
        tetrahedralize_3d(&tpl, domain, &mut coords)
    };

    let mut normals = Vec::with_capacity(boundary_template.len() * dim);
    for &b in &boundary_template {
        normals.extend(domain.outward_normal(point(dim, &coords, b)));
    }
    let mesh = Mesh::from_parts(dim, h, coords, cells, boundary_template, normals)?;
    for c in 0..mesh.n_cells() {
        let ratio = mesh.aspect_ratio(c);
        if !(ratio <= MAX_ASPECT_RATIO) {
            return Err(GeometryError::MeshQualityFailure {
                cell: c,
                ratio,
                limit: MAX_ASPECT_RATIO,
            });
        }
    }
    Ok(mesh)
}

fn quads_2d(tpl: &Template) -> Vec<[usize; 4]> {
    let half = tpl.half;
    let mut quads = Vec::new();
    for j in -half..half {
        for i in -half..half {
            quads.push([
                tpl.id(&[i, j], 0),
                tpl.id(&[i + 1, j], 0),
                tpl.id(&[i + 1, j + 1], 0),
                tpl.id(&[i, j + 1], 0),
            ]);
        }
    }
    // Counter-clockwise walk around the square perimeter.
    let mut ring: Vec<[i64; 2]> = Vec::new();
    for j in -half..half {
        ring.push([half, j]);
    }
    for i in (-half + 1..=half).rev() {
        ring.push([i, half]);
    }
    for j in (-half + 1..=half).rev() {
        ring.push([-half, j]);
    }
    for i in -half..half {
        ring.push([i, -half]);
    }
    let len = ring.len();
    for layer in 0..tpl.layers {
        for k in 0..len {
            let (p, q) = (ring[k], ring[(k + 1) % len]);
            quads.push([
                tpl.id(&p, layer),
                tpl.id(&q, layer),
                tpl.id(&q, layer + 1),
                tpl.id(&p, layer + 1),
            ]);
        }
    }
    quads
}

fn triangulate_2d(tpl: &Template, coords: &[f64]) -> Vec<usize> {
    let p = |i: usize| point(2, coords, i);
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for q in quads_2d(tpl) {
        let d02 = super::dist(p(q[0]), p(q[2]));
        let d13 = super::dist(p(q[1]), p(q[3]));
        let use02 = if (d02 - d13).abs() > 1e-12 * (d02 + d13) {
            d02 < d13
        } else {
            q[0].min(q[2]) < q[1].min(q[3])
        };
        if use02 {
            tris.push([q[0], q[1], q[2]]);
            tris.push([q[0], q[2], q[3]]);
        } else {
            tris.push([q[1], q[2], q[3]]);
            tris.push([q[1], q[3], q[0]]);
        }
    }
    for t in tris.iter_mut() {
        if orient2d(p(t[0]), p(t[1]), p(t[2])) < 0.0 {
            t.swap(0, 1);
        }
    }
    delaunay_flips(coords, &mut tris);
    tris.into_iter().flatten().collect()
}

fn orient2d(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive iff `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
fn incircle(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let r = |p: &[f64]| {
        let (x, y) = (p[0] - d[0], p[1] - d[1]);
        [x, y, x * x + y * y]
    };
    det3(r(a), r(b), r(c))
}

/// Lawson edge flips until every interior edge is locally Delaunay up to a
/// relative tolerance that leaves cocircular quadrilaterals alone.
fn delaunay_flips(coords: &[f64], tris: &mut [[usize; 3]]) {
    let p = |i: usize| point(2, coords, i);
    for _pass in 0..100 {
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut keys: Vec<(usize, usize)> = edges.iter().filter(|(_, v)| v.len() == 2).map(|(k, _)| *k).collect();
        keys.sort_unstable();
        let mut touched = vec![false; tris.len()];
        let mut flipped = 0;
        for key in keys {
            let ts = &edges[&key];
            let (t1, t2) = (ts[0], ts[1]);
            if touched[t1] || touched[t2] {
                continue;
            }
            let (a, b) = key;
            let c = *tris[t1].iter().find(|&&v| v != a && v != b).unwrap();
            let d = *tris[t2].iter().find(|&&v| v != a && v != b).unwrap();
            let (pa, pb, pc, pd) = (p(a), p(b), p(c), p(d));
            let (x, y, z) = if orient2d(pa, pb, pc) > 0.0 { (pa, pb, pc) } else { (pb, pa, pc) };
            let scale = super::dist(pa, pb).max(super::dist(pc, pd));
            if incircle(x, y, z, pd) <= 1e-9 * scale.powi(4) {
                continue;
            }
            // The flipped pair must be valid triangles.
            if orient2d(pc, pd, pa) * orient2d(pc, pd, pb) >= 0.0 {
                continue;
            }
            let mut n1 = [c, d, a];
            let mut n2 = [d, c, b];
            for t in [&mut n1, &mut n2] {
                if orient2d(p(t[0]), p(t[1]), p(t[2])) < 0.0 {
                    t.swap(0, 1);
                }
            }
            tris[t1] = n1;
            tris[t2] = n2;
            touched[t1] = true;
            touched[t2] = true;
            flipped += 1;
        }
        if flipped == 0 {
            break;
        }
    }
}

fn hexes_3d(tpl: &Template) -> Vec<[usize; 8]> {
    let half = tpl.half;
    let mut hexes = Vec::new();
    let corner = |base: [i64; 3], bits: usize| [base[0] + (bits & 1) as i64, base[1] + (bits >> 1 & 1) as i64, base[2] + (bits >> 2 & 1) as i64];
    for k in -half..half {
        for j in -half..half {
            for i in -half..half {
                let mut h = [0usize; 8];
                for (bits, slot) in h.iter_mut().enumerate() {
                    *slot = tpl.id(&corner([i, j, k], bits), 0);
                }
                hexes.push(h);
            }
        }
    }
    for axis in 0..3 {
        for sign in [-1i64, 1] {
            let (u_ax, v_ax) = ((axis + 1) % 3, (axis + 2) % 3);
            for v in -half..half {
                for u in -half..half {
                    let lattice = |bu: i64, bv: i64| {
                        let mut p = [0i64; 3];
                        p[axis] = sign * half;
                        p[u_ax] = u + bu;
                        p[v_ax] = v + bv;
                        p
                    };
                    for layer in 0..tpl.layers {
                        let mut h = [0usize; 8];
                        for (bits, slot) in h.iter_mut().enumerate() {
                            let p = lattice((bits & 1) as i64, (bits >> 1 & 1) as i64);
                            *slot = tpl.id(&p, layer + (bits >> 2 & 1));
                        }
                        hexes.push(h);
                    }
                }
            }
        }
    }
    hexes
}

fn tetrahedralize_3d(tpl: &Template, domain: &DomainSpec, coords: &mut Vec<f64>) -> Vec<usize> {
    let hexes = hexes_3d(tpl);
    let base = tpl.positions.len();
    for h in &hexes {
        let mut c = [0.0; 3];
        for &v in h {
            for d in 0..3 {
                c[d] += tpl.positions[v][d] / 8.0;
            }
        }
        coords.extend(domain.map_from_unit_ball(&c));
    }
    // Corner bit patterns of each face in cyclic order.
    let mut faces: Vec<[usize; 4]> = Vec::new();
    for axis in 0..3 {
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2usize {
            let bits = |b1: usize, b2: usize| side << axis | b1 << a1 | b2 << a2;
            faces.push([bits(0, 0), bits(1, 0), bits(1, 1), bits(0, 1)]);
        }
    }
    let mut cells = Vec::with_capacity(hexes.len() * 48);
    for (hi, h) in hexes.iter().enumerate() {
        let centre = base + hi;
        for f in &faces {
            let q = [h[f[0]], h[f[1]], h[f[2]], h[f[3]]];
            let j = (0..4).min_by_key(|&k| q[k]).unwrap();
            let (a, b, c, d) = (q[j], q[(j + 1) % 4], q[(j + 2) % 4], q[(j + 3) % 4]);
            cells.extend([a, b, c, centre]);
            cells.extend([a, c, d, centre]);
        }
    }
    cells
}
