//! Triangulated topological disks with an ordered boundary loop.
//!
//! The simulation state is a fixed connectivity ([`TriMesh`]) plus per-vertex
//! positions ([`Configuration`]). Meshes are built once and never modified;
//! only configurations change during relaxation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Connectivity of a triangulated disk.
///
/// Triangles are counterclockwise when the disk is viewed from +z in its
/// initial planar layout, and `boundary_loop` runs in the same direction as the
/// boundary edges of those triangles, so the film lies to the left of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertex_count: usize,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_loop: Vec<usize>,
    pub interior_edges: Vec<[usize; 2]>,
    pub boundary_edges: Vec<[usize; 2]>,
}

/// Per-vertex positions for a [`TriMesh`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub positions: Vec<Vec3>,
}

/// Result of [`validate_mesh`]. `passes` is true iff every disk invariant holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub face_count: usize,
    pub euler_characteristic: i64,
    /// Edges used by zero or more than two triangles.
    pub nonmanifold_edges: usize,
    /// Interior edges traversed in the same direction by both of their triangles.
    pub orientation_inconsistencies: usize,
    pub boundary_cycles: usize,
    /// Stored `boundary_loop` is one simple cycle covering every boundary edge once.
    pub boundary_loop_consistent: bool,
    pub out_of_range_indices: usize,
    pub passes: bool,
}

struct EdgeUse {
    // directed (from, to) as it appears in each incident triangle
    uses: Vec<(usize, usize)>,
}

fn edge_table(triangles: &[[usize; 3]]) -> BTreeMap<(usize, usize), EdgeUse> {
    let mut table: BTreeMap<(usize, usize), EdgeUse> = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            table
                .entry((a.min(b), a.max(b)))
                .or_insert_with(|| EdgeUse { uses: Vec::new() })
                .uses
                .push((a, b));
        }
    }
    table
}

impl TriMesh {
    /// Derives edge lists and a boundary loop from a triangle list.
    ///
    /// This never fails on topological defects: it traces the boundary cycle
    /// through the smallest boundary vertex and leaves the verdict to
    /// [`validate_mesh`]. Use [`TriMesh::new_validated`] to reject bad input.
    pub fn from_triangles(vertex_count: usize, triangles: Vec<[usize; 3]>) -> Self {
        let table = edge_table(&triangles);
        let mut interior_edges = Vec::new();
        let mut directed_boundary = Vec::new();
        for (&(a, b), e) in &table {
            if e.uses.len() == 1 {
                directed_boundary.push(e.uses[0]);
            } else {
                interior_edges.push([a, b]);
            }
        }

        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in &directed_boundary {
            next.entry(a).or_insert(b);
        }
        let mut boundary_loop = Vec::new();
        if let Some((&start, _)) = next.iter().next() {
            let mut v = start;
            loop {
                boundary_loop.push(v);
                match next.get(&v) {
                    Some(&w) if w != start && boundary_loop.len() <= next.len() => v = w,
                    _ => break,
                }
            }
        }
        let boundary_edges = loop_edges(&boundary_loop);

        Self {
            vertex_count,
            triangles,
            boundary_loop,
            interior_edges,
            boundary_edges,
        }
    }

    pub fn new_validated(vertex_count: usize, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self::from_triangles(vertex_count, triangles);
        let report = validate_mesh(&mesh);
        if report.passes {
            Ok(mesh)
        } else {
            Err(Error::InvalidMesh(format!("{report:?}")))
        }
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary_loop.len()
    }

    pub fn edge_count(&self) -> usize {
        self.interior_edges.len() + self.boundary_edges.len()
    }

    /// Flags for each vertex: true if on the boundary loop.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertex_count];
        for &v in &self.boundary_loop {
            mask[v] = true;
        }
        mask
    }
}

fn loop_edges(cycle: &[usize]) -> Vec<[usize; 2]> {
    (0..cycle.len())
        .map(|i| [cycle[i], cycle[(i + 1) % cycle.len()]])
        .collect()
}

impl Configuration {
    pub fn new(positions: Vec<Vec3>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Checks length against the mesh and finiteness of all coordinates.
    pub fn check(&self, mesh: &TriMesh) -> Result<()> {
        if self.len() != mesh.vertex_count {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} positions, mesh has {} vertices",
                self.len(),
                mesh.vertex_count
            )));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("configuration"));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Vec3 {
        let sum: Vec3 = self.positions.iter().sum();
        sum / self.positions.len().max(1) as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.positions.iter().map(|p| p * factor).collect())
    }

    pub fn translated(&self, by: Vec3) -> Self {
        Self::new(self.positions.iter().map(|p| p + by).collect())
    }

    /// Sum of boundary edge lengths.
    pub fn boundary_length(&self, mesh: &TriMesh) -> f64 {
        mesh.boundary_edges
            .iter()
            .map(|&[a, b]| (self.positions[b] - self.positions[a]).norm())
            .sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self::new(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }
}

/// Axial hex-lattice coordinates (q, r) with hex distance at most `rings`.
fn hex_cells(rings: i64) -> Vec<(i64, i64)> {
    let mut cells = Vec::new();
    for r in -rings..=rings {
        for q in -rings..=rings {
            if (q + r).abs() <= rings {
                cells.push((q, r));
            }
        }
    }
    cells
}

/// Builds a hex-lattice triangulated disk with unit edge length.
///
/// The disk has `1 + 3·rings·(rings+1)` vertices, `6·rings²` triangles and
/// `6·rings` boundary vertices. Positions are planar (z = 0) and then stretched
/// by `elongation` along x and `1/elongation` along y, which preserves area.
pub fn generate_disk_mesh(rings: usize, elongation: f64) -> Result<(TriMesh, Configuration)> {
    if rings == 0 {
        return Err(Error::InvalidParameter(
            "rings must be at least 1 (a disk needs an interior vertex)".into(),
        ));
    }
    if !elongation.is_finite() || elongation <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "elongation must be finite and positive, got {elongation}"
        )));
    }
    let m = rings as i64;
    let cells = hex_cells(m);
    let index: BTreeMap<(i64, i64), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    let positions: Vec<Vec3> = cells
        .iter()
        .map(|&(q, r)| {
            let x = q as f64 + 0.5 * r as f64;
            let y = half_sqrt3 * r as f64;
            Vec3::new(x * elongation, y / elongation, 0.0)
        })
        .collect();

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    // anchors range one cell past the disk: a down triangle's anchor cell may lie outside it
    let anchors = (-m - 1..=m).flat_map(|r| (-m - 1..=m).map(move |q| (q, r)));
    for (q, r) in anchors {
        if let (Some(&v), Some(&a), Some(&b)) = (index.get(&(q, r)), index.get(&(q + 1, r)), index.get(&(q, r + 1))) {
            triangles.push([v, a, b]);
        }
        if let (Some(&a), Some(&b), Some(&c)) = (
            index.get(&(q + 1, r)),
            index.get(&(q + 1, r + 1)),
            index.get(&(q, r + 1)),
        ) {
            triangles.push([a, b, c]);
        }
    }

    // Hex boundary is star-shaped about the origin, so sorting the ring by
    // polar angle gives the counterclockwise loop.
    let mut ring: Vec<usize> = cells
        .iter()
        .enumerate()
        .filter(|(_, &(q, r))| q.abs().max(r.abs()).max((q + r).abs()) == m)
        .map(|(i, _)| i)
        .collect();
    let angle = |i: usize| {
        let (q, r) = cells[i];
        let (x, y) = (q as f64 + 0.5 * r as f64, half_sqrt3 * r as f64);
        y.atan2(x)
    };
    ring.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));

    let mut mesh = TriMesh::from_triangles(cells.len(), triangles);
    mesh.boundary_edges = loop_edges(&ring);
    mesh.boundary_loop = ring;
    Ok((mesh, Configuration::new(positions)))
}

/// Checks every disk invariant and reports what, if anything, is broken.
pub fn validate_mesh(mesh: &TriMesh) -> ValidationReport {
    let out_of_range_indices = mesh
        .triangles
        .iter()
        .flatten()
        .chain(mesh.boundary_loop.iter())
        .filter(|&&v| v >= mesh.vertex_count)
        .count();

    let table = edge_table(&mesh.triangles);
    let mut nonmanifold_edges = 0;
    let mut orientation_inconsistencies = 0;
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for e in table.values() {
        match e.uses.len() {
            1 => boundary.push(e.uses[0]),
            2 => {
                if e.uses[0] == e.uses[1] {
                    orientation_inconsistencies += 1;
                }
            }
            _ => nonmanifold_edges += 1,
        }
    }

    let boundary_cycles = count_cycles(&boundary);

    let boundary_loop_consistent = {
        let stored = &mesh.boundary_loop;
        let mut seen = std::collections::BTreeSet::new();
        let simple = stored.iter().all(|v| seen.insert(*v));
        let mut expected: Vec<(usize, usize)> = boundary.clone();
        expected.sort_unstable();
        let mut got: Vec<(usize, usize)> = (0..stored.len())
            .map(|i| (stored[i], stored[(i + 1) % stored.len()]))
            .collect();
        got.sort_unstable();
        simple && stored.len() >= 3 && got == expected
    };

    let v = mesh.vertex_count as i64;
    let e = table.len() as i64;
    let f = mesh.triangles.len() as i64;
    let euler_characteristic = v - e + f;
    let passes = out_of_range_indices == 0
        && euler_characteristic == 1
        && nonmanifold_edges == 0
        && orientation_inconsistencies == 0
        && boundary_cycles == 1
        && boundary_loop_consistent;

    ValidationReport {
        vertex_count: mesh.vertex_count,
        edge_count: table.len(),
        face_count: mesh.triangles.len(),
        euler_characteristic,
        nonmanifold_edges,
        orientation_inconsistencies,
        boundary_cycles,
        boundary_loop_consistent,
        out_of_range_indices,
        passes,
    }
}

/// Connected components of the boundary-edge graph.
fn count_cycles(edges: &[(usize, usize)]) -> usize {
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<usize, usize>, v: usize) -> usize {
        let p = *parent.entry(v).or_insert(v);
        if p == v {
            v
        } else {
            let root = find(parent, p);
            parent.insert(v, root);
            root
        }
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    let mut roots = std::collections::BTreeSet::new();
    for k in keys {
        roots.insert(find(&mut parent, k));
    }
    roots.len()
}

/// Unit-edge hex disk scaled so that its boundary has length `target_length`.
///
/// This is the standard initial state for relaxation runs.
pub fn initial_disk(rings: usize, elongation: f64, target_length: f64) -> Result<(TriMesh, Configuration)> {
    let (mesh, x) = generate_disk_mesh(rings, elongation)?;
    let perimeter = x.boundary_length(&mesh);
    Ok((mesh.clone(), x.scaled(target_length / perimeter)))
}

/// Hex disk with every vertex pushed radially so the boundary lies on the
/// circle of the given radius (flat, z = 0).
pub fn round_disk(rings: usize, radius: f64) -> Result<(TriMesh, Configuration)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let (mesh, x) = generate_disk_mesh(rings, 1.0)?;
    let apothem = rings as f64 * 3f64.sqrt() / 2.0;
    let positions = x
        .positions
        .iter()
        .map(|p| {
            // angle from the nearest edge midpoint; corners sit at multiples of π/3
            let off = p.y.atan2(p.x).rem_euclid(PI / 3.0) - PI / 6.0;
            let k = radius * off.cos() / apothem;
            Vec3::new(p.x * k, p.y * k, 0.0)
        })
        .collect();
    Ok((mesh, Configuration::new(positions)))
}
