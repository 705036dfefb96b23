//! Triangular meshes of the unit square with oriented-edge topology and a
//! background-grid point locator.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{cross, norm, sub, Point2, Real};

/// Relative tolerance for barycentric containment tests.
pub fn geom_eps<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// The three edges of an element with their orientation signs.
///
/// Local edge `i` is opposite local vertex `i`. The sign is `+1` when the
/// global edge normal points out of the element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementEdges {
    pub ids: [usize; 3],
    pub signs: [i8; 3],
}

/// Result of a point-location query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location<T> {
    pub element: usize,
    pub bary: [T; 3],
}

#[derive(Clone, Debug)]
struct GridLocator<T> {
    origin: Point2<T>,
    cell: Point2<T>,
    dims: [usize; 2],
    // CSR-style cell -> candidate element lists, ascending element ids
    offsets: Vec<usize>,
    candidates: Vec<usize>,
}

impl<T: Real> GridLocator<T> {
    fn cell_index(&self, x: Point2<T>, axis: usize) -> usize {
        let s = ((x[axis] - self.origin[axis]) / self.cell[axis]).floor();
        let s = s.max(T::zero()).to_usize().unwrap_or(0);
        s.min(self.dims[axis] - 1)
    }

    fn cell_candidates(&self, x: Point2<T>) -> &[usize] {
        let i = self.cell_index(x, 0);
        let j = self.cell_index(x, 1);
        let c = j * self.dims[0] + i;
        &self.candidates[self.offsets[c]..self.offsets[c + 1]]
    }
}

/// Conforming triangulation with counterclockwise elements.
#[derive(Clone, Debug)]
pub struct TriMesh<T> {
    nodes: Vec<Point2<T>>,
    elements: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    elem_edges: Vec<ElementEdges>,
    edge_elements: Vec<[Option<usize>; 2]>,
    boundary_edges: Vec<usize>,
    areas: Vec<T>,
    lower: Point2<T>,
    upper: Point2<T>,
    h: T,
    locator: GridLocator<T>,
}

impl<T: Real> TriMesh<T> {
    /// Uniform mesh of the unit square: `m × m` squares, each split along its
    /// lower-left to upper-right diagonal.
    pub fn uniform(m: usize) -> Self {
        assert!(m >= 1, "mesh parameter must be positive");
        let mf = T::from_usize_lossy(m);
        let mut nodes = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                nodes.push([
                    T::from_usize_lossy(i) / mf,
                    T::from_usize_lossy(j) / mf,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (m + 1) + i;
        let mut elements = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            }
        }
        Self::new(nodes, elements).expect("uniform mesh is valid")
    }

    /// Builds topology from raw node and element tables.
    pub fn new(nodes: Vec<Point2<T>>, elements: Vec<[usize; 3]>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidMesh("no elements".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("element {e} references a missing node")));
            }
            let [a, b, c] = tri.map(|n| nodes[n]);
            let area = cross(sub(b, a), sub(c, a)) / T::lit(2.0);
            if area <= T::zero() {
                return Err(Error::InvalidMesh(format!(
                    "element {e} is not counterclockwise (signed area {area})"
                )));
            }
            areas.push(area);
        }

        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_elements: Vec<[Option<usize>; 2]> = Vec::new();
        let mut elem_edges = Vec::with_capacity(elements.len());
        let mut h = T::zero();
        for (e, tri) in elements.iter().enumerate() {
            let mut ids = [0; 3];
            let mut signs = [0i8; 3];
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let next = edges.len();
                let id = *edge_ids.entry(key).or_insert(next);
                if id == next {
                    edges.push(key);
                    edge_elements.push([None, None]);
                    h = h.max(norm(sub(nodes[key[1]], nodes[key[0]])));
                }
                let slot = &mut edge_elements[id];
                if slot[0].is_none() {
                    slot[0] = Some(e);
                } else if slot[1].is_none() {
                    slot[1] = Some(e);
                } else {
                    return Err(Error::InvalidMesh(format!("edge {key:?} shared by more than two elements")));
                }
                ids[i] = id;
                // Counterclockwise traversal a -> b has outward normal (dy, -dx),
                // the same rule that defines the global normal on low -> high.
                signs[i] = if a < b { 1 } else { -1 };
            }
            elem_edges.push(ElementEdges { ids, signs });
        }
        for (id, pair) in edge_elements.iter().enumerate() {
            if let [Some(a), Some(b)] = *pair {
                let sa = sign_of(&elem_edges[a], id);
                let sb = sign_of(&elem_edges[b], id);
                if sa + sb != 0 {
                    return Err(Error::InvalidMesh(format!("edge {id} has inconsistent orientation")));
                }
            }
        }
        let boundary_edges = edge_elements
            .iter()
            .enumerate()
            .filter(|(_, p)| p[1].is_none())
            .map(|(i, _)| i)
            .collect();

        let mut lower = nodes[0];
        let mut upper = nodes[0];
        for p in &nodes {
            for k in 0..2 {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        let locator = build_locator(&nodes, &elements, lower, upper);
        Ok(Self {
            nodes,
            elements,
            edges,
            elem_edges,
            edge_elements,
            boundary_edges,
            areas,
            lower,
            upper,
            h,
            locator,
        })
    }

    pub fn nodes(&self) -> &[Point2<T>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    /// Global edges, stored as (low node id, high node id).
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn element_edges(&self, e: usize) -> ElementEdges {
        self.elem_edges[e]
    }

    /// Elements incident to an edge; the second slot is `None` on the boundary.
    pub fn edge_elements(&self, edge: usize) -> [Option<usize>; 2] {
        self.edge_elements[edge]
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_elements[edge][1].is_none()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn area(&self, e: usize) -> T {
        self.areas[e]
    }

    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    /// Longest edge length.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn vertices(&self, e: usize) -> [Point2<T>; 3] {
        self.elements[e].map(|n| self.nodes[n])
    }

    /// Unit normal of a global edge: the low -> high tangent rotated clockwise.
    pub fn edge_normal(&self, edge: usize) -> Point2<T> {
        let [a, b] = self.edges[edge];
        let d = sub(self.nodes[b], self.nodes[a]);
        let len = norm(d);
        [d[1] / len, -d[0] / len]
    }

    pub fn edge_length(&self, edge: usize) -> T {
        let [a, b] = self.edges[edge];
        norm(sub(self.nodes[b], self.nodes[a]))
    }

    /// Point of element `e` with the given barycentric coordinates.
    pub fn point_at(&self, e: usize, bary: [T; 3]) -> Point2<T> {
        let v = self.vertices(e);
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    /// Barycentric coordinates of `x` with respect to element `e`.
    pub fn barycentric(&self, e: usize, x: Point2<T>) -> [T; 3] {
        barycentric(self.vertices(e), self.areas[e], x)
    }

    /// Componentwise projection onto the mesh bounding box.
    pub fn clamp_to_domain(&self, x: Point2<T>) -> Point2<T> {
        [
            x[0].max(self.lower[0]).min(self.upper[0]),
            x[1].max(self.lower[1]).min(self.upper[1]),
        ]
    }

    fn outside_domain(&self, x: Point2<T>) -> bool {
        let eps = geom_eps::<T>();
        (0..2).any(|k| {
            let tol = eps * (self.upper[k] - self.lower[k]);
            x[k] < self.lower[k] - tol || x[k] > self.upper[k] + tol
        })
    }

    /// Finds the lowest-id element containing `x` (within [`geom_eps`]).
    pub fn locate(&self, x: Point2<T>) -> Result<Location<T>> {
        let eps = geom_eps::<T>();
        if self.outside_domain(x) {
            return Err(Error::PointOutsideDomain {
                x: x[0].to_f64().unwrap_or(f64::NAN),
                y: x[1].to_f64().unwrap_or(f64::NAN),
            });
        }
        for &e in self.locator.cell_candidates(x) {
            let bary = self.barycentric(e, x);
            if bary.iter().all(|&l| l >= -eps) {
                return Ok(Location { element: e, bary });
            }
        }
        Err(Error::PointOutsideDomain {
            x: x[0].to_f64().unwrap_or(f64::NAN),
            y: x[1].to_f64().unwrap_or(f64::NAN),
        })
    }

    /// Plain-text dump: node table then element table.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nodes {}", self.nodes.len())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i} {} {}", p[0], p[1])?;
        }
        writeln!(w, "elements {}", self.elements.len())?;
        for (i, t) in self.elements.iter().enumerate() {
            writeln!(w, "{i} {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn sign_of(edges: &ElementEdges, id: usize) -> i8 {
    edges
        .ids
        .iter()
        .position(|&k| k == id)
        .map(|i| edges.signs[i])
        .unwrap_or(0)
}

pub(crate) fn barycentric<T: Real>(v: [Point2<T>; 3], area: T, x: Point2<T>) -> [T; 3] {
    let two_area = area + area;
    let l0 = cross(sub(v[2], v[1]), sub(x, v[1])) / two_area;
    let l1 = cross(sub(v[0], v[2]), sub(x, v[2])) / two_area;
    [l0, l1, T::one() - l0 - l1]
}

fn build_locator<T: Real>(
    nodes: &[Point2<T>],
    elements: &[[usize; 3]],
    lower: Point2<T>,
    upper: Point2<T>,
) -> GridLocator<T> {
    // One cell per pair of elements: cell size 1/M on the uniform mesh.
    let per_dim = ((elements.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
    let dims = [per_dim, per_dim];
    let extent = [upper[0] - lower[0], upper[1] - lower[1]];
    let cell = [
        extent[0] / T::from_usize_lossy(per_dim),
        extent[1] / T::from_usize_lossy(per_dim),
    ];
    let mut grid = GridLocator {
        origin: lower,
        cell,
        dims,
        offsets: vec![0; dims[0] * dims[1] + 1],
        candidates: Vec::new(),
    };
    let eps = geom_eps::<T>();
    let ranges: Vec<[[usize; 2]; 2]> = elements
        .iter()
        .map(|tri| {
            let mut r = [[0; 2]; 2];
            for k in 0..2 {
                let tol = eps * extent[k];
                let lo = tri.iter().map(|&n| nodes[n][k]).fold(T::infinity(), T::min) - tol;
                let hi = tri.iter().map(|&n| nodes[n][k]).fold(T::neg_infinity(), T::max) + tol;
                let mut p = [T::zero(); 2];
                p[k] = lo;
                r[k][0] = grid.cell_index(p, k);
                p[k] = hi;
                r[k][1] = grid.cell_index(p, k);
            }
            r
        })
        .collect();
    let mut counts = vec![0usize; dims[0] * dims[1]];
    for r in &ranges {
        for j in r[1][0]..=r[1][1] {
            for i in r[0][0]..=r[0][1] {
                counts[j * dims[0] + i] += 1;
            }
        }
    }
    for c in 0..counts.len() {
        grid.offsets[c + 1] = grid.offsets[c] + counts[c];
    }
    let mut fill = grid.offsets.clone();
    grid.candidates = vec![0; grid.offsets[counts.len()]];
    for (e, r) in ranges.iter().enumerate() {
        for j in r[1][0]..=r[1][1] {
            for i in r[0][0]..=r[0][1] {
                let c = j * dims[0] + i;
                grid.candidates[fill[c]] = e;
                fill[c] += 1;
            }
        }
    }
    grid
}
