//! Finite-element spaces on a [`TriMesh`]: continuous P1, P0, discontinuous
//! P1, and the Raviart–Thomas spaces RT0 and RT1.
//!
//! Degree-of-freedom layouts:
//!
//! | kind   | global dofs                                                   |
//! |--------|---------------------------------------------------------------|
//! | P1     | one per node                                                  |
//! | P0     | one per element                                               |
//! | P1Disc | `3e + i` for local vertex `i` of element `e`                  |
//! | RT0    | one per edge: total flux `∫_E v·n ds`                          |
//! | RT1    | `2E, 2E+1`: flux moments against `1` and `s ∈ [-1, 1]`;         |
//! |        | `2·#edges + 2e + {0, 1}`: `∫_T v_x`, `∫_T v_y`                  |
//!
//! Edge normals and the edge coordinate `s` follow the global low → high
//! orientation, so edge dofs are single-valued across elements. RT0 basis
//! functions are the Piola images of the reference ones. RT1 bases are the
//! dual basis of the dofs above within `P1² ⊕ x·P̃1`, computed once per
//! element.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::mesh::{geom_eps, TriMesh};
use crate::quadrature::{gauss_legendre, triangle_rule};
use crate::scalar::{dot, sub, Point2, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    P1,
    P0,
    Rt0,
    Rt1,
    P1Disc,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::P1 => "P1",
            SpaceKind::P0 => "P0",
            SpaceKind::Rt0 => "RT0",
            SpaceKind::Rt1 => "RT1",
            SpaceKind::P1Disc => "P1Disc",
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::Rt0 | SpaceKind::Rt1)
    }

    /// Number of basis functions supported on one element.
    pub fn local_dofs(self) -> usize {
        match self {
            SpaceKind::P0 => 1,
            SpaceKind::P1 | SpaceKind::P1Disc | SpaceKind::Rt0 => 3,
            SpaceKind::Rt1 => 8,
        }
    }
}

/// Global dof ids of the basis functions supported on one element.
#[derive(Clone, Copy, Debug)]
pub struct LocalDofs {
    ids: [usize; 8],
    len: usize,
}

impl LocalDofs {
    pub fn as_slice(&self) -> &[usize] {
        &self.ids[..self.len]
    }
}

/// Values (and divergences, for vector spaces) of the local basis at a point.
#[derive(Clone, Copy, Debug)]
pub struct VectorBasis<T> {
    pub values: [Point2<T>; 8],
    pub divs: [T; 8],
    pub len: usize,
}

const RT1_LOCAL: usize = 8;

#[derive(Clone, Debug)]
struct Rt1Element<T> {
    center: Point2<T>,
    scale: T,
    // coeffs[k][j]: weight of spanning function k in local basis function j
    coeffs: [[T; RT1_LOCAL]; RT1_LOCAL],
}

/// A finite-element space bound to a mesh.
#[derive(Debug)]
pub struct Space<T> {
    kind: SpaceKind,
    mesh: Arc<TriMesh<T>>,
    rt1: Vec<Rt1Element<T>>,
}

impl<T: Real> Space<T> {
    pub fn new(kind: SpaceKind, mesh: Arc<TriMesh<T>>) -> Arc<Self> {
        let rt1 = if kind == SpaceKind::Rt1 {
            (0..mesh.num_elements()).map(|e| rt1_element(&mesh, e)).collect()
        } else {
            Vec::new()
        };
        Arc::new(Self { kind, mesh, rt1 })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        &self.mesh
    }

    pub fn ndofs(&self) -> usize {
        let m = &self.mesh;
        match self.kind {
            SpaceKind::P1 => m.num_nodes(),
            SpaceKind::P0 => m.num_elements(),
            SpaceKind::Rt0 => m.num_edges(),
            SpaceKind::Rt1 => 2 * m.num_edges() + 2 * m.num_elements(),
            SpaceKind::P1Disc => 3 * m.num_elements(),
        }
    }

    pub fn element_dofs(&self, e: usize) -> LocalDofs {
        let mut ids = [0; 8];
        let len = self.kind.local_dofs();
        match self.kind {
            SpaceKind::P1 => ids[..3].copy_from_slice(&self.mesh.elements()[e]),
            SpaceKind::P0 => ids[0] = e,
            SpaceKind::P1Disc => {
                for (i, id) in ids[..3].iter_mut().enumerate() {
                    *id = 3 * e + i;
                }
            }
            SpaceKind::Rt0 => ids[..3].copy_from_slice(&self.mesh.element_edges(e).ids),
            SpaceKind::Rt1 => {
                let edges = self.mesh.element_edges(e).ids;
                for i in 0..3 {
                    ids[2 * i] = 2 * edges[i];
                    ids[2 * i + 1] = 2 * edges[i] + 1;
                }
                let base = 2 * self.mesh.num_edges() + 2 * e;
                ids[6] = base;
                ids[7] = base + 1;
            }
        }
        LocalDofs { ids, len }
    }

    /// Number of dofs carried by each edge (RT spaces only).
    pub fn dofs_per_edge(&self) -> usize {
        match self.kind {
            SpaceKind::Rt0 => 1,
            SpaceKind::Rt1 => 2,
            _ => 0,
        }
    }

    /// Global id of the first dof on `edge` (RT spaces only).
    pub fn edge_dof_base(&self, edge: usize) -> usize {
        match self.kind {
            SpaceKind::Rt1 => 2 * edge,
            _ => edge,
        }
    }

    /// Scalar basis values at a barycentric point of element `e`.
    pub fn scalar_basis(&self, bary: [T; 3]) -> [T; 3] {
        match self.kind {
            SpaceKind::P0 => [T::one(), T::zero(), T::zero()],
            _ => bary,
        }
    }

    /// Vector basis values and divergences at physical point `x` of element `e`.
    /// No containment check is performed.
    pub fn vector_basis(&self, e: usize, x: Point2<T>) -> VectorBasis<T> {
        let mut out = VectorBasis {
            values: [[T::zero(); 2]; 8],
            divs: [T::zero(); 8],
            len: self.kind.local_dofs(),
        };
        match self.kind {
            SpaceKind::Rt0 => {
                let v = self.mesh.vertices(e);
                let signs = self.mesh.element_edges(e).signs;
                let area = self.mesh.area(e);
                let two_area = area + area;
                for i in 0..3 {
                    let s = if signs[i] > 0 { T::one() } else { -T::one() };
                    let d = sub(x, v[i]);
                    out.values[i] = [s * d[0] / two_area, s * d[1] / two_area];
                    out.divs[i] = s / area;
                }
            }
            SpaceKind::Rt1 => {
                let el = &self.rt1[e];
                let (span, span_div) = rt1_spanning(el.center, el.scale, x);
                for j in 0..RT1_LOCAL {
                    let mut v = [T::zero(); 2];
                    let mut d = T::zero();
                    for k in 0..RT1_LOCAL {
                        let c = el.coeffs[k][j];
                        v[0] += c * span[k][0];
                        v[1] += c * span[k][1];
                        d += c * span_div[k];
                    }
                    out.values[j] = v;
                    out.divs[j] = d;
                }
            }
            _ => out.len = 0,
        }
        out
    }
}

/// Gradients of the barycentric coordinates of element `e` (constant).
pub fn bary_gradients<T: Real>(mesh: &TriMesh<T>, e: usize) -> [Point2<T>; 3] {
    let v = mesh.vertices(e);
    let two_area = mesh.area(e) + mesh.area(e);
    let mut g = [[T::zero(); 2]; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let a = v[(i + 1) % 3];
        let b = v[(i + 2) % 3];
        *gi = [-(b[1] - a[1]) / two_area, (b[0] - a[0]) / two_area];
    }
    g
}

// Spanning set of RT1 in scaled local coordinates ξ = (x - center) / scale:
// (1,0) (ξ,0) (η,0) (0,1) (0,ξ) (0,η) (ξ², ξη) (ξη, η²)
fn rt1_spanning<T: Real>(center: Point2<T>, scale: T, x: Point2<T>) -> ([Point2<T>; 8], [T; 8]) {
    let xi = (x[0] - center[0]) / scale;
    let eta = (x[1] - center[1]) / scale;
    let z = T::zero();
    let o = T::one();
    let three = T::lit(3.0);
    let inv = o / scale;
    (
        [
            [o, z],
            [xi, z],
            [eta, z],
            [z, o],
            [z, xi],
            [z, eta],
            [xi * xi, xi * eta],
            [xi * eta, eta * eta],
        ],
        [z, inv, z, z, z, inv, three * xi * inv, three * eta * inv],
    )
}

/// Evaluates the RT1 dof functionals of element `e` on a vector function.
/// Edge moments use the 5-point Gauss rule; interior moments the degree-8 rule.
fn rt1_functionals<T: Real, F: Fn(Point2<T>) -> Point2<T>>(mesh: &TriMesh<T>, e: usize, v: F) -> [T; 8] {
    let mut out = [T::zero(); 8];
    let ids = mesh.element_edges(e).ids;
    let (gx, gw) = gauss_legendre::<T>(5).expect("5-point rule");
    let half = T::lit(0.5);
    for i in 0..3 {
        let (m0, m1) = edge_moments(mesh, ids[i], &gx, &gw, half, &v);
        out[2 * i] = m0;
        out[2 * i + 1] = m1;
    }
    let rule = triangle_rule::<T>(8).expect("degree-8 rule");
    let jac = mesh.area(e) + mesh.area(e);
    for (p, w) in rule.iter() {
        let val = v(mesh.point_at(e, p));
        out[6] += w * jac * val[0];
        out[7] += w * jac * val[1];
    }
    out
}

fn edge_moments<T: Real, F: Fn(Point2<T>) -> Point2<T>>(
    mesh: &TriMesh<T>,
    edge: usize,
    gx: &[T],
    gw: &[T],
    half: T,
    v: &F,
) -> (T, T) {
    let [a, b] = mesh.edges()[edge];
    let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
    let n = mesh.edge_normal(edge);
    let ds = mesh.edge_length(edge) * half;
    let (mut m0, mut m1) = (T::zero(), T::zero());
    for (&s, &w) in gx.iter().zip(gw) {
        let t = (T::one() + s) * half;
        let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
        let flux = dot(v(x), n) * w * ds;
        m0 += flux;
        m1 += flux * s;
    }
    (m0, m1)
}

fn rt1_element<T: Real>(mesh: &TriMesh<T>, e: usize) -> Rt1Element<T> {
    let v = mesh.vertices(e);
    let third = T::lit(1.0 / 3.0);
    let center = [
        (v[0][0] + v[1][0] + v[2][0]) * third,
        (v[0][1] + v[1][1] + v[2][1]) * third,
    ];
    let scale = (mesh.area(e) + mesh.area(e)).sqrt();
    // dofs[j][k] = functional j applied to spanning function k
    let mut dofs = [[T::zero(); RT1_LOCAL]; RT1_LOCAL];
    for k in 0..RT1_LOCAL {
        let col = rt1_functionals(mesh, e, |x| rt1_spanning(center, scale, x).0[k]);
        for j in 0..RT1_LOCAL {
            dofs[j][k] = col[j];
        }
    }
    let coeffs = dense::invert(dofs).expect("RT1 dofs are unisolvent");
    Rt1Element { center, scale, coeffs }
}

/// Coefficient vector attached to a finite-element space.
#[derive(Clone, Debug)]
pub struct Field<T> {
    space: Arc<Space<T>>,
    coeffs: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(space: &Arc<Space<T>>) -> Self {
        Self {
            coeffs: vec![T::zero(); space.ndofs()],
            space: space.clone(),
        }
    }

    pub fn from_coeffs(space: &Arc<Space<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::InvalidConfig(format!(
                "{} field needs {} coefficients, got {}",
                space.kind().name(),
                space.ndofs(),
                coeffs.len()
            )));
        }
        Ok(Self {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<Space<T>> {
        &self.space
    }

    pub fn kind(&self) -> SpaceKind {
        self.space.kind()
    }

    pub fn mesh(&self) -> &TriMesh<T> {
        self.space.mesh()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Value of a scalar field at a barycentric point of element `e`.
    pub fn eval_scalar(&self, e: usize, bary: [T; 3]) -> Result<T> {
        if self.kind().is_vector() {
            return Err(Error::KindMismatch {
                expected: "P1|P0|P1Disc",
                found: self.kind().name(),
            });
        }
        Ok(self.scalar_at(e, bary))
    }

    /// Unchecked scalar evaluation used inside assembly loops.
    #[inline]
    pub fn scalar_at(&self, e: usize, bary: [T; 3]) -> T {
        let dofs = self.space.element_dofs(e);
        let phi = self.space.scalar_basis(bary);
        dofs.as_slice()
            .iter()
            .zip(phi)
            .map(|(&d, p)| self.coeffs[d] * p)
            .sum()
    }

    /// Gradient of a P1 or P1Disc field on element `e`.
    pub fn scalar_gradient(&self, e: usize) -> Result<Point2<T>> {
        match self.kind() {
            SpaceKind::P1 | SpaceKind::P1Disc => {}
            SpaceKind::P0 => return Ok([T::zero(); 2]),
            k => {
                return Err(Error::KindMismatch {
                    expected: "P1|P0|P1Disc",
                    found: k.name(),
                })
            }
        }
        let g = bary_gradients(self.mesh(), e);
        let dofs = self.space.element_dofs(e);
        let mut out = [T::zero(); 2];
        for (i, &d) in dofs.as_slice().iter().enumerate() {
            out[0] += self.coeffs[d] * g[i][0];
            out[1] += self.coeffs[d] * g[i][1];
        }
        Ok(out)
    }

    fn check_vector(&self, e: usize, x: Point2<T>) -> Result<()> {
        if !self.kind().is_vector() {
            return Err(Error::KindMismatch {
                expected: "RT0|RT1",
                found: self.kind().name(),
            });
        }
        let eps = geom_eps::<T>();
        if self.mesh().barycentric(e, x).iter().any(|&l| l < -eps) {
            return Err(Error::PointNotInElement {
                element: e,
                x: x[0].to_f64().unwrap_or(f64::NAN),
                y: x[1].to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Value of an RT field at physical point `x` of element `e`.
    pub fn eval_rt(&self, e: usize, x: Point2<T>) -> Result<Point2<T>> {
        self.check_vector(e, x)?;
        Ok(self.vector_at(e, x).0)
    }

    /// Divergence of an RT field at physical point `x` of element `e`.
    pub fn div_rt(&self, e: usize, x: Point2<T>) -> Result<T> {
        self.check_vector(e, x)?;
        Ok(self.vector_at(e, x).1)
    }

    /// Unchecked `(value, divergence)` of an RT field.
    #[inline]
    pub fn vector_at(&self, e: usize, x: Point2<T>) -> (Point2<T>, T) {
        let basis = self.space.vector_basis(e, x);
        let dofs = self.space.element_dofs(e);
        let mut v = [T::zero(); 2];
        let mut d = T::zero();
        for (j, &g) in dofs.as_slice().iter().enumerate().take(basis.len) {
            let c = self.coeffs[g];
            v[0] += c * basis.values[j][0];
            v[1] += c * basis.values[j][1];
            d += c * basis.divs[j];
        }
        (v, d)
    }
}

/// Lagrange interpolant of `f` in P1.
pub fn interpolate_p1<T: Real, F: Fn(Point2<T>) -> T>(space: &Arc<Space<T>>, f: F) -> Result<Field<T>> {
    if space.kind() != SpaceKind::P1 {
        return Err(Error::KindMismatch {
            expected: "P1",
            found: space.kind().name(),
        });
    }
    let coeffs = space.mesh().nodes().iter().map(|&p| f(p)).collect();
    Field::from_coeffs(space, coeffs)
}

/// Canonical RT0/RT1 interpolant of `v` (edge flux moments, plus interior
/// moments for RT1).
pub fn interpolate_rt<T: Real, F: Fn(Point2<T>) -> Point2<T>>(space: &Arc<Space<T>>, v: F) -> Result<Field<T>> {
    let mesh = space.mesh();
    let mut coeffs = vec![T::zero(); space.ndofs()];
    let (gx, gw) = gauss_legendre::<T>(5)?;
    let half = T::lit(0.5);
    match space.kind() {
        SpaceKind::Rt0 => {
            for (edge, c) in coeffs.iter_mut().enumerate() {
                *c = edge_moments(mesh, edge, &gx, &gw, half, &v).0;
            }
        }
        SpaceKind::Rt1 => {
            for edge in 0..mesh.num_edges() {
                let (m0, m1) = edge_moments(mesh, edge, &gx, &gw, half, &v);
                coeffs[2 * edge] = m0;
                coeffs[2 * edge + 1] = m1;
            }
            let rule = triangle_rule::<T>(8)?;
            let base = 2 * mesh.num_edges();
            for e in 0..mesh.num_elements() {
                let jac = mesh.area(e) + mesh.area(e);
                let (mut sx, mut sy) = (T::zero(), T::zero());
                for (p, w) in rule.iter() {
                    let val = v(mesh.point_at(e, p));
                    sx += w * jac * val[0];
                    sy += w * jac * val[1];
                }
                coeffs[base + 2 * e] = sx;
                coeffs[base + 2 * e + 1] = sy;
            }
        }
        k => {
            return Err(Error::KindMismatch {
                expected: "RT0|RT1",
                found: k.name(),
            })
        }
    }
    Field::from_coeffs(space, coeffs)
}
