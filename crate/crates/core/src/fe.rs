//! Reference P1/P2 triangles: quadrature, shape functions up to second
//! derivatives, and the affine map to physical elements.
//!
//! The reference triangle is `(0,0), (1,0), (0,1)` with barycentric
//! coordinates `l0 = 1 - xi - eta`, `l1 = xi`, `l2 = eta`.

use crate::error::FeError;
use crate::mesh::Degree;
use crate::Point;

pub type Mat2 = [[f64; 2]; 2];

/// Symmetric Gauss rule on the reference triangle. Weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    degree: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integral over the reference triangle.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

/// Degree-6 rule used for all assembly and error integration.
pub const DEFAULT_QUADRATURE_DEGREE: usize = 6;

/// Orbit generators in barycentric form: (a, a, 1-2a) orbits of size 3 and
/// (a, b, 1-a-b) orbits of size 6; weights normalized to sum to one.
struct Orbits {
    s21: &'static [(f64, f64)],
    s111: &'static [(f64, f64, f64)],
}

const RULE2: Orbits = Orbits {
    s21: &[(1.0 / 6.0, 1.0 / 3.0)],
    s111: &[],
};

const RULE4: Orbits = Orbits {
    s21: &[
        (0.445_948_490_915_964_9, 0.223_381_589_678_011_5),
        (0.091_576_213_509_770_74, 0.109_951_743_655_321_87),
    ],
    s111: &[],
};

const RULE6: Orbits = Orbits {
    s21: &[
        (0.249_286_745_170_910_4, 0.116_786_275_726_379_37),
        (0.063_089_014_491_502_23, 0.050_844_906_370_206_82),
    ],
    s111: &[(
        0.310_352_451_033_784_4,
        0.053_145_049_844_816_95,
        0.082_851_075_618_373_58,
    )],
};

/// Symmetric rule exact for polynomials up to `degree` (2, 4 or 6).
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule, FeError> {
    let orbits = match degree {
        2 => RULE2,
        4 => RULE4,
        6 => RULE6,
        d => return Err(FeError::UnsupportedQuadrature(d)),
    };
    let mut bary: Vec<([f64; 3], f64)> = Vec::new();
    for &(a, w) in orbits.s21 {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            bary.push((p, w));
        }
    }
    for &(a, b, w) in orbits.s111 {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            bary.push((p, w));
        }
    }
    let (points, weights) = bary
        .into_iter()
        .map(|(l, w)| ([l[1], l[2]], 0.5 * w))
        .unzip();
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

/// Shape function data at one reference point. Only the first
/// `degree.nodes_per_cell()` slots are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct BasisValues {
    degree: Degree,
    pub values: [f64; 6],
    pub gradients: [[f64; 2]; 6],
    pub hessians: [Mat2; 6],
}

impl BasisValues {
    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree.nodes_per_cell()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

fn outer_sym(a: [f64; 2], b: [f64; 2], scale: f64) -> Mat2 {
    [
        [scale * 2.0 * a[0] * b[0], scale * (a[0] * b[1] + a[1] * b[0])],
        [scale * (a[1] * b[0] + a[0] * b[1]), scale * 2.0 * a[1] * b[1]],
    ]
}

/// Values, reference gradients and reference Hessians of the Lagrange basis.
pub fn eval_basis(degree: Degree, xi: Point) -> BasisValues {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    let g = BARY_GRAD;
    let mut out = BasisValues {
        degree,
        values: [0.0; 6],
        gradients: [[0.0; 2]; 6],
        hessians: [[[0.0; 2]; 2]; 6],
    };
    match degree {
        Degree::P1 => {
            for i in 0..3 {
                out.values[i] = l[i];
                out.gradients[i] = g[i];
            }
        }
        Degree::P2 => {
            for i in 0..3 {
                out.values[i] = l[i] * (2.0 * l[i] - 1.0);
                let s = 4.0 * l[i] - 1.0;
                out.gradients[i] = [s * g[i][0], s * g[i][1]];
                // 4 grad(l) grad(l)^T
                out.hessians[i] = outer_sym(g[i], g[i], 2.0);
            }
            for e in 0..3 {
                let (a, b) = (e, (e + 1) % 3);
                out.values[3 + e] = 4.0 * l[a] * l[b];
                out.gradients[3 + e] = [
                    4.0 * (l[b] * g[a][0] + l[a] * g[b][0]),
                    4.0 * (l[b] * g[a][1] + l[a] * g[b][1]),
                ];
                out.hessians[3 + e] = outer_sym(g[a], g[b], 4.0);
            }
        }
    }
    out
}

/// Affine map `x = x0 + J xi` of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: Point,
    pub jacobian: Mat2,
    pub inverse_transpose: Mat2,
    /// `|det J|`, twice the triangle area.
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Result<Self, FeError> {
        let [a, b, c] = vertices;
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det <= 0.0 || !det.is_finite() {
            return Err(FeError::DegenerateElement(det));
        }
        // J^{-1} = [[j11, -j01], [-j10, j00]] / det, transposed.
        let inverse_transpose = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        Ok(Self {
            origin: a,
            jacobian: j,
            inverse_transpose,
            det,
        })
    }

    pub fn map(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn physical_points(&self, rule: &QuadratureRule) -> Vec<Point> {
        rule.points().iter().map(|&p| self.map(p)).collect()
    }
}

/// Shape function data mapped to a physical element.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalBasis {
    degree: Degree,
    pub values: [f64; 6],
    pub gradients: [[f64; 2]; 6],
    pub hessians: [Mat2; 6],
    pub laplacians: [f64; 6],
}

impl PhysicalBasis {
    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree.nodes_per_cell()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value, gradient and Hessian of `sum_i coeffs[i] * phi_i`.
    pub fn combine(&self, coeffs: &[f64]) -> (f64, [f64; 2], Mat2) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (i, &c) in coeffs.iter().enumerate().take(self.len()) {
            v += c * self.values[i];
            g[0] += c * self.gradients[i][0];
            g[1] += c * self.gradients[i][1];
            for r in 0..2 {
                for s in 0..2 {
                    h[r][s] += c * self.hessians[i][r][s];
                }
            }
        }
        (v, g, h)
    }
}

/// Chain rule through the affine map: gradients by `J^{-T}`, Hessians by
/// `J^{-T} H J^{-1}`.
pub fn physical_gradients_and_laplacians(
    geom: &ElementGeometry,
    basis: &BasisValues,
) -> Result<PhysicalBasis, FeError> {
    if geom.det <= 0.0 {
        return Err(FeError::DegenerateElement(geom.det));
    }
    let g = &geom.inverse_transpose;
    let mut out = PhysicalBasis {
        degree: basis.degree(),
        values: basis.values,
        gradients: [[0.0; 2]; 6],
        hessians: [[[0.0; 2]; 2]; 6],
        laplacians: [0.0; 6],
    };
    for i in 0..basis.len() {
        let r = basis.gradients[i];
        out.gradients[i] = [
            g[0][0] * r[0] + g[0][1] * r[1],
            g[1][0] * r[0] + g[1][1] * r[1],
        ];
        let h = &basis.hessians[i];
        let mut gh = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                gh[a][b] = g[a][0] * h[0][b] + g[a][1] * h[1][b];
            }
        }
        let mut ph = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                ph[a][b] = gh[a][0] * g[b][0] + gh[a][1] * g[b][1];
            }
        }
        out.hessians[i] = ph;
        out.laplacians[i] = ph[0][0] + ph[1][1];
    }
    Ok(out)
}

/// One quadrature point of an element with everything assembly needs.
#[derive(Debug, Clone, Copy)]
pub struct QuadraturePoint {
    pub x: Point,
    /// Reference weight times `|det J|`.
    pub weight: f64,
    pub p2: PhysicalBasis,
    pub p1: PhysicalBasis,
}

/// Shape functions of both degrees tabulated on one reference rule, so each
/// element only pays for the affine transformation.
#[derive(Debug, Clone)]
pub struct ReferenceTable {
    rule: QuadratureRule,
    p2: Vec<BasisValues>,
    p1: Vec<BasisValues>,
}

impl ReferenceTable {
    pub fn new(rule: QuadratureRule) -> Self {
        let p2 = rule.points().iter().map(|&x| eval_basis(Degree::P2, x)).collect();
        let p1 = rule.points().iter().map(|&x| eval_basis(Degree::P1, x)).collect();
        Self { rule, p2, p1 }
    }

    pub fn with_degree(degree: usize) -> Result<Self, FeError> {
        Ok(Self::new(quadrature_rule(degree)?))
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn element(&self, vertices: [Point; 3]) -> Result<Vec<QuadraturePoint>, FeError> {
        let geom = ElementGeometry::new(vertices)?;
        self.rule
            .iter()
            .zip(self.p2.iter().zip(&self.p1))
            .map(|((xi, w), (b2, b1))| {
                Ok(QuadraturePoint {
                    x: geom.map(xi),
                    weight: w * geom.det,
                    p2: physical_gradients_and_laplacians(&geom, b2)?,
                    p1: physical_gradients_and_laplacians(&geom, b1)?,
                })
            })
            .collect()
    }
}
