//! Analytic coefficient and solution fields.

use std::sync::Arc;

use crate::Point;

/// A scalar field with its gradient, e.g. a diffusion coefficient or an
/// exact solution component.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> [f64; 2];
}

pub type SharedScalar = Arc<dyn ScalarField>;
/// Right-hand sides only need point values.
pub type SourceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _: Point) -> f64 {
        self.0
    }

    fn gradient(&self, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// `scale * (1 + slope * x[axis])^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxialQuadratic {
    pub scale: f64,
    pub slope: f64,
    pub axis: usize,
}

impl AxialQuadratic {
    pub fn new(scale: f64, slope: f64, axis: usize) -> Self {
        assert!(axis < 2, "axis must be 0 (x) or 1 (y)");
        Self { scale, slope, axis }
    }
}

impl ScalarField for AxialQuadratic {
    fn value(&self, x: Point) -> f64 {
        let s = 1.0 + self.slope * x[self.axis];
        self.scale * s * s
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        g[self.axis] = 2.0 * self.scale * self.slope * (1.0 + self.slope * x[self.axis]);
        g
    }
}

/// Field assembled from a value closure and a gradient closure.
pub struct FnField<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnField<V, G>
where
    V: Fn(Point) -> f64 + Send + Sync,
    G: Fn(Point) -> [f64; 2] + Send + Sync,
{
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<V, G> ScalarField for FnField<V, G>
where
    V: Fn(Point) -> f64 + Send + Sync,
    G: Fn(Point) -> [f64; 2] + Send + Sync,
{
    fn value(&self, x: Point) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        (self.gradient)(x)
    }
}
