//! Analytic fields with hand-coded derivatives, and the manufactured
//! solution used for the source-problem experiments.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::{Mat2, Vec2};

type Fun<T> = Arc<dyn Fn(Vec2) -> T + Send + Sync>;

#[derive(Clone)]
pub struct AnalyticScalar {
    pub value: Fun<f64>,
    pub gradient: Option<Fun<Vec2>>,
}

/// Vector field `v`; gradient rows are gradients of components
/// (`grad[(i, j)] = d_j v_i`), second derivatives are per component Hessians.
#[derive(Clone)]
pub struct AnalyticVector {
    pub value: Fun<Vec2>,
    pub gradient: Option<Fun<Mat2>>,
    pub hessians: Option<Fun<[Mat2; 2]>>,
}

/// Tensor field `sigma` with first partials `[d_1 sigma, d_2 sigma]`.
#[derive(Clone)]
pub struct AnalyticTensor {
    pub value: Fun<Mat2>,
    pub partials: Option<Fun<[Mat2; 2]>>,
}

impl AnalyticScalar {
    pub fn new(value: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        (self.value)(x)
    }
}

impl AnalyticVector {
    pub fn new(value: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            hessians: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessians(mut self, h: impl Fn(Vec2) -> [Mat2; 2] + Send + Sync + 'static) -> Self {
        self.hessians = Some(Arc::new(h));
        self
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        (self.value)(x)
    }

    /// Constant field.
    pub fn constant(c: Vec2) -> Self {
        Self::new(move |_| c)
            .with_gradient(|_| Mat2::zeros())
            .with_hessians(|_| [Mat2::zeros(); 2])
    }

    /// Affine field `c + G x`.
    pub fn affine(c: Vec2, g: Mat2) -> Self {
        Self::new(move |x| c + g * x)
            .with_gradient(move |_| g)
            .with_hessians(|_| [Mat2::zeros(); 2])
    }
}

impl AnalyticTensor {
    pub fn new(value: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            partials: None,
        }
    }

    pub fn with_partials(mut self, d: impl Fn(Vec2) -> [Mat2; 2] + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(d));
        self
    }

    pub fn eval(&self, x: Vec2) -> Mat2 {
        (self.value)(x)
    }

    pub fn constant(c: Mat2) -> Self {
        Self::new(move |_| c).with_partials(|_| [Mat2::zeros(); 2])
    }

    /// Affine tensor field `c + x_1 a_1 + x_2 a_2`.
    pub fn affine(c: Mat2, a1: Mat2, a2: Mat2) -> Self {
        Self::new(move |x| c + a1 * x.x + a2 * x.y).with_partials(move |_| [a1, a2])
    }
}

/// Derivatives `g, g', g'', g'''` of `sin^2(pi t) exp(a t)`.
///
/// Uses `sin^2(pi t) = (1 - cos(2 pi t)) / 2`, so
/// `g^(n) = (a^n e^{a t} - Re[(a + 2 pi i)^n e^{(a + 2 pi i) t}]) / 2`.
fn sin2_exp_derivatives(a: f64, t: f64) -> [f64; 4] {
    let z = Complex64::new(a, 2.0 * PI);
    let ez = (z * t).exp();
    let ea = (a * t).exp();
    let mut out = [0.0; 4];
    let mut zn = Complex64::new(1.0, 0.0);
    let mut an = 1.0;
    for d in out.iter_mut() {
        *d = 0.5 * (an * ea - (zn * ez).re);
        zn *= z;
        an *= a;
    }
    out
}

/// Manufactured Stokes solution on the unit square with stream function
/// `sin^2(pi x) sin^2(pi y) exp(x + 2y)` and pressure `cos(pi x) sin(pi y)`.
#[derive(Clone)]
pub struct Example1 {
    pub velocity: AnalyticVector,
    pub pressure: AnalyticScalar,
    /// Pseudostress `grad u + p I`.
    pub pseudostress: AnalyticTensor,
    /// Source `f = -Lap u - grad p`.
    pub source: AnalyticVector,
}

impl Example1 {
    pub fn new() -> Self {
        // Stream function phi = g(x) k(y); u = (-g k', g' k).
        let gk = |x: Vec2| {
            (
                sin2_exp_derivatives(1.0, x.x),
                sin2_exp_derivatives(2.0, x.y),
            )
        };
        let pressure = |x: Vec2| (PI * x.x).cos() * (PI * x.y).sin();
        let grad_p = |x: Vec2| {
            Vec2::new(
                -PI * (PI * x.x).sin() * (PI * x.y).sin(),
                PI * (PI * x.x).cos() * (PI * x.y).cos(),
            )
        };
        let grad_u = move |x: Vec2| {
            let (g, k) = gk(x);
            Mat2::new(-g[1] * k[1], -g[0] * k[2], g[2] * k[0], g[1] * k[1])
        };
        let velocity = AnalyticVector::new(move |x| {
            let (g, k) = gk(x);
            Vec2::new(-g[0] * k[1], g[1] * k[0])
        })
        .with_gradient(grad_u)
        .with_hessians(move |x| {
            let (g, k) = gk(x);
            [
                Mat2::new(-g[2] * k[1], -g[1] * k[2], -g[1] * k[2], -g[0] * k[3]),
                Mat2::new(g[3] * k[0], g[2] * k[1], g[2] * k[1], g[1] * k[2]),
            ]
        });
        let source = AnalyticVector::new(move |x| {
            let (g, k) = gk(x);
            let gp = grad_p(x);
            Vec2::new(
                g[2] * k[1] + g[0] * k[3] - gp.x,
                -(g[3] * k[0] + g[1] * k[2]) - gp.y,
            )
        });
        let pseudostress = AnalyticTensor::new(move |x| grad_u(x) + Mat2::identity() * pressure(x))
            .with_partials(move |x| {
                let (g, k) = gk(x);
                let gp = grad_p(x);
                let d1 = Mat2::new(
                    -g[2] * k[1] + gp.x,
                    -g[1] * k[2],
                    g[3] * k[0],
                    g[2] * k[1] + gp.x,
                );
                let d2 = Mat2::new(
                    -g[1] * k[2] + gp.y,
                    -g[0] * k[3],
                    g[2] * k[1],
                    g[1] * k[2] + gp.y,
                );
                [d1, d2]
            });
        let mut p = AnalyticScalar::new(pressure);
        p.gradient = Some(Arc::new(grad_p));
        Self {
            velocity,
            pressure: p,
            pseudostress,
            source,
        }
    }
}

impl Default for Example1 {
    fn default() -> Self {
        Self::new()
    }
}
