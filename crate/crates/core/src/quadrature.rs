//! Gauss-Legendre rules on intervals and collapsed (Duffy) product rules on
//! triangles and convex polygons.

use crate::geometry::Point;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(a + len * x))
            .sum::<f64>()
            * len
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, dp)
}

/// Collapsed product rule on the reference triangle `{(s, t): s, t >= 0, s + t <= 1}`;
/// weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    points: Vec<(f64, f64, f64)>,
}

impl TriangleRule {
    /// `n x n` points, exact for polynomials of total degree `2n - 2`.
    pub fn collapsed(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let mut points = Vec::with_capacity(n * n);
        for (&u, &wu) in gl.nodes.iter().zip(&gl.weights) {
            for (&v, &wv) in gl.nodes.iter().zip(&gl.weights) {
                // (u, v) in the unit square -> (s, t) = (u, v(1 - u)), Jacobian (1 - u)
                points.push((u, v * (1.0 - u), wu * wv * (1.0 - u)));
            }
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over the triangle `(a, b, c)`.
    pub fn integrate_triangle(
        &self,
        a: Point,
        b: Point,
        c: Point,
        mut f: impl FnMut(Point) -> f64,
    ) -> f64 {
        let e1 = b - a;
        let e2 = c - a;
        let jac = e1.cross(e2).abs();
        self.points
            .iter()
            .map(|&(s, t, w)| w * f(a + e1 * s + e2 * t))
            .sum::<f64>()
            * jac
    }

    /// Integrates `f` over a convex polygon by fanning triangles from its
    /// vertex centroid.
    pub fn integrate_polygon(&self, poly: &[Point], mut f: impl FnMut(Point) -> f64) -> f64 {
        let n = poly.len();
        let apex = poly.iter().fold(Point::default(), |s, &p| s + p) * (1.0 / n as f64);
        (0..n)
            .map(|i| self.integrate_triangle(apex, poly[i], poly[(i + 1) % n], &mut f))
            .sum()
    }

    /// Quadrature nodes and weights (absolute, already scaled) over a convex polygon.
    pub fn polygon_nodes(&self, poly: &[Point]) -> Vec<(Point, f64)> {
        let n = poly.len();
        let apex = poly.iter().fold(Point::default(), |s, &p| s + p) * (1.0 / n as f64);
        let mut out = Vec::with_capacity(n * self.points.len());
        for i in 0..n {
            let a = apex;
            let e1 = poly[i] - a;
            let e2 = poly[(i + 1) % n] - a;
            let jac = e1.cross(e2).abs();
            for &(s, t, w) in &self.points {
                out.push((a + e1 * s + e2 * t, w * jac));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            assert!((gl.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-12 * exact, "n = {n}");
        }
    }

    #[test]
    fn gauss_legendre_smooth_function() {
        let gl = GaussLegendre::new(10);
        let got = gl.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rule_monomials() {
        // int_T s^a t^b = a! b! / (a + b + 2)!
        let rule = TriangleRule::collapsed(4);
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        let o = Point::new(0.0, 0.0);
        for a in 0..4u32 {
            for b in 0..(7 - a).min(4) {
                let got = rule.integrate_triangle(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), |p| {
                    p.x.powi(a as i32) * p.y.powi(b as i32)
                });
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((got - exact).abs() < 1e-14, "s^{a} t^{b}");
            }
        }
    }

    #[test]
    fn polygon_integral_of_linear_function() {
        let rule = TriangleRule::collapsed(2);
        let sq = [
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
        ];
        let got = rule.integrate_polygon(&sq, |p| p.x);
        assert!((got - 1.5).abs() < 1e-15);
        let total: f64 = rule.polygon_nodes(&sq).iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
