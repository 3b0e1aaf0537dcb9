//! Composite Gauss-Legendre and Simpson rules with panel doubling.

use num_complex::Complex64;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
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
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A reusable Gauss-Legendre rule.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        GaussLegendre { nodes, weights }
    }

    /// `int_a^b f` over `panels` equal panels.
    pub fn integrate_complex<F: Fn(f64) -> Complex64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> Complex64 {
        let h = (b - a) / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..panels {
            let lo = a + h * j as f64;
            let mid = lo + h / 2.0;
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += f(mid + h / 2.0 * x) * *w;
            }
            total += acc * (h / 2.0);
        }
        total
    }
}

/// Composite Simpson rule with an even number of panels.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let k = panels.max(2) + panels % 2;
    let h = (b - a) / k as f64;
    let mut s = f(a) + f(b);
    for j in 1..k {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * j as f64);
    }
    s * h / 3.0
}

/// Result of a panel-doubling integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined<T> {
    pub value: T,
    /// Difference between the last two refinements.
    pub delta: f64,
    pub panels: usize,
    pub converged: bool,
}

/// Doubles the Gauss-Legendre panel count until two successive estimates
/// agree to `tol` or `max_panels` is reached.
pub fn refine_complex<F: Fn(f64) -> Complex64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    max_panels: usize,
    tol: f64,
) -> Refined<Complex64> {
    let mut panels = start_panels.max(1);
    let mut prev = rule.integrate_complex(f, a, b, panels);
    loop {
        let next_panels = panels * 2;
        let next = rule.integrate_complex(f, a, b, next_panels);
        let delta = (next - prev).norm();
        if delta <= tol || next_panels >= max_panels {
            return Refined {
                value: next,
                delta,
                panels: next_panels,
                converged: delta <= tol,
            };
        }
        prev = next;
        panels = next_panels;
    }
}

/// Simpson with panel doubling.
pub fn refine_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    max_panels: usize,
    tol: f64,
) -> Refined<f64> {
    let mut panels = start_panels.max(2);
    let mut prev = simpson(f, a, b, panels);
    loop {
        let next_panels = panels * 2;
        let next = simpson(f, a, b, next_panels);
        let delta = (next - prev).abs();
        if delta <= tol || next_panels >= max_panels {
            return Refined {
                value: next,
                delta,
                panels: next_panels,
                converged: delta <= tol,
            };
        }
        prev = next;
        panels = next_panels;
    }
}
