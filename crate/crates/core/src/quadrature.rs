//! Fixed Gauss–Legendre rules on a reference interval.

/// Nodes on [-1, 1] and weights summing to 2.
pub struct GaussRule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

pub const GAUSS2: GaussRule = GaussRule {
    nodes: &[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
    weights: &[1.0, 1.0],
};

pub const GAUSS3: GaussRule = GaussRule {
    nodes: &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
    weights: &[
        0.555_555_555_555_555_6,
        0.888_888_888_888_888_9,
        0.555_555_555_555_555_6,
    ],
};

pub const GAUSS5: GaussRule = GaussRule {
    nodes: &[
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ],
    weights: &[
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ],
};

impl GaussRule {
    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        half * sum
    }

    /// Points on `[a, b]` paired with their scaled weights.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// Composite rule: `pieces` equal subintervals of `[a, b]`.
pub fn composite<F: Fn(f64) -> f64>(rule: &GaussRule, a: f64, b: f64, pieces: usize, f: F) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.integrate(lo, lo + h, &f)
        })
        .sum()
}
