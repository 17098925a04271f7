/// Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

const SQRT_3_5: f64 = 0.774_596_669_241_483_4;

impl GaussRule {
    pub const THREE: GaussRule = GaussRule {
        nodes: &[-SQRT_3_5, 0.0, SQRT_3_5],
        weights: &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
    };

    pub const FIVE: GaussRule = GaussRule {
        nodes: &[
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
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

    /// Nodes and weights mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.nodes
            .iter()
            .zip(self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` with `panels` equal panels.
pub fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, rule: GaussRule) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        for (x, w) in rule.mapped(lo, hi) {
            total += w * f(x);
        }
    }
    total
}
