//! Gauss-Legendre rules.

pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule on `[-1, 1]`, roots found by Newton iteration on
    /// the Legendre recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre(order, x);
                derivative = dp;
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(order, x);
            if dp != 0.0 {
                derivative = dp;
            }
            let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights of the rule repeated on `panels` equal sub-intervals
    /// of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let width = (b - a) / panels as f64;
        let half = width / 2.0;
        (0..panels)
            .flat_map(|p| {
                let centre = a + (p as f64 + 0.5) * width;
                self.nodes
                    .iter()
                    .zip(&self.weights)
                    .map(move |(x, w)| (centre + half * x, half * w))
            })
            .collect()
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.composite(a, b, panels)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        for degree in 0..16 {
            let got = rule.integrate(-1.0, 1.0, 1, |x| x.powi(degree));
            let want = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
            assert_abs_diff_eq!(got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn weights_sum_to_interval() {
        for order in [1, 2, 5, 8, 20] {
            let rule = GaussLegendre::new(order);
            let total: f64 = rule.composite(0.0, 3.0, 7).iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(total, 3.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn gaussian_integral() {
        let rule = GaussLegendre::new(8);
        let got = rule.integrate(-10.0, 10.0, 16, |x| (-x * x / 2.0).exp());
        assert_abs_diff_eq!(got, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-12);
    }
}
