/// Cubic interpolating spline on a uniform grid with zero end slopes.
#[derive(Debug, Clone)]
pub struct ClampedSpline {
    start: f64,
    step: f64,
    values: Vec<f64>,
    moments: Vec<f64>,
}

impl ClampedSpline {
    /// Interpolates `values` sampled at `start + k * step`. Needs at least two samples.
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs at least two nodes");
        assert!(step > 0.0);
        let h = step;
        // Tridiagonal system for the second derivatives (moments).
        let mut sub = vec![1.0; n];
        let mut diag = vec![4.0; n];
        let mut sup = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0;
        rhs[0] = 6.0 / h * ((values[1] - values[0]) / h);
        diag[n - 1] = 2.0;
        rhs[n - 1] = -6.0 / h * ((values[n - 1] - values[n - 2]) / h);
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        }
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
        // Thomas algorithm; the system is strictly diagonally dominant.
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut moments = vec![0.0; n];
        moments[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            moments[i] = (rhs[i] - sup[i] * moments[i + 1]) / diag[i];
        }
        Self { start, step, values, moments }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let last = self.values.len() - 2;
        let pos = ((x - self.start) / self.step).floor();
        let i = if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(last)
        };
        (i, x - (self.start + i as f64 * self.step))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.step;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let slope = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        y0 + t * (slope + t * (0.5 * m0 + t * (m1 - m0) / (6.0 * h)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.step;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let slope = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        slope + t * (m0 + t * (m1 - m0) / (2.0 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_nodes_and_has_flat_ends() {
        let xs: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (std::f64::consts::PI * x).cos()).collect();
        let s = ClampedSpline::new(0.0, 0.1, ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-13);
        }
        assert!(s.derivative(0.0).abs() < 1e-13);
        assert!(s.derivative(1.0).abs() < 1e-13);
    }

    #[test]
    fn reproduces_cosine_between_nodes() {
        let n = 201;
        let h = 1.0 / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|k| (std::f64::consts::PI * k as f64 * h).cos()).collect();
        let s = ClampedSpline::new(0.0, h, ys);
        for k in 0..1000 {
            let x = (k as f64 + 0.37) / 1000.0;
            assert!((s.eval(x) - (std::f64::consts::PI * x).cos()).abs() < 1e-8);
        }
    }
}
