//! Shared numerical and statistical helpers: summary statistics, empirical
//! CDFs with Dvoretzky-Kiefer-Wolfowitz bands, trend detection, quadrature.

use crate::error::{Error, Result};

/// Compensated (Kahan) accumulator; keeps long sums accurate to a few ulps
/// independent of the term count.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and its standard error (unbiased variance).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (mean(xs), f64::INFINITY);
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
    (m, (var / n as f64).sqrt())
}

/// Two-sample z-score for a difference of independent estimates.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let pooled = (se_a * se_a + se_b * se_b).sqrt();
    if pooled == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / pooled
    }
}

/// Empirical CDF over a fixed sample. Evaluation counts values `<= t`.
#[derive(Clone, Debug)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
        Ecdf { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.sorted.partition_point(|x| *x <= t);
        k as f64 / self.sorted.len() as f64
    }

    /// DKW half-width so that the true CDF lies within `eval +/- eps`
    /// simultaneously for all t, with probability `1 - alpha`.
    pub fn dkw_eps(&self, alpha: f64) -> f64 {
        dkw_eps(self.sorted.len(), alpha)
    }
}

/// DKW band half-width for a sample of size `n` at level `1 - alpha`.
pub fn dkw_eps(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Sup distance between two empirical CDFs over a grid.
pub fn sup_distance_on_grid(a: &Ecdf, b: &Ecdf, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|t| (a.eval(*t) - b.eval(*t)).abs())
        .fold(0.0, f64::max)
}

/// Sup distance between an empirical CDF and a reference function on a grid.
pub fn sup_distance_to_fn(a: &Ecdf, reference: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|t| (a.eval(*t) - reference(*t)).abs())
        .fold(0.0, f64::max)
}

/// Ordinary least squares slope of y on x with its standard error.
/// Returns an error when fewer than 3 points are supplied.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewSamples { what: "regression points", need: 3, got: n });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("degenerate regression abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let se = (rss / (n as f64 - 2.0) / sxx).sqrt();
    Ok((slope, se))
}

/// Chi-square distance between a normalized observation histogram and a
/// normalized expectation: sum (o - e)^2 / e over cells with e > 0.
pub fn chi_square_distance(observed: &[f64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::LengthMismatch { expected: expected.len(), got: observed.len() });
    }
    let so: f64 = observed.iter().sum();
    let se: f64 = expected.iter().sum();
    if so <= 0.0 || se <= 0.0 {
        return Err(Error::InvalidParams("empty histogram".into()));
    }
    Ok(observed
        .iter()
        .zip(expected)
        .filter(|(_, e)| **e > 0.0)
        .map(|(o, e)| {
            let d = o / so - e / se;
            d * d / (e / se)
        })
        .sum())
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Exact for polynomials of degree <= 2n - 1 and
/// geometrically convergent for analytic integrands.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` on [a, b] with an `n`-point Gauss-Legendre rule.
pub fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite Simpson rule with `n` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Density of a centered Gaussian with the given variance.
pub fn gaussian_density(x: f64, variance: f64) -> f64 {
    (-(x * x) / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        let expected_se = (5.0 / 3.0 / 4.0_f64).sqrt();
        assert!((se - expected_se).abs() < 1e-15);
    }

    #[test]
    fn ecdf_eval_and_dkw() {
        let e = Ecdf::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.5);
        assert_eq!(e.eval(9.0), 1.0);
        let eps = e.dkw_eps(0.01);
        assert!((eps - ((2.0f64 / 0.01).ln() / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // degree-7 polynomial integrated by a 4-point rule
        let f = |x: f64| 3.0 * x.powi(7) - x.powi(4) + 2.0 * x - 1.0;
        let got = gl_integrate(f, -1.0, 1.0, 4);
        let want = -2.0 / 5.0 - 2.0; // odd terms vanish on [-1,1]
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn gauss_legendre_handles_reciprocal() {
        let got = gl_integrate(|x| 1.0 / x, 0.5, 2.0, 32);
        assert!((got - 4.0f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn ols_detects_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (slope, se) = ols_slope(&xs, &ys).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn simpson_matches_known_integral() {
        let got = simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 200);
        assert!((got - 2.0).abs() < 1e-9);
    }
}
