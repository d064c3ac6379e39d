//! Quadrature on the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Symmetric Gauss rules (Strang-Fix / Dunavant) cover degrees up to 8; a
//! collapsed Gauss-Legendre product rule handles anything higher.

/// Points are barycentric coordinates; weights sum to 1 so that
/// `integral over K = area(K) * sum_q w_q f(x_q)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Smallest rule from the symmetric table that is exact for polynomials
    /// of total degree `degree`; falls back to [`TriangleRule::conical`].
    pub fn with_degree(degree: usize) -> TriangleRule {
        match degree {
            0 | 1 => symmetric(1, &[(1.0, Orbit::Centroid)]),
            2 => symmetric(2, &[(1.0 / 3.0, Orbit::Three(1.0 / 6.0))]),
            3 | 4 => symmetric(
                4,
                &[
                    (0.223_381_589_678_011, Orbit::Three(0.445_948_490_915_965)),
                    (0.109_951_743_655_322, Orbit::Three(0.091_576_213_509_771)),
                ],
            ),
            5 => symmetric(
                5,
                &[
                    (0.225, Orbit::Centroid),
                    (0.132_394_152_788_506, Orbit::Three(0.470_142_064_105_115)),
                    (0.125_939_180_544_827, Orbit::Three(0.101_286_507_323_456)),
                ],
            ),
            6..=8 => symmetric(
                8,
                &[
                    (0.144_315_607_677_787, Orbit::Centroid),
                    (0.095_091_634_267_285, Orbit::Three(0.459_292_588_292_723)),
                    (0.103_217_370_534_718, Orbit::Three(0.170_569_307_751_760)),
                    (0.032_458_497_623_198, Orbit::Three(0.050_547_228_317_031)),
                    (0.027_230_314_174_435, Orbit::Six(0.008_394_777_409_958, 0.263_112_829_634_638)),
                ],
            ),
            d => TriangleRule::conical(d),
        }
    }

    /// Collapsed (Duffy) product of Gauss-Legendre rules; exact for total
    /// degree `degree`.
    pub fn conical(degree: usize) -> TriangleRule {
        // the collapse adds one degree in the second direction
        let n = (degree + 2) / 2 + 1;
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let s = 0.5 * (x[i] + 1.0);
            for j in 0..n {
                let t = 0.5 * (x[j] + 1.0);
                // (s, t) in the unit square -> (s, (1 - s) t) in the triangle
                let px = s;
                let py = (1.0 - s) * t;
                // reference area is 1/2; weights normalised to sum to 1
                let wt = 0.25 * w[i] * w[j] * (1.0 - s) * 2.0;
                points.push([1.0 - px - py, px, py]);
                weights.push(wt);
            }
        }
        TriangleRule { degree, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

enum Orbit {
    Centroid,
    /// (a, a, 1 - 2a) and permutations
    Three(f64),
    /// (a, b, 1 - a - b) and permutations
    Six(f64, f64),
}

fn symmetric(degree: usize, orbits: &[(f64, Orbit)]) -> TriangleRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (w, orbit) in orbits {
        match *orbit {
            Orbit::Centroid => {
                points.push([1.0 / 3.0; 3]);
                weights.push(*w);
            }
            Orbit::Three(a) => {
                let b = 1.0 - 2.0 * a;
                for p in [[a, a, b], [a, b, a], [b, a, a]] {
                    points.push(p);
                    weights.push(*w);
                }
            }
            Orbit::Six(a, b) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(*w);
                }
            }
        }
    }
    TriangleRule { degree, points, weights }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of x^a y^b over the reference triangle.
    fn exact_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn apply(rule: &TriangleRule, a: i32, b: i32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * 0.5 * p[1].powi(a) * p[2].powi(b))
            .sum()
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        for degree in [1usize, 2, 4, 5, 8, 11, 16] {
            for rule in [TriangleRule::with_degree(degree), TriangleRule::conical(degree)] {
                let sum: f64 = rule.weights.iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
                for a in 0..=degree as u32 {
                    for b in 0..=(degree as u32 - a) {
                        let got = apply(&rule, a as i32, b as i32);
                        let want = exact_monomial(a, b);
                        assert!((got - want).abs() < 2e-14, "deg {degree}: x^{a} y^{b}: {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_small_cases() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
