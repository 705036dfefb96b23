//! Symmetric Gaussian quadrature on the reference triangle and Gauss–Legendre
//! rules on edges.
//!
//! Triangle rules are the positive-weight symmetric tables of Dunavant
//! (degrees 1, 2, 4, 5, 6, 8); requests for degree 3 and 7 are served by the
//! next rule up.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quadrature rule on the reference triangle `{(x, y): x, y ≥ 0, x + y ≤ 1}`.
///
/// Points are barycentric triples; the reference point of `(l0, l1, l2)` is
/// `(l1, l2)`. Weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(barycentric point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = ([T; 3], T)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and its 3 permutations.
    Three(f64, f64),
    /// `(a, b, 1 - a - b)` and its 6 permutations.
    Six(f64, f64, f64),
}

// Weights below are relative to the triangle area (they sum to one).
const RULE1: &[Orbit] = &[Orbit::Centroid(1.0)];
const RULE2: &[Orbit] = &[Orbit::Three(1.0 / 6.0, 1.0 / 3.0)];
const RULE4: &[Orbit] = &[
    Orbit::Three(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
    Orbit::Three(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
];
const RULE5: &[Orbit] = &[
    Orbit::Centroid(0.225),
    Orbit::Three(0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74),
    Orbit::Three(0.101_286_507_323_456_338_8, 0.125_939_180_544_827_152_6),
];
const RULE6: &[Orbit] = &[
    Orbit::Three(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
    Orbit::Three(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
    Orbit::Six(
        0.053_145_049_844_816_947_353,
        0.310_352_451_033_784_405_42,
        0.082_851_075_618_373_575_194,
    ),
];
const RULE8: &[Orbit] = &[
    Orbit::Centroid(0.144_315_607_677_787_168_25),
    Orbit::Three(0.459_292_588_292_723_156_03, 0.095_091_634_267_284_624_794),
    Orbit::Three(0.170_569_307_751_760_206_62, 0.103_217_370_534_718_250_28),
    Orbit::Three(0.050_547_228_317_030_975_458, 0.032_458_497_623_198_080_311),
    Orbit::Six(
        0.008_394_777_409_957_605_337_2,
        0.263_112_829_634_638_113_42,
        0.027_230_314_174_434_994_265,
    ),
];

/// Symmetric rule exact for all polynomials of degree `<= degree`.
pub fn triangle_rule<T: Real>(degree: usize) -> Result<QuadRule<T>> {
    let (table, exact) = match degree {
        1 => (RULE1, 1),
        2 => (RULE2, 2),
        3 | 4 => (RULE4, 4),
        5 => (RULE5, 5),
        6 => (RULE6, 6),
        7 | 8 => (RULE8, 8),
        d => return Err(Error::UnsupportedDegree(d)),
    };
    let half = T::lit(0.5);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut push = |p: [f64; 3], w: f64| {
        points.push(p.map(T::lit));
        weights.push(T::lit(w) * half);
    };
    for orbit in table {
        match *orbit {
            Orbit::Centroid(w) => push([1.0 / 3.0; 3], w),
            Orbit::Three(a, w) => {
                let b = 1.0 - 2.0 * a;
                push([a, a, b], w);
                push([a, b, a], w);
                push([b, a, a], w);
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    push(p, w);
                }
            }
        }
    }
    Ok(QuadRule {
        points,
        weights,
        degree: exact,
    })
}

/// Gauss–Legendre rule on `[-1, 1]` with `n` points (`1..=5`), returned as
/// `(nodes, weights)`.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (x, w): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_85,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_85,
            ],
        ),
        5 => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683,
                0.0,
                0.538_469_310_105_683,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_08,
                0.478_628_670_499_366_47,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_47,
                0.236_926_885_056_189_08,
            ],
        ),
        // Gauss-Legendre with n points is exact to degree 2n - 1.
        _ => return Err(Error::UnsupportedDegree(2 * n - 1)),
    };
    Ok((x.iter().map(|&v| T::lit(v)).collect(), w.iter().map(|&v| T::lit(v)).collect()))
}

/// Two-point Gauss rule on `[-1, 1]`, exact to degree 3.
pub fn edge_rule2<T: Real>() -> (Vec<T>, Vec<T>) {
    gauss_legendre(2).expect("two-point rule exists")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^a y^b over the reference triangle.
    fn monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &QuadRule<f64>, a: i32, b: i32) -> f64 {
        rule.iter().map(|(p, w)| w * p[1].powi(a) * p[2].powi(b)).sum()
    }

    #[test]
    fn exactness_sweep() {
        for deg in 1..=8 {
            let rule = triangle_rule::<f64>(deg).unwrap();
            assert!(rule.degree >= deg);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in &rule.points {
                assert!(((p[0] + p[1] + p[2]) - 1.0).abs() < 1e-15);
            }
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let q = integrate(&rule, a as i32, b as i32);
                    assert!((q - monomial(a, b)).abs() < 1e-13, "deg {deg}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn centroid_rule() {
        let r = triangle_rule::<f64>(1).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.points[0].iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-16));
        assert_eq!(r.weights[0], 0.5);
    }

    #[test]
    fn degree_two_x_squared() {
        let r = triangle_rule::<f64>(2).unwrap();
        assert_eq!(r.len(), 3);
        assert!((integrate(&r, 2, 0) - 1.0 / 12.0).abs() < 1e-14);
        assert!((integrate(&r, 1, 1) - 1.0 / 24.0).abs() < 1e-14);
        assert!((integrate(&r, 0, 2) - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn degree_five_random_polynomial() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let r = triangle_rule::<f64>(5).unwrap();
        assert_eq!(r.len(), 7);
        let mut exact = 0.0;
        let mut coeffs = Vec::new();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let c: f64 = rng.random_range(-1.0..1.0);
                exact += c * monomial(a, b);
                coeffs.push((a as i32, b as i32, c));
            }
        }
        let q: f64 = coeffs.iter().map(|&(a, b, c)| c * integrate(&r, a, b)).sum();
        assert!((q - exact).abs() < 1e-13);
    }

    #[test]
    fn unsupported() {
        assert!(matches!(triangle_rule::<f64>(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(triangle_rule::<f64>(9), Err(Error::UnsupportedDegree(9))));
    }

    #[test]
    fn gauss_legendre_exact() {
        for n in 1..=5 {
            let (x, w) = gauss_legendre::<f64>(n).unwrap();
            for k in 0..(2 * n) as i32 {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn f32_rule() {
        let r = triangle_rule::<f32>(4).unwrap();
        let s: f32 = r.weights.iter().sum();
        assert!((s - 0.5).abs() < 1e-6);
    }
}
