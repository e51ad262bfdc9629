//! Legendre and integrated Legendre polynomials, Gauss–Legendre rules.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{invalid, Result};

/// Tolerance for the debug-mode range check on local coordinates.
const RANGE_SLACK: f64 = 1e-12;

/// Integrated Legendre values (or first derivatives) `I_0..I_p` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialBatch {
    pub values: Vec<f64>,
    pub degree: usize,
    pub diff_order: usize,
}

/// Gauss–Legendre abscissae and weights on `[-1, 1]`, points ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn check_coordinate(r: f64) -> Result<()> {
    if !r.is_finite() {
        return invalid(format!("local coordinate {r} is not finite"));
    }
    if cfg!(debug_assertions) && r.abs() > 1.0 + RANGE_SLACK {
        return invalid(format!("local coordinate {r} outside [-1, 1]"));
    }
    Ok(())
}

/// Legendre polynomials `L_0..L_p` and their derivatives at `r`, from the
/// three-term recurrences in a single pass.
pub fn legendre_values(r: f64, p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_coordinate(r)?;
    let mut values = vec![0.0; p + 1];
    let mut derivatives = vec![0.0; p + 1];
    legendre_into(r, &mut values, &mut derivatives);
    Ok((values, derivatives))
}

fn legendre_into(r: f64, values: &mut [f64], derivatives: &mut [f64]) {
    let n = values.len();
    values[0] = 1.0;
    derivatives[0] = 0.0;
    if n > 1 {
        values[1] = r;
        derivatives[1] = 1.0;
    }
    for q in 2..n {
        let a = (2 * q - 1) as f64 / q as f64;
        let b = (q - 1) as f64 / q as f64;
        values[q] = a * r * values[q - 1] - b * values[q - 2];
        derivatives[q] = a * (values[q - 1] + r * derivatives[q - 1]) - b * derivatives[q - 2];
    }
}

/// Integrated Legendre polynomials `I_0..I_p` (`k = 0`) or `I'_0..I'_p` (`k = 1`).
pub fn integrated_legendre(r: f64, p: usize, k: usize) -> Result<PolynomialBatch> {
    check_coordinate(r)?;
    if p < 1 {
        return invalid("integrated Legendre basis needs degree >= 1");
    }
    if k > 1 {
        return invalid(format!("derivative order {k} not supported (only 0 and 1)"));
    }
    let mut values = vec![0.0; p + 1];
    let mut derivatives = vec![0.0; p + 1];
    integrated_legendre_into(r, &mut values, &mut derivatives);
    Ok(PolynomialBatch {
        values: if k == 0 { values } else { derivatives },
        degree: p,
        diff_order: k,
    })
}

/// Fills both `I_q(r)` and `I'_q(r)` for `q < values.len()`. No argument checks;
/// slices must have equal length of at least one.
pub(crate) fn integrated_legendre_into(r: f64, values: &mut [f64], derivatives: &mut [f64]) {
    let n = values.len();
    debug_assert_eq!(n, derivatives.len());
    values[0] = 0.5 * (1.0 - r);
    derivatives[0] = -0.5;
    if n < 2 {
        return;
    }
    values[1] = 0.5 * (1.0 + r);
    derivatives[1] = 0.5;
    if n < 3 {
        return;
    }

    // L_{q-2}, L_{q-1} and derivatives, rolled forward alongside.
    let (mut l0, mut l1) = (1.0, r);
    let (mut d0, mut d1) = (0.0, 1.0);
    for q in 2..n {
        let a = (2 * q - 1) as f64 / q as f64;
        let b = (q - 1) as f64 / q as f64;
        let l2 = a * r * l1 - b * l0;
        let d2 = a * (l1 + r * d1) - b * d0;
        let scale = 1.0 / ((4 * q - 2) as f64).sqrt();
        values[q] = (l2 - l0) * scale;
        derivatives[q] = (d2 - d0) * scale;
        (l0, l1) = (l1, l2);
        (d0, d1) = (d1, d2);
    }
}

fn rule_cache() -> &'static RwLock<HashMap<usize, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The `n`-point Gauss–Legendre rule, computed once per `n` and cached.
pub fn gauss_legendre_rule(n: usize) -> Result<Arc<QuadratureRule>> {
    if n == 0 {
        return invalid("quadrature rule needs at least one point");
    }
    if let Some(rule) = rule_cache().read().unwrap().get(&n) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    let mut cache = rule_cache().write().unwrap();
    Ok(cache.entry(n).or_insert(rule).clone())
}

fn compute_gauss_legendre(n: usize) -> QuadratureRule {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut values = vec![0.0; n + 1];
    let mut derivatives = vec![0.0; n + 1];

    // Roots are symmetric; solve for the non-negative half.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            legendre_into(x, &mut values, &mut derivatives);
            let dx = values[n] / derivatives[n];
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        legendre_into(x, &mut values, &mut derivatives);
        let w = 2.0 / ((1.0 - x * x) * derivatives[n] * derivatives[n]);
        points[n - 1 - i] = x;
        points[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn legendre_at_one_is_one() {
        let (values, _) = legendre_values(1.0, 3).unwrap();
        for v in values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn legendre_closed_form_degree_two() {
        let (values, _) = legendre_values(0.5, 2).unwrap();
        assert_eq!(values[0], 1.0);
        assert_eq!(values[1], 0.5);
        assert_abs_diff_eq!(values[2], (3.0 * 0.25 - 1.0) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(values[2], -0.125, epsilon = 1e-15);
    }

    #[test]
    fn legendre_derivatives_at_origin() {
        let (_, derivatives) = legendre_values(0.0, 1).unwrap();
        assert_eq!(derivatives, vec![0.0, 1.0]);
    }

    #[test]
    fn legendre_rejects_non_finite() {
        assert!(legendre_values(f64::NAN, 2).is_err());
        assert!(integrated_legendre(f64::INFINITY, 2, 0).is_err());
    }

    #[test]
    fn integrated_at_left_end() {
        let batch = integrated_legendre(-1.0, 3, 0).unwrap();
        assert_eq!(batch.values[0], 1.0);
        assert_eq!(batch.values[1], 0.0);
        assert_abs_diff_eq!(batch.values[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(batch.values[3], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn integrated_at_midpoint() {
        // L_2(0) = -1/2 and L_0(0) = 1 give I_2(0) = -1.5 / sqrt(6).
        let batch = integrated_legendre(0.0, 2, 0).unwrap();
        assert_eq!(batch.values[0], 0.5);
        assert_eq!(batch.values[1], 0.5);
        assert_abs_diff_eq!(batch.values[2], -1.5 / 6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(batch.values[2], -0.61237, epsilon = 1e-5);
    }

    #[test]
    fn integrated_linear_derivatives() {
        let batch = integrated_legendre(0.7, 1, 1).unwrap();
        assert_eq!(batch.values, vec![-0.5, 0.5]);
        assert_eq!(batch.diff_order, 1);
    }

    #[test]
    fn integrated_argument_errors() {
        assert!(integrated_legendre(0.0, 2, 2).is_err());
        assert!(integrated_legendre(0.0, 0, 0).is_err());
    }

    #[test]
    fn gauss_one_and_two_points() {
        let rule = gauss_legendre_rule(1).unwrap();
        assert_eq!(rule.points, vec![0.0]);
        assert_abs_diff_eq!(rule.weights[0], 2.0, epsilon = 1e-15);

        let rule = gauss_legendre_rule(2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(rule.points[0], -x, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.points[1], x, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.integrate(-1.0, 1.0, |r| r * r), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_five_points_odd_monomial() {
        let rule = gauss_legendre_rule(5).unwrap();
        assert_abs_diff_eq!(rule.integrate(-1.0, 1.0, |r| r.powi(9)), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_zero_points_rejected() {
        assert!(gauss_legendre_rule(0).is_err());
    }

    #[test]
    fn gauss_rules_are_exact_to_degree_2n_minus_1() {
        for n in 1..=30 {
            let rule = gauss_legendre_rule(n).unwrap();
            assert_eq!(rule.order(), n);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!(rule.points.windows(2).all(|w| w[0] < w[1]));
            assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for degree in 0..2 * n {
                let exact = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
                let approx = rule.integrate(-1.0, 1.0, |r| r.powi(degree as i32));
                assert_abs_diff_eq!(approx, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn endpoint_classification() {
        for p in 1..=12 {
            let left = integrated_legendre(-1.0, p, 0).unwrap().values;
            let right = integrated_legendre(1.0, p, 0).unwrap().values;
            assert_eq!(left[1], 0.0);
            assert_eq!(right[0], 0.0);
            for q in 2..=p {
                assert!(left[q].abs() <= 1e-14 && right[q].abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_integrates_products_of_modes() {
        // Products I_a I_b have degree a + b; the n-point rule must be exact
        // whenever a + b <= 2n - 1. Reference from a 40-point rule.
        let reference = gauss_legendre_rule(40).unwrap();
        for n in 1..=8 {
            let rule = gauss_legendre_rule(n).unwrap();
            for a in 1..=8usize {
                for b in 1..=8usize {
                    if a + b > 2 * n - 1 {
                        continue;
                    }
                    let product = |r: f64| {
                        let v = integrated_legendre(r, a.max(b), 0).unwrap().values;
                        v[a] * v[b]
                    };
                    let exact = reference.integrate(-1.0, 1.0, product);
                    assert_abs_diff_eq!(rule.integrate(-1.0, 1.0, product), exact, epsilon = 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(r in -0.99f64..0.99, p in 1usize..=10) {
            let h = 1e-6;
            let plus = integrated_legendre(r + h, p, 0).unwrap().values;
            let minus = integrated_legendre(r - h, p, 0).unwrap().values;
            let derivative = integrated_legendre(r, p, 1).unwrap().values;
            for q in 0..=p {
                let fd = (plus[q] - minus[q]) / (2.0 * h);
                let scale = derivative[q].abs().max(1.0);
                prop_assert!((fd - derivative[q]).abs() <= 1e-6 * scale);
            }
        }

        #[test]
        fn degree_extension_keeps_prefix(r in -1.0f64..=1.0, p in 1usize..=12, k in 0usize..=1) {
            let short = integrated_legendre(r, p, k).unwrap().values;
            let long = integrated_legendre(r, p + 1, k).unwrap().values;
            prop_assert_eq!(&long[..=p], &short[..]);
        }

        #[test]
        fn linear_modes_partition_unity(r in -1.0f64..=1.0, p in 1usize..=10) {
            let values = integrated_legendre(r, p, 0).unwrap().values;
            prop_assert!((values[0] + values[1] - 1.0).abs() <= 1e-15);
        }
    }
}
