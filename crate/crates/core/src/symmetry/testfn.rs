use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A polynomial gauge function p: ℝ → ℝ^d with exact derivatives of every order.
///
/// Component J is Σ_j `coeffs[J][j]` (s − center)^j.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTestFunction {
    center: f64,
    coeffs: Vec<Vec<f64>>,
}

impl GaugeTestFunction {
    pub fn new(center: f64, coeffs: Vec<Vec<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "gauge dimension must be at least 1");
        GaugeTestFunction { center, coeffs }
    }

    /// p ≡ 0.
    pub fn zero(d: usize) -> Self {
        Self::new(0.0, vec![vec![]; d])
    }

    /// c·(s − at)^order / order! in component `comp`, zero elsewhere: at
    /// s = `at` every jet vanishes except the `order`-th, which equals c.
    pub fn impulse(d: usize, at: f64, order: usize, comp: usize, c: f64) -> Self {
        let mut coeffs = vec![vec![]; d];
        let factorial: f64 = (1..=order).map(|k| k as f64).product();
        coeffs[comp] = vec![0.0; order + 1];
        coeffs[comp][order] = c / factorial;
        Self::new(at, coeffs)
    }

    /// Seeded polynomials of the given degree centered at `a`, with
    /// coefficients u·0.1/L^{j−1} (u uniform in [−1, 1], L = b − a) so that
    /// p and its derivatives stay of size 0.1 across [a, b].
    pub fn random(seed: u64, d: usize, degree: usize, a: f64, b: f64) -> Self {
        let len = b - a;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..d)
            .map(|_| {
                (0..=degree)
                    .map(|j| rng.gen_range(-1.0..=1.0) * 0.1 / len.powi(j as i32 - 1))
                    .collect()
            })
            .collect();
        Self::new(a, coeffs)
    }

    /// `count` random test functions with seeds `seed, seed + 1, …`.
    pub fn family(count: usize, seed: u64, d: usize, degree: usize, a: f64, b: f64) -> Vec<Self> {
        (0..count as u64)
            .map(|i| Self::random(seed.wrapping_add(i), d, degree, a, b))
            .collect()
    }

    pub fn d(&self) -> usize {
        self.coeffs.len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .map(|c| c.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// `order`-th derivative of component `comp` at `t`.
    pub fn value(&self, order: usize, comp: usize, t: f64) -> f64 {
        let c = &self.coeffs[comp];
        let s = t - self.center;
        // Horner on the differentiated coefficients.
        let mut acc = 0.0;
        for j in (order..c.len()).rev() {
            let falling: f64 = ((j - order + 1)..=j).map(|k| k as f64).product();
            acc = acc * s + c[j] * falling;
        }
        acc
    }

    /// Jets of orders `0..=max_order` at `t`, laid out `[order * d + comp]`.
    pub fn jets(&self, t: f64, max_order: usize) -> Vec<f64> {
        let d = self.d();
        let mut out = Vec::with_capacity((max_order + 1) * d);
        for order in 0..=max_order {
            for comp in 0..d {
                out.push(self.value(order, comp, t));
            }
        }
        out
    }
}

impl std::fmt::Display for GaugeTestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (j, comp) in self.coeffs.iter().enumerate() {
            if j > 0 {
                write!(f, "; ")?;
            }
            write!(f, "p_{} = ", j + 1)?;
            if comp.is_empty() {
                write!(f, "0")?;
            }
            for (k, c) in comp.iter().enumerate() {
                if k > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "{c:?}*(t - {:?})^{k}", self.center)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_cubic() {
        // p = 1 + 2s + 3s^2 + 4s^3 with s = t - 1
        let p = GaugeTestFunction::new(1.0, vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let t = 1.5;
        let s: f64 = 0.5;
        assert_eq!(
            p.value(0, 0, t),
            1.0 + 2.0 * s + 3.0 * s * s + 4.0 * s.powi(3)
        );
        assert_eq!(p.value(1, 0, t), 2.0 + 6.0 * s + 12.0 * s * s);
        assert_eq!(p.value(2, 0, t), 6.0 + 24.0 * s);
        assert_eq!(p.value(3, 0, t), 24.0);
        assert_eq!(p.value(4, 0, t), 0.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn impulse_isolates_one_jet() {
        let p = GaugeTestFunction::impulse(2, 0.7, 2, 1, 1e-5);
        let jets = p.jets(0.7, 4);
        for (i, v) in jets.iter().enumerate() {
            let expected = if i == 2 * 2 + 1 { 1e-5 } else { 0.0 };
            assert!((v - expected).abs() < 1e-20, "{i}: {v}");
        }
    }

    #[test]
    fn random_family_is_seeded() {
        let a = GaugeTestFunction::family(3, 9, 1, 3, 0.0, 2.0);
        let b = GaugeTestFunction::family(3, 9, 1, 3, 0.0, 2.0);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        // |p'| stays well below 1 on [a, b].
        for p in &a {
            for i in 0..=20 {
                assert!(p.value(1, 0, i as f64 * 0.1).abs() < 0.5);
            }
        }
    }
}
