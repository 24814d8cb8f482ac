use thiserror::Error;

/// Uniform grid over [a - tau, b] with the delay and the interval both whole step counts.
///
/// Node `i` sits at `a + (i - M) h`; node `M` is `a` and node `M + K` is `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub h: f64,
    /// Steps per delay (0 when tau = 0).
    pub delay_steps: usize,
    /// Steps in [a, b]; always even.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("target step must be positive and finite, got {0:?}")]
    BadStep(f64),
    #[error("interval [{a:?}, {b:?}] is empty")]
    EmptyInterval { a: f64, b: f64 },
    #[error("(b−a)/τ = {ratio:?} is not close to a rational with denominator ≤ {max_den}; no uniform grid aligns both")]
    Incommensurate { ratio: f64, max_den: u64 },
}

const MAX_DENOMINATOR: u64 = 1000;
const MIN_DELAY_STEPS: usize = 4;
const MIN_STEPS: usize = 4;

impl Grid {
    pub fn node_count(&self) -> usize {
        self.delay_steps + self.steps + 1
    }

    /// Index of the node at t = a.
    pub fn start(&self) -> usize {
        self.delay_steps
    }

    /// Index of the node at t = b.
    pub fn end(&self) -> usize {
        self.delay_steps + self.steps
    }

    pub fn time(&self, node: usize) -> f64 {
        self.a + (node as f64 - self.delay_steps as f64) * self.h
    }

    /// Midpoint between `node` and `node + 1`.
    pub fn half_time(&self, node: usize) -> f64 {
        self.a + (node as f64 - self.delay_steps as f64 + 0.5) * self.h
    }

    /// Times of the nodes in [a, b].
    pub fn domain_times(&self) -> Vec<f64> {
        (self.start()..=self.end()).map(|i| self.time(i)).collect()
    }
}

/// Best rational approximation p/q of `x` with q ≤ `max_den` within `rel_tol`.
fn rational(x: f64, max_den: u64, rel_tol: f64) -> Option<(u64, u64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let ai = r.floor();
        if ai > 1e12 {
            break;
        }
        let ai = ai as u64;
        let p2 = ai.checked_mul(p1)?.checked_add(p0)?;
        let q2 = ai.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if ((p1 as f64 / q1 as f64) - x).abs() <= rel_tol * x {
            return Some((p1, q1));
        }
        let frac = r - ai as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Grid with h ≤ target_h (up to 1e-9 relative) such that tau = M h with
/// M ≥ 4 and b − a = K h with K even and ≥ 4.
pub fn make_grid(a: f64, b: f64, tau: f64, target_h: f64) -> Result<Grid, GridError> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(GridError::BadStep(target_h));
    }
    if !(a < b) {
        return Err(GridError::EmptyInterval { a, b });
    }
    let length = b - a;
    if tau == 0.0 {
        let mut steps = ((length / target_h) - 1e-9).ceil().max(1.0) as usize;
        steps = steps.max(MIN_STEPS);
        steps += steps % 2;
        return Ok(Grid {
            a,
            b,
            tau,
            h: length / steps as f64,
            delay_steps: 0,
            steps,
        });
    }
    let ratio = length / tau;
    let (p, q) = rational(ratio, MAX_DENOMINATOR, 1e-9).ok_or(GridError::Incommensurate {
        ratio,
        max_den: MAX_DENOMINATOR,
    })?;
    let (p, q) = (p as usize, q as usize);
    let unit = tau / q as f64;
    let mut s = ((unit / target_h) - 1e-9).ceil().max(1.0) as usize;
    while q * s < MIN_DELAY_STEPS || (p * s) % 2 == 1 || p * s < MIN_STEPS {
        s += 1;
    }
    Ok(Grid {
        a,
        b,
        tau,
        h: unit / s as f64,
        delay_steps: q * s,
        steps: p * s,
    })
}
