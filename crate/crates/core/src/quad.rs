//! Quadrature of smooth 2π-periodic integrands.
//!
//! For an analytic periodic function the composite trapezoid rule converges
//! geometrically, so the difference between `n` and `n/2` nodes bounds the
//! error of the `n`-node value by a wide margin.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Default node count for angle averages.
pub const DEFAULT_NODES: usize = 1 << 14;

/// ∫₀^{2π} f(Φ) dΦ with `n` equispaced nodes.
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    assert!(n > 0, "at least one node");
    let h = TAU / n as f64;
    (0..n).map(|k| f(k as f64 * h)).sum::<f64>() * h
}

/// Result of a quadrature with its halving check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checked {
    pub value: f64,
    /// |I(n) − I(n/2)|, an upper estimate of the error of `value`.
    pub error_estimate: f64,
}

/// [`periodic_trapezoid`] plus a comparison against half the nodes. Fails
/// when the two disagree by more than `rel_tol` times ∫|f|, which stays
/// meaningful for integrals that cancel to (nearly) zero.
pub fn periodic_trapezoid_checked<F: Fn(f64) -> f64>(f: F, n: usize, rel_tol: f64) -> Result<Checked> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Domain {
            field: "nodes",
            value: n as f64,
            reason: "must be even and at least 2",
        });
    }
    let h = TAU / n as f64;
    let (mut even, mut odd, mut magnitude) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let v = f(k as f64 * h);
        magnitude += v.abs();
        if k % 2 == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    let fine = (even + odd) * h;
    let coarse = even * 2.0 * h;
    let error_estimate = (fine - coarse).abs();
    if error_estimate > rel_tol * magnitude * h {
        return Err(Error::Quadrature {
            nodes: n,
            estimate: error_estimate,
        });
    }
    Ok(Checked {
        value: fine,
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constants_and_trig_moments() {
        assert_relative_eq!(periodic_trapezoid(|_| 1.0, 7), TAU, max_relative = 1e-15);
        assert!(periodic_trapezoid(f64::sin, 64).abs() < 1e-14);
        assert_relative_eq!(periodic_trapezoid(|x| x.sin().powi(2), 64), PI, max_relative = 1e-14);
        assert_relative_eq!(periodic_trapezoid(|x| x.cos().powi(4), 64), 0.75 * PI, max_relative = 1e-14);
    }

    #[test]
    fn poisson_kernel_is_exact_to_round_off() {
        // ∫ dΦ / (1 − r cos Φ) = 2π / √(1 − r²)
        let r: f64 = 0.6;
        let exact = TAU / (1.0 - r * r).sqrt();
        let got = periodic_trapezoid_checked(|x| 1.0 / (1.0 - r * x.cos()), 256, 1e-12).unwrap();
        assert_relative_eq!(got.value, exact, max_relative = 1e-14);
        assert!(got.error_estimate < 1e-12);
    }

    #[test]
    fn halving_check_flags_unresolved_integrand() {
        // sharp peak needs far more than 16 nodes
        let err = periodic_trapezoid_checked(|x| 1.0 / (1.0 - 0.999 * x.cos()), 16, 1e-8);
        assert!(matches!(err, Err(Error::Quadrature { nodes: 16, .. })));
    }

    #[test]
    fn odd_node_count_rejected() {
        assert!(periodic_trapezoid_checked(|_| 1.0, 9, 1e-8).is_err());
    }
}
