//! Scalar ramp functions with exact derivatives.
//!
//! Derivatives of the smoothstep come from truncated Taylor arithmetic
//! (`Jet`), so any order is available without finite differences.

use serde::{Deserialize, Serialize};

/// Truncated Taylor series `Σ_k c_k (t - t_0)^k`, `c_k = f^{(k)}(t_0) / k!`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    /// The identity function expanded at `t`.
    pub fn variable(t: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = t;
        if order >= 1 {
            v[1] = 1.0;
        }
        Jet(v)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `f^{(k)}(t_0)`
    pub fn derivative(&self, k: usize) -> f64 {
        self.0.get(k).map(|c| c * factorial(k)).unwrap_or(0.0)
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet(self.0.iter().map(|a| a * c).collect())
    }

    pub fn offset(&self, c: f64) -> Jet {
        let mut v = self.0.clone();
        v[0] += c;
        Jet(v)
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        Jet((0..n).map(|k| (0..=k).map(|i| self.0[i] * o.0[k - i]).sum()).collect())
    }

    pub fn div(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut q = vec![0.0; n];
        for k in 0..n {
            let s: f64 = (1..=k).map(|i| o.0[i] * q[k - i]).sum();
            q[k] = (self.0[k] - s) / o.0[0];
        }
        Jet(q)
    }

    pub fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| i as f64 * self.0[i] * e[k - i]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Scalar schedule coefficient `t -> f(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ramp {
    Constant {
        value: f64,
    },
    /// `offset + slope * t`
    Linear {
        offset: f64,
        slope: f64,
    },
    /// `Σ_k coefficients[k] t^k`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// C^∞ step from `from` (t <= t0) to `to` (t >= t1) with all derivatives
    /// vanishing at both ends: `s(u) = φ(u) / (φ(u) + φ(1 - u))`, `φ(u) = e^{-1/u}`.
    Smoothstep {
        t0: f64,
        t1: f64,
        from: f64,
        to: f64,
    },
    /// `offset + amplitude * sin(omega t + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

impl Ramp {
    pub fn constant(value: f64) -> Self {
        Ramp::Constant { value }
    }

    /// Taylor jet of the ramp at `t` up to `order`.
    pub fn jet(&self, t: f64, order: usize) -> Jet {
        match self {
            Ramp::Constant { value } => Jet::constant(*value, order),
            Ramp::Linear { offset, slope } => Jet::variable(t, order).scale(*slope).offset(*offset),
            Ramp::Polynomial { coefficients } => {
                // Horner in jet arithmetic.
                let x = Jet::variable(t, order);
                let mut acc = Jet::constant(0.0, order);
                for c in coefficients.iter().rev() {
                    acc = acc.mul(&x).offset(*c);
                }
                acc
            }
            Ramp::Smoothstep { t0, t1, from, to } => {
                let u = (t - t0) / (t1 - t0);
                if u <= 0.0 {
                    return Jet::constant(*from, order);
                }
                if u >= 1.0 {
                    return Jet::constant(*to, order);
                }
                let uj = Jet::variable(t, order).offset(-t0).scale(1.0 / (t1 - t0));
                let one = Jet::constant(1.0, order);
                let phi = |x: &Jet| one.div(x).scale(-1.0).exp();
                let a = phi(&uj);
                let b = phi(&one.sub(&uj));
                a.div(&a.add(&b)).scale(to - from).offset(*from)
            }
            Ramp::Sinusoid { offset, amplitude, omega, phase } => {
                let arg = omega * t + phase;
                let mut v = vec![0.0; order + 1];
                for (k, c) in v.iter_mut().enumerate() {
                    // d^k/dt^k sin(arg) = omega^k sin(arg + k π/2)
                    let d = omega.powi(k as i32) * (arg + k as f64 * std::f64::consts::FRAC_PI_2).sin();
                    *c = amplitude * d / factorial(k);
                }
                v[0] += offset;
                Jet(v)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t, 0).value()
    }

    /// `f^{(k)}(t)`
    pub fn derivative(&self, t: f64, k: usize) -> f64 {
        self.jet(t, k).derivative(k)
    }

    /// True if the ramp has the same value everywhere on `[a, b]`.
    pub fn is_constant_on(&self, a: f64, b: f64) -> bool {
        match self {
            Ramp::Constant { .. } => true,
            Ramp::Linear { slope, .. } => *slope == 0.0 || a == b,
            Ramp::Polynomial { coefficients } => coefficients.iter().skip(1).all(|c| *c == 0.0) || a == b,
            Ramp::Smoothstep { t0, t1, from, to } => from == to || b <= *t0 || a >= *t1,
            Ramp::Sinusoid { amplitude, omega, .. } => *amplitude == 0.0 || *omega == 0.0 || a == b,
        }
    }

    /// Freezes the ramp at its value at `t`.
    pub fn frozen(&self, t: f64) -> Ramp {
        Ramp::Constant { value: self.value(t) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(r: &Ramp, t: f64, h: f64) -> f64 {
        (r.value(t + h) - r.value(t - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let ramps = [
            Ramp::Linear { offset: 0.5, slope: -2.0 },
            Ramp::Polynomial { coefficients: vec![1.0, 0.0, 3.0, -1.0] },
            Ramp::Smoothstep { t0: 0.0, t1: 2.0, from: 0.3, to: 0.6 },
            Ramp::Sinusoid { offset: 1.0, amplitude: 0.2, omega: 3.0, phase: 0.1 },
        ];
        for r in &ramps {
            for t in [0.3, 0.9, 1.4] {
                let h = 1e-4;
                let fd = central(r, t, h);
                assert!((r.derivative(t, 1) - fd).abs() < 1e-6, "{r:?} at {t}");
                // Second derivative from first-derivative differences.
                let fd2 = (r.derivative(t + h, 1) - r.derivative(t - h, 1)) / (2.0 * h);
                assert!((r.derivative(t, 2) - fd2).abs() < 1e-5, "{r:?} at {t}");
            }
        }
    }

    #[test]
    fn central_difference_error_is_second_order() {
        let r = Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.0, to: 1.0 };
        let exact = r.derivative(0.37, 1);
        let e1 = (central(&r, 0.37, 1e-2) - exact).abs();
        let e2 = (central(&r, 0.37, 5e-3) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn smoothstep_is_flat_at_the_ends() {
        let r = Ramp::Smoothstep { t0: 1.0, t1: 3.0, from: 0.3, to: 0.6 };
        assert_eq!(r.value(0.5), 0.3);
        assert_eq!(r.value(3.5), 0.6);
        assert!((r.value(2.0) - 0.45).abs() < 1e-15);
        for k in 1..6 {
            assert_eq!(r.derivative(1.0, k), 0.0);
            assert!(r.derivative(1.0 + 1e-3, k).abs() < 1e-100);
        }
        assert!(r.is_constant_on(0.0, 1.0));
        assert!(!r.is_constant_on(0.0, 1.5));
    }

    #[test]
    fn polynomial_jet_is_exact() {
        let r = Ramp::Polynomial { coefficients: vec![0.0, 0.0, 1.0] };
        assert_eq!(r.derivative(0.0, 1), 0.0);
        assert_eq!(r.derivative(2.0, 1), 4.0);
        assert_eq!(r.derivative(2.0, 2), 2.0);
        assert_eq!(r.derivative(2.0, 3), 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let r = Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 1.3, to: 1.6 };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"kind\":\"smoothstep\""));
        assert_eq!(serde_json::from_str::<Ramp>(&s).unwrap(), r);
    }
}
