use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

type ComplexMap = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A univariate function over the complex numbers, optionally with its derivative.
#[derive(Clone)]
pub struct ScalarFunction {
    name: String,
    value: ComplexMap,
    derivative: Option<ComplexMap>,
}

impl ScalarFunction {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative(
        name: impl Into<String>,
        value: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        derivative: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.value)(z)
    }

    /// Evaluates and rejects non-finite results.
    pub fn eval_checked(&self, z: Complex64) -> Result<Complex64> {
        let v = self.eval(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::FunctionUndefined { at: z })
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn derivative(&self, z: Complex64) -> Option<Complex64> {
        self.derivative.as_ref().map(|d| d(z))
    }

    pub fn derivative_checked(&self, z: Complex64) -> Result<Complex64> {
        let d = self
            .derivative
            .as_ref()
            .ok_or_else(|| Error::MissingDerivative(self.name.clone()))?;
        let v = d(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::FunctionUndefined { at: z })
        }
    }

    /// The derivative as a function in its own right (its derivative is unknown).
    pub fn derivative_function(&self) -> Result<ScalarFunction> {
        let d = self
            .derivative
            .clone()
            .ok_or_else(|| Error::MissingDerivative(self.name.clone()))?;
        Ok(Self {
            name: format!("d/dz {}", self.name),
            value: d,
            derivative: None,
        })
    }

    pub fn exp() -> Self {
        Self::with_derivative("exp", |z: Complex64| z.exp(), |z: Complex64| z.exp())
    }

    /// `sqrt(-z)` on the principal branch; analytic off the nonnegative real axis.
    pub fn sqrt_neg() -> Self {
        Self::with_derivative(
            "sqrt-neg",
            |z: Complex64| (-z).sqrt(),
            |z: Complex64| -0.5 / (-z).sqrt(),
        )
    }

    /// `phi(z) = (exp(z) - 1) / z`, entire.
    pub fn phi() -> Self {
        Self::with_derivative("phi", phi, phi_derivative)
    }

    /// `z^n`.
    pub fn power(n: u32) -> Self {
        Self::with_derivative(
            format!("pow:{n}"),
            move |z: Complex64| z.powu(n),
            move |z: Complex64| {
                if n == 0 {
                    Complex64::ZERO
                } else {
                    z.powu(n - 1) * n as f64
                }
            },
        )
    }

    /// `1 / (z + shift)`.
    pub fn shifted_reciprocal(shift: f64) -> Self {
        Self::with_derivative(
            format!("inv-shift:{shift}"),
            move |z: Complex64| 1.0 / (z + shift),
            move |z: Complex64| -1.0 / ((z + shift) * (z + shift)),
        )
    }

    pub fn cos() -> Self {
        Self::with_derivative("cos", |z: Complex64| z.cos(), |z: Complex64| -z.sin())
    }

    /// Parses the names used on the command line and over the C interface:
    /// `exp`, `sqrt-neg`, `phi`, `cos`, `pow:N`, `inv-shift:A`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let bad = || Error::InvalidConfig(format!("unknown scalar function `{spec}`"));
        match (head, arg) {
            ("exp", None) => Ok(Self::exp()),
            ("sqrt-neg", None) => Ok(Self::sqrt_neg()),
            ("phi", None) => Ok(Self::phi()),
            ("cos", None) => Ok(Self::cos()),
            ("pow", Some(n)) => n.parse().map(Self::power).map_err(|_| bad()),
            ("inv-shift", Some(a)) => a.parse().map(Self::shifted_reciprocal).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("name", &self.name)
            .field("has_derivative", &self.has_derivative())
            .finish()
    }
}

/// `(exp(z) - 1) / z` with the removable singularity handled by a Taylor series.
pub fn phi(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // sum_{j>=0} z^j / (j+1)!
        let mut term = Complex64::ONE;
        let mut sum = Complex64::ONE;
        for j in 1..30 {
            term = term * z / (j + 1) as f64;
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

pub fn phi_derivative(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // sum_{j>=0} (j+1) z^j / (j+2)!
        let mut pow = Complex64::ONE;
        let mut fact = 2.0;
        let mut sum = Complex64::new(0.5, 0.0);
        for j in 1..30 {
            pow *= z;
            fact *= (j + 2) as f64;
            let term = pow * ((j + 1) as f64 / fact);
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - phi(z)) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(f: &ScalarFunction, z: Complex64) -> Complex64 {
        let h = 1e-5 * (1.0 + z.norm());
        (f.eval(z + h) - f.eval(z - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let samples = [
            Complex64::new(-0.7, 0.2),
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.3, -0.4),
            Complex64::new(-0.1, 0.0),
        ];
        for f in [
            ScalarFunction::exp(),
            ScalarFunction::sqrt_neg(),
            ScalarFunction::phi(),
            ScalarFunction::power(3),
            ScalarFunction::shifted_reciprocal(20.0),
            ScalarFunction::cos(),
        ] {
            for &z in &samples {
                let exact = f.derivative(z).unwrap();
                let fd = central_difference(&f, z);
                assert!(
                    (exact - fd).norm() <= 1e-6 * exact.norm().max(1e-3),
                    "{} at {z}: {exact} vs {fd}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn phi_is_continuous_across_series_switch() {
        for r in [0.499_999, 0.500_001] {
            let z = Complex64::new(-r, 0.0);
            let direct = (z.exp() - 1.0) / z;
            assert!((phi(z) - direct).norm() < 1e-14);
            let d_direct = (z.exp() - direct) / z;
            assert!((phi_derivative(z) - d_direct).norm() < 1e-13);
        }
        assert_eq!(phi(Complex64::ZERO), Complex64::ONE);
        assert_eq!(phi_derivative(Complex64::ZERO), Complex64::new(0.5, 0.0));
    }

    #[test]
    fn parse_names() {
        assert_eq!(ScalarFunction::parse("exp").unwrap().name(), "exp");
        assert_eq!(ScalarFunction::parse("pow:3").unwrap().eval(Complex64::new(2.0, 0.0)).re, 8.0);
        assert!(ScalarFunction::parse("inv-shift:x").is_err());
        assert!(ScalarFunction::parse("tanh").is_err());
    }

    #[test]
    fn missing_derivative_is_reported() {
        let f = ScalarFunction::new("plain", |z| z);
        assert!(matches!(
            f.derivative_checked(Complex64::ONE),
            Err(Error::MissingDerivative(_))
        ));
    }
}
