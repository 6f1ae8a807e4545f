//! Scalar model constants and the admissibility region.
//!
//! The damping shift `delta` must satisfy `alpha + delta^2 - beta*delta > 0` and
//! `beta - 3*delta > 0`, and the noise intensity is bounded by
//! `delta*c2*c3*p / (c1*(p-1))`. All conditions are open, so boundary values
//! are rejected with exact floating comparisons.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Restoring coefficient.
    pub alpha: f64,
    /// Damping coefficient.
    pub beta: f64,
    /// Shift of the first-order transform `xi = u_t + delta u`, also the OU drift.
    pub delta: f64,
    /// Additive noise intensity.
    pub epsilon: f64,
    /// Nonlinearity exponent.
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Number of independent noise modes.
    pub m: usize,
}

/// A violated admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `alpha + delta^2 - beta*delta <= 0`.
    Coercivity { value: f64 },
    /// `beta - 3*delta <= 0`.
    DampingGap { value: f64 },
    /// `epsilon >= max_noise_intensity`.
    NoiseIntensity { epsilon: f64, bound: f64 },
    /// `p <= 2`.
    Exponent { p: f64 },
    /// A field that must be strictly positive (or nonnegative for epsilon, >= 1 for m).
    Domain { name: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Coercivity { value } => {
                write!(f, "alpha + delta^2 - beta*delta = {value} is not > 0")
            }
            Violation::DampingGap { value } => write!(f, "beta - 3*delta = {value} is not > 0"),
            Violation::NoiseIntensity { epsilon, bound } => {
                write!(f, "epsilon = {epsilon} is not < {bound}")
            }
            Violation::Exponent { p } => write!(f, "p = {p} is not > 2"),
            Violation::Domain { name, value } => write!(f, "{name} = {value} is out of range"),
        }
    }
}

impl Params {
    /// The reference parameter set used throughout the test-suite:
    /// `alpha = beta = 1`, `delta = 0.25`, `epsilon = 0.1`, `p = 4` with the
    /// exact constants of the canonical nonlinearity `(c1, c2, c3) = (1, p, 1/p)`.
    pub fn reference() -> Self {
        Params {
            alpha: 1.0,
            beta: 1.0,
            delta: 0.25,
            epsilon: 0.1,
            p: 4.0,
            c1: 1.0,
            c2: 4.0,
            c3: 0.25,
            m: 1,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `alpha + delta^2 - beta*delta`, the weight of `||u||^2` in the E-norm.
    pub fn coercivity(&self) -> f64 {
        self.alpha + self.delta * self.delta - self.beta * self.delta
    }

    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("p", self.p),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::NonFinite { name, value });
            }
        }
        Ok(())
    }

    /// Lists every violated admissibility condition. An empty list means the
    /// parameters are admissible.
    pub fn validate(&self) -> Result<Vec<Violation>> {
        self.check_finite()?;
        let mut out = Vec::new();
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
        ] {
            if !(value > 0.0) {
                out.push(Violation::Domain { name: name.into(), value });
            }
        }
        if self.epsilon < 0.0 {
            out.push(Violation::Domain { name: "epsilon".into(), value: self.epsilon });
        }
        if self.m == 0 {
            out.push(Violation::Domain { name: "m".into(), value: 0.0 });
        }
        if !(self.p > 2.0) {
            out.push(Violation::Exponent { p: self.p });
        }
        let coercivity = self.coercivity();
        if !(coercivity > 0.0) {
            out.push(Violation::Coercivity { value: coercivity });
        }
        let gap = self.beta - 3.0 * self.delta;
        if !(gap > 0.0) {
            out.push(Violation::DampingGap { value: gap });
        }
        let bound = self.max_noise_intensity()?;
        if !(self.epsilon < bound) {
            out.push(Violation::NoiseIntensity { epsilon: self.epsilon, bound });
        }
        Ok(out)
    }

    /// Returns `self` if admissible, otherwise an [`Error::Inadmissible`]
    /// carrying the report of [`Params::validate`].
    pub fn ensure_valid(&self) -> Result<&Self> {
        let report = self.validate()?;
        if report.is_empty() {
            Ok(self)
        } else {
            Err(Error::Inadmissible(report))
        }
    }

    /// Upper bound on the noise intensity, `delta*c2*c3*p / (c1*(p-1))`.
    pub fn max_noise_intensity(&self) -> Result<f64> {
        self.check_finite()?;
        Ok(self.delta * self.c2 * self.c3 * self.p / (self.c1 * (self.p - 1.0)))
    }

    /// `delta*c2 - epsilon*c1*(p-1)/(c3*p)`: the coefficient of the potential
    /// term once the noise contribution has been absorbed.
    pub fn potential_rate(&self) -> f64 {
        self.delta * self.c2 - self.epsilon * self.c1 * (self.p - 1.0) / (self.c3 * self.p)
    }

    /// Exponential decay rate `sigma = min{delta, delta*c2 - epsilon*c1*(p-1)/(c3*p)}`.
    pub fn decay_rate_sigma(&self) -> Result<f64> {
        self.ensure_valid()?;
        Ok(self.delta.min(self.potential_rate()))
    }
}
