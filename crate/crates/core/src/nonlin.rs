//! Nonlinear term `f(u)`, its antiderivative `F(u)` and the structural
//! growth/coercivity inequalities with constants `(C1, C2, C3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `f(u) = |u|^{p-2} u`, `F(u) = |u|^p / p`.
    Canonical,
    /// `f ≡ 0`. Violates the coercivity assumption; only for linear
    /// convergence studies, never for attractor experiments.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub p: f64,
}

/// The three structural constants `(C1, C2, C3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Nonlinearity {
    pub fn canonical(p: f64) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponent {p} must be > 2")));
        }
        Ok(Nonlinearity { kind: NonlinearityKind::Canonical, p })
    }

    pub fn linear(p: f64) -> Self {
        Nonlinearity { kind: NonlinearityKind::Linear, p }
    }

    /// Exact constants of the canonical family; `None` for the linear switch.
    pub fn constants(&self) -> Option<StructuralConstants> {
        match self.kind {
            NonlinearityKind::Canonical => {
                Some(StructuralConstants { c1: 1.0, c2: self.p, c3: 1.0 / self.p })
            }
            NonlinearityKind::Linear => None,
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Canonical => {
                let m = abs_pow(u, self.p - 1.0);
                if u < 0.0 {
                    -m
                } else {
                    m
                }
            }
            NonlinearityKind::Linear => 0.0,
        }
    }

    #[inline]
    #[allow(non_snake_case)]
    pub fn F(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Canonical => abs_pow(u, self.p) / self.p,
            NonlinearityKind::Linear => 0.0,
        }
    }

    /// `φ_1, φ_2, φ_3` vanish for both families.
    pub fn phi3_l1(&self) -> f64 {
        0.0
    }

    pub fn phi1_l2_sq(&self) -> f64 {
        0.0
    }

    pub fn phi2_l1(&self) -> f64 {
        0.0
    }

    pub fn apply_f(&self, u: &Field) -> Field {
        u.map(|x| self.f(x))
    }

    /// `h^n Σ F(u_i)`.
    pub fn potential(&self, u: &Field) -> f64 {
        u.values().iter().map(|&x| self.F(x)).sum::<f64>() * u.grid().cell_volume()
    }
}

/// `|x|^e`. Integer exponents use left-to-right products so that
/// `|x|^{e-1} * |x|` reproduces `|x|^e` bit for bit, which keeps the identity
/// `f(u) u = p F(u)` exact in floating point.
#[inline]
pub fn abs_pow(x: f64, e: f64) -> f64 {
    let a = x.abs();
    if e.fract() == 0.0 && (1.0..=16.0).contains(&e) {
        let mut acc = a;
        for _ in 1..e as u32 {
            acc *= a;
        }
        acc
    } else {
        a.powf(e)
    }
}

pub fn f_eval(u: f64, nl: &Nonlinearity) -> f64 {
    nl.f(u)
}

#[allow(non_snake_case)]
pub fn F_eval(u: f64, nl: &Nonlinearity) -> f64 {
    nl.F(u)
}

/// Worst margin of each inequality over the sampled `u` values; a negative
/// margin is a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `min_u (C1 |u|^{p-1} + φ1) - |f(u)|`
    pub growth_margin: f64,
    pub growth_worst_u: f64,
    /// `min_u f(u) u - C2 F(u) - φ2`
    pub dissipation_margin: f64,
    pub dissipation_worst_u: f64,
    /// `min_u F(u) - C3 |u|^p + φ3`
    pub coercivity_margin: f64,
    pub coercivity_worst_u: f64,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.growth_margin >= 0.0 && self.dissipation_margin >= 0.0 && self.coercivity_margin >= 0.0
    }
}

/// Checks the three structural inequalities at every sample, with zero
/// `φ` functions.
pub fn verify_assumption2(
    nl: &Nonlinearity,
    constants: StructuralConstants,
    samples: &[f64],
) -> AssumptionReport {
    let p = nl.p;
    let mut r = AssumptionReport {
        growth_margin: f64::INFINITY,
        growth_worst_u: f64::NAN,
        dissipation_margin: f64::INFINITY,
        dissipation_worst_u: f64::NAN,
        coercivity_margin: f64::INFINITY,
        coercivity_worst_u: f64::NAN,
    };
    for &u in samples {
        let (f, big_f) = (nl.f(u), nl.F(u));
        let growth = constants.c1 * abs_pow(u, p - 1.0) - f.abs();
        let dissipation = f * u - constants.c2 * big_f;
        let coercivity = big_f - constants.c3 * abs_pow(u, p);
        if growth < r.growth_margin {
            r.growth_margin = growth;
            r.growth_worst_u = u;
        }
        if dissipation < r.dissipation_margin {
            r.dissipation_margin = dissipation;
            r.dissipation_worst_u = u;
        }
        if coercivity < r.coercivity_margin {
            r.coercivity_margin = coercivity;
            r.coercivity_worst_u = u;
        }
    }
    r
}
