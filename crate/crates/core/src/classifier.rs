//! Dynamical classes A–D in the `(f, δ)` plane and the extremal LDS overlaps.

use std::fmt;
use std::str::FromStr;

use crate::{
    error::{Error, Result},
    model::SystemParams,
};

/// Default tolerance `η` on `min λ₁ > 1 − η` used to place the A/B boundary.
pub const DEFAULT_ETA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DynamicalClass {
    A,
    B,
    C,
    D,
}

impl DynamicalClass {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
        }
    }
}

impl fmt::Display for DynamicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DynamicalClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            "D" | "d" => Ok(Self::D),
            other => Err(Error::InvalidParameter(format!("unknown class {other:?}"))),
        }
    }
}

/// Class label together with the signed distances to the three boundaries
/// `fδ − g²/3`, `(f + 1.5g)δ − g²` and `(f − 1.5g)δ − g²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeClass {
    pub label: DynamicalClass,
    pub boundary_distances: [f64; 3],
}

pub fn boundary_distances(f: f64, delta: f64, params: &SystemParams) -> [f64; 3] {
    let g = params.g();
    [
        f * delta - g * g / 3.0,
        (f + 1.5 * g) * delta - g * g,
        (f - 1.5 * g) * delta - g * g,
    ]
}

/// Classifies a constant drive. Points exactly on a boundary belong to the
/// higher class.
pub fn classify(f: f64, delta: f64, params: &SystemParams) -> Result<RegimeClass> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::InvalidParameter(format!("driving strength must be > 0, got {f}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("detuning must be >= 0, got {delta}")));
    }
    let d = boundary_distances(f, delta, params);
    let label = if d[0] < 0.0 {
        DynamicalClass::A
    } else if d[1] < 0.0 {
        DynamicalClass::B
    } else if d[2] < 0.0 {
        DynamicalClass::C
    } else {
        DynamicalClass::D
    };
    Ok(RegimeClass { label, boundary_distances: d })
}

/// `min_t λ₁ = √(1 + g²/fδ) − g²/(2fδ)` along the branch-1 orbit from `z = 0`,
/// valid for `δ > g²/8f`.
pub fn min_lambda1(f: f64, delta: f64, params: &SystemParams) -> Result<f64> {
    let g2 = params.g() * params.g();
    if !(f > 0.0 && delta > g2 / (8.0 * f)) {
        return Err(Error::DomainViolation {
            quantity: "min lambda_1",
            reason: format!("requires delta > g^2/8f = {}, got delta = {delta}", g2 / (8.0 * f)),
        });
    }
    let x = g2 / (f * delta);
    Ok((1.0 + x).sqrt() - 0.5 * x)
}

/// `max_t λ₂ = −(√(1 − g²/fδ) + g²/(2fδ))` along the branch-2 orbit from
/// `z = 0`, valid for `δ ≥ g²/f`.
pub fn max_lambda2(f: f64, delta: f64, params: &SystemParams) -> Result<f64> {
    let g2 = params.g() * params.g();
    if !(f > 0.0 && f * delta >= g2) {
        return Err(Error::DomainViolation {
            quantity: "max lambda_2",
            reason: format!("requires delta >= g^2/f = {}, got delta = {delta}", g2 / f),
        });
    }
    let x = g2 / (f * delta);
    Ok(-((1.0 - x).max(0.0).sqrt() + 0.5 * x))
}

/// Smallest `fδ/g²` for which `min λ₁ > 1 − η`.
pub fn eta_boundary(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(1.0 / (2.0 * eta + (8.0 * eta).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> SystemParams {
        SystemParams::new(1.0, 0.0).unwrap()
    }

    #[test]
    fn labelled_cases() {
        let cases = [
            (5.0, 0.007, DynamicalClass::A),
            (5.0, 0.1, DynamicalClass::B),
            (5.0, 0.2, DynamicalClass::C),
            (15.0, 0.1, DynamicalClass::D),
        ];
        for (f, delta, want) in cases {
            assert_eq!(classify(f, delta, &p()).unwrap().label, want, "f={f} delta={delta}");
        }
    }

    #[test]
    fn boundaries_go_to_the_higher_class() {
        // fδ = 1/3 exactly (f = 1, δ = 1/3 is representable well enough to
        // land on either side, so use f = 3, δ = 1/9 · 1 and check distances)
        let rc = classify(4.0, 1.0 / 12.0, &p()).unwrap();
        assert!(rc.boundary_distances[0].abs() < 1e-15);
        // (f − 1.5)δ = 1 with f = 3.5, δ = 0.5
        let rc = classify(3.5, 0.5, &p()).unwrap();
        assert_eq!(rc.boundary_distances[2], 0.0);
        assert_eq!(rc.label, DynamicalClass::D);
        // (f + 1.5)δ = 1 with f = 2.5, δ = 0.25
        let rc = classify(2.5, 0.25, &p()).unwrap();
        assert_eq!(rc.boundary_distances[1], 0.0);
        assert_eq!(rc.label, DynamicalClass::C);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(classify(0.0, 0.1, &p()).is_err());
        assert!(classify(5.0, -0.1, &p()).is_err());
        assert!(classify(f64::NAN, 0.1, &p()).is_err());
    }

    #[test]
    fn extremal_lambda_examples() {
        let v = min_lambda1(3.0, 1.0 / 9.0, &p()).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let v = max_lambda2(5.0, 0.2, &p()).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
        assert!((min_lambda1(1e6, 1e6, &p()).unwrap() - 1.0).abs() < 1e-12);
        assert!((max_lambda2(1e6, 1e6, &p()).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(min_lambda1(5.0, 0.02, &p()), Err(Error::DomainViolation { .. })));
        assert!(matches!(max_lambda2(5.0, 0.1, &p()), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn eta_half_gives_one_third() {
        assert!((eta_boundary(DEFAULT_ETA).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // consistency: min λ₁ = 1 − η on the boundary
        for eta in [0.05, 0.2, 0.5, 0.9] {
            let fd = eta_boundary(eta).unwrap();
            let v = min_lambda1(1.0, fd, &p()).unwrap();
            assert!((v - (1.0 - eta)).abs() < 1e-12, "eta={eta}");
        }
        assert!(eta_boundary(0.0).is_err());
    }

    #[test]
    fn class_parses_and_prints() {
        for c in [DynamicalClass::A, DynamicalClass::B, DynamicalClass::C, DynamicalClass::D] {
            assert_eq!(c.to_string().parse::<DynamicalClass>().unwrap(), c);
        }
        assert!("E".parse::<DynamicalClass>().is_err());
    }
}
