use serde::{Deserialize, Serialize};

use super::{PathEnsemble, PathsError};

/// Which past state a functional reads, relative to the conditioning time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    /// `ω(s)`.
    S,
    /// `ω(s/2)`.
    HalfS,
    /// `ω(c s)`; adapted only for `c ≤ 1`.
    Fraction(f64),
}

impl Observation {
    pub fn fraction(&self) -> f64 {
        match self {
            Self::S => 1.0,
            Self::HalfS => 0.5,
            Self::Fraction(c) => *c,
        }
    }
}

/// Bounded functionals `g(ω)` of a single past state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GFunctional {
    /// `g ≡ c`, `|c| ≤ 1`.
    Constant { c: f64 },
    /// `1{|ω(τ)| ≤ radius}`.
    Indicator { at: Observation, radius: f64 },
    /// `tanh(ω₁(τ) / scale)`.
    Tanh { at: Observation, scale: f64 },
    /// `cos(freq · ω₁(τ))`.
    Cos { at: Observation, freq: f64 },
}

impl GFunctional {
    /// The registry used by the martingale suites.
    pub fn registry() -> Vec<Self> {
        vec![
            Self::Constant { c: 1.0 },
            Self::Indicator { at: Observation::S, radius: 1.0 },
            Self::Indicator { at: Observation::HalfS, radius: 1.0 },
            Self::Tanh { at: Observation::S, scale: 1.0 },
            Self::Tanh { at: Observation::HalfS, scale: 1.0 },
            Self::Cos { at: Observation::S, freq: 1.0 },
            Self::Cos { at: Observation::HalfS, freq: 2.0 },
        ]
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant { c } => format!("const({c})"),
            Self::Indicator { at, radius } => format!("1{{|w({}s)|<={radius}}}", at.fraction()),
            Self::Tanh { at, scale } => format!("tanh(w1({}s)/{scale})", at.fraction()),
            Self::Cos { at, freq } => format!("cos({freq}*w1({}s))", at.fraction()),
        }
    }

    pub fn observation(&self) -> Option<Observation> {
        match self {
            Self::Constant { .. } => None,
            Self::Indicator { at, .. } | Self::Tanh { at, .. } | Self::Cos { at, .. } => Some(*at),
        }
    }

    /// `(inf g, sup g)` over all paths.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Constant { c } => (*c, *c),
            Self::Indicator { .. } => (0.0, 1.0),
            Self::Tanh { .. } | Self::Cos { .. } => (-1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<(), PathsError> {
        let ok = match self {
            Self::Constant { c } => c.abs() <= 1.0,
            Self::Indicator { radius, .. } => *radius >= 0.0,
            Self::Tanh { scale, .. } => *scale > 0.0,
            Self::Cos { freq, .. } => freq.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(PathsError::InvalidArgument(format!("functional {} is not bounded by 1", self.label())))
        }
    }

    /// The time this functional reads when conditioning at `s`, rejecting reads after `s`.
    pub fn read_time(&self, s: f64) -> Result<Option<f64>, PathsError> {
        match self.observation() {
            None => Ok(None),
            Some(at) => {
                let c = at.fraction();
                if !(0.0..=1.0).contains(&c) {
                    return Err(PathsError::NotAdapted { label: self.label(), at: c * s, s });
                }
                Ok(Some(c * s))
            }
        }
    }

    fn apply(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Indicator { radius, .. } => {
                if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh { scale, .. } => (x[0] / scale).tanh(),
            Self::Cos { freq, .. } => (freq * x[0]).cos(),
        }
    }

    /// `g` on every path (blown paths included as NaN) for conditioning time `s`.
    pub fn evaluate(&self, ens: &PathEnsemble, s: f64) -> Result<Vec<f64>, PathsError> {
        self.validate()?;
        match self.read_time(s)? {
            None => Ok(vec![self.apply(&[]); ens.n_paths()]),
            Some(tau) => {
                let r = ens.record_index(tau)?;
                Ok((0..ens.n_paths()).map(|i| self.apply(ens.state(i, r))).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn registry_reads_never_exceed_s(s in 0.0f64..10.0, c in 0.0f64..2.0) {
            for g in GFunctional::registry() {
                if let Some(t) = g.read_time(s).unwrap() {
                    prop_assert!(t <= s);
                }
            }
            let g = GFunctional::Tanh { at: Observation::Fraction(c), scale: 1.0 };
            match g.read_time(s) {
                Ok(Some(t)) => prop_assert!(c <= 1.0 && t <= s),
                Err(PathsError::NotAdapted { .. }) => prop_assert!(c > 1.0),
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn registry_is_bounded() {
        for g in GFunctional::registry() {
            let (lo, hi) = g.range();
            assert!(lo >= -1.0 && hi <= 1.0);
            g.validate().unwrap();
        }
        assert!(GFunctional::Constant { c: 1.5 }.validate().is_err());
    }
}
