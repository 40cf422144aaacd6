use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::densities;
use super::{CoeffError, CoefficientField};
use crate::scalar::{norm_sq, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

pub type Params = BTreeMap<String, ParamValue>;

const NAMES: [&str; 7] = [
    "cubic-confine",
    "gaussian-rotation-2d",
    "gradient-drift",
    "heat",
    "oscillatory-1d",
    "ou",
    "polar-vortex-2d",
];

/// Registered builtin names, sorted.
pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

struct Reader<'a> {
    name: &'a str,
    params: &'a Params,
}

impl Reader<'_> {
    fn bad(&self, reason: String) -> CoeffError {
        CoeffError::BadParams { name: self.name.to_string(), reason }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), CoeffError> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(self.bad(format!("unknown key '{k}' (allowed: {keys:?})"))),
            None => Ok(()),
        }
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, CoeffError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(self.bad(format!("'{key}' must be a finite number, got {other:?}"))),
        }
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, CoeffError> {
        let v = self.number(key, default as f64)?;
        if v.fract() != 0.0 || v < min as f64 || v > 64.0 {
            return Err(self.bad(format!("'{key}' must be an integer in [{min}, 64], got {v}")));
        }
        Ok(v as usize)
    }

    fn nonneg(&self, key: &str, default: f64) -> Result<f64, CoeffError> {
        let v = self.number(key, default)?;
        if v < 0.0 {
            return Err(self.bad(format!("'{key}' must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn text<'s>(&'s self, key: &str, default: &'s str) -> Result<&'s str, CoeffError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => Ok(s.as_str()),
            Some(other) => Err(self.bad(format!("'{key}' must be a string, got {other:?}"))),
        }
    }
}

/// Builds a named builtin field.
///
/// | name | keys | field |
/// |---|---|---|
/// | `heat` | `dim`, `a` | `A = aI`, `b = 0` |
/// | `ou` | `dim`, `a`, `theta` | `A = aI`, `b = -θx` |
/// | `cubic-confine` | `dim`, `a` | `A = aI`, `b = -|x|²x` |
/// | `gradient-drift` | `density` (`gaussian`, `oscillatory`, `polar-vortex`), `dim`, `n_max` | `A = I`, `b = ∇ρ/ρ` |
/// | `oscillatory-1d` | none | gradient drift of `c(2+sin x²)/(1+x²)` |
/// | `polar-vortex-2d` | `n_max` | gradient drift of `Σ 2^{-n}ψ(r-n)(2+sin 4ⁿφ)` |
/// | `gaussian-rotation-2d` | none | `A = I`, `b = -x + γ^{-1}(x) h(|x|²) Ux` |
pub fn builtin_field<T: Scalar>(name: &str, params: &Params) -> Result<CoefficientField<T>, CoeffError> {
    let r = Reader { name, params };
    match name {
        "heat" => {
            r.allow(&["dim", "a"])?;
            let d = r.count("dim", 1, 1)?;
            let a = T::lit(r.nonneg("a", 1.0)?);
            Ok(CoefficientField::isotropic(d, name, a, |_, _, out: &mut [T]| out.fill(T::zero())))
        }
        "ou" => {
            r.allow(&["dim", "a", "theta"])?;
            let d = r.count("dim", 1, 1)?;
            let a = T::lit(r.nonneg("a", 1.0)?);
            let theta = T::lit(r.number("theta", 1.0)?);
            Ok(CoefficientField::isotropic(d, name, a, move |_, x: &[T], out: &mut [T]| {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -theta * xi;
                }
            }))
        }
        "cubic-confine" => {
            r.allow(&["dim", "a"])?;
            let d = r.count("dim", 1, 1)?;
            let a = T::lit(r.nonneg("a", 1.0)?);
            Ok(CoefficientField::isotropic(d, name, a, |_, x: &[T], out: &mut [T]| {
                let r2 = norm_sq(x);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -r2 * xi;
                }
            }))
        }
        "gradient-drift" => {
            r.allow(&["density", "dim", "n_max"])?;
            match r.text("density", "gaussian")? {
                "gaussian" => {
                    let d = r.count("dim", 1, 1)?;
                    Ok(CoefficientField::isotropic(d, "gradient-drift(gaussian)", T::one(), |_, x: &[T], out: &mut [T]| {
                        for (o, &xi) in out.iter_mut().zip(x) {
                            *o = -xi;
                        }
                    }))
                }
                "oscillatory" => {
                    if r.count("dim", 1, 1)? != 1 {
                        return Err(r.bad("oscillatory density is one-dimensional".into()));
                    }
                    Ok(oscillatory::<T>().with_label("gradient-drift(oscillatory)"))
                }
                "polar-vortex" => {
                    if r.count("dim", 2, 1)? != 2 {
                        return Err(r.bad("polar-vortex density is two-dimensional".into()));
                    }
                    Ok(polar_vortex::<T>(r.count("n_max", 12, 1)? as u32).with_label("gradient-drift(polar-vortex)"))
                }
                other => Err(r.bad(format!("unknown density '{other}'"))),
            }
        }
        "oscillatory-1d" => {
            r.allow(&[])?;
            Ok(oscillatory())
        }
        "polar-vortex-2d" => {
            r.allow(&["n_max"])?;
            Ok(polar_vortex(r.count("n_max", 12, 1)? as u32))
        }
        "gaussian-rotation-2d" => {
            r.allow(&[])?;
            Ok(CoefficientField::isotropic(2, name, T::one(), |_, x: &[T], out: &mut [T]| {
                // γ(x)^{-1} h(|x|²) with h(s) = s e^{-s}
                let s = x[0] * x[0] + x[1] * x[1];
                let k = T::lit(2.0 * PI) * s * (-s * T::lit(0.5)).exp();
                out[0] = -x[0] - k * x[1];
                out[1] = -x[1] + k * x[0];
            }))
        }
        _ => Err(CoeffError::UnknownBuiltin(name.to_string())),
    }
}

fn oscillatory<T: Scalar>() -> CoefficientField<T> {
    densities::oscillatory_normalizer();
    CoefficientField::isotropic(1, "oscillatory-1d", T::one(), |_, x: &[T], out: &mut [T]| {
        out[0] = T::lit(densities::oscillatory_log_derivative(x[0].as_f64()));
    })
}

fn polar_vortex<T: Scalar>(n_max: u32) -> CoefficientField<T> {
    CoefficientField::isotropic(2, "polar-vortex-2d", T::one(), move |_, x: &[T], out: &mut [T]| {
        let g = densities::polar_vortex_log_gradient(x[0].as_f64(), x[1].as_f64(), n_max);
        out[0] = T::lit(g[0]);
        out[1] = T::lit(g[1]);
    })
}
