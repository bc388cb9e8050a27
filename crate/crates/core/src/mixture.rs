//! Mixed p-spin model specification.
//!
//! A [`MixtureSpec`] holds the interaction strengths `β_p` and the external
//! field `h`. Everything else in the crate reads the model through the
//! covariance function `ξ(x) = Σ β_p² xᵖ` and its companions `ξ'`, `ξ''` and
//! `θ(x) = xξ'(x) − ξ(x)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction strengths `β_p` (sparse, sorted by `p`) and external field `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    coeffs: Vec<(u32, f64)>,
    h: f64,
    allow_degenerate: bool,
}

impl MixtureSpec {
    /// Builds a spec, requiring some `β_p ≠ 0` with `p ≥ 2`.
    pub fn new(coeffs: impl IntoIterator<Item = (u32, f64)>, h: f64) -> Result<Self> {
        Self::build(coeffs, h, false)
    }

    /// Builds a spec without the `p ≥ 2` requirement, e.g. the decoupled
    /// `β = 0` model used as an exactly solvable reference.
    pub fn new_degenerate(coeffs: impl IntoIterator<Item = (u32, f64)>, h: f64) -> Result<Self> {
        Self::build(coeffs, h, true)
    }

    /// Single-term convenience constructor.
    pub fn pure(p: u32, beta: f64, h: f64) -> Result<Self> {
        Self::new([(p, beta)], h)
    }

    fn build(coeffs: impl IntoIterator<Item = (u32, f64)>, h: f64, allow_degenerate: bool) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, beta) in coeffs {
            if p == 0 {
                return Err(Error::InvalidSpec("interaction order p must be ≥ 1".into()));
            }
            if !beta.is_finite() {
                return Err(Error::InvalidSpec(format!("β_{p} is not finite")));
            }
            if map.insert(p, beta).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate coefficient for p = {p}")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidSpec("at least one coefficient is required".into()));
        }
        if !h.is_finite() {
            return Err(Error::InvalidSpec("external field h is not finite".into()));
        }
        if !allow_degenerate && !map.iter().any(|(&p, &b)| p >= 2 && b != 0.0) {
            return Err(Error::InvalidSpec(
                "some β_p with p ≥ 2 must be nonzero (use the degenerate override to bypass)".into(),
            ));
        }
        Ok(Self {
            coeffs: map.into_iter().collect(),
            h,
            allow_degenerate,
        })
    }

    pub fn coeffs(&self) -> &[(u32, f64)] {
        &self.coeffs
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn allows_degenerate(&self) -> bool {
        self.allow_degenerate
    }

    /// `β_p`, zero when `p` is absent.
    pub fn beta(&self, p: u32) -> f64 {
        self.coeffs.iter().find(|(q, _)| *q == p).map_or(0.0, |&(_, b)| b)
    }

    pub fn contains(&self, p: u32) -> bool {
        self.coeffs.iter().any(|(q, _)| *q == p)
    }

    pub fn orders(&self) -> impl Iterator<Item = u32> + '_ {
        self.coeffs.iter().map(|&(p, _)| p)
    }

    /// Copy with `β_p` replaced (inserted when absent). The degenerate
    /// override is kept so that sweeps through `β_p = 0` stay valid.
    pub fn with_beta(&self, p: u32, beta: f64) -> Result<Self> {
        let mut coeffs: Vec<(u32, f64)> = self.coeffs.iter().copied().filter(|&(q, _)| q != p).collect();
        coeffs.push((p, beta));
        Self::build(coeffs, self.h, self.allow_degenerate)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::build(self.coeffs.iter().copied(), h, self.allow_degenerate)
    }

    /// True when the Gibbs measure is invariant under `σ → −σ`:
    /// no field and only even interaction orders carry weight.
    pub fn is_spin_flip_symmetric(&self) -> bool {
        self.h == 0.0 && self.coeffs.iter().all(|&(p, b)| p % 2 == 0 || b == 0.0)
    }

    /// True when every nonzero term is even or linear, the class for which
    /// finite-N comparisons with the functional are meaningful.
    pub fn has_only_even_or_linear_terms(&self) -> bool {
        self.coeffs.iter().all(|&(p, b)| p == 1 || p % 2 == 0 || b == 0.0)
    }

    pub fn xi(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.xi_at(x))
    }

    pub fn xi_prime(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.xi_prime_at(x))
    }

    pub fn xi_second(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.xi_second_at(x))
    }

    pub fn theta(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.theta_at(x))
    }

    pub(crate) fn xi_at(&self, x: f64) -> f64 {
        self.coeffs.iter().map(|&(p, b)| b * b * x.powi(p as i32)).sum()
    }

    pub(crate) fn xi_prime_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|&(p, b)| p as f64 * b * b * x.powi(p as i32 - 1))
            .sum()
    }

    pub(crate) fn xi_second_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .filter(|&&(p, _)| p >= 2)
            .map(|&(p, b)| (p * (p - 1)) as f64 * b * b * x.powi(p as i32 - 2))
            .sum()
    }

    /// θ through its termwise form `Σ (p−1) β_p² xᵖ`, which avoids the
    /// cancellation in `xξ'(x) − ξ(x)` near zero.
    pub(crate) fn theta_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|&(p, b)| (p - 1) as f64 * b * b * x.powi(p as i32))
            .sum()
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument {x} outside [0, 1]")))
    }
}

impl fmt::Display for MixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.coeffs.iter().map(|(p, b)| format!("β{p}={b}")).collect();
        write!(f, "{} h={}", terms.join(" "), self.h)
    }
}

/// On-disk form: `{"coeffs": {"2": 1.0, "4": 0.5}, "h": 0.3}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    coeffs: BTreeMap<String, f64>,
    #[serde(default)]
    h: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_degenerate: bool,
}

impl Serialize for MixtureSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        // BTreeMap<String, _> would sort "10" before "2"; the order is cosmetic
        // but keeping numeric order makes files easier to read.
        use serde::ser::SerializeMap;
        struct Coeffs<'a>(&'a [(u32, f64)]);
        impl Serialize for Coeffs<'_> {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (p, b) in self.0 {
                    map.serialize_entry(&p.to_string(), b)?;
                }
                map.end()
            }
        }
        use serde::ser::SerializeStruct;
        let n = if self.allow_degenerate { 3 } else { 2 };
        let mut st = serializer.serialize_struct("MixtureSpec", n)?;
        st.serialize_field("coeffs", &Coeffs(&self.coeffs))?;
        st.serialize_field("h", &self.h)?;
        if self.allow_degenerate {
            st.serialize_field("allow_degenerate", &true)?;
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for MixtureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = SpecFile::deserialize(deserializer)?;
        let mut coeffs = Vec::with_capacity(file.coeffs.len());
        for (key, beta) in file.coeffs {
            let p: u32 = key
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("invalid interaction order {key:?}")))?;
            coeffs.push((p, beta));
        }
        MixtureSpec::build(coeffs, file.h, file.allow_degenerate).map_err(serde::de::Error::custom)
    }
}
