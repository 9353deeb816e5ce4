use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Upper bound on hop counts, Chebyshev orders, and diffusion truncation.
pub const MAX_HOPS: u32 = 32;

/// One view finder `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViewFinderSpec {
    /// `ν(A) = I`.
    Identity,
    /// `ν(A) = A + I`.
    SelfAugmented,
    /// `ν(A) = (D^{-p} A D^{-q})^k`. `(1, 0)` is the row-stochastic random
    /// walk operator, `(½, ½)` the symmetric normalization, `(0, 0)` plain
    /// adjacency powers.
    NormalizedPower { p: f64, q: f64, k: u32 },
    /// `T_order(L̃)` with `L̃ = 2L/λ_max − I` and `L = I − D^{-1/2} A D^{-1/2}`.
    /// `λ_max` is 2 unless `estimate_lambda_max` is set, in which case it is
    /// found by power iteration.
    Chebyshev { order: u32, estimate_lambda_max: bool },
    /// `α Σ_{j=0..K} (1−α)^j (D^{-1}A)^j`, the truncated series of the
    /// personalized-PageRank diffusion kernel.
    TruncatedDiffusion { alpha: f64, truncation: u32 },
}

impl ViewFinderSpec {
    /// `(D^{-1} A)^k`
    pub fn random_walk(k: u32) -> Self {
        ViewFinderSpec::NormalizedPower { p: 1.0, q: 0.0, k }
    }

    /// `(D^{-1/2} A D^{-1/2})^k`
    pub fn symmetric(k: u32) -> Self {
        ViewFinderSpec::NormalizedPower { p: 0.5, q: 0.5, k }
    }

    pub fn chebyshev(order: u32) -> Self {
        ViewFinderSpec::Chebyshev {
            order,
            estimate_lambda_max: false,
        }
    }

    pub fn diffusion(alpha: f64) -> Self {
        ViewFinderSpec::TruncatedDiffusion {
            alpha,
            truncation: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            ViewFinderSpec::Identity | ViewFinderSpec::SelfAugmented => Ok(()),
            ViewFinderSpec::NormalizedPower { p, q, k } => {
                if !p.is_finite() || !q.is_finite() {
                    return bad(format!("unsupported exponents p={p}, q={q}"));
                }
                if k == 0 || k > MAX_HOPS {
                    return bad(format!("hop count {k} outside 1..={MAX_HOPS}"));
                }
                Ok(())
            }
            ViewFinderSpec::Chebyshev { order, .. } => {
                if order > MAX_HOPS {
                    return bad(format!("Chebyshev order {order} exceeds {MAX_HOPS}"));
                }
                Ok(())
            }
            ViewFinderSpec::TruncatedDiffusion { alpha, truncation } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return bad(format!("diffusion alpha {alpha} outside (0, 1]"));
                }
                if truncation > MAX_HOPS {
                    return bad(format!("truncation {truncation} exceeds {MAX_HOPS}"));
                }
                Ok(())
            }
        }
    }

    /// Short human-readable label, used for CSV headers.
    pub fn label(&self) -> String {
        match *self {
            ViewFinderSpec::Identity => "I".into(),
            ViewFinderSpec::SelfAugmented => "A+I".into(),
            ViewFinderSpec::NormalizedPower { p, q, k } if p == 1.0 && q == 0.0 => {
                format!("rw^{k}")
            }
            ViewFinderSpec::NormalizedPower { p, q, k } if p == 0.5 && q == 0.5 => {
                format!("sym^{k}")
            }
            ViewFinderSpec::NormalizedPower { p, q, k } => format!("D^-{p}AD^-{q}^{k}"),
            ViewFinderSpec::Chebyshev { order, .. } => format!("cheb{order}"),
            ViewFinderSpec::TruncatedDiffusion { alpha, truncation } => {
                format!("ppr(a={alpha},K={truncation})")
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    truncation: Option<u32>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    estimate_lambda_max: bool,
}

impl Serialize for ViewFinderSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut raw = RawSpec {
            variant: String::new(),
            p: None,
            q: None,
            k: None,
            alpha: None,
            truncation: None,
            estimate_lambda_max: false,
        };
        match *self {
            ViewFinderSpec::Identity => raw.variant = "identity".into(),
            ViewFinderSpec::SelfAugmented => raw.variant = "self_augmented".into(),
            ViewFinderSpec::NormalizedPower { p, q, k } => {
                raw.variant = "normalized_power".into();
                raw.p = Some(p);
                raw.q = Some(q);
                raw.k = Some(k);
            }
            ViewFinderSpec::Chebyshev {
                order,
                estimate_lambda_max,
            } => {
                raw.variant = "chebyshev".into();
                raw.k = Some(order);
                raw.estimate_lambda_max = estimate_lambda_max;
            }
            ViewFinderSpec::TruncatedDiffusion { alpha, truncation } => {
                raw.variant = "truncated_diffusion".into();
                raw.alpha = Some(alpha);
                raw.truncation = Some(truncation);
            }
        }
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ViewFinderSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSpec::deserialize(d)?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| D::Error::custom(format!("{} requires `{name}`", raw.variant)))
        };
        let need_u = |v: Option<u32>, name: &str| {
            v.ok_or_else(|| D::Error::custom(format!("{} requires `{name}`", raw.variant)))
        };
        let spec = match raw.variant.as_str() {
            "identity" => ViewFinderSpec::Identity,
            "self_augmented" => ViewFinderSpec::SelfAugmented,
            "normalized_power" => ViewFinderSpec::NormalizedPower {
                p: need(raw.p, "p")?,
                q: need(raw.q, "q")?,
                k: need_u(raw.k, "k")?,
            },
            "chebyshev" => ViewFinderSpec::Chebyshev {
                order: need_u(raw.k, "k")?,
                estimate_lambda_max: raw.estimate_lambda_max,
            },
            "truncated_diffusion" => ViewFinderSpec::TruncatedDiffusion {
                alpha: need(raw.alpha, "alpha")?,
                truncation: need_u(raw.truncation, "K")?,
            },
            other => return Err(D::Error::custom(format!("unknown view finder `{other}`"))),
        };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

/// Ordered, non-empty list of view finders. The order fixes the coordinates
/// of the view space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ViewFinderSet(Vec<ViewFinderSpec>);

impl ViewFinderSet {
    pub fn new(specs: Vec<ViewFinderSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter("view finder set is empty".into()));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(Self(specs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn specs(&self) -> &[ViewFinderSpec] {
        &self.0
    }

    pub fn position(&self, spec: &ViewFinderSpec) -> Option<usize> {
        self.0.iter().position(|s| s == spec)
    }
}

impl<'de> Deserialize<'de> for ViewFinderSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let specs = Vec::<ViewFinderSpec>::deserialize(d)?;
        ViewFinderSet::new(specs).map_err(serde::de::Error::custom)
    }
}

/// `{I} ∪ {(D^{-1}A)^k, (D^{-1/2}AD^{-1/2})^k : k = 1..K}`, identity first,
/// then random-walk and symmetric alternating by hop.
pub fn default_finder_set(hops: u32) -> Result<ViewFinderSet> {
    if hops == 0 || hops > MAX_HOPS {
        return Err(Error::InvalidParameter(format!(
            "hop count {hops} outside 1..={MAX_HOPS}"
        )));
    }
    let mut specs = vec![ViewFinderSpec::Identity];
    for k in 1..=hops {
        specs.push(ViewFinderSpec::random_walk(k));
        specs.push(ViewFinderSpec::symmetric(k));
    }
    ViewFinderSet::new(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_sizes() {
        assert_eq!(default_finder_set(1).unwrap().len(), 3);
        assert_eq!(default_finder_set(2).unwrap().len(), 5);
        assert_eq!(default_finder_set(3).unwrap().len(), 7);
        assert!(default_finder_set(0).is_err());
    }

    #[test]
    fn default_set_order() {
        let s = default_finder_set(2).unwrap();
        let labels: Vec<_> = s.specs().iter().map(|s| s.label()).collect();
        assert_eq!(labels, ["I", "rw^1", "sym^1", "rw^2", "sym^2"]);
    }

    #[test]
    fn json_omits_unused_fields() {
        let j = serde_json::to_string(&ViewFinderSpec::Identity).unwrap();
        assert_eq!(j, r#"{"variant":"identity"}"#);
        let j = serde_json::to_string(&ViewFinderSpec::diffusion(0.1)).unwrap();
        assert_eq!(j, r#"{"variant":"truncated_diffusion","alpha":0.1,"K":10}"#);
        let j = serde_json::to_string(&ViewFinderSpec::symmetric(2)).unwrap();
        assert_eq!(j, r#"{"variant":"normalized_power","p":0.5,"q":0.5,"k":2}"#);
    }

    #[test]
    fn json_round_trip() {
        let set = ViewFinderSet::new(vec![
            ViewFinderSpec::Identity,
            ViewFinderSpec::SelfAugmented,
            ViewFinderSpec::random_walk(3),
            ViewFinderSpec::Chebyshev {
                order: 4,
                estimate_lambda_max: true,
            },
            ViewFinderSpec::diffusion(0.15),
        ])
        .unwrap();
        let j = serde_json::to_string(&set).unwrap();
        let back: ViewFinderSet = serde_json::from_str(&j).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ViewFinderSpec::random_walk(0).validate().is_err());
        assert!(ViewFinderSpec::random_walk(33).validate().is_err());
        assert!(ViewFinderSpec::chebyshev(33).validate().is_err());
        assert!(ViewFinderSpec::diffusion(0.0).validate().is_err());
        assert!(ViewFinderSpec::NormalizedPower {
            p: f64::NAN,
            q: 0.0,
            k: 1
        }
        .validate()
        .is_err());
        assert!(ViewFinderSet::new(vec![]).is_err());
        assert!(serde_json::from_str::<ViewFinderSpec>(r#"{"variant":"normalized_power","p":1}"#).is_err());
        assert!(serde_json::from_str::<ViewFinderSpec>(r#"{"variant":"magic"}"#).is_err());
    }
}
