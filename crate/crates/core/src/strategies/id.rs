use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyFamily {
    Uniform,
    UsLc,
    UsMargin,
    UsEntropy,
    QbcVe,
    QbcKl,
    Dwus,
    Kcenter,
    Graph,
    MarginMmd,
    Hier,
    Infodiv,
    Mcm,
    Quire,
    Albl,
    Hintsvm,
    Vr,
}

impl StrategyFamily {
    pub const ALL: [StrategyFamily; 17] = [
        Self::Uniform,
        Self::UsLc,
        Self::UsMargin,
        Self::UsEntropy,
        Self::QbcVe,
        Self::QbcKl,
        Self::Dwus,
        Self::Kcenter,
        Self::Graph,
        Self::MarginMmd,
        Self::Hier,
        Self::Infodiv,
        Self::Mcm,
        Self::Quire,
        Self::Albl,
        Self::Hintsvm,
        Self::Vr,
    ];

    /// Families evaluated at batch sizes {1, 2, 5, 10}.
    pub const BATCH: [StrategyFamily; 7] = [
        Self::Uniform,
        Self::Kcenter,
        Self::MarginMmd,
        Self::Graph,
        Self::Hier,
        Self::Infodiv,
        Self::Mcm,
    ];

    /// Single-query families of the standard comparison.
    pub const SINGLE: [StrategyFamily; 7] = [
        Self::UsLc,
        Self::QbcVe,
        Self::Albl,
        Self::Quire,
        Self::Vr,
        Self::Hintsvm,
        Self::Dwus,
    ];

    /// Name used in result files.
    pub fn short_name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::UsLc => "us",
            Self::UsMargin => "us_margin",
            Self::UsEntropy => "us_entropy",
            Self::QbcVe => "qbc",
            Self::QbcKl => "qbc_kl",
            Self::Dwus => "dwus",
            Self::Kcenter => "kcenter",
            Self::Graph => "graph",
            Self::MarginMmd => "margin",
            Self::Hier => "hier",
            Self::Infodiv => "infodiv",
            Self::Mcm => "mcm",
            Self::Quire => "quire",
            Self::Albl => "albl",
            Self::Hintsvm => "hintsvm",
            Self::Vr => "vr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let f = match s {
            "uniform" | "random" => Self::Uniform,
            "us" | "us_lc" => Self::UsLc,
            "us_margin" => Self::UsMargin,
            "us_entropy" => Self::UsEntropy,
            "qbc" | "qbc_ve" => Self::QbcVe,
            "qbc_kl" => Self::QbcKl,
            "dwus" => Self::Dwus,
            "kcenter" => Self::Kcenter,
            "graph" => Self::Graph,
            "margin" | "margin_mmd" => Self::MarginMmd,
            "hier" => Self::Hier,
            "infodiv" => Self::Infodiv,
            "mcm" => Self::Mcm,
            "quire" => Self::Quire,
            "albl" => Self::Albl,
            "hintsvm" => Self::Hintsvm,
            "vr" => Self::Vr,
            _ => return None,
        };
        Some(f)
    }

    pub fn is_batch(self) -> bool {
        Self::BATCH.contains(&self)
    }

    /// Families restricted to two-class problems.
    pub fn binary_only(self) -> bool {
        matches!(self, Self::Albl | Self::Hintsvm)
    }

    fn allowed_params(self) -> &'static [(&'static str, ParamKind)] {
        use ParamKind::*;
        match self {
            Self::Dwus => &[("beta", NonNegative)],
            Self::Graph => &[("k", PositiveInt)],
            Self::Infodiv => &[("n_clusters", PositiveInt)],
            Self::Quire => &[("lambda", Positive)],
            Self::Hintsvm => &[
                ("hint_fraction", Fraction),
                ("c_hint", NonNegative),
                ("c_label", Positive),
                ("epsilon", NonNegative),
                ("simplified", Bool),
            ],
            Self::Vr => &[("subsample", PositiveInt)],
            _ => &[],
        }
    }
}

impl fmt::Display for StrategyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Clone, Copy, Debug)]
enum ParamKind {
    Positive,
    NonNegative,
    Fraction,
    PositiveInt,
    Bool,
}

impl ParamKind {
    fn check(self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidArgument(format!(
                "parameter `{key}` must be {what}, got `{value}`"
            )))
        };
        match self {
            ParamKind::Bool => match value {
                "true" | "false" => Ok(()),
                _ => bad("true or false"),
            },
            ParamKind::PositiveInt => match value.parse::<usize>() {
                Ok(v) if v > 0 => Ok(()),
                _ => bad("a positive integer"),
            },
            _ => {
                let Ok(v) = value.parse::<f64>() else {
                    return bad("a number");
                };
                let ok = match self {
                    ParamKind::Positive => v > 0.0 && v.is_finite(),
                    ParamKind::NonNegative => v >= 0.0 && v.is_finite(),
                    ParamKind::Fraction => v > 0.0 && v <= 1.0,
                    _ => unreachable!(),
                };
                if ok {
                    Ok(())
                } else {
                    bad(match self {
                        ParamKind::Positive => "positive",
                        ParamKind::NonNegative => "non-negative",
                        _ => "in (0, 1]",
                    })
                }
            }
        }
    }
}

/// A strategy as reported in results: family, batch size and optional
/// parameters, written `name[-S][key=value,...]`, e.g. `kcenter-5` or
/// `quire[lambda=0.5]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyId {
    pub family: StrategyFamily,
    pub batch_size: usize,
    pub params: BTreeMap<String, String>,
}

impl StrategyId {
    pub fn new(family: StrategyFamily, batch_size: usize) -> Self {
        Self {
            family,
            batch_size,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Result<Self> {
        self.params.insert(key.to_string(), value.to_string());
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!(
                "{}: batch size must be positive",
                self.family
            )));
        }
        let allowed = self.family.allowed_params();
        for (k, v) in &self.params {
            let Some((_, kind)) = allowed.iter().find(|(name, _)| name == k) else {
                return Err(Error::InvalidArgument(format!(
                    "{} does not take a parameter `{k}`",
                    self.family
                )));
            };
            kind.check(k, v)?;
        }
        Ok(())
    }

    pub fn param_f64(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn param_usize(&self, key: &str, default: usize) -> usize {
        self.params.get(key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn param_bool(&self, key: &str, default: bool) -> bool {
        self.params.get(key).map(|v| v == "true").unwrap_or(default)
    }

    /// The 35 strategies of the standard comparison.
    pub fn standard_set() -> Vec<StrategyId> {
        let mut out = Vec::new();
        for f in StrategyFamily::BATCH {
            for s in [1, 2, 5, 10] {
                out.push(StrategyId::new(f, s));
            }
        }
        for f in StrategyFamily::SINGLE {
            out.push(StrategyId::new(f, 1));
        }
        out
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.short_name())?;
        if self.family.is_batch() || self.batch_size != 1 {
            write!(f, "-{}", self.batch_size)?;
        }
        if !self.params.is_empty() {
            let kv: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "[{}]", kv.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, params_str) = match s.find('[') {
            Some(open) => {
                let Some(inner) = s[open + 1..].strip_suffix(']') else {
                    return Err(Error::InvalidArgument(format!(
                        "strategy `{s}`: unterminated parameter list"
                    )));
                };
                (&s[..open], Some(inner))
            }
            None => (s, None),
        };
        let (name, batch) = match head.rsplit_once('-') {
            Some((n, b)) if !b.is_empty() && b.bytes().all(|c| c.is_ascii_digit()) => {
                let size = b
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("strategy `{s}`: bad batch size")))?;
                (n, size)
            }
            _ => (head, 1),
        };
        let family =
            StrategyFamily::parse(name).ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{name}`")))?;
        let mut params = BTreeMap::new();
        if let Some(p) = params_str {
            for kv in p.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
                let Some((k, v)) = kv.split_once('=') else {
                    return Err(Error::InvalidArgument(format!(
                        "strategy `{s}`: parameter `{kv}` is not key=value"
                    )));
                };
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let id = StrategyId {
            family,
            batch_size: batch,
            params,
        };
        id.validate()?;
        Ok(id)
    }
}

impl Serialize for StrategyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StrategyId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
