use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing requirement that applies once a neighbouring wire is at least
/// `width_at_least` nm wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingTier {
    pub width_at_least: u64,
    pub required_min_space: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    #[default]
    Bidirectional,
    /// Fixed vertical tracks: only horizontal wire width and end-to-end gaps
    /// along each track are checked.
    UnidirectionalVerticalTracks,
}

/// Rule-set complexity level. The numeric fields stay the same across
/// variants; the variant decides which of them are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    /// Minimum width, spacing and area only.
    #[default]
    Default,
    /// Adds maximum width/spacing and width-dependent spacing tiers.
    Complex,
    /// Adds discrete width sets on top of `Complex`.
    ComplexDiscrete,
}

impl std::str::FromStr for RuleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "complex" => Ok(Self::Complex),
            "complex_discrete" => Ok(Self::ComplexDiscrete),
            _ => Err(Error::Config(format!("unknown rule variant `{s}`"))),
        }
    }
}

impl std::fmt::Display for RuleVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Default => "default",
            Self::Complex => "complex",
            Self::ComplexDiscrete => "complex_discrete",
        })
    }
}

/// Scanline direction. `H` measures along rows (horizontal extents),
/// `V` along columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    H,
    V,
}

/// Design-rule configuration. Lengths in nm, area in nm².
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet {
    pub min_width_h: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_width_h: Option<u64>,
    pub min_width_v: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_width_v: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_widths_h: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_widths_v: Option<Vec<u64>>,
    pub min_space_h: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_space_h: Option<u64>,
    pub min_space_v: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_space_v: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spacing_tiers: Vec<SpacingTier>,
    pub min_area: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e2e_min_space: Option<u64>,
    #[serde(default)]
    pub mode: RuleMode,
    #[serde(default)]
    pub variant: RuleVariant,
}

const PRESET_DEFAULT: &str = include_str!("../../presets/default.json");
const PRESET_COMPLEX: &str = include_str!("../../presets/complex.json");
const PRESET_COMPLEX_DISCRETE: &str = include_str!("../../presets/complex_discrete.json");
const PRESET_UNI7: &str = include_str!("../../presets/uni7.json");

pub const PRESET_NAMES: [&str; 4] = ["default", "complex", "complex_discrete", "uni7"];

impl RuleSet {
    /// Shipped rule presets: `default`, `complex`, `complex_discrete`, `uni7`.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "default" => PRESET_DEFAULT,
            "complex" => PRESET_COMPLEX,
            "complex_discrete" => PRESET_COMPLEX_DISCRETE,
            "uni7" => PRESET_UNI7,
            _ => return Err(Error::Config(format!("unknown preset `{name}`"))),
        };
        Self::from_json(text)
    }

    pub fn preset_json(name: &str) -> Option<&'static str> {
        match name {
            "default" => Some(PRESET_DEFAULT),
            "complex" => Some(PRESET_COMPLEX),
            "complex_discrete" => Some(PRESET_COMPLEX_DISCRETE),
            "uni7" => Some(PRESET_UNI7),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let rules: RuleSet = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Config(format!("rule set field `{}`: {}", e.path(), e.inner()))
        })?;
        rules.validate()?;
        Ok(rules)
    }

    /// Same numeric bounds, different enforcement level.
    pub fn with_variant(&self, variant: RuleVariant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn is_unidirectional(&self) -> bool {
        self.mode == RuleMode::UnidirectionalVerticalTracks
    }

    pub fn min_width(&self, axis: Axis) -> u64 {
        match axis {
            Axis::H => self.min_width_h,
            Axis::V => self.min_width_v,
        }
    }

    pub fn max_width(&self, axis: Axis) -> Option<u64> {
        if self.variant == RuleVariant::Default {
            return None;
        }
        match axis {
            Axis::H => self.max_width_h,
            Axis::V => self.max_width_v,
        }
    }

    pub fn discrete_widths(&self, axis: Axis) -> Option<&[u64]> {
        if self.variant != RuleVariant::ComplexDiscrete {
            return None;
        }
        match axis {
            Axis::H => self.discrete_widths_h.as_deref(),
            Axis::V => self.discrete_widths_v.as_deref(),
        }
    }

    pub fn min_space(&self, axis: Axis) -> u64 {
        match axis {
            Axis::H => self.min_space_h,
            Axis::V => self.min_space_v,
        }
    }

    pub fn max_space(&self, axis: Axis) -> Option<u64> {
        if self.variant == RuleVariant::Default {
            return None;
        }
        match axis {
            Axis::H => self.max_space_h,
            Axis::V => self.max_space_v,
        }
    }

    pub fn tiers(&self) -> &[SpacingTier] {
        if self.variant == RuleVariant::Default {
            &[]
        } else {
            &self.spacing_tiers
        }
    }

    /// Index of the tier that applies to a neighbour width, if any.
    pub fn tier_index(&self, width: u64) -> Option<usize> {
        self.tiers().iter().rposition(|t| t.width_at_least <= width)
    }

    /// Minimum spacing next to a wire of the given width and the rule id
    /// that reports a shortfall.
    pub fn required_space(&self, axis: Axis, neighbour_width: u64) -> (u64, String) {
        match self.tier_index(neighbour_width) {
            Some(i) => (
                self.tiers()[i].required_min_space.max(self.min_space(axis)),
                format!("R1.{}-S", i + 1),
            ),
            None => (self.min_space(axis), "R1-S".to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let positive = [
            ("min_width_h", Some(self.min_width_h)),
            ("max_width_h", self.max_width_h),
            ("min_width_v", Some(self.min_width_v)),
            ("max_width_v", self.max_width_v),
            ("min_space_h", Some(self.min_space_h)),
            ("max_space_h", self.max_space_h),
            ("min_space_v", Some(self.min_space_v)),
            ("max_space_v", self.max_space_v),
            ("min_area", Some(self.min_area)),
            ("e2e_min_space", self.e2e_min_space),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return cfg(format!("{name} must be positive"));
            }
        }
        for (name, lo, hi) in [
            ("width_h", self.min_width_h, self.max_width_h),
            ("width_v", self.min_width_v, self.max_width_v),
            ("space_h", self.min_space_h, self.max_space_h),
            ("space_v", self.min_space_v, self.max_space_v),
        ] {
            if let Some(hi) = hi {
                if lo > hi {
                    return cfg(format!("min_{name} {lo} exceeds max_{name} {hi}"));
                }
            }
        }
        for (name, set, lo, hi) in [
            ("discrete_widths_h", &self.discrete_widths_h, self.min_width_h, self.max_width_h),
            ("discrete_widths_v", &self.discrete_widths_v, self.min_width_v, self.max_width_v),
        ] {
            if let Some(set) = set {
                if set.is_empty() {
                    return cfg(format!("{name} is empty"));
                }
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    return cfg(format!("{name} must be strictly increasing"));
                }
                if set[0] < lo || hi.is_some_and(|hi| set[set.len() - 1] > hi) {
                    return cfg(format!("{name} not within the width bounds"));
                }
            }
        }
        if self
            .spacing_tiers
            .windows(2)
            .any(|w| w[0].width_at_least >= w[1].width_at_least)
        {
            return cfg("spacing_tiers must be strictly increasing in width_at_least".into());
        }
        for t in &self.spacing_tiers {
            if t.width_at_least == 0 || t.required_min_space == 0 {
                return cfg("spacing tier values must be positive".into());
            }
        }
        if self.is_unidirectional() && self.e2e_min_space.is_none() {
            return cfg("unidirectional mode requires e2e_min_space".into());
        }
        Ok(())
    }
}
