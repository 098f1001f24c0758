//! Depth rank to visual variable mappings.
//!
//! Each enabled variable is a linear function of the global depth rank over
//! `0..=rank_max`. Variables are evaluated independently and then combined.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rgb = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum StyleError {
    #[error("{name} range [{min}, {max}] is invalid: {reason}")]
    InvalidRange {
        name: &'static str,
        min: f64,
        max: f64,
        reason: &'static str,
    },
    #[error("{0} color has a channel outside [0, 1]")]
    InvalidColor(&'static str),
    #[error("size mapping is not enabled")]
    SizeDisabled,
    #[error("unknown visual variable {0:?}")]
    UnknownVariable(String),
    #[error("unknown orientation {0:?} (expected near-max or near-min)")]
    UnknownOrientation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VisualVariables {
    pub size: bool,
    pub color: bool,
    pub value: bool,
    pub alpha: bool,
}

impl VisualVariables {
    pub const NONE: VisualVariables = VisualVariables {
        size: false,
        color: false,
        value: false,
        alpha: false,
    };

    pub fn count(&self) -> usize {
        [self.size, self.color, self.value, self.alpha]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn to_bits(self) -> u8 {
        (self.size as u8) | (self.color as u8) << 1 | (self.value as u8) << 2 | (self.alpha as u8) << 3
    }

    pub fn from_bits(bits: u8) -> Self {
        VisualVariables {
            size: bits & 1 != 0,
            color: bits & 2 != 0,
            value: bits & 4 != 0,
            alpha: bits & 8 != 0,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.size {
            v.push("size");
        }
        if self.color {
            v.push("color");
        }
        if self.value {
            v.push("value");
        }
        if self.alpha {
            v.push("alpha");
        }
        v
    }
}

/// Parses a comma set such as `size,color`. `none` and the empty string disable all.
impl FromStr for VisualVariables {
    type Err = StyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut vars = VisualVariables::NONE;
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.to_ascii_lowercase().as_str() {
                "size" => vars.size = true,
                "color" => vars.color = true,
                "value" => vars.value = true,
                "alpha" | "transparency" => vars.alpha = true,
                "none" => {}
                other => return Err(StyleError::UnknownVariable(other.to_string())),
            }
        }
        Ok(vars)
    }
}

impl fmt::Display for VisualVariables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    /// The nearest vertex receives the upper end of every range.
    #[default]
    #[serde(rename = "near-max")]
    NearIsMax,
    #[serde(rename = "near-min")]
    NearIsMin,
}

impl FromStr for Orientation {
    type Err = StyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "near-max" | "near-is-max" => Ok(Orientation::NearIsMax),
            "near-min" | "near-is-min" => Ok(Orientation::NearIsMin),
            other => Err(StyleError::UnknownOrientation(other.to_string())),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::NearIsMax => "near-max",
            Orientation::NearIsMin => "near-min",
        })
    }
}

/// Which variables follow depth rank, and over which ranges.
///
/// The color ramp runs from `far_color` (range minimum) to `near_color`
/// (range maximum), so with the default orientation the nearest vertex
/// is painted `near_color`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub enabled: VisualVariables,
    pub radius_range: [f64; 2],
    pub near_color: Rgb,
    pub far_color: Rgb,
    pub value_range: [f64; 2],
    pub alpha_range: [f64; 2],
    pub orientation: Orientation,
}

impl Default for MappingSpec {
    fn default() -> Self {
        MappingSpec {
            enabled: VisualVariables {
                color: true,
                ..VisualVariables::NONE
            },
            radius_range: [0.001, 0.006],
            near_color: [1.0, 0.85, 0.3],
            far_color: [0.15, 0.25, 0.85],
            value_range: [0.25, 1.0],
            alpha_range: [0.2, 1.0],
            orientation: Orientation::NearIsMax,
        }
    }
}

impl MappingSpec {
    pub fn validate(&self) -> Result<(), StyleError> {
        check_range("radius", self.radius_range, None)?;
        if self.radius_range[0] <= 0.0 {
            return Err(StyleError::InvalidRange {
                name: "radius",
                min: self.radius_range[0],
                max: self.radius_range[1],
                reason: "minimum must be positive",
            });
        }
        check_range("value", self.value_range, Some((0.0, 1.0)))?;
        check_range("alpha", self.alpha_range, Some((0.0, 1.0)))?;
        check_color("near", self.near_color)?;
        check_color("far", self.far_color)?;
        Ok(())
    }

    /// `"single"` when at most one variable is enabled, `"multiple"` otherwise.
    pub fn mapping_mode(&self) -> &'static str {
        if self.enabled.count() > 1 {
            "multiple"
        } else {
            "single"
        }
    }

    /// Radius used for every vertex when size mapping is off.
    pub fn uniform_radius(&self) -> f64 {
        0.5 * (self.radius_range[0] + self.radius_range[1])
    }
}

fn check_range(name: &'static str, r: [f64; 2], bounds: Option<(f64, f64)>) -> Result<(), StyleError> {
    let err = |reason| StyleError::InvalidRange {
        name,
        min: r[0],
        max: r[1],
        reason,
    };
    if !(r[0].is_finite() && r[1].is_finite()) {
        return Err(err("not finite"));
    }
    if r[0] > r[1] {
        return Err(err("minimum exceeds maximum"));
    }
    if let Some((lo, hi)) = bounds {
        if r[0] < lo || r[1] > hi {
            return Err(err("outside [0, 1]"));
        }
    }
    Ok(())
}

fn check_color(name: &'static str, c: Rgb) -> Result<(), StyleError> {
    if c.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(StyleError::InvalidColor(name))
    }
}

/// Style assigned to one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexStyle {
    pub radius: f64,
    pub rgb: Rgb,
    pub alpha: f64,
}

/// `v_min + (v_max - v_min) * rank / rank_max`, with exact endpoints.
///
/// A single-vertex population (`rank_max == 0`) maps to the range midpoint.
#[inline]
pub fn linear_map(rank: u32, rank_max: u32, v_min: f64, v_max: f64) -> f64 {
    if rank_max == 0 {
        return 0.5 * (v_min + v_max);
    }
    debug_assert!(rank <= rank_max);
    if rank == 0 {
        v_min
    } else if rank >= rank_max {
        v_max
    } else {
        v_min + (v_max - v_min) * (rank as f64 / rank_max as f64)
    }
}

#[inline]
fn oriented(rank: u32, rank_max: u32, orientation: Orientation) -> u32 {
    match orientation {
        Orientation::NearIsMax => rank_max - rank.min(rank_max),
        Orientation::NearIsMin => rank,
    }
}

pub fn style_vertex(rank: u32, rank_max: u32, spec: &MappingSpec, base_color: Rgb) -> VertexStyle {
    let x = oriented(rank, rank_max, spec.orientation);
    let en = spec.enabled;
    let map = |r: [f64; 2]| linear_map(x, rank_max, r[0], r[1]);

    let radius = if en.size {
        map(spec.radius_range)
    } else {
        spec.uniform_radius()
    };
    let mut rgb = if en.color {
        let mut c = [0.0; 3];
        for (k, ch) in c.iter_mut().enumerate() {
            *ch = map([spec.far_color[k], spec.near_color[k]]);
        }
        c
    } else {
        base_color
    };
    if en.value {
        let factor = map(spec.value_range);
        for ch in &mut rgb {
            *ch *= factor;
        }
    }
    let alpha = if en.alpha { map(spec.alpha_range) } else { 1.0 };
    VertexStyle { radius, rgb, alpha }
}

/// Per-vertex tube radii from polyline-vertex ranks.
pub fn radii_for_polylines(ranks: &[u32], rank_max: u32, spec: &MappingSpec) -> Result<Vec<f64>, StyleError> {
    if !spec.enabled.size {
        return Err(StyleError::SizeDisabled);
    }
    let [lo, hi] = spec.radius_range;
    Ok(ranks
        .iter()
        .map(|&r| linear_map(oriented(r, rank_max, spec.orientation), rank_max, lo, hi))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WHITE: Rgb = [1.0, 1.0, 1.0];
    const BLACK: Rgb = [0.0, 0.0, 0.0];

    fn spec_with(enabled: &str, orientation: Orientation) -> MappingSpec {
        MappingSpec {
            enabled: enabled.parse().unwrap(),
            orientation,
            ..MappingSpec::default()
        }
    }

    #[test]
    fn linear_map_examples() {
        assert_eq!(linear_map(0, 9, 0.1, 1.0), 0.1);
        assert_eq!(linear_map(9, 9, 0.1, 1.0), 1.0);
        assert!((linear_map(3, 9, 0.1, 1.0) - 0.4).abs() < 1e-12);
        assert!((linear_map(0, 0, 0.2, 0.4) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn all_disabled_is_identity() {
        let spec = spec_with("none", Orientation::NearIsMax);
        let base = [0.3, 0.6, 0.9];
        let s = style_vertex(5, 10, &spec, base);
        assert_eq!(s.rgb, base);
        assert_eq!(s.alpha, 1.0);
        assert_eq!(s.radius, spec.uniform_radius());
    }

    #[test]
    fn nearest_gets_near_color() {
        let mut spec = spec_with("color", Orientation::NearIsMax);
        spec.near_color = WHITE;
        spec.far_color = BLACK;
        assert_eq!(style_vertex(0, 9, &spec, [0.5; 3]).rgb, WHITE);
        assert_eq!(style_vertex(9, 9, &spec, [0.5; 3]).rgb, BLACK);
    }

    #[test]
    fn size_and_color_near_min() {
        let mut spec = spec_with("size,color", Orientation::NearIsMin);
        spec.radius_range = [0.1, 1.0];
        spec.near_color = [1.0, 0.5, 0.0];
        spec.far_color = [0.0, 0.5, 1.0];
        let s = style_vertex(3, 9, &spec, WHITE);
        assert!((s.radius - 0.4).abs() < 1e-12);
        // Ramp runs far -> near over the oriented rank.
        for k in 0..3 {
            let expect = spec.far_color[k] + (spec.near_color[k] - spec.far_color[k]) * (3.0 / 9.0);
            assert!((s.rgb[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn value_scales_luminance() {
        let mut spec = spec_with("value", Orientation::NearIsMax);
        spec.value_range = [0.5, 1.0];
        let s = style_vertex(4, 4, &spec, [0.8, 0.4, 0.2]);
        assert_eq!(s.rgb, [0.4, 0.2, 0.1]);
    }

    #[test]
    fn radii_examples() {
        let mut spec = spec_with("size", Orientation::NearIsMax);
        spec.radius_range = [0.1, 1.0];
        assert_eq!(radii_for_polylines(&[0, 1], 1, &spec).unwrap(), vec![1.0, 0.1]);
        spec.radius_range = [0.25, 0.25];
        assert_eq!(radii_for_polylines(&[2, 0, 1], 2, &spec).unwrap(), vec![0.25; 3]);
        let spec = spec_with("color", Orientation::NearIsMax);
        assert_eq!(radii_for_polylines(&[0], 0, &spec), Err(StyleError::SizeDisabled));
    }

    #[test]
    fn validation() {
        assert!(MappingSpec::default().validate().is_ok());
        let mut s = MappingSpec::default();
        s.radius_range = [0.5, 0.1];
        assert!(s.validate().is_err());
        s.radius_range = [0.0, 0.1];
        assert!(s.validate().is_err());
        let mut s = MappingSpec::default();
        s.alpha_range = [0.0, 1.5];
        assert!(s.validate().is_err());
        let mut s = MappingSpec::default();
        s.near_color = [2.0, 0.0, 0.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn parse_variables() {
        let v: VisualVariables = "size,color,value,alpha".parse().unwrap();
        assert_eq!(v.count(), 4);
        assert_eq!(VisualVariables::from_bits(v.to_bits()), v);
        assert_eq!(v.to_string(), "size,color,value,alpha");
        assert!("size,shape".parse::<VisualVariables>().is_err());
        assert_eq!("".parse::<VisualVariables>().unwrap(), VisualVariables::NONE);
    }

    fn arb_spec() -> impl Strategy<Value = MappingSpec> {
        (0u8..16, any::<bool>(), 0.01f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_map(|(bits, near_max, r, a, b, c)| MappingSpec {
                enabled: VisualVariables::from_bits(bits),
                radius_range: [r, r + a],
                near_color: [a, b, c],
                far_color: [c, a, b],
                value_range: [a.min(b), a.max(b)],
                alpha_range: [b.min(c), b.max(c)],
                orientation: if near_max { Orientation::NearIsMax } else { Orientation::NearIsMin },
            })
    }

    proptest! {
        #[test]
        fn outputs_stay_in_range(spec in arb_spec(), rank_max in 0u32..1000, frac in 0.0f64..=1.0) {
            let rank = (rank_max as f64 * frac) as u32;
            let s = style_vertex(rank, rank_max, &spec, [0.5, 0.5, 0.5]);
            prop_assert!(s.radius >= spec.radius_range[0] - 1e-12 && s.radius <= spec.radius_range[1] + 1e-12);
            prop_assert!(s.radius > 0.0);
            prop_assert!(s.rgb.iter().all(|c| (0.0..=1.0).contains(c)));
            prop_assert!((0.0..=1.0).contains(&s.alpha));
        }

        #[test]
        fn enabling_one_variable_leaves_others(spec in arb_spec(), rank_max in 1u32..500, rank in 0u32..500) {
            let rank = rank.min(rank_max);
            let base = [0.4, 0.7, 0.1];
            let with = style_vertex(rank, rank_max, &spec, base);
            let mut other = spec;
            other.enabled.alpha = !spec.enabled.alpha;
            let toggled = style_vertex(rank, rank_max, &other, base);
            prop_assert_eq!(with.radius, toggled.radius);
            prop_assert_eq!(with.rgb, toggled.rgb);
            let mut other = spec;
            other.enabled.size = !spec.enabled.size;
            let toggled = style_vertex(rank, rank_max, &other, base);
            prop_assert_eq!(with.rgb, toggled.rgb);
            prop_assert_eq!(with.alpha, toggled.alpha);
        }
    }
}
