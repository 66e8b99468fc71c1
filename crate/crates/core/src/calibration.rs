//! Per-device display calibration: parse, validate and serialize the
//! lenticular geometry that the subpixel-to-view mapping consumes.
//!
//! Calibration files are JSON with a versioned schema:
//!
//! ```json
//! {
//!   "calib_version": 1,
//!   "pitch": 52.0,
//!   "slope": -7.2,
//!   "center": 0.15,
//!   "screenW": 1536,
//!   "screenH": 2048,
//!   "subp": 3,
//!   "flipX": false,
//!   "flipY": false
//! }
//! ```
//!
//! `pitch`, `slope`, `center`, `screenW`, `screenH` and `calib_version` are
//! required; `subp` defaults to 3 and the flip flags to false. `slope` is the
//! tangent of the lens slant angle, stored directly because the mapping
//! consumes the tangent. A `lpi` (lens per inch) key is accepted and ignored.
//! Unknown keys are ignored.

use serde_json::{Map, Value};
use thiserror::Error;

pub const CALIB_VERSION: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("calibration document is missing required key \"{0}\"")]
    MissingKey(String),
    #[error("calibration document is malformed: {0}")]
    MalformedDocument(String),
    #[error("calibration key \"{0}\" has an invalid value")]
    InvalidValue(String),
}

/// Lenticular geometry of one display device.
///
/// Horizontal quantities (`pitch_px`, `center_offset`) are in subpixel
/// columns; the panel raster is `screen_width_px` x `screen_height_px`
/// pixels with `subpixels_per_pixel` color subpixels per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    /// Lenticular pitch along the panel x-axis, in subpixels.
    pub pitch_px: f64,
    /// Tangent of the slant angle between lens axis and panel vertical.
    pub slope: f64,
    /// Horizontal phase offset, in subpixels.
    pub center_offset: f64,
    pub screen_width_px: u32,
    pub screen_height_px: u32,
    pub subpixels_per_pixel: u32,
    /// Mirror the view order horizontally.
    pub flip_x: bool,
    /// Mirror panel rows vertically.
    pub flip_y: bool,
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.pitch_px.is_finite() && self.pitch_px > 0.0) {
            return Err(CalibrationError::InvalidValue("pitch".into()));
        }
        if !self.slope.is_finite() {
            return Err(CalibrationError::InvalidValue("slope".into()));
        }
        if !self.center_offset.is_finite() {
            return Err(CalibrationError::InvalidValue("center".into()));
        }
        if self.screen_width_px == 0 {
            return Err(CalibrationError::InvalidValue("screenW".into()));
        }
        if self.screen_height_px == 0 {
            return Err(CalibrationError::InvalidValue("screenH".into()));
        }
        if self.subpixels_per_pixel == 0 {
            return Err(CalibrationError::InvalidValue("subp".into()));
        }
        Ok(())
    }
}

fn require<'a>(doc: &'a Map<String, Value>, key: &str) -> Result<&'a Value, CalibrationError> {
    doc.get(key).ok_or_else(|| CalibrationError::MissingKey(key.into()))
}

fn as_real(value: &Value, key: &str) -> Result<f64, CalibrationError> {
    value
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CalibrationError::InvalidValue(key.into()))
}

fn as_positive_u32(value: &Value, key: &str) -> Result<u32, CalibrationError> {
    // accept 1536 and 1536.0 alike; vendors are loose about number types
    let v = value.as_f64().ok_or_else(|| CalibrationError::InvalidValue(key.to_string()))?;
    if v.is_finite() && v > 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(CalibrationError::InvalidValue(key.into()))
    }
}

fn as_bool_or(doc: &Map<String, Value>, key: &str, default: bool) -> Result<bool, CalibrationError> {
    match doc.get(key) {
        None => Ok(default),
        Some(v) => v.as_bool().ok_or_else(|| CalibrationError::InvalidValue(key.into())),
    }
}

/// Parse a calibration document. Unknown keys are ignored; the returned
/// profile always satisfies the profile invariants.
pub fn parse_calibration(document: &str) -> Result<CalibrationProfile, CalibrationError> {
    let value: Value = serde_json::from_str(document)
        .map_err(|e| CalibrationError::MalformedDocument(e.to_string()))?;
    let doc = value
        .as_object()
        .ok_or_else(|| CalibrationError::MalformedDocument("top level is not an object".into()))?;

    let version = require(doc, "calib_version")?
        .as_u64()
        .ok_or_else(|| CalibrationError::InvalidValue("calib_version".into()))?;
    if version != CALIB_VERSION {
        return Err(CalibrationError::InvalidValue("calib_version".into()));
    }

    let pitch_px = as_real(require(doc, "pitch")?, "pitch")?;
    let slope = as_real(require(doc, "slope")?, "slope")?;
    let center_offset = as_real(require(doc, "center")?, "center")?;
    let screen_width_px = as_positive_u32(require(doc, "screenW")?, "screenW")?;
    let screen_height_px = as_positive_u32(require(doc, "screenH")?, "screenH")?;
    let subpixels_per_pixel = match doc.get("subp") {
        None => 3,
        Some(v) => as_positive_u32(v, "subp")?,
    };

    let profile = CalibrationProfile {
        pitch_px,
        slope,
        center_offset,
        screen_width_px,
        screen_height_px,
        subpixels_per_pixel,
        flip_x: as_bool_or(doc, "flipX", false)?,
        flip_y: as_bool_or(doc, "flipY", false)?,
    };
    profile.validate()?;
    Ok(profile)
}

/// Serialize a profile back to the documented schema. Round-trips through
/// [`parse_calibration`] exactly.
pub fn serialize_calibration(profile: &CalibrationProfile) -> String {
    let doc = serde_json::json!({
        "calib_version": CALIB_VERSION,
        "pitch": profile.pitch_px,
        "slope": profile.slope,
        "center": profile.center_offset,
        "screenW": profile.screen_width_px,
        "screenH": profile.screen_height_px,
        "subp": profile.subpixels_per_pixel,
        "flipX": profile.flip_x,
        "flipY": profile.flip_y,
    });
    serde_json::to_string_pretty(&doc).expect("schema maps to valid JSON")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!("{{\"calib_version\": 1, {body}}}")
    }

    #[test]
    fn parses_full_document() {
        let text = doc(
            "\"pitch\": 52.0, \"slope\": -7.2, \"center\": 0.15, \
             \"screenW\": 1536, \"screenH\": 2048, \"subp\": 3, \
             \"flipX\": false, \"flipY\": true",
        );
        let p = parse_calibration(&text).unwrap();
        assert_eq!(p.pitch_px, 52.0);
        assert_eq!(p.slope, -7.2);
        assert_eq!(p.center_offset, 0.15);
        assert_eq!(p.screen_width_px, 1536);
        assert_eq!(p.screen_height_px, 2048);
        assert_eq!(p.subpixels_per_pixel, 3);
        assert!(!p.flip_x);
        assert!(p.flip_y);
    }

    #[test]
    fn native_raster_matches_screen_keys() {
        let text = doc(
            "\"pitch\": 52.0, \"slope\": -7.2, \"center\": 0.0, \
             \"screenW\": 1536, \"screenH\": 2048",
        );
        let p = parse_calibration(&text).unwrap();
        assert_eq!((p.screen_width_px, p.screen_height_px), (1536, 2048));
    }

    #[test]
    fn missing_pitch_is_reported_by_name() {
        let text = doc("\"slope\": 0.1, \"center\": 0.0, \"screenW\": 8, \"screenH\": 8");
        assert_eq!(
            parse_calibration(&text).unwrap_err(),
            CalibrationError::MissingKey("pitch".into())
        );
    }

    #[test]
    fn missing_version_is_reported() {
        let text = "{\"pitch\": 1.0, \"slope\": 0.0, \"center\": 0.0, \"screenW\": 8, \"screenH\": 8}";
        assert_eq!(
            parse_calibration(text).unwrap_err(),
            CalibrationError::MissingKey("calib_version".into())
        );
    }

    #[test]
    fn malformed_json_rejected() {
        assert!(matches!(
            parse_calibration("not json"),
            Err(CalibrationError::MalformedDocument(_))
        ));
        assert!(matches!(
            parse_calibration("[1, 2]"),
            Err(CalibrationError::MalformedDocument(_))
        ));
    }

    #[test]
    fn invariant_violations_rejected() {
        let nonpositive_pitch =
            doc("\"pitch\": -2.0, \"slope\": 0.0, \"center\": 0.0, \"screenW\": 8, \"screenH\": 8");
        assert_eq!(
            parse_calibration(&nonpositive_pitch).unwrap_err(),
            CalibrationError::InvalidValue("pitch".into())
        );
        let zero_width =
            doc("\"pitch\": 2.0, \"slope\": 0.0, \"center\": 0.0, \"screenW\": 0, \"screenH\": 8");
        assert_eq!(
            parse_calibration(&zero_width).unwrap_err(),
            CalibrationError::InvalidValue("screenW".into())
        );
        let zero_subp = doc(
            "\"pitch\": 2.0, \"slope\": 0.0, \"center\": 0.0, \"screenW\": 8, \"screenH\": 8, \"subp\": 0",
        );
        assert_eq!(
            parse_calibration(&zero_subp).unwrap_err(),
            CalibrationError::InvalidValue("subp".into())
        );
    }

    #[test]
    fn unknown_keys_ignored() {
        let text = doc(
            "\"pitch\": 2.0, \"slope\": 0.0, \"center\": 0.0, \"screenW\": 8, \"screenH\": 8, \
             \"lpi\": 40.6, \"serial\": \"LKG-123\"",
        );
        assert!(parse_calibration(&text).is_ok());
    }

    #[test]
    fn round_trip_preserves_profile() {
        let p = CalibrationProfile {
            pitch_px: 52.347,
            slope: -7.1913,
            center_offset: 0.1532,
            screen_width_px: 1536,
            screen_height_px: 2048,
            subpixels_per_pixel: 3,
            flip_x: true,
            flip_y: false,
        };
        let back = parse_calibration(&serialize_calibration(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn parsing_is_deterministic() {
        let text = doc(
            "\"pitch\": 52.0, \"slope\": -7.2, \"center\": 0.15, \"screenW\": 1536, \"screenH\": 2048",
        );
        assert_eq!(parse_calibration(&text).unwrap(), parse_calibration(&text).unwrap());
    }
}
