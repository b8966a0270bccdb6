//! Cyclic/angular conversions and SI-suffixed quantity parsing.
//!
//! Internally every rate is angular; anything a person reads or writes is
//! cyclic (Hz).

use std::f64::consts::TAU;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

pub fn hz(f: f64) -> f64 {
    TAU * f
}

pub fn khz(f: f64) -> f64 {
    TAU * f * 1e3
}

pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

pub fn ghz(f: f64) -> f64 {
    TAU * f * 1e9
}

/// Angular rate (rad/s) to cyclic frequency (Hz).
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU / 1e6
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / TAU / 1e9
}

/// Physical dimension a configuration value is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Cyclic frequency; parsed values are returned as angular rad/s.
    Frequency,
    Current,
    Inductance,
    Temperature,
    /// Phase in radians.
    Angle,
    Dimensionless,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("`{0}` is not a number with an optional unit suffix")]
    Malformed(String),
    #[error("unit `{unit}` is not valid for a {expected:?} value")]
    WrongUnit { unit: String, expected: Dimension },
}

fn quantity_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-z]*)$").unwrap()
    })
}

/// Parse strings like `5.6GHz`, `74nA`, `0.5pH`, `20mK`, `0.5mrad`.
///
/// Frequencies are converted from cyclic to angular units. A bare number is
/// taken in the SI base unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let caps = quantity_regex()
        .captures(text)
        .ok_or_else(|| UnitError::Malformed(text.to_string()))?;
    let value: f64 = caps[1]
        .parse()
        .map_err(|_| UnitError::Malformed(text.to_string()))?;
    let unit = &caps[2];
    let wrong = || UnitError::WrongUnit {
        unit: unit.to_string(),
        expected: dim,
    };
    let scale = match dim {
        Dimension::Frequency => match unit {
            "" | "Hz" => 1.0,
            "kHz" => 1e3,
            "MHz" => 1e6,
            "GHz" => 1e9,
            _ => return Err(wrong()),
        },
        Dimension::Current => match unit {
            "" | "A" => 1.0,
            "mA" => 1e-3,
            "uA" => 1e-6,
            "nA" => 1e-9,
            "pA" => 1e-12,
            _ => return Err(wrong()),
        },
        Dimension::Inductance => match unit {
            "" | "H" => 1.0,
            "uH" => 1e-6,
            "nH" => 1e-9,
            "pH" => 1e-12,
            "fH" => 1e-15,
            _ => return Err(wrong()),
        },
        Dimension::Temperature => match unit {
            "" | "K" => 1.0,
            "mK" => 1e-3,
            "uK" => 1e-6,
            _ => return Err(wrong()),
        },
        Dimension::Angle => match unit {
            "" | "rad" => 1.0,
            "mrad" => 1e-3,
            "urad" => 1e-6,
            "deg" => TAU / 360.0,
            _ => return Err(wrong()),
        },
        Dimension::Dimensionless => match unit {
            "" => 1.0,
            _ => return Err(wrong()),
        },
    };
    let si = value * scale;
    Ok(if dim == Dimension::Frequency { TAU * si } else { si })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixed_values() {
        let w = parse_quantity("5.6GHz", Dimension::Frequency).unwrap();
        assert!((to_ghz(w) - 5.6).abs() < 1e-12);
        assert_eq!(parse_quantity("74nA", Dimension::Current).unwrap(), 74.0 * 1e-9);
        assert_eq!(parse_quantity("0.5 pH", Dimension::Inductance).unwrap(), 0.5 * 1e-12);
        assert_eq!(parse_quantity("20mK", Dimension::Temperature).unwrap(), 20.0 * 1e-3);
        assert_eq!(parse_quantity("-1.5e-3", Dimension::Dimensionless).unwrap(), -1.5e-3);
        assert_eq!(parse_quantity("0.5mrad", Dimension::Angle).unwrap(), 0.5e-3);
    }

    #[test]
    fn rejects_bad_units() {
        assert!(matches!(
            parse_quantity("5.6nA", Dimension::Frequency),
            Err(UnitError::WrongUnit { .. })
        ));
        assert!(matches!(
            parse_quantity("GHz", Dimension::Frequency),
            Err(UnitError::Malformed(_))
        ));
        assert!(parse_quantity("1.2.3", Dimension::Dimensionless).is_err());
    }
}
