//! Parsing for the flag vocabulary shared across subcommands: calibration
//! methods, scaling granularity, and grid boundary handling. Report files
//! echo these strings back, so parsing and labeling must round-trip.

use octav_core::{BoundaryMode, Error, Granularity, Result};
use std::fmt;
use std::str::FromStr;

/// Scalar selection method: `octav`, `sweep:N`, `percentile:P`, or `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Octav,
    Sweep(usize),
    Percentile(f64),
    Max,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Octav => write!(f, "octav"),
            Method::Sweep(n) => write!(f, "sweep:{n}"),
            Method::Percentile(p) => write!(f, "percentile:{p}"),
            Method::Max => write!(f, "max"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "octav" {
            return Ok(Method::Octav);
        }
        if s == "max" {
            return Ok(Method::Max);
        }
        if let Some(n) = s.strip_prefix("sweep:") {
            let points: usize = n.parse().map_err(|_| bad_method(s))?;
            if points < 2 {
                return Err(Error::InvalidParameter {
                    reason: format!("sweep needs at least 2 points, got {points}"),
                });
            }
            return Ok(Method::Sweep(points));
        }
        if let Some(p) = s.strip_prefix("percentile:") {
            let pct: f64 = p.parse().map_err(|_| bad_method(s))?;
            if !(pct > 0.0 && pct <= 100.0) {
                return Err(Error::InvalidParameter {
                    reason: format!("percentile must lie in (0, 100], got {pct}"),
                });
            }
            return Ok(Method::Percentile(pct));
        }
        Err(bad_method(s))
    }
}

fn bad_method(s: &str) -> Error {
    Error::InvalidParameter {
        reason: format!("unknown method {s:?}; expected octav, sweep:N, percentile:P, or max"),
    }
}

/// `tensor` or `row:AXIS` wrapper so clap can parse into a core granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GranularityArg(pub Granularity);

impl fmt::Display for GranularityArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Granularity::PerTensor => write!(f, "tensor"),
            Granularity::PerRow(axis) => write!(f, "row:{axis}"),
        }
    }
}

impl FromStr for GranularityArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "tensor" {
            return Ok(Self(Granularity::PerTensor));
        }
        if let Some(axis) = s.strip_prefix("row:") {
            let axis: usize = axis.parse().map_err(|_| Error::InvalidParameter {
                reason: format!("bad granularity {s:?}; expected tensor or row:AXIS"),
            })?;
            return Ok(Self(Granularity::PerRow(axis)));
        }
        Err(Error::InvalidParameter {
            reason: format!("bad granularity {s:?}; expected tensor or row:AXIS"),
        })
    }
}

/// `math` or `twos` wrapper for the signed grid boundary mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryArg(pub BoundaryMode);

impl fmt::Display for BoundaryArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            BoundaryMode::Mathematical => write!(f, "math"),
            BoundaryMode::TwosComplement => write!(f, "twos"),
        }
    }
}

impl FromStr for BoundaryArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "math" => Ok(Self(BoundaryMode::Mathematical)),
            "twos" => Ok(Self(BoundaryMode::TwosComplement)),
            _ => Err(Error::InvalidParameter {
                reason: format!("bad boundary {s:?}; expected math or twos"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings_round_trip() {
        for (text, want) in [
            ("octav", Method::Octav),
            ("max", Method::Max),
            ("sweep:100", Method::Sweep(100)),
            ("percentile:99.9", Method::Percentile(99.9)),
        ] {
            let parsed: Method = text.parse().unwrap();
            assert_eq!(parsed, want);
            assert_eq!(parsed.to_string().parse::<Method>().unwrap(), want);
        }
    }

    #[test]
    fn bad_method_strings_are_rejected() {
        for text in ["entropy", "sweep", "sweep:1", "sweep:x", "percentile:0", "percentile:101"] {
            assert!(text.parse::<Method>().is_err(), "{text} should not parse");
        }
    }

    #[test]
    fn granularity_and_boundary_round_trip() {
        assert_eq!("tensor".parse::<GranularityArg>().unwrap().0, Granularity::PerTensor);
        assert_eq!("row:1".parse::<GranularityArg>().unwrap().0, Granularity::PerRow(1));
        assert!("row:".parse::<GranularityArg>().is_err());
        assert!("column".parse::<GranularityArg>().is_err());
        assert_eq!("math".parse::<BoundaryArg>().unwrap().0, BoundaryMode::Mathematical);
        assert_eq!("twos".parse::<BoundaryArg>().unwrap().0, BoundaryMode::TwosComplement);
        assert!("ones".parse::<BoundaryArg>().is_err());
        assert_eq!(GranularityArg(Granularity::PerRow(0)).to_string(), "row:0");
        assert_eq!(BoundaryArg(BoundaryMode::TwosComplement).to_string(), "twos");
    }
}
