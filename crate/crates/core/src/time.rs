//! Virtual time and the millisecond (de)serialization used by config files.

use std::time::Duration;

/// Offset from the start of a simulation run.
pub type SimTime = Duration;

pub fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s)
}

pub fn millis(ms: f64) -> Duration {
    Duration::from_secs_f64(ms / 1000.0)
}

/// `#[serde(with = "crate::time::ms")]` for `Duration` fields written as milliseconds.
pub mod ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v < 0.0 {
            return Err(serde::de::Error::custom(format!(
                "duration must be a non-negative number of milliseconds, got {v}"
            )));
        }
        Ok(Duration::from_secs_f64(v / 1000.0))
    }
}
