//! Fixed-point units used throughout the engine.
//!
//! All internal arithmetic is integer so that objective comparisons are exact
//! and runs are reproducible across platforms:
//!
//! - time:  microseconds (`TimeMicros`)
//! - money: micro-dollars (`UsdMicros`); VM prices are micro-dollars per hour
//! - dimensionless ratios (slowdowns, weights): millionths (`RatioMicros`)
//! - message sizes: bytes
//!
//! Floating point appears only at the edges: parsing config files and
//! formatting reports.

/// Time in microseconds.
pub type TimeMicros = i64;
/// Money in micro-dollars (1e-6 USD).
pub type UsdMicros = i64;
/// Dimensionless ratio scaled by 1e6 (1.0 == 1_000_000).
pub type RatioMicros = u64;

/// Millionths in one unit.
pub const MICROS_PER_UNIT: i64 = 1_000_000;
/// Microseconds in one hour, used when turning hourly prices into charges.
pub const MICROS_PER_HOUR: i64 = 3_600_000_000;

/// Converts seconds (as read from a config file) to microseconds.
pub fn secs_to_micros(secs: f64) -> TimeMicros {
    (secs * 1e6).round() as TimeMicros
}

/// Converts dollars to micro-dollars.
pub fn usd_to_micros(usd: f64) -> UsdMicros {
    (usd * 1e6).round() as UsdMicros
}

/// Converts a dimensionless ratio to millionths.
pub fn ratio_to_micros(ratio: f64) -> RatioMicros {
    (ratio * 1e6).round() as RatioMicros
}

/// Converts decimal gigabytes to bytes.
pub fn gb_to_bytes(gb: f64) -> u64 {
    (gb * 1e9).round() as u64
}

pub fn micros_to_secs(us: TimeMicros) -> f64 {
    us as f64 / 1e6
}

pub fn micros_to_usd(micros: UsdMicros) -> f64 {
    micros as f64 / 1e6
}

/// Rounded integer division, half away from zero. Inputs are expected to be
/// non-negative in practice but negative numerators are handled for safety.
pub fn div_round(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

/// Applies a millionths ratio to a time, rounding to the nearest microsecond.
pub fn scale_time(us: TimeMicros, ratio: RatioMicros) -> TimeMicros {
    div_round(us as i128 * ratio as i128, MICROS_PER_UNIT as i128) as TimeMicros
}

/// Charge in micro-dollars for running at `price` (micro-$ per hour) for
/// `us` microseconds, rounded once.
pub fn charge(price_per_hour: UsdMicros, us: TimeMicros) -> UsdMicros {
    div_round(price_per_hour as i128 * us as i128, MICROS_PER_HOUR as i128) as UsdMicros
}

/// Formats a time as `H:MM:SS`, flooring to whole seconds.
pub fn format_hms(us: TimeMicros) -> String {
    let total_secs = us / MICROS_PER_UNIT;
    let h = total_secs / 3600;
    let m = (total_secs % 3600) / 60;
    let s = total_secs % 60;
    format!("{h}:{m:02}:{s:02}")
}

/// Formats money with two decimals, as in the report tables.
pub fn format_usd(micros: UsdMicros) -> String {
    format!("{:.2}", micros_to_usd(micros))
}
