//! Platform-independent trigonometry.
//!
//! Uses only IEEE-754 `+ - * /` and `sqrt`, so results are bit-identical on
//! every target. Angles are in degrees throughout the crate.

use std::f64::consts::PI;

const DEG: f64 = PI / 180.0;

/// sin and cos of `x` radians for |x| <= pi/4 (Taylor to x^19).
fn sin_cos_small(x: f64) -> (f64, f64) {
    let x2 = x * x;
    let mut s = 0.0;
    let mut c = 0.0;
    // Horner evaluation, highest order first.
    let sin_coeffs = [
        -1.0 / 121_645_100_408_832_000.0,
        1.0 / 355_687_428_096_000.0,
        -1.0 / 1_307_674_368_000.0,
        1.0 / 6_227_020_800.0,
        -1.0 / 39_916_800.0,
        1.0 / 362_880.0,
        -1.0 / 5040.0,
        1.0 / 120.0,
        -1.0 / 6.0,
        1.0,
    ];
    for k in sin_coeffs {
        s = s * x2 + k;
    }
    let cos_coeffs = [
        1.0 / 6_402_373_705_728_000.0,
        -1.0 / 20_922_789_888_000.0,
        1.0 / 87_178_291_200.0,
        -1.0 / 479_001_600.0,
        1.0 / 3_628_800.0,
        -1.0 / 40_320.0,
        1.0 / 720.0,
        -1.0 / 24.0,
        0.5,
    ];
    for k in cos_coeffs {
        c = c * x2 + k;
    }
    (s * x, 1.0 - c * x2)
}

/// Returns `(sin, cos)` of an angle in degrees. Multiples of 90 are exact.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let d = deg.rem_euclid(360.0);
    let quadrant = ((d + 45.0) / 90.0).floor() as i64;
    let rem = d - 90.0 * quadrant as f64;
    let (s, c) = if rem == 0.0 { (0.0, 1.0) } else { sin_cos_small(rem * DEG) };
    match quadrant.rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

pub fn sin_deg(deg: f64) -> f64 {
    sin_cos_deg(deg).0
}

pub fn cos_deg(deg: f64) -> f64 {
    sin_cos_deg(deg).1
}

pub fn tan_deg(deg: f64) -> f64 {
    let (s, c) = sin_cos_deg(deg);
    s / c
}

/// atan in radians for any finite x.
fn atan(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let (sign, ax) = if x < 0.0 { (-1.0, -x) } else { (1.0, x) };
    let (inverted, mut y) = if ax > 1.0 { (true, 1.0 / ax) } else { (false, ax) };
    // Two half-angle reductions bring |y| below tan(pi/16).
    y /= 1.0 + (1.0 + y * y).sqrt();
    y /= 1.0 + (1.0 + y * y).sqrt();
    let y2 = y * y;
    let mut acc = 0.0;
    for k in (0..=12).rev() {
        let term = 1.0 / (2 * k + 1) as f64;
        acc = acc * y2 + if k % 2 == 0 { term } else { -term };
    }
    let mut r = 4.0 * acc * y;
    if inverted {
        r = PI / 2.0 - r;
    }
    sign * r
}

/// atan2 in degrees, result in (-180, 180].
pub fn atan2_deg(y: f64, x: f64) -> f64 {
    let r = if x > 0.0 {
        atan(y / x)
    } else if x < 0.0 {
        if y >= 0.0 {
            atan(y / x) + PI
        } else {
            atan(y / x) - PI
        }
    } else if y > 0.0 {
        PI / 2.0
    } else if y < 0.0 {
        -PI / 2.0
    } else {
        0.0
    };
    r / DEG
}

/// Snaps a length to the micrometre grid used by canonical serialization.
pub fn snap(v: f64) -> f64 {
    let s = (v * 1e6).round() / 1e6;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_std_closely() {
        let mut d = -720.0;
        while d <= 720.0 {
            let (s, c) = sin_cos_deg(d);
            assert!((s - (d * DEG).sin()).abs() < 1e-14, "sin {d}");
            assert!((c - (d * DEG).cos()).abs() < 1e-14, "cos {d}");
            d += 0.37;
        }
    }

    #[test]
    fn right_angles_exact() {
        assert_eq!(sin_cos_deg(0.0), (0.0, 1.0));
        assert_eq!(sin_cos_deg(90.0), (1.0, -0.0));
        assert_eq!(sin_cos_deg(180.0).1, -1.0);
        assert_eq!(sin_cos_deg(270.0).0, -1.0);
    }

    #[test]
    fn atan2_matches_std() {
        for i in -20..=20 {
            for j in -20..=20 {
                let (y, x) = (i as f64 * 0.3, j as f64 * 0.7);
                let want = y.atan2(x).to_degrees();
                let got = atan2_deg(y, x);
                assert!((want - got).abs() < 1e-11, "{y} {x} {want} {got}");
            }
        }
    }

    #[test]
    fn snap_is_idempotent_and_round_trips_six_decimals() {
        for v in [0.1, 1.2345678, -3.9999995, 2.5e-7, 7.0] {
            let s = snap(v);
            assert_eq!(snap(s), s);
            let text = format!("{s:.6}");
            assert_eq!(text.parse::<f64>().unwrap(), s);
        }
    }
}
