//! Exact rational helpers and certified logarithm bounds.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"3"`, `"-1/2"` or `"2/6"` into a reduced fraction.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rat::new(n, d))
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ceil_int(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // extremely large or small values
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        if n - d > 1000 {
            f64::INFINITY
        } else {
            0.0
        }
    })
}

/// Rounds up to the next multiple of 2^-64.
pub fn round_up_dyadic(r: &Rat) -> Rat {
    let scale: BigInt = BigInt::one() << 64usize;
    let scaled = (r * Rat::from_integer(scale.clone())).ceil().to_integer();
    Rat::new(scaled, scale)
}

/// Interval `[lo, hi]` around `2·atanh(z)` for `0 ≤ z < 1`, summing `terms` terms.
fn two_atanh_bounds(z: &Rat, terms: usize) -> (Rat, Rat) {
    let z2 = z * z;
    let mut pow = z.clone();
    let mut sum = Rat::zero();
    for j in 0..terms {
        sum += &pow / int(2 * j as i64 + 1);
        pow = &pow * &z2;
    }
    // tail ≤ z^(2m+1) / ((2m+1)(1 - z²))
    let tail = &pow / (int(2 * terms as i64 + 1) * (Rat::one() - &z2));
    let two = int(2);
    (&sum * &two, (sum + tail) * two)
}

/// Certified enclosure of `ln x` for `x > 0` with width at most about `2^-bits`.
pub fn ln_bounds(x: &Rat, bits: u32) -> (Rat, Rat) {
    assert!(x.is_positive(), "logarithm of a non-positive number");
    if x.is_one() {
        return (Rat::zero(), Rat::zero());
    }
    // x = 2^k · y with y in [1, 2)
    let mut k: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let mut y = if k >= 0 {
        x / Rat::from_integer(BigInt::one() << k as usize)
    } else {
        x * Rat::from_integer(BigInt::one() << (-k) as usize)
    };
    while y >= int(2) {
        y /= int(2);
        k += 1;
    }
    while y < Rat::one() {
        y *= int(2);
        k -= 1;
    }
    let terms = (bits as usize) / 2 + 4;
    let z = (&y - Rat::one()) / (&y + Rat::one());
    let (ylo, yhi) = two_atanh_bounds(&z, terms);
    let (l2lo, l2hi) = two_atanh_bounds(&rat(1, 3), terms);
    let kr = int(k);
    if k >= 0 {
        (&kr * l2lo + ylo, &kr * l2hi + yhi)
    } else {
        (&kr * l2hi + ylo, &kr * l2lo + yhi)
    }
}

/// Smallest multiple of 1/1000 that is at least `ln x`.
pub fn ln_upper(x: &Rat) -> Rat {
    let thousand = int(1000);
    let mut bits = 48;
    loop {
        let (lo, hi) = ln_bounds(x, bits);
        let a = ceil_int(&(&lo * &thousand));
        let b = ceil_int(&(&hi * &thousand));
        if a == b || bits >= 1024 {
            return Rat::new(b, BigInt::from(1000));
        }
        bits *= 2;
    }
}

/// `⌈2·ln(1/ε)/η²⌉`, the number of samples that separates two blocks of
/// environments whose probabilities on a transition differ by at least `η`.
pub fn sample_count(eps: &Rat, eta: &Rat) -> BigUint {
    let l = ln_upper(&eps.recip());
    let v = int(2) * l / (eta * eta);
    ceil_int(&v).to_biguint().unwrap_or_default()
}

pub fn is_probability(r: &Rat) -> bool {
    !r.is_negative() && r <= &Rat::one()
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}
