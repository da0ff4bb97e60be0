use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

/// Exact rational number with a positive denominator, kept in lowest terms.
///
/// Values produced from dyadic grids have power-of-two denominators; a
/// time-changed path whose pieces have other lengths can produce any
/// denominator, so the type does not insist on dyadic form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    /// Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        if den == 1 {
            return Ratio { num, den };
        }
        let g = gcd(num, den);
        if g <= 1 {
            Ratio { num, den }
        } else {
            Ratio {
                num: num / g,
                den: den / g,
            }
        }
    }

    pub const fn from_int(v: i128) -> Self {
        Ratio { num: v, den: 1 }
    }

    /// `num / 2^exp`.
    pub fn dyadic(num: i128, exp: u32) -> Self {
        Ratio::new(num, 1i128 << exp)
    }

    pub const fn numer(&self) -> i128 {
        self.num
    }

    pub const fn denom(&self) -> i128 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_dyadic(&self) -> bool {
        self.den & (self.den - 1) == 0
    }

    pub fn abs(self) -> Self {
        Ratio {
            num: self.num.abs(),
            den: self.den,
        }
    }

    pub fn floor(&self) -> i128 {
        self.num.div_euclid(self.den)
    }

    /// Nearest integer, ties rounded up.
    pub fn round(&self) -> i128 {
        (2 * self.num + self.den).div_euclid(2 * self.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Divides by `2^k` exactly.
    pub fn shr(self, k: u32) -> Self {
        Ratio::new(self.num, self.den << k)
    }
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::ZERO
    }
}

impl From<i64> for Ratio {
    fn from(v: i64) -> Self {
        Ratio::from_int(v as i128)
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for Ratio {
    type Output = Ratio;
    fn add(self, rhs: Ratio) -> Ratio {
        if self.den == rhs.den {
            return Ratio::new(self.num + rhs.num, self.den);
        }
        Ratio::new(self.num * rhs.den + rhs.num * self.den, self.den * rhs.den)
    }
}

impl Sub for Ratio {
    type Output = Ratio;
    fn sub(self, rhs: Ratio) -> Ratio {
        self + (-rhs)
    }
}

impl Neg for Ratio {
    type Output = Ratio;
    fn neg(self) -> Ratio {
        Ratio {
            num: -self.num,
            den: self.den,
        }
    }
}

impl Mul for Ratio {
    type Output = Ratio;
    fn mul(self, rhs: Ratio) -> Ratio {
        Ratio::new(self.num * rhs.num, self.den * rhs.den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_orders() {
        assert_eq!(Ratio::new(6, -4), Ratio::new(-3, 2));
        assert!(Ratio::new(1, 3) < Ratio::new(1, 2));
        assert_eq!(Ratio::new(1, 4) + Ratio::new(1, 4), Ratio::new(1, 2));
        assert!(Ratio::dyadic(3, 5).is_dyadic());
        assert!(!Ratio::new(1, 3).is_dyadic());
    }

    #[test]
    fn rounding() {
        assert_eq!(Ratio::new(5, 2).round(), 3);
        assert_eq!(Ratio::new(-5, 2).round(), -2);
        assert_eq!(Ratio::new(7, 3).round(), 2);
        assert_eq!(Ratio::new(-7, 3).floor(), -3);
    }
}
