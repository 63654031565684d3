//! Exact rational numbers used to validate transition probabilities.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

/// A normalized fraction `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
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

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    /// Builds `num / den`. Panics if `den == 0`.
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        let sign = if den < 0 { -1 } else { 1 };
        Rational {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn from_int(v: i64) -> Self {
        Rational {
            num: v as i128,
            den: 1,
        }
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn to_f64(&self) -> f64 {
        // Split off the integer part so large numerators keep precision.
        let whole = self.num.div_euclid(self.den);
        let rem = self.num.rem_euclid(self.den);
        whole as f64 + rem as f64 / self.den as f64
    }

    pub fn floor(&self) -> i128 {
        self.num.div_euclid(self.den)
    }

    pub fn ceil(&self) -> i128 {
        -(-self.num).div_euclid(self.den)
    }

    pub fn checked_div(self, rhs: Rational) -> Option<Rational> {
        if rhs.num == 0 {
            None
        } else {
            Some(Rational::new(self.num * rhs.den, self.den * rhs.num))
        }
    }

    /// Integer power; negative exponents invert.
    pub fn powi(self, exp: i64) -> Option<Rational> {
        let mut base = if exp < 0 {
            Rational::ONE.checked_div(self)?
        } else {
            self
        };
        let mut e = exp.unsigned_abs();
        let mut acc = Rational::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        Some(acc)
    }

    /// Parses a decimal literal such as `0.25`, `3` or `1.5e-2` exactly.
    pub fn parse_decimal(text: &str) -> Option<Rational> {
        let (mantissa, exp) = match text.find(['e', 'E']) {
            Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
            None => (text, 0),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part
            .bytes()
            .chain(frac_part.bytes())
            .all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let mut num: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            num = num.checked_mul(10)?.checked_add((b - b'0') as i128)?;
        }
        let scale = exp - frac_part.len() as i32;
        let ten = Rational::from_int(10);
        Some(Rational::new(num, 1) * ten.powi(scale as i64)?)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        let g = gcd(self.den, rhs.den);
        let l = self.den / g * rhs.den;
        Rational::new(self.num * (l / self.den) + rhs.num * (l / rhs.den), l)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        self + (-rhs)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            num: -self.num,
            den: self.den,
        }
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        let g1 = gcd(self.num, rhs.den).max(1);
        let g2 = gcd(rhs.num, self.den).max(1);
        Rational::new(
            (self.num / g1) * (rhs.num / g2),
            (self.den / g2) * (rhs.den / g1),
        )
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            return write!(f, "{}", self.num);
        }
        // Print as a terminating decimal when the denominator allows it.
        let mut d = self.den;
        while d % 2 == 0 {
            d /= 2;
        }
        while d % 5 == 0 {
            d /= 5;
        }
        if d == 1 {
            let mut scale = 0u32;
            let mut den = self.den;
            while den != 1 {
                let g = if den % 10 == 0 {
                    10
                } else if den % 5 == 0 {
                    5
                } else {
                    2
                };
                den /= g;
                scale += 1;
            }
            let factor = 10i128.pow(scale);
            let scaled = self.num * (factor / self.den);
            let sign = if scaled < 0 { "-" } else { "" };
            let abs = scaled.abs();
            let int = abs / factor;
            let mut frac = alloc::format!("{:0width$}", abs % factor, width = scale as usize);
            while frac.ends_with('0') {
                frac.pop();
            }
            write!(f, "{sign}{int}.{frac}")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn decimal_literals_are_exact() {
        let a = Rational::parse_decimal("0.1").unwrap();
        let b = Rational::parse_decimal("0.2").unwrap();
        let c = Rational::parse_decimal("0.3").unwrap();
        assert_eq!(a + b, c);
        assert_eq!(
            Rational::parse_decimal("1.5e-2").unwrap(),
            Rational::new(3, 200)
        );
        assert_eq!(Rational::parse_decimal("7").unwrap(), Rational::from_int(7));
        assert!(Rational::parse_decimal("1.2.3").is_none());
        assert!(Rational::parse_decimal(".").is_none());
    }

    #[test]
    fn sums_compare_exactly() {
        let p = Rational::parse_decimal("0.3").unwrap();
        let q = Rational::parse_decimal("0.6").unwrap();
        assert!(p + q < Rational::ONE);
        assert_eq!((p + q).to_string(), "0.9");
        assert_eq!(Rational::new(1, 3).to_string(), "1/3");
        assert_eq!(Rational::new(-5, 4).to_string(), "-1.25");
    }

    #[test]
    fn floor_ceil_and_powers() {
        let r = Rational::new(-7, 2);
        assert_eq!(r.floor(), -4);
        assert_eq!(r.ceil(), -3);
        assert_eq!(Rational::new(2, 3).powi(-2).unwrap(), Rational::new(9, 4));
        assert_eq!(Rational::ZERO.powi(-1), None);
    }
}
