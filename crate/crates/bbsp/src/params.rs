//! The rational splitting parameter `s = b/a`, its colour function
//! `chi(k) = a*k + b`, and the near-even-split probability floor `p*`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Splitting parameter `s = b/a` in lowest terms, together with derived
/// constants. Irrational `s` is rejected at the interface: only fractions
/// of positive integers are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitParam {
    a: u64,
    b: u64,
}

impl SplitParam {
    /// `s = numer/denom`, reduced internally to lowest terms.
    pub fn from_fraction(numer: u64, denom: u64) -> Result<Self> {
        if numer == 0 || denom == 0 {
            return Err(Error::InvalidSplitParam(format!(
                "s must be a positive fraction, got {numer}/{denom}"
            )));
        }
        let g = gcd(numer, denom);
        Ok(Self {
            a: denom / g,
            b: numer / g,
        })
    }

    /// Parses `"B/A"` or a bare positive integer `"B"`. Decimal input such
    /// as `"1.5"` is rejected: the parameter must be an exact fraction.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = |msg: &str| Error::InvalidSplitParam(format!("{msg}: {text:?}"));
        if let Some((num, den)) = text.split_once('/') {
            let numer: u64 = num
                .trim()
                .parse()
                .map_err(|_| bad("invalid numerator"))?;
            let denom: u64 = den
                .trim()
                .parse()
                .map_err(|_| bad("invalid denominator"))?;
            Self::from_fraction(numer, denom)
        } else {
            let numer: u64 = text
                .parse()
                .map_err(|_| bad("expected an integer or fraction B/A"))?;
            Self::from_fraction(numer, 1)
        }
    }

    /// Denominator `a` of `s = b/a`.
    pub fn a(&self) -> u64 {
        self.a
    }

    /// Numerator `b` of `s = b/a`.
    pub fn b(&self) -> u64 {
        self.b
    }

    /// `s` as a double.
    pub fn s(&self) -> f64 {
        self.b as f64 / self.a as f64
    }

    /// Colour function `chi(k) = a*k + b`: the number of non-black
    /// particles accompanying `k` black particles on a vertex.
    pub fn colour(&self, k: u64) -> u64 {
        self.a * k + self.b
    }

    /// The probability floor for a near-even split on a ringing edge:
    /// `(5/12)^{2s} / (6 B(s,s))` for `s < 20` and `(1 - 20/(s+1))/6` for
    /// `s >= 20`. Always in `(0, 1/3)`.
    pub fn p_star(&self) -> f64 {
        let s = self.s();
        if s < 20.0 {
            let ln_b = ln_gamma(s) + ln_gamma(s) - ln_gamma(2.0 * s);
            (2.0 * s * (5.0f64 / 12.0).ln() - ln_b).exp() / 6.0
        } else {
            (1.0 - 20.0 / (s + 1.0)) / 6.0
        }
    }

    /// Display form `"b/a"`.
    pub fn as_fraction(&self) -> String {
        if self.a == 1 {
            format!("{}", self.b)
        } else {
            format!("{}/{}", self.b, self.a)
        }
    }
}

impl std::fmt::Display for SplitParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_fraction())
    }
}

fn gcd(mut x: u64, mut y: u64) -> u64 {
    while y != 0 {
        (x, y) = (y, x % y);
    }
    x
}

/// Natural log of the beta function `B(x, y)`.
pub fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_reduction() {
        let p = SplitParam::from_fraction(2, 4).unwrap();
        assert_eq!((p.a(), p.b()), (2, 1));
        assert_eq!(p.s(), 0.5);

        let p = SplitParam::parse("3/2").unwrap();
        assert_eq!((p.a(), p.b()), (2, 3));

        let p = SplitParam::parse("40").unwrap();
        assert_eq!((p.a(), p.b()), (1, 40));

        assert!(SplitParam::parse("1.5").is_err());
        assert!(SplitParam::parse("0/3").is_err());
        assert!(SplitParam::parse("-1/2").is_err());
        assert!(SplitParam::parse("").is_err());
    }

    #[test]
    fn colour_function() {
        let s1 = SplitParam::from_fraction(1, 1).unwrap();
        assert_eq!(s1.colour(3), 4);
        let half = SplitParam::from_fraction(1, 2).unwrap();
        assert_eq!(half.colour(0), 1);
        let two = SplitParam::from_fraction(2, 1).unwrap();
        assert_eq!(two.colour(5), 7);
    }

    #[test]
    fn p_star_values() {
        // s = 1: B(1,1) = 1, so p* = (5/12)^2 / 6 = 25/864
        let p = SplitParam::from_fraction(1, 1).unwrap().p_star();
        assert!((p - 25.0 / 864.0).abs() < 1e-15);

        // s = 40 uses the large-s branch: (1/6)(1 - 20/41) = 7/82
        let p = SplitParam::from_fraction(40, 1).unwrap().p_star();
        assert!((p - 7.0 / 82.0).abs() < 1e-15);

        // s = 20 sits on the boundary and takes the >= branch
        let p = SplitParam::from_fraction(20, 1).unwrap().p_star();
        assert!((p - (1.0 - 20.0 / 21.0) / 6.0).abs() < 1e-15);

        // s = 1/2: B(1/2,1/2) = pi, so p* = (5/12) / (6 pi)
        let p = SplitParam::from_fraction(1, 2).unwrap().p_star();
        assert!((p - (5.0 / 12.0) / (6.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn p_star_in_range() {
        for (b, a) in [
            (1, 2),
            (1, 1),
            (3, 2),
            (2, 1),
            (5, 1),
            (40, 1),
            (1, 10),
            (19, 1),
            (20, 1),
            (199, 10),
            (1000, 1),
        ] {
            let p = SplitParam::from_fraction(b, a).unwrap();
            let ps = p.p_star();
            assert!(ps > 0.0 && ps < 1.0 / 3.0, "p*={ps} for s={p}");
        }
    }
}
