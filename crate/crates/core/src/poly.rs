//! Exact Laurent polynomials in one variable with integer coefficients.

use std::collections::BTreeMap;
use std::fmt;

/// Laurent polynomial in `A` over the integers, stored sparsely.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Laurent {
    /// exponent -> nonzero coefficient
    terms: BTreeMap<i64, i64>,
}

impl Laurent {
    pub fn zero() -> Laurent {
        Laurent::default()
    }

    pub fn one() -> Laurent {
        Laurent::monomial(0, 1)
    }

    pub fn monomial(exp: i64, coeff: i64) -> Laurent {
        let mut terms = BTreeMap::new();
        if coeff != 0 {
            terms.insert(exp, coeff);
        }
        Laurent { terms }
    }

    /// The loop factor delta = -A^2 - A^-2.
    pub fn delta() -> Laurent {
        &Laurent::monomial(2, -1) + &Laurent::monomial(-2, -1)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, *c))
    }

    pub fn add_term(&mut self, exp: i64, coeff: i64) {
        let entry = self.terms.entry(exp).or_insert(0);
        *entry += coeff;
        if *entry == 0 {
            self.terms.remove(&exp);
        }
    }

    /// (-A^3)^k, the writhe normalization factor.
    pub fn neg_a_cubed_pow(k: i64) -> Laurent {
        Laurent::monomial(3 * k, if k.rem_euclid(2) == 0 { 1 } else { -1 })
    }

    pub fn pow(&self, n: u32) -> Laurent {
        let mut acc = Laurent::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }
}

impl std::ops::Add for &Laurent {
    type Output = Laurent;
    fn add(self, other: &Laurent) -> Laurent {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, c);
        }
        out
    }
}

impl std::ops::Sub for &Laurent {
    type Output = Laurent;
    fn sub(self, other: &Laurent) -> Laurent {
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e, -c);
        }
        out
    }
}

impl std::ops::Mul for &Laurent {
    type Output = Laurent;
    fn mul(self, other: &Laurent) -> Laurent {
        let mut out = Laurent::zero();
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

impl std::ops::Neg for &Laurent {
    type Output = Laurent;
    fn neg(self) -> Laurent {
        let mut out = Laurent::zero();
        for (e, c) in self.terms() {
            out.add_term(e, -c);
        }
        out
    }
}

impl fmt::Display for Laurent {
    /// Canonical ascending-exponent form, e.g. `-A^-2 + 2 - A^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            let mag = c.abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
                first = false;
            } else if c < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            match (e == 0, mag == 1) {
                (true, _) => write!(f, "{mag}")?,
                (false, true) => write!(f, "A^{e}")?,
                (false, false) => write!(f, "{mag}*A^{e}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_squared() {
        // (-A^2 - A^-2)^2 = A^4 + 2 + A^-4
        let d2 = Laurent::delta().pow(2);
        let expect = &(&Laurent::monomial(4, 1) + &Laurent::monomial(0, 2))
            + &Laurent::monomial(-4, 1);
        assert_eq!(d2, expect);
    }

    #[test]
    fn normalization_factor() {
        assert_eq!(Laurent::neg_a_cubed_pow(0), Laurent::one());
        assert_eq!(Laurent::neg_a_cubed_pow(1), Laurent::monomial(3, -1));
        assert_eq!(Laurent::neg_a_cubed_pow(-2), Laurent::monomial(-6, 1));
        assert_eq!(
            &Laurent::neg_a_cubed_pow(1) * &Laurent::neg_a_cubed_pow(-1),
            Laurent::one()
        );
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(format!("{}", Laurent::delta()), "-A^-2 - A^2");
        assert_eq!(format!("{}", Laurent::zero()), "0");
        assert_eq!(format!("{}", Laurent::monomial(0, 1)), "1");
    }
}
