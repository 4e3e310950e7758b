//! Half-integer spin values and the standard spin matrices.
//!
//! Site levels are indexed by `l = 0..2j`, ordered by descending magnetic
//! quantum number: `l = 0` is `m = +j`, `l = 2j` is `m = -j`. All basis
//! orderings in this crate derive from that convention.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A spin magnitude `j`, stored as `2j` so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinJ {
    twice: u32,
}

impl SpinJ {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::validation("spin j must be positive"));
        }
        Ok(SpinJ { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Local Hilbert-space dimension `2j + 1`.
    pub fn site_dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number for level index `l` (0 is `m = +j`).
    pub fn m_of_level(self, l: usize) -> f64 {
        (self.twice as f64 - 2.0 * l as f64) / 2.0
    }

    /// Render as "1", "3/2", ...
    pub fn display(self) -> String {
        if self.twice % 2 == 0 {
            format!("{}", self.twice / 2)
        } else {
            format!("{}/2", self.twice)
        }
    }
}

impl std::fmt::Display for SpinJ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.display())
    }
}

/// Parse a half-integer from either a number (1, 1.5) or a "p/q" string
/// ("3/2"). Returns twice the value.
pub fn parse_half_integer(text: &str) -> Result<i64> {
    let s = text.trim();
    if let Some((num, den)) = s.split_once('/') {
        let p: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad fraction numerator in {s:?}")))?;
        let q: i64 = den
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad fraction denominator in {s:?}")))?;
        match q {
            1 => Ok(2 * p),
            2 => Ok(p),
            _ => Err(Error::validation(format!(
                "{s:?} is not a half-integer (denominator must be 1 or 2)"
            ))),
        }
    } else {
        let v: f64 = s
            .parse()
            .map_err(|_| Error::validation(format!("cannot parse {s:?} as a number")))?;
        half_integer_from_f64(v)
    }
}

pub fn half_integer_from_f64(v: f64) -> Result<i64> {
    let twice = 2.0 * v;
    if (twice - twice.round()).abs() > 1e-9 {
        return Err(Error::validation(format!("{v} is not a half-integer")));
    }
    Ok(twice.round() as i64)
}

impl Serialize for SpinJ {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.display())
    }
}

impl<'de> Deserialize<'de> for SpinJ {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let twice = match Raw::deserialize(de)? {
            Raw::Num(v) => half_integer_from_f64(v).map_err(D::Error::custom)?,
            Raw::Text(s) => parse_half_integer(&s).map_err(D::Error::custom)?,
        };
        if twice <= 0 {
            return Err(D::Error::custom("spin j must be positive"));
        }
        Ok(SpinJ {
            twice: twice as u32,
        })
    }
}

/// `s^x` in the descending-m level basis. Entries are real:
/// `<m±1|s^x|m> = sqrt(j(j+1) - m(m±1)) / 2`.
pub fn spin_x(j: SpinJ) -> Array2<C64> {
    let d = j.site_dim();
    let mut out = Array2::zeros((d, d));
    for l in 1..d {
        // couples levels l-1 (m+1) and l (m), with m = j - l
        let m = j.m_of_level(l);
        let jj = j.value() * (j.value() + 1.0);
        let amp = 0.5 * (jj - m * (m + 1.0)).sqrt();
        out[(l - 1, l)] = C64::new(amp, 0.0);
        out[(l, l - 1)] = C64::new(amp, 0.0);
    }
    out
}

/// `s^z`, diagonal with entries `m = j, j-1, ..., -j`.
pub fn spin_z(j: SpinJ) -> Array2<C64> {
    let d = j.site_dim();
    let mut out = Array2::zeros((d, d));
    for l in 0..d {
        out[(l, l)] = C64::new(j.m_of_level(l), 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_half_integer("3/2").unwrap(), 3);
        assert_eq!(parse_half_integer("1").unwrap(), 2);
        assert_eq!(parse_half_integer("1.5").unwrap(), 3);
        assert!(parse_half_integer("1/3").is_err());
        assert!(parse_half_integer("0.3").is_err());
    }

    #[test]
    fn spin_one_x_matrix() {
        let j = SpinJ::from_twice(2).unwrap();
        let sx = spin_x(j);
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(sx[(0, 1)].re, inv_sqrt2, epsilon = 1e-15);
        assert_abs_diff_eq!(sx[(1, 2)].re, inv_sqrt2, epsilon = 1e-15);
        assert_eq!(sx[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let j = SpinJ::from_twice(1).unwrap();
        let sx = spin_x(j);
        assert_abs_diff_eq!(sx[(0, 1)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn levels_descend_from_plus_j() {
        let j = SpinJ::from_twice(3).unwrap();
        assert_abs_diff_eq!(j.m_of_level(0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(j.m_of_level(3), -1.5, epsilon = 1e-15);
    }
}
