//! Exact arithmetic over Q and quadratic fields Q(√d).
//!
//! Only what the criterion certificate and the X_p classification need:
//! field operations, Gaussian elimination, and integer kernels.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = Ratio<i128>;

/// Parse `"p"`, `"p/q"` or a plain decimal like `"0.25"` into a rational.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse `{s}` as a rational"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = p.trim().parse().map_err(|_| bad())?;
        let q: i128 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_val: i128 = if int.is_empty() || int == "-" || int == "+" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.len() > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10i128.pow(frac.len() as u32);
        let num: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let frac_part = Rat::new(num, den);
        let int_part = Rat::from_integer(int_val);
        return Ok(if neg { int_part - frac_part } else { int_part + frac_part });
    }
    Ok(Rat::from_integer(s.parse().map_err(|_| bad())?))
}

pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// `a + b√d` with rational parts. `d` is a square-free positive radicand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadNum {
    pub a: Rat,
    pub b: Rat,
    pub d: i64,
}

impl QuadNum {
    pub fn new(a: Rat, b: Rat, d: i64) -> Self {
        Self { a, b, d }
    }

    pub fn rational(a: Rat, d: i64) -> Self {
        Self { a, b: Rat::zero(), d }
    }

    pub fn from_int(v: i64, d: i64) -> Self {
        Self::rational(Rat::from_integer(v as i128), d)
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.a) + rat_to_f64(&self.b) * (self.d as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    fn norm(&self) -> Rat {
        self.a * self.a - self.b * self.b * Rat::from_integer(self.d as i128)
    }

    pub fn recip(&self) -> Self {
        let n = self.norm();
        Self { a: self.a / n, b: -self.b / n, d: self.d }
    }
}

impl fmt::Display for QuadNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", format_rat(&self.a))
        } else {
            write!(f, "{} + {}*sqrt({})", format_rat(&self.a), format_rat(&self.b), self.d)
        }
    }
}

impl Add for QuadNum {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { a: self.a + o.a, b: self.b + o.b, d: self.d }
    }
}

impl Sub for QuadNum {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { a: self.a - o.a, b: self.b - o.b, d: self.d }
    }
}

impl Mul for QuadNum {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let d = Rat::from_integer(self.d as i128);
        Self {
            a: self.a * o.a + self.b * o.b * d,
            b: self.a * o.b + self.b * o.a,
            d: self.d,
        }
    }
}

impl Div for QuadNum {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for QuadNum {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b, d: self.d }
    }
}

/// True when `d` is a positive integer that is not a perfect square.
pub fn is_valid_radicand(d: i64) -> bool {
    if d < 2 {
        return false;
    }
    let r = (d as f64).sqrt().round() as i64;
    !(r - 1..=r + 1).any(|s| s * s == d)
}

/// Rank of a dense matrix over Q(√d) by Gaussian elimination.
pub fn quad_rank(rows: &[Vec<QuadNum>]) -> usize {
    let mut a: Vec<Vec<QuadNum>> = rows.to_vec();
    let nrows = a.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = a[0].len();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = a[rank][col].recip();
        for r in (rank + 1)..nrows {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col] * inv;
            for c in col..ncols {
                let v = a[rank][c];
                a[r][c] = a[r][c] - factor * v;
            }
        }
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Basis of the rational kernel `{k : A k = 0}` of a rational matrix, via RREF.
pub fn rational_kernel(rows: &[Vec<Rat>], ncols: usize) -> Vec<Vec<Rat>> {
    let mut a: Vec<Vec<Rat>> = rows.to_vec();
    let nrows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(piv) = (r..nrows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(r, piv);
        let inv = a[r][col].recip();
        for c in 0..ncols {
            a[r][c] *= inv;
        }
        for i in 0..nrows {
            if i != r && !a[i][col].is_zero() {
                let f = a[i][col];
                for c in 0..ncols {
                    let v = a[r][c];
                    a[i][c] -= f * v;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == nrows {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![Rat::zero(); ncols];
            v[fc] = Rat::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][fc];
            }
            v
        })
        .collect()
}

/// Scale a rational vector to the primitive integer vector on the same ray,
/// with the first nonzero entry positive.
pub fn primitive_integer(v: &[Rat]) -> Vec<i64> {
    let lcm = v.iter().fold(1i128, |acc, r| acc.lcm(r.denom()));
    let ints: Vec<i128> = v.iter().map(|r| (r * Rat::from_integer(lcm)).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, x| acc.gcd(x)).max(1);
    let sign = ints
        .iter()
        .find(|x| !x.is_zero())
        .map(|x| x.signum())
        .unwrap_or(1);
    ints.iter().map(|x| (sign * x / g) as i64).collect()
}

pub fn rat_abs_max(v: &[Rat]) -> Rat {
    v.iter().map(|r| r.abs()).fold(Rat::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_decimals() {
        assert_eq!(parse_rat("3/6").unwrap(), Rat::new(1, 2));
        assert_eq!(parse_rat("-2").unwrap(), Rat::from_integer(-2));
        assert_eq!(parse_rat("0.25").unwrap(), Rat::new(1, 4));
        assert_eq!(parse_rat("-1.5").unwrap(), Rat::new(-3, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
    }

    #[test]
    fn golden_ratio_is_a_unit() {
        let phi = QuadNum::new(Rat::new(1, 2), Rat::new(1, 2), 5);
        // φ² = φ + 1
        assert_eq!(phi * phi, phi + QuadNum::from_int(1, 5));
        let one = phi * phi.recip();
        assert_eq!(one, QuadNum::from_int(1, 5));
    }

    #[test]
    fn radicand_validation() {
        assert!(is_valid_radicand(2));
        assert!(is_valid_radicand(5));
        assert!(!is_valid_radicand(4));
        assert!(!is_valid_radicand(1));
        assert!(!is_valid_radicand(49));
    }

    #[test]
    fn kernel_of_one_two_row() {
        let rows = vec![vec![Rat::from_integer(1), Rat::from_integer(2)]];
        let ker = rational_kernel(&rows, 2);
        assert_eq!(ker.len(), 1);
        assert_eq!(primitive_integer(&ker[0]), vec![2, -1]);
    }

    #[test]
    fn quad_rank_detects_dependence() {
        let d = 2;
        let s2 = QuadNum::new(Rat::zero(), Rat::one(), d);
        let one = QuadNum::from_int(1, d);
        // rows (1, √2) and (√2, 2) are dependent
        assert_eq!(quad_rank(&[vec![one, s2], vec![s2, QuadNum::from_int(2, d)]]), 1);
        assert_eq!(quad_rank(&[vec![one, s2], vec![one, one]]), 2);
    }
}
