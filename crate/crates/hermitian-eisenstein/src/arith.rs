//! Exact scalars: rationals, p-adic valuations, polynomials in one variable,
//! combinatorial coefficients, rationals decorated with powers of pi and
//! sqrt(D), and rational reconstruction from high-precision floats.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::bigfloat::BigFloat;

pub type Rat = BigRational;

/// Crate-wide error type: computation errors carry a human-readable reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Error(pub String);

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

pub fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error(msg.into()))
}

pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parse "num/den" or "num" (arbitrary-precision).
pub fn rat_from_str(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = n
        .trim()
        .parse()
        .map_err(|_| Error(format!("bad rational numerator in {s:?}")))?;
    let d: BigInt = d
        .trim()
        .parse()
        .map_err(|_| Error(format!("bad rational denominator in {s:?}")))?;
    if d.is_zero() {
        return err(format!("zero denominator in {s:?}"));
    }
    Ok(Rat::new(n, d))
}

/// Serialize as "num/den" ("num" when the denominator is 1).
pub fn rat_to_str(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// p-adic valuation of a nonzero integer.
pub fn valuation_int(x: &BigInt, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0i64;
    let mut x = x.clone();
    loop {
        let (q, r) = x.div_rem(&p);
        if r.is_zero() {
            v += 1;
            x = q;
        } else {
            return Some(v);
        }
    }
}

/// p-adic valuation of a rational; `None` encodes v_p(0) = +infinity.
pub fn valuation_rat(x: &Rat, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let vn = valuation_int(x.numer(), p).unwrap();
    let vd = valuation_int(x.denom(), p).unwrap();
    Some(vn - vd)
}

/// q-binomial coefficient [s, t]_q = prod_{k=1..t} (q^{s-k+1}-1)/(q^k-1).
pub fn qbinom(s: i64, t: i64, q: &Rat) -> Result<Rat> {
    if t < 0 || t > s {
        return err(format!("qbinom({s},{t}) out of range"));
    }
    let mut num = Rat::one();
    let mut den = Rat::one();
    for k in 1..=t {
        num *= pow_rat(q, s - k + 1) - Rat::one();
        den *= pow_rat(q, k) - Rat::one();
    }
    if den.is_zero() {
        return err("qbinom at a root of unity".to_string());
    }
    Ok(num / den)
}

pub fn pow_rat(x: &Rat, e: i64) -> Rat {
    if e >= 0 {
        x.pow(e as i32)
    } else {
        x.pow(e as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PochDirection {
    Ascending,
    Descending,
}

/// Ascending (x)^{(r)} = x(x+1)...(x+r-1) or descending (x)_{(r)} = x(x-1)...(x-r+1).
pub fn pochhammer(x: &Rat, r: u32, dir: PochDirection) -> Rat {
    let mut acc = Rat::one();
    for i in 0..r as i64 {
        let shift = match dir {
            PochDirection::Ascending => rat_i(i),
            PochDirection::Descending => -rat_i(i),
        };
        acc *= x + shift;
    }
    acc
}

pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

// ---------------------------------------------------------------------------
// Univariate polynomials with rational coefficients.
// ---------------------------------------------------------------------------

/// Polynomial in one variable, coefficients ascending; trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(pub Vec<Rat>);

impl Poly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn zero() -> Self {
        Poly(vec![])
    }

    pub fn one() -> Self {
        Poly(vec![Rat::one()])
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| rat_i(c)).collect())
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    pub fn coeff(&self, i: usize) -> Rat {
        self.0.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(self.coeff(i) + other.coeff(i));
        }
        Poly::new(v)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(self.coeff(i) - other.coeff(i));
        }
        Poly::new(v)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![Rat::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        Poly::new(self.0.iter().map(|a| a * c).collect())
    }

    /// Exact division; errors if the remainder is nonzero.
    pub fn div_exact(&self, other: &Poly) -> Result<Poly> {
        if other.is_zero() {
            return err("polynomial division by zero");
        }
        if self.is_zero() {
            return Ok(Poly::zero());
        }
        let mut rem = self.0.clone();
        let d = other.0.len() - 1;
        let lead = other.0.last().unwrap().clone();
        if rem.len() < other.0.len() {
            return err("polynomial division not exact (degree)");
        }
        let mut q = vec![Rat::zero(); rem.len() - d];
        for i in (d..rem.len()).rev() {
            let c = rem[i].clone() / lead.clone();
            q[i - d] = c.clone();
            if !c.is_zero() {
                for j in 0..=d {
                    let t = &other.0[j] * &c;
                    rem[i - d + j] -= t;
                }
            }
        }
        if rem.iter().any(|r| !r.is_zero()) {
            return err("polynomial division not exact (remainder)");
        }
        Ok(Poly::new(q))
    }

    /// Substitute X -> c*X.
    pub fn compose_scale(&self, c: &Rat) -> Poly {
        let mut pow = Rat::one();
        let mut v = Vec::with_capacity(self.0.len());
        for a in &self.0 {
            v.push(a * &pow);
            pow *= c;
        }
        Poly::new(v)
    }

    /// Serialize as ["c0","c1",...].
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.0
                .iter()
                .map(|c| serde_json::Value::String(rat_to_str(c)))
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// Rationals decorated with exact powers of pi and sqrt(D).
// ---------------------------------------------------------------------------

/// A rational times pi^(pi_half/2) times sqrt(D)^sqrtd_pow. The pi exponent is
/// stored doubled so that half-integer powers (from Gamma at half-integers)
/// stay exact. sqrt(D)^2 is folded back into the rational eagerly, so
/// sqrtd_pow is always 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledRat {
    pub r: Rat,
    /// doubled exponent of pi (value carries pi^{pi_half/2})
    pub pi_half: i64,
    /// exponent of sqrt(D), normalized to {0,1} (0 whenever r = 0)
    pub sqrtd_pow: i64,
    /// the D whose square root is tracked (irrelevant when sqrtd_pow = 0)
    pub d: i64,
}

impl ScaledRat {
    pub fn from_rat(r: Rat) -> Self {
        ScaledRat {
            r,
            pi_half: 0,
            sqrtd_pow: 0,
            d: 1,
        }
    }

    pub fn one() -> Self {
        Self::from_rat(Rat::one())
    }

    pub fn new(r: Rat, pi_half: i64, sqrtd_pow: i64, d: i64) -> Self {
        let mut s = ScaledRat {
            r,
            pi_half,
            sqrtd_pow,
            d,
        };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        if self.r.is_zero() {
            self.pi_half = 0;
            self.sqrtd_pow = 0;
            self.d = 1;
            return;
        }
        // fold sqrt(D)^2 = D into the rational, keeping exponent in {0,1}
        let q = self.sqrtd_pow.div_euclid(2);
        self.sqrtd_pow = self.sqrtd_pow.rem_euclid(2);
        if q != 0 {
            let d = Rat::from_integer(BigInt::from(self.d));
            self.r *= pow_rat(&d, q);
        }
        if self.sqrtd_pow == 0 {
            self.d = 1;
        }
    }

    pub fn mul(&self, other: &ScaledRat) -> Result<ScaledRat> {
        if self.sqrtd_pow != 0 && other.sqrtd_pow != 0 && self.d != other.d {
            return err(format!(
                "cannot multiply sqrt({}) and sqrt({}) symbolically",
                self.d, other.d
            ));
        }
        let d = if self.sqrtd_pow != 0 { self.d } else { other.d };
        Ok(ScaledRat::new(
            &self.r * &other.r,
            self.pi_half + other.pi_half,
            self.sqrtd_pow + other.sqrtd_pow,
            d,
        ))
    }

    pub fn div(&self, other: &ScaledRat) -> Result<ScaledRat> {
        if other.r.is_zero() {
            return err("ScaledRat division by zero");
        }
        // 1/sqrt(d) = sqrt(d)/d
        let inv = ScaledRat::new(
            Rat::one()
                / (&other.r
                    * if other.sqrtd_pow != 0 {
                        Rat::from_integer(BigInt::from(other.d))
                    } else {
                        Rat::one()
                    }),
            -other.pi_half,
            other.sqrtd_pow,
            other.d,
        );
        self.mul(&inv)
    }

    pub fn scale(&self, c: &Rat) -> ScaledRat {
        ScaledRat::new(&self.r * c, self.pi_half, self.sqrtd_pow, self.d)
    }

    /// Extract the plain rational; errors if a pi or sqrt(D) power survives.
    pub fn to_rat(&self) -> Result<Rat> {
        if self.r.is_zero() {
            return Ok(Rat::zero());
        }
        if self.pi_half != 0 {
            return err(format!(
                "pi exponent ledger did not cancel (pi^{}/2 remains)",
                self.pi_half
            ));
        }
        if self.sqrtd_pow != 0 {
            return err(format!("sqrt({}) exponent ledger did not cancel", self.d));
        }
        Ok(self.r.clone())
    }

    /// Numeric value at the given binary precision.
    pub fn to_bigfloat(&self, prec: i64) -> BigFloat {
        let mut v = BigFloat::from_rat(&self.r, prec);
        if self.pi_half != 0 {
            let pi = BigFloat::pi(prec + 16);
            let half = self.pi_half.div_euclid(2);
            let odd = self.pi_half.rem_euclid(2);
            if half != 0 {
                let pw = pi.powi(half.abs(), prec + 16);
                v = if half > 0 {
                    v.mul(&pw, prec)
                } else {
                    v.div(&pw, prec)
                };
            }
            if odd != 0 {
                v = v.mul(&pi.sqrt(prec + 16), prec);
            }
        }
        if self.sqrtd_pow != 0 {
            let sd = BigFloat::from_i64(self.d).sqrt(prec + 16);
            v = v.mul(&sd, prec);
        }
        v
    }
}

/// Gamma(n/2) for positive odd n, as rational * pi^{1/2}:
/// Gamma(1/2) = sqrt(pi), Gamma(s+1) = s*Gamma(s).
pub fn gamma_half_odd(n: i64) -> Result<ScaledRat> {
    if n <= 0 || n % 2 == 0 {
        return err(format!("gamma_half_odd wants positive odd n, got {n}"));
    }
    let mut r = Rat::one();
    let mut k = 1i64;
    while k < n {
        r *= rat(k, 2);
        k += 2;
    }
    Ok(ScaledRat::new(r, 1, 0, 1))
}

/// Gamma at integer or half-integer argument 2s/2: returns Gamma(s2/2).
pub fn gamma_rat_half(s2: i64) -> Result<ScaledRat> {
    if s2 % 2 == 0 {
        if s2 <= 0 {
            return err(format!("gamma pole at non-positive integer {}", s2 / 2));
        }
        return Ok(ScaledRat::from_rat(Rat::from_integer(factorial(
            (s2 / 2 - 1) as u64,
        ))));
    }
    if s2 > 0 {
        gamma_half_odd(s2)
    } else {
        // Gamma(1/2 - n) = (-4)^n n! / (2n)! * sqrt(pi), with n = (1 - s2)/2
        let n = (1 - s2) / 2;
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let r = rat_i(sign) * pow_rat(&rat_i(4), n) * Rat::from_integer(factorial(n as u64))
            / Rat::from_integer(factorial(2 * n as u64));
        Ok(ScaledRat::new(r, 1, 0, 1))
    }
}

/// Gamma_C(s) = 2 (2 pi)^{-s} Gamma(s) at a positive integer s.
pub fn gamma_c(s: i64) -> Result<ScaledRat> {
    if s <= 0 {
        return err(format!("Gamma_C at non-positive integer {s}"));
    }
    let two_pow = pow_rat(&rat_i(2), -s + 1); // 2 * 2^{-s}
    Ok(ScaledRat::new(
        two_pow * Rat::from_integer(factorial((s - 1) as u64)),
        -2 * s,
        0,
        1,
    ))
}

// ---------------------------------------------------------------------------
// Vector-valued coefficient space: polynomials in row vectors u, v.
// ---------------------------------------------------------------------------

/// Monomial u^a v^b given by exponent vectors.
pub type Monomial = (Vec<u8>, Vec<u8>);

/// Element of the weight-(k,l) polynomial space in variables u_1..u_{n1},
/// v_1..v_{n2}, homogeneous of degrees |k| and |l|; rational coefficients in
/// the monomial basis (which matches the bideterminant basis for weights of
/// length <= 1, the only shipped case).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffVec {
    pub weight_k: Vec<i64>,
    pub weight_l: Vec<i64>,
    pub terms: BTreeMap<Monomial, Rat>,
}

impl CoeffVec {
    pub fn new(weight_k: Vec<i64>, weight_l: Vec<i64>) -> Self {
        CoeffVec {
            weight_k,
            weight_l,
            terms: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, m: Monomial, c: Rat) {
        if !c.is_zero() {
            self.terms.insert(m, c);
        }
    }

    pub fn add_assign_term(&mut self, m: Monomial, c: &Rat) {
        let e = self.terms.entry(m).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            // keep map canonical
            let k: Vec<_> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for key in k {
                self.terms.remove(&key);
            }
        }
    }

    pub fn scale(&self, c: &Rat) -> CoeffVec {
        let mut out = CoeffVec::new(self.weight_k.clone(), self.weight_l.clone());
        if c.is_zero() {
            return out;
        }
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v * c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Minimum p-adic valuation over all monomial coefficients.
    pub fn valuation(&self, p: u64) -> Option<i64> {
        let mut best: Option<i64> = None;
        for v in self.terms.values() {
            if let Some(val) = valuation_rat(v, p) {
                best = Some(match best {
                    None => val,
                    Some(b) => b.min(val),
                });
            }
        }
        best
    }

    /// JSON object keyed by monomial strings like "u1^7*v1^7".
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (m, c) in &self.terms {
            map.insert(monomial_key(m), serde_json::Value::String(rat_to_str(c)));
        }
        serde_json::Value::Object(map)
    }
}

pub fn monomial_key(m: &Monomial) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        if e > 0 {
            parts.push(format!("u{}^{}", i + 1, e));
        }
    }
    for (i, &e) in m.1.iter().enumerate() {
        if e > 0 {
            parts.push(format!("v{}^{}", i + 1, e));
        }
    }
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

// ---------------------------------------------------------------------------
// Rational reconstruction.
// ---------------------------------------------------------------------------

/// Recover the unique rational with denominator <= max_den inside the error
/// ball of `x`, by continued fractions, requiring a 10^guard_digits safety
/// margin against ambiguity. Never returns a silent wrong answer.
pub fn rational_reconstruct(x: &BigFloat, max_den: &BigInt, guard_digits: u32) -> Result<Rat> {
    if guard_digits < 10 {
        return err("rational_reconstruct requires guard_digits >= 10");
    }
    let val = x.to_rat_exact();
    let errball = x.err_bound_rat();
    // Continued fraction expansion of the center.
    let mut a = val.numer().clone();
    let mut b = val.denom().clone();
    // standard convergent recurrence seeds: h_{-2}/k_{-2} = 0/1, h_{-1}/k_{-1} = 1/0
    let mut p_prev = BigInt::zero();
    let mut p_cur = BigInt::one();
    let mut q_prev = BigInt::one();
    let mut q_cur = BigInt::zero();
    let mut best: Option<(BigInt, BigInt)> = None;
    loop {
        if b.is_zero() {
            // exact rational reached: p_cur/q_cur equals the center
            if q_cur <= *max_den && !q_cur.is_zero() {
                best = Some((p_cur.clone(), q_cur.clone()));
            }
            break;
        }
        let (quot, rem) = a.div_mod_floor(&b);
        let p_next = &quot * &p_cur + &p_prev;
        let q_next = &quot * &q_cur + &q_prev;
        if q_next > *max_den {
            break;
        }
        // distance |val - p_next/q_next|
        let cand = Rat::new(p_next.clone(), q_next.clone());
        let dist = (&val - &cand).abs();
        if dist <= errball {
            best = Some((p_next.clone(), q_next.clone()));
            // continue: a later convergent inside the ball with larger den
            // would signal ambiguity, caught by the margin test below
        }
        p_prev = p_cur;
        p_cur = p_next;
        q_prev = q_cur;
        q_cur = q_next;
        a = b;
        b = rem;
    }
    let (pn, qn) = match best {
        Some(x) => x,
        None => return err("insufficient precision: no convergent within error ball"),
    };
    let cand = Rat::new(pn, qn.clone());
    // Ambiguity margin: any other rational with denominator <= max_den is at
    // distance >= 1/(q*max_den) from cand; demand the error ball (doubled, to
    // cover the true value's own ball) be 10^guard smaller.
    let gap = Rat::new(BigInt::one(), &qn * max_den);
    let margin = Rat::from_integer(BigInt::from(10u32).pow(guard_digits));
    let two = rat_i(2);
    if &two * &errball * &margin > gap {
        return err(format!(
            "insufficient precision: error ball {} too large for denominator bound",
            errball
        ));
    }
    if (&val - &cand).abs() > errball {
        return err("insufficient precision: no convergent within error ball");
    }
    Ok(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valuation_examples() {
        // v_3 of -2^24*41/(3^15*5*19) = -15 and v_41 = 1
        let x = Rat::new(
            BigInt::from(-(1i64 << 24) * 41),
            BigInt::from(3i64.pow(15) * 5 * 19),
        );
        assert_eq!(valuation_rat(&x, 3), Some(-15));
        assert_eq!(valuation_rat(&x, 41), Some(1));
        assert_eq!(valuation_rat(&Rat::zero(), 7), None);
    }

    #[test]
    fn qbinom_examples() {
        // [2,1]_q = q + 1
        let q = rat_i(5);
        assert_eq!(qbinom(2, 1, &q).unwrap(), rat_i(6));
        // [4,2]_2 = 35
        assert_eq!(qbinom(4, 2, &rat_i(2)).unwrap(), rat_i(35));
        assert_eq!(qbinom(7, 0, &rat_i(3)).unwrap(), rat_i(1));
        assert!(qbinom(2, 3, &q).is_err());
        // symmetry
        assert_eq!(qbinom(5, 2, &rat_i(4)).unwrap(), qbinom(5, 3, &rat_i(4)).unwrap());
    }

    #[test]
    fn qbinom_pascal() {
        // [s,t]_q = q^t [s-1,t]_q + [s-1,t-1]_q
        for s in 1..7i64 {
            for t in 1..=s {
                for qv in [2i64, 3, 5] {
                    let q = rat_i(qv);
                    let lhs = qbinom(s, t, &q).unwrap();
                    let rhs = pow_rat(&q, t) * qbinom(s - 1, t, &q).unwrap_or_else(|_| Rat::zero())
                        + qbinom(s - 1, t - 1, &q).unwrap();
                    assert_eq!(lhs, rhs, "pascal failed at ({s},{t},{qv})");
                }
            }
        }
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(
            pochhammer(&rat_i(11), 1, PochDirection::Descending),
            rat_i(11)
        );
        assert_eq!(pochhammer(&rat_i(9), 0, PochDirection::Descending), rat_i(1));
        assert_eq!(pochhammer(&rat_i(5), 3, PochDirection::Ascending), rat_i(210));
    }

    #[test]
    fn poly_arith() {
        let f = Poly::from_ints(&[1, 2, 1]); // (1+x)^2
        let g = Poly::from_ints(&[1, 1]);
        assert_eq!(f.div_exact(&g).unwrap(), g);
        let h = Poly::from_ints(&[3, 0, -2, 7]);
        assert_eq!(h.mul(&g).div_exact(&g).unwrap(), h);
        assert!(f.div_exact(&Poly::from_ints(&[1, 3])).is_err());
        assert_eq!(Poly::zero().degree(), None);
        assert_eq!(h.eval(&rat_i(2)), rat_i(3 - 8 + 56));
    }

    #[test]
    fn scaled_rat_ledger() {
        let a = ScaledRat::new(rat_i(3), 2, 1, 3); // 3*pi*sqrt3
        let b = ScaledRat::new(rat_i(2), -2, 1, 3); // 2/pi*sqrt3
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.to_rat().unwrap(), rat_i(18)); // 6*3
        let c = a.div(&a).unwrap();
        assert_eq!(c.to_rat().unwrap(), rat_i(1));
        assert!(a.to_rat().is_err());
        // Gamma(7/2) = 15/8 sqrt(pi)
        let g = gamma_half_odd(7).unwrap();
        assert_eq!(g.r, rat(15, 8));
        assert_eq!(g.pi_half, 1);
        // Gamma_C(3) = 2 (2pi)^{-3} * 2 = 4 / (8 pi^3)
        let gc = gamma_c(3).unwrap();
        assert_eq!(gc.r, rat(1, 2));
        assert_eq!(gc.pi_half, -6);
    }

    #[test]
    fn reconstruct_basics() {
        let x = BigFloat::from_rat(&rat(1, 3), 200);
        let r = rational_reconstruct(&x, &BigInt::from(1_000_000u64), 10).unwrap();
        assert_eq!(r, rat(1, 3));
        // 0.333 with error 1e-3 must refuse
        let mut y = BigFloat::from_rat(&rat(333, 1000), 200);
        y.set_err_decimal(3);
        assert!(rational_reconstruct(&y, &BigInt::from(1_000_000u64), 10).is_err());
    }

    proptest! {
        #[test]
        fn valuation_additive(an in -2000i64..2000, bn in -2000i64..2000,
                              ad in 1i64..2000, bd in 1i64..2000) {
            prop_assume!(an != 0 && bn != 0);
            let a = rat(an, ad);
            let b = rat(bn, bd);
            for p in [2u64, 3, 5, 7] {
                let va = valuation_rat(&a, p).unwrap();
                let vb = valuation_rat(&b, p).unwrap();
                prop_assert_eq!(valuation_rat(&(&a * &b), p), Some(va + vb));
                let s = &a + &b;
                if let Some(vs) = valuation_rat(&s, p) {
                    prop_assert!(vs >= va.min(vb));
                }
            }
        }

        #[test]
        fn reconstruct_roundtrip(n in -100000i64..100000, d in 1i64..10000) {
            let r = rat(n, d);
            let x = BigFloat::from_rat(&r, 300);
            let got = rational_reconstruct(&x, &BigInt::from(10000u64), 12).unwrap();
            prop_assert_eq!(got, r);
        }

        #[test]
        fn qbinom_prime_power_integral(s in 0i64..8, qv in 2i64..8) {
            for t in 0..=s {
                let v = qbinom(s, t, &rat_i(qv)).unwrap();
                prop_assert!(v.denom().is_one());
                prop_assert!(v.numer() > &BigInt::zero());
            }
        }
    }
}
