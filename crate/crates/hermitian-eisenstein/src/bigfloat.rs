//! Arbitrary-precision binary floats with conservative absolute error bounds.
//!
//! A value is m * 2^e together with an error bound tracked as log2 of the
//! absolute error (f64, NEG_INFINITY for exact). Every operation propagates
//! the bound conservatively (upward-rounded f64 log arithmetic); rounding the
//! mantissa to the working precision folds its truncation into the bound.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const EXACT: f64 = f64::NEG_INFINITY;

/// tiny upward slack added to every f64 log-domain operation so that f64
/// rounding can never make a bound optimistic
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct BigFloat {
    m: BigInt,
    e: i64,
    err2: f64,
    prec: i64,
}

/// log2(2^a + 2^b), rounded up.
fn log2sum(a: f64, b: f64) -> f64 {
    if a == EXACT {
        return b;
    }
    if b == EXACT {
        return a;
    }
    let m = a.max(b);
    let d = (a - b).abs();
    m + (1.0 + (-d).exp2()).log2() + SLACK
}

impl BigFloat {
    pub fn zero(prec: i64) -> Self {
        BigFloat {
            m: BigInt::zero(),
            e: 0,
            err2: EXACT,
            prec,
        }
    }

    pub fn from_bigint(m: BigInt) -> Self {
        BigFloat {
            m,
            e: 0,
            err2: EXACT,
            prec: 512,
        }
    }

    pub fn from_i64(x: i64) -> Self {
        Self::from_bigint(BigInt::from(x))
    }

    pub fn with_prec(mut self, prec: i64) -> Self {
        self.prec = prec;
        self.round();
        self
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn from_rat(r: &BigRational, prec: i64) -> Self {
        let num = BigFloat {
            m: r.numer().clone(),
            e: 0,
            err2: EXACT,
            prec: prec + 8,
        };
        let den = BigFloat {
            m: r.denom().clone(),
            e: 0,
            err2: EXACT,
            prec: prec + 8,
        };
        num.div(&den, prec)
    }

    /// Truncate mantissa to the working precision, folding the error in.
    fn round(&mut self) {
        let bits = self.m.bits() as i64;
        if bits > self.prec {
            let k = bits - self.prec;
            self.m = &self.m >> k;
            self.e += k;
            // truncation toward zero: error < 2^e
            self.err2 = log2sum(self.err2, self.e as f64);
        }
        if self.m.is_zero() && self.err2 == EXACT {
            self.e = 0;
        }
    }

    /// Upper bound on log2 |value| (value includes the error ball).
    pub fn mag2(&self) -> f64 {
        let core = if self.m.is_zero() {
            EXACT
        } else {
            (self.m.bits() as i64 + self.e) as f64
        };
        log2sum(core, self.err2)
    }

    /// Lower bound on log2 |center|; None if the center is zero.
    fn center_mag2_lower(&self) -> Option<i64> {
        if self.m.is_zero() {
            None
        } else {
            Some(self.m.bits() as i64 + self.e - 1)
        }
    }

    pub fn err2(&self) -> f64 {
        self.err2
    }

    pub fn is_exact(&self) -> bool {
        self.err2 == EXACT
    }

    pub fn set_err2(&mut self, err2: f64) {
        self.err2 = err2;
    }

    /// Declare |error| <= 10^-digits (used by tests and callers that obtain
    /// bounds externally).
    pub fn set_err_decimal(&mut self, digits: u32) {
        self.err2 = -(digits as f64) * std::f64::consts::LOG2_10 + SLACK;
    }

    pub fn neg(&self) -> Self {
        BigFloat {
            m: -&self.m,
            e: self.e,
            err2: self.err2,
            prec: self.prec,
        }
    }

    pub fn abs(&self) -> Self {
        BigFloat {
            m: self.m.abs(),
            e: self.e,
            err2: self.err2,
            prec: self.prec,
        }
    }

    /// Multiply by 2^k (exact).
    pub fn shl(&self, k: i64) -> Self {
        BigFloat {
            m: self.m.clone(),
            e: self.e + k,
            err2: self.err2 + k as f64,
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &Self, prec: i64) -> Self {
        let mut a = self;
        let mut b = other;
        if a.e < b.e {
            std::mem::swap(&mut a, &mut b);
        }
        if a.m.is_zero() || b.m.is_zero() {
            let (keep, drop) = if a.m.is_zero() { (b, a) } else { (a, b) };
            let mut out = BigFloat {
                m: keep.m.clone(),
                e: keep.e,
                err2: log2sum(keep.err2, drop.err2),
                prec,
            };
            out.round();
            return out;
        }
        // a.e >= b.e; align a down to b.e unless b is provably below the
        // working ulp of the result (judged by magnitude, not exponent: an
        // exact value may carry a short mantissa with a large exponent)
        let shift = a.e - b.e;
        let negligible = b.mag2() < a.mag2() - (prec as f64) - 64.0;
        let mut out = if !negligible {
            BigFloat {
                m: (&a.m << shift) + &b.m,
                e: b.e,
                err2: log2sum(a.err2, b.err2),
                prec,
            }
        } else {
            // b is far below a's ulp at this precision: absorb into error
            BigFloat {
                m: a.m.clone(),
                e: a.e,
                err2: log2sum(log2sum(a.err2, b.err2), b.mag2()),
                prec,
            }
        };
        out.round();
        out
    }

    pub fn sub(&self, other: &Self, prec: i64) -> Self {
        self.add(&other.neg(), prec)
    }

    pub fn mul(&self, other: &Self, prec: i64) -> Self {
        // |Delta(ab)| <= |a|_incl * err_b + |b|_incl * err_a (ball-inclusive
        // magnitudes cover the cross term)
        let e1 = if other.err2 == EXACT {
            EXACT
        } else {
            self.mag2() + other.err2
        };
        let e2 = if self.err2 == EXACT {
            EXACT
        } else {
            other.mag2() + self.err2
        };
        let mut out = BigFloat {
            m: &self.m * &other.m,
            e: self.e + other.e,
            err2: log2sum(e1, e2),
            prec,
        };
        out.round();
        out
    }

    pub fn mul_i64(&self, k: i64, prec: i64) -> Self {
        self.mul(&BigFloat::from_i64(k), prec)
    }

    pub fn div(&self, other: &Self, prec: i64) -> Self {
        assert!(!other.m.is_zero(), "BigFloat division by zero center");
        let lb = other.center_mag2_lower().unwrap();
        if other.err2 != EXACT {
            assert!(
                other.err2 <= (lb - 2) as f64,
                "BigFloat division by a value indistinguishable from zero"
            );
        }
        // quotient with ~prec+32 significant bits
        let nbits = self.m.bits() as i64;
        let dbits = other.m.bits() as i64;
        let k = (prec + 32 + dbits - nbits).max(0);
        let q = (&self.m << k) / &other.m;
        let e = self.e - other.e - k;
        // |b - err_b| >= 2^lb - 2^err_b >= 2^(lb-1) under the assert above is
        // not guaranteed; use lb-1 as a safe lower bound on |b| - err_b.
        let lbf = (lb - 1) as f64;
        let ea = if self.err2 == EXACT {
            EXACT
        } else {
            self.err2 - lbf
        };
        let eb = if other.err2 == EXACT {
            EXACT
        } else {
            self.mag2() + other.err2 - 2.0 * lbf
        };
        let err = log2sum(log2sum(ea, eb), e as f64);
        let mut out = BigFloat {
            m: q,
            e,
            err2: err,
            prec,
        };
        out.round();
        out
    }

    pub fn powi(&self, n: i64, prec: i64) -> Self {
        assert!(n >= 0, "powi wants a non-negative exponent");
        let mut acc = BigFloat::from_i64(1).with_prec(prec);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base, prec);
            }
            base = base.mul(&base, prec);
            n >>= 1;
        }
        acc
    }

    pub fn sqrt(&self, prec: i64) -> Self {
        assert!(self.m.sign() != Sign::Minus, "sqrt of negative center");
        if self.m.is_zero() {
            let mut out = self.clone();
            out.err2 = if self.err2 == EXACT {
                EXACT
            } else {
                self.err2 / 2.0 + 1.0
            };
            return out;
        }
        // scale so the shifted mantissa has ~2*(prec+16) bits and even exponent
        let bits = self.m.bits() as i64;
        let mut k = (2 * (prec + 16) - bits).max(0);
        if (self.e - k) % 2 != 0 {
            k += 1;
        }
        let scaled = &self.m << k;
        let root = scaled.sqrt(); // floor integer sqrt
        let e = (self.e - k) / 2;
        // truncation error <= 2^e; propagated: err/(2 sqrt(x))
        let lb = self.center_mag2_lower().unwrap();
        let ep = if self.err2 == EXACT {
            EXACT
        } else {
            assert!(
                self.err2 <= (lb - 2) as f64,
                "sqrt of a value indistinguishable from 0"
            );
            self.err2 - (lb as f64) / 2.0
        };
        let mut out = BigFloat {
            m: root,
            e,
            err2: log2sum(ep, e as f64),
            prec,
        };
        out.round();
        out
    }

    /// Compare centers (ignores error bounds).
    pub fn cmp_center(&self, other: &Self) -> std::cmp::Ordering {
        let d = self.sub(other, self.prec.max(other.prec));
        d.m.sign().cmp(&Sign::NoSign)
    }

    pub fn is_center_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.m.bits() as i64;
        if bits == 0 {
            return 0.0;
        }
        let k = (bits - 64).max(0);
        let top = (&self.m >> k).to_i128().unwrap() as f64;
        top * 2f64.powi((self.e + k) as i32)
    }

    pub fn to_rat_exact(&self) -> BigRational {
        if self.e >= 0 {
            BigRational::from_integer(&self.m << self.e)
        } else {
            BigRational::new(self.m.clone(), BigInt::one() << (-self.e))
        }
    }

    pub fn err_bound_rat(&self) -> BigRational {
        if self.err2 == EXACT {
            return BigRational::zero();
        }
        let k = self.err2.ceil() as i64;
        if k >= 0 {
            BigRational::from_integer(BigInt::one() << k)
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << (-k))
        }
    }

    /// Number of certified correct decimal digits (absolute accuracy).
    pub fn certified_decimals(&self) -> i64 {
        if self.err2 == EXACT {
            return i64::MAX;
        }
        (-self.err2 / std::f64::consts::LOG2_10).floor() as i64
    }

    /// Decimal rendering of the center with the given number of fractional
    /// digits.
    pub fn format_decimal(&self, digits: u32) -> String {
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = self.to_rat_exact() * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let neg = rounded.sign() == Sign::Minus;
        let absval = rounded.abs();
        use num_integer::Integer as _;
        let (ip, fp) = absval.div_rem(&scale);
        let mut s = format!("{}.{:0>width$}", ip, fp.to_string(), width = digits as usize);
        if neg {
            s.insert(0, '-');
        }
        s
    }

    // ----------------------------------------------------------------------
    // Constants and elementary functions.
    // ----------------------------------------------------------------------

    /// pi by Machin's formula with integer-arithmetic arctangent series.
    pub fn pi(prec: i64) -> Self {
        let p = prec + 32;
        // atan(1/x) * 2^p with error < (terms+2) ulps (truncated integer series)
        fn atan_inv(x: i64, p: i64) -> (BigInt, i64) {
            let one = BigInt::one() << p;
            let x2 = BigInt::from(x) * BigInt::from(x);
            let mut term = &one / BigInt::from(x);
            let mut acc = BigInt::zero();
            let mut k: i64 = 0;
            let mut terms = 0i64;
            while !term.is_zero() {
                let t = &term / BigInt::from(2 * k + 1);
                if k % 2 == 0 {
                    acc += &t;
                } else {
                    acc -= &t;
                }
                term = &term / &x2;
                k += 1;
                terms += 1;
            }
            (acc, terms)
        }
        let (a5, t5) = atan_inv(5, p);
        let (a239, t239) = atan_inv(239, p);
        let m = BigInt::from(16) * a5 - BigInt::from(4) * a239;
        let ulps = (16 * (t5 + 2) + 4 * (t239 + 2)) as f64;
        let mut out = BigFloat {
            m,
            e: -p,
            err2: -(p as f64) + ulps.log2() + SLACK,
            prec,
        };
        out.round();
        out
    }

    /// e^x for moderate |x| (|x| < 2^40), error-tracked.
    pub fn exp(&self, prec: i64) -> Self {
        let p = prec + 64;
        let magx = self.mag2();
        assert!(magx < 40.0, "exp argument too large");
        // halve until |r| <= 1/4
        let halvings = (magx as i64 + 2).max(0);
        let r = self.shl(-halvings).with_prec(p);
        // Taylor sum
        let mut term = BigFloat::from_i64(1).with_prec(p);
        let mut acc = BigFloat::from_i64(1).with_prec(p);
        let mut k = 1i64;
        loop {
            term = term.mul(&r, p).div(&BigFloat::from_i64(k), p);
            if term.mag2() < (-p + 8) as f64 {
                break;
            }
            acc = acc.add(&term, p);
            k += 1;
            assert!(k < 100000, "exp series failed to converge");
        }
        // tail bound: |term| * 2 once |r| <= 1/4
        acc.err2 = log2sum(acc.err2, term.mag2() + 1.0);
        let mut out = acc;
        for _ in 0..halvings {
            out = out.mul(&out, p);
        }
        out.with_prec(prec)
    }

    /// Simultaneous sin and cos, error-tracked. Argument magnitude must be
    /// modest (|x| < 2^30).
    pub fn sin_cos(&self, prec: i64) -> (Self, Self) {
        let p = prec + (self.mag2().max(0.0) as i64) + 64;
        assert!(self.mag2() < 30.0, "sin_cos argument too large");
        let pi = BigFloat::pi(p);
        let half_pi = pi.shl(-1);
        // k = round(x / (pi/2))
        let q = self.div(&half_pi, p);
        let k = (q.to_f64()).round() as i64;
        let r = self.sub(&half_pi.mul(&BigFloat::from_i64(k), p), p);
        // |r| <= pi/4 + rounding
        let (s, c) = sin_cos_taylor(&r, p);
        let (sin, cos) = match k.rem_euclid(4) {
            0 => (s, c),
            1 => (c, s.neg()),
            2 => (s.neg(), c.neg()),
            _ => (c.neg(), s),
        };
        (sin.with_prec(prec), cos.with_prec(prec))
    }

    /// cos(2*pi*(a/c)) with exact fraction reduction; a may be any integer.
    pub fn cos2pi_frac(a: i64, c: i64, prec: i64) -> Self {
        let a = a.rem_euclid(c);
        let p = prec + 32;
        let two_pi = BigFloat::pi(p).shl(1);
        let x = two_pi
            .mul(&BigFloat::from_i64(a), p)
            .div(&BigFloat::from_i64(c), p);
        x.sin_cos(prec).1
    }
}

fn sin_cos_taylor(r: &BigFloat, p: i64) -> (BigFloat, BigFloat) {
    let mut term = r.clone().with_prec(p);
    let mut sin = term.clone();
    let mut cos = BigFloat::from_i64(1).with_prec(p);
    let mut cterm = BigFloat::from_i64(1).with_prec(p);
    let r2 = r.mul(r, p);
    let mut k = 1i64;
    loop {
        // cos term: (-1)^k r^{2k}/(2k)!
        cterm = cterm
            .mul(&r2, p)
            .div(&BigFloat::from_i64((2 * k - 1) * 2 * k), p)
            .neg();
        cos = cos.add(&cterm, p);
        // sin term: (-1)^k r^{2k+1}/(2k+1)!
        term = term
            .mul(&r2, p)
            .div(&BigFloat::from_i64(2 * k * (2 * k + 1)), p)
            .neg();
        sin = sin.add(&term, p);
        if term.mag2() < (-p + 8) as f64 && cterm.mag2() < (-p + 8) as f64 {
            break;
        }
        k += 1;
        assert!(k < 100000, "sin/cos series failed to converge");
    }
    sin.err2 = log2sum(sin.err2, term.mag2() + 1.0);
    cos.err2 = log2sum(cos.err2, cterm.mag2() + 1.0);
    (sin, cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, Rat};

    fn assert_close_decimal(x: &BigFloat, want: &str, digits: u32) {
        let (ip, fp) = want.split_once('.').unwrap();
        let neg = ip.starts_with('-');
        let scale = BigInt::from(10u32).pow(fp.len() as u32);
        let num: BigInt = format!("{}{}", ip.trim_start_matches('-'), fp)
            .parse()
            .unwrap();
        let num = if neg { -num } else { num };
        let want_rat = BigRational::new(num, scale);
        let got = x.to_rat_exact();
        let diff = (got - want_rat).abs();
        let tol = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(digits));
        assert!(diff < tol, "difference {} exceeds 1e-{}", diff, digits);
    }

    #[test]
    fn pi_digits() {
        let pi = BigFloat::pi(256);
        assert_close_decimal(
            &pi,
            "3.14159265358979323846264338327950288419716939937510582097494459230781640628620899",
            70,
        );
        assert!(pi.certified_decimals() > 70);
    }

    #[test]
    fn exp_digits() {
        let one = BigFloat::from_i64(1).with_prec(256);
        let e = one.exp(256);
        assert_close_decimal(
            &e,
            "2.71828182845904523536028747135266249775724709369995957496696762772407663035354759",
            70,
        );
        assert!(e.certified_decimals() > 70);
        // exp(-x) * exp(x) = 1
        let x = BigFloat::from_rat(&rat(-37, 5), 256);
        let p = x.exp(256).mul(&x.neg().exp(256), 256);
        let one = BigFloat::from_i64(1).with_prec(256);
        let d = p.sub(&one, 256);
        assert!(d.mag2() < -200.0, "exp product off by 2^{}", d.mag2());
    }

    #[test]
    fn sin_cos_identity() {
        for num in [1i64, 7, -13, 40] {
            let x = BigFloat::from_rat(&rat(num, 3), 256);
            let (s, c) = x.sin_cos(256);
            let one = s.mul(&s, 256).add(&c.mul(&c, 256), 256);
            let d = one.sub(&BigFloat::from_i64(1).with_prec(256), 256);
            assert!(d.mag2() < -200.0, "sin^2+cos^2 off by 2^{}", d.mag2());
        }
        // cos(2pi * 1/3) = -1/2
        let c = BigFloat::cos2pi_frac(1, 3, 256);
        let d = c.add(&BigFloat::from_rat(&rat(1, 2), 256), 256);
        assert!(d.mag2() < -200.0);
    }

    #[test]
    fn sqrt_and_div() {
        let two = BigFloat::from_i64(2).with_prec(300);
        let r = two.sqrt(300);
        let d = r.mul(&r, 300).sub(&two, 300);
        assert!(d.mag2() < -250.0);
        let x = BigFloat::from_rat(&rat(355, 113), 300);
        let y = x.mul(&BigFloat::from_i64(113), 300);
        let d = y.sub(&BigFloat::from_i64(355).with_prec(300), 300);
        assert!(d.mag2() < -250.0);
    }

    #[test]
    fn error_tracking_sane() {
        let x = BigFloat::from_rat(&rat(1, 3), 200);
        assert!(x.err2() < -150.0);
        let y = x.mul(&x, 200).add(&x, 200).sqrt(200);
        assert!(y.err2() < -140.0);
        let z: Rat = y.to_rat_exact();
        // sqrt(1/9+1/3) = sqrt(4/9) = 2/3
        let diff = (z - rat(2, 3)).abs();
        assert!(diff < rat(1, 1_000_000_000));
    }
}
