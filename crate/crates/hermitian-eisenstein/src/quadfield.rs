//! Arithmetic of the imaginary quadratic field K = Q(sqrt(-D)) for the five
//! Euclidean class-number-1 discriminants D in {3,4,7,8,11}: integers a+b*w,
//! field elements, the quadratic character, generalized Bernoulli numbers,
//! Dirichlet L-values at non-positive integers (exact rationals) and at
//! positive integers (rational times explicit powers of pi and sqrt(D)).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::{
    binomial, err, gamma_rat_half, pow_rat, rat, rat_i, Error, Rat, Result, ScaledRat,
};

/// Supported field: K = Q(sqrt(-D)), discriminant -D, different (sqrt(-D)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadField {
    pub d: i64,
    /// w^2 = t*w - n
    pub omega_trace: i64,
    pub omega_norm: i64,
}

pub const SUPPORTED_D: [i64; 5] = [3, 4, 7, 8, 11];

impl QuadField {
    pub fn new(d: i64) -> Result<QuadField> {
        match d {
            3 | 7 | 11 => Ok(QuadField {
                d,
                omega_trace: 1,
                omega_norm: (1 + d) / 4,
            }),
            4 => Ok(QuadField {
                d,
                omega_trace: 0,
                omega_norm: 1,
            }),
            8 => Ok(QuadField {
                d,
                omega_trace: 0,
                omega_norm: 2,
            }),
            _ => err(format!(
                "unsupported field discriminant -{d}: need class number 1 and a Euclidean ring (D in {{3,4,7,8,11}})"
            )),
        }
    }

    /// sqrt(-D) expressed as a + b*w.
    pub fn sqrt_minus_d(&self) -> QuadInt {
        match self.d {
            3 | 7 | 11 => QuadInt::new(BigInt::from(-1), BigInt::from(2)),
            _ => QuadInt::new(BigInt::zero(), BigInt::from(2)),
        }
    }

    pub fn chi(&self, n: &BigInt) -> i64 {
        kronecker(-self.d, n)
    }

    pub fn chi_i64(&self, n: i64) -> i64 {
        kronecker(-self.d, &BigInt::from(n))
    }

    pub fn splitting_type(&self, p: u64) -> Splitting {
        if self.d % (p as i64) == 0 {
            Splitting::Ramified
        } else if self.chi_i64(p as i64) == 1 {
            Splitting::Split
        } else {
            Splitting::Inert
        }
    }

    /// Units of O_K (as QuadInt): +-1 always; +-i for D=4; sixth roots for D=3.
    pub fn units(&self) -> Vec<QuadInt> {
        let one = QuadInt::one();
        let w = QuadInt::new(BigInt::zero(), BigInt::one());
        match self.d {
            3 => {
                // w = (1+sqrt(-3))/2 is a primitive 6th root of unity
                let mut us = Vec::new();
                let mut u = one.clone();
                for _ in 0..6 {
                    us.push(u.clone());
                    u = self.mul(&u, &w);
                }
                us
            }
            4 => vec![one.clone(), w.clone(), one.neg(), w.neg()],
            _ => vec![one.clone(), one.neg()],
        }
    }

    pub fn mul(&self, a: &QuadInt, b: &QuadInt) -> QuadInt {
        // (a0 + a1 w)(b0 + b1 w) = a0b0 - n a1b1 + (a0b1 + a1b0 + t a1b1) w
        let t = BigInt::from(self.omega_trace);
        let n = BigInt::from(self.omega_norm);
        QuadInt::new(
            &a.a * &b.a - &n * &a.b * &b.b,
            &a.a * &b.b + &a.b * &b.a + &t * &a.b * &b.b,
        )
    }

    pub fn conj(&self, a: &QuadInt) -> QuadInt {
        QuadInt::new(&a.a + BigInt::from(self.omega_trace) * &a.b, -&a.b)
    }

    pub fn norm(&self, a: &QuadInt) -> BigInt {
        &a.a * &a.a
            + BigInt::from(self.omega_trace) * &a.a * &a.b
            + BigInt::from(self.omega_norm) * &a.b * &a.b
    }

    pub fn trace(&self, a: &QuadInt) -> BigInt {
        BigInt::from(2) * &a.a + BigInt::from(self.omega_trace) * &a.b
    }

    /// Euclidean division: q with N(x - q y) < N(y) (coordinate rounding).
    pub fn div_round(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        let ny = self.norm(y);
        assert!(!ny.is_zero(), "division by zero in O_K");
        let prod = self.mul(x, &self.conj(y));
        QuadInt::new(round_div(&prod.a, &ny), round_div(&prod.b, &ny))
    }

    pub fn gcd(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        let mut a = x.clone();
        let mut b = y.clone();
        while !b.is_zero() {
            let q = self.div_round(&a, &b);
            let r = a.sub(&self.mul(&q, &b));
            a = b;
            b = r;
        }
        a
    }
}

/// Nearest-integer division a/b for integers.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two_a = BigInt::from(2) * a;
    let (q, r) = two_a.div_mod_floor(&(BigInt::from(2) * b));
    // round half toward +inf is fine for Euclidean property
    if BigInt::from(2) * r >= BigInt::from(2) * b.abs() {
        q + 1
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Splitting {
    Inert,
    Split,
    Ramified,
}

impl std::fmt::Display for Splitting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Splitting::Inert => write!(f, "inert"),
            Splitting::Split => write!(f, "split"),
            Splitting::Ramified => write!(f, "ramified"),
        }
    }
}

/// Kronecker symbol (a|n) for n >= 0 (n = 0 handled; negative n by |n| with
/// the sign convention for a < 0 not needed here since we use n >= 0).
pub fn kronecker(a: i64, n: &BigInt) -> i64 {
    let mut n = n.clone();
    if n.is_negative() {
        n = -n;
    }
    if n.is_zero() {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut a = BigInt::from(a);
    let mut result = 1i64;
    // factor out 2s from n
    let two = BigInt::from(2);
    let mut v2 = 0u32;
    while n.is_even() {
        n /= &two;
        v2 += 1;
    }
    if v2 > 0 {
        if a.is_even() {
            return 0;
        }
        // (a|2) = (2|a) for odd a: +1 if a = +-1 mod 8 else -1
        let amod8 = a.mod_floor(&BigInt::from(8));
        let s = if amod8 == BigInt::from(1) || amod8 == BigInt::from(7) {
            1
        } else {
            -1
        };
        if v2 % 2 == 1 {
            result *= s;
        }
    }
    // now n odd positive: Jacobi symbol (a|n)
    a = a.mod_floor(&n);
    let mut num = a;
    let mut den = n;
    loop {
        if num.is_zero() {
            return if den.is_one() { result } else { 0 };
        }
        let mut v = 0u32;
        while num.is_even() {
            num /= &two;
            v += 1;
        }
        if v % 2 == 1 {
            let dmod8 = den.mod_floor(&BigInt::from(8));
            if dmod8 == BigInt::from(3) || dmod8 == BigInt::from(5) {
                result = -result;
            }
        }
        // quadratic reciprocity for odd positive num, den
        if num.mod_floor(&BigInt::from(4)) == BigInt::from(3)
            && den.mod_floor(&BigInt::from(4)) == BigInt::from(3)
        {
            result = -result;
        }
        let r = den.mod_floor(&num);
        den = num;
        num = r;
    }
}

/// Element a + b*w of O_K.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadInt {
    pub a: BigInt,
    pub b: BigInt,
}

impl QuadInt {
    pub fn new(a: BigInt, b: BigInt) -> Self {
        QuadInt { a, b }
    }

    pub fn from_i64(a: i64, b: i64) -> Self {
        QuadInt::new(BigInt::from(a), BigInt::from(b))
    }

    pub fn zero() -> Self {
        QuadInt::new(BigInt::zero(), BigInt::zero())
    }

    pub fn one() -> Self {
        QuadInt::new(BigInt::one(), BigInt::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &QuadInt) -> QuadInt {
        QuadInt::new(&self.a + &o.a, &self.b + &o.b)
    }

    pub fn sub(&self, o: &QuadInt) -> QuadInt {
        QuadInt::new(&self.a - &o.a, &self.b - &o.b)
    }

    pub fn neg(&self) -> QuadInt {
        QuadInt::new(-&self.a, -&self.b)
    }

    /// Serialize as "a+b*w" / "a-b*w".
    pub fn to_str(&self) -> String {
        if self.b.is_negative() {
            format!("{}-{}*w", self.a, -&self.b)
        } else {
            format!("{}+{}*w", self.a, self.b)
        }
    }

    pub fn parse(s: &str) -> Result<QuadInt> {
        let s = s.trim();
        // forms: "a", "a+b*w", "a-b*w"
        if let Some(idx) = s[1..].find(['+', '-']).map(|i| i + 1) {
            let (a, rest) = s.split_at(idx);
            let b = rest
                .trim_end_matches('w')
                .trim_end_matches('*')
                .trim();
            let b = if b == "+" || b == "-" {
                format!("{b}1")
            } else {
                b.to_string()
            };
            Ok(QuadInt::new(
                a.trim().parse().map_err(|_| Error(format!("bad QuadInt {s:?}")))?,
                b.parse().map_err(|_| Error(format!("bad QuadInt {s:?}")))?,
            ))
        } else {
            Ok(QuadInt::new(
                s.parse().map_err(|_| Error(format!("bad QuadInt {s:?}")))?,
                BigInt::zero(),
            ))
        }
    }
}

/// Element x + y*w of K with rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KElem {
    pub x: Rat,
    pub y: Rat,
}

impl KElem {
    pub fn new(x: Rat, y: Rat) -> Self {
        KElem { x, y }
    }

    pub fn zero() -> Self {
        KElem::new(Rat::zero(), Rat::zero())
    }

    pub fn one() -> Self {
        KElem::new(Rat::one(), Rat::zero())
    }

    pub fn from_rat(x: Rat) -> Self {
        KElem::new(x, Rat::zero())
    }

    pub fn from_quadint(q: &QuadInt) -> Self {
        KElem::new(
            Rat::from_integer(q.a.clone()),
            Rat::from_integer(q.b.clone()),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.y.is_zero()
    }

    pub fn add(&self, o: &KElem) -> KElem {
        KElem::new(&self.x + &o.x, &self.y + &o.y)
    }

    pub fn sub(&self, o: &KElem) -> KElem {
        KElem::new(&self.x - &o.x, &self.y - &o.y)
    }

    pub fn neg(&self) -> KElem {
        KElem::new(-self.x.clone(), -self.y.clone())
    }

    pub fn mul(&self, o: &KElem, k: &QuadField) -> KElem {
        let t = rat_i(k.omega_trace);
        let n = rat_i(k.omega_norm);
        KElem::new(
            &self.x * &o.x - &n * &self.y * &o.y,
            &self.x * &o.y + &self.y * &o.x + &t * &self.y * &o.y,
        )
    }

    pub fn scale(&self, c: &Rat) -> KElem {
        KElem::new(&self.x * c, &self.y * c)
    }

    pub fn conj(&self, k: &QuadField) -> KElem {
        KElem::new(&self.x + rat_i(k.omega_trace) * &self.y, -self.y.clone())
    }

    pub fn norm(&self, k: &QuadField) -> Rat {
        &self.x * &self.x
            + rat_i(k.omega_trace) * &self.x * &self.y
            + rat_i(k.omega_norm) * &self.y * &self.y
    }

    pub fn trace(&self, k: &QuadField) -> Rat {
        rat_i(2) * &self.x + rat_i(k.omega_trace) * &self.y
    }

    pub fn inv(&self, k: &QuadField) -> Result<KElem> {
        let n = self.norm(k);
        if n.is_zero() {
            return err("inverse of zero in K");
        }
        Ok(self.conj(k).scale(&(Rat::one() / n)))
    }
}

// ---------------------------------------------------------------------------
// Bernoulli machinery and Dirichlet L-values.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Character {
    Trivial,
    Chi(i64), // chi_{-D}, D the field's positive discriminant absolute value
}

impl Character {
    /// chi^i with the parity convention: even i -> trivial.
    pub fn power(self, i: i64) -> Character {
        match self {
            Character::Trivial => Character::Trivial,
            Character::Chi(d) => {
                if i.rem_euclid(2) == 0 {
                    Character::Trivial
                } else {
                    Character::Chi(d)
                }
            }
        }
    }

    pub fn conductor(self) -> i64 {
        match self {
            Character::Trivial => 1,
            Character::Chi(d) => d,
        }
    }

    pub fn eval(self, n: i64) -> i64 {
        match self {
            Character::Trivial => 1,
            Character::Chi(d) => kronecker(-d, &BigInt::from(n)),
        }
    }
}

/// Classical Bernoulli number B_m (B_1 = -1/2), by the defining recurrence.
pub fn bernoulli(m: u32) -> Rat {
    // sum_{k=0}^{m} C(m+1,k) B_k = 0 for m >= 1
    let mut bs: Vec<Rat> = Vec::with_capacity(m as usize + 1);
    bs.push(Rat::one());
    for n in 1..=m as u64 {
        let mut acc = Rat::zero();
        for (k, b) in bs.iter().enumerate() {
            acc += Rat::from_integer(binomial(n + 1, k as u64)) * b;
        }
        bs.push(-acc / Rat::from_integer(BigInt::from(n + 1)));
    }
    bs[m as usize].clone()
}

/// Bernoulli polynomial B_m(x).
pub fn bernoulli_poly(m: u32, x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for k in 0..=m {
        acc += Rat::from_integer(binomial(m as u64, k as u64))
            * bernoulli(k)
            * pow_rat(x, (m - k) as i64);
    }
    acc
}

/// Generalized Bernoulli number B_{m,chi} = f^{m-1} sum_a chi(a) B_m(a/f).
pub fn gen_bernoulli(m: u32, chi: Character) -> Rat {
    let f = chi.conductor();
    if f == 1 {
        return bernoulli(m);
    }
    let mut acc = Rat::zero();
    for a in 1..=f {
        let c = chi.eval(a);
        if c != 0 {
            acc += rat_i(c) * bernoulli_poly(m, &rat(a, f));
        }
    }
    pow_rat(&rat_i(f), m as i64 - 1) * acc
}

/// L(1-m, chi) = -B_{m,chi}/m for m >= 1.
pub fn dirichlet_l_nonpos(m: u32, chi: Character) -> Result<Rat> {
    if m == 0 {
        return err("dirichlet_l_nonpos wants m >= 1");
    }
    if m == 1 && chi == Character::Trivial {
        return err("zeta has a pole at s = 1... and s = 0 needs m >= 2 handling");
    }
    Ok(-gen_bernoulli(m, chi) / rat_i(m as i64))
}

/// L(m, chi) at a positive integer m of matching parity, as an exact
/// rational times powers of pi and sqrt(D) (via the functional equation).
pub fn dirichlet_l_pos(m: i64, chi: Character) -> Result<ScaledRat> {
    if m < 1 {
        return err("dirichlet_l_pos wants m >= 1");
    }
    match chi {
        Character::Trivial => {
            // zeta(m) for even m >= 2
            if m % 2 != 0 {
                return err(format!("zeta({m}) at odd argument is not elementary"));
            }
            let bm = bernoulli(m as u32);
            let sign = if (m / 2) % 2 == 0 { -1 } else { 1 };
            // zeta(m) = (-1)^{m/2+1} B_m (2pi)^m / (2 m!)
            let r = rat_i(sign) * bm * pow_rat(&rat_i(2), m - 1)
                / Rat::from_integer(crate::arith::factorial(m as u64));
            Ok(ScaledRat::new(r, 2 * m, 0, 1))
        }
        Character::Chi(d) => {
            // odd character, m odd:
            // L(m,chi) = (D/pi)^{(1-2m)/2} * Gamma((2-m)/2)/Gamma((m+1)/2) * L(1-m,chi)
            if m % 2 != 1 {
                return err(format!("L({m}, chi_-{d}) at even argument is not elementary"));
            }
            let l_neg = if m == 1 {
                -gen_bernoulli(1, chi)
            } else {
                dirichlet_l_nonpos(m as u32, chi)?
            };
            let g_num = gamma_rat_half(2 - m)?; // Gamma((2-m)/2), half-integer
            let g_den = gamma_rat_half(m + 1)?; // Gamma((m+1)/2), integer
            // (D/pi)^{(1-2m)/2} = D^{1/2} D^{-m} pi^{(2m-1)/2}
            let d_pow = ScaledRat::new(pow_rat(&rat_i(d), -m), 2 * m - 1, 1, d);
            let ratio = g_num.div(&g_den)?;
            d_pow.mul(&ratio).map(|s| s.scale(&l_neg))
        }
    }
}

/// L_F-product: prod_{i=0}^{m-1} L(1-mu+i, chi^i), chi = chi_{-D}.
pub fn lf_product(m: i64, mu: i64, k: &QuadField) -> Result<Rat> {
    if m < 0 {
        return err("lf_product wants m >= 0");
    }
    if m > 0 && mu <= m {
        return err(format!(
            "lf_product({m},{mu}) would need an L-value at a non-negative argument"
        ));
    }
    let chi = Character::Chi(k.d);
    let mut acc = Rat::one();
    for i in 0..m {
        // argument 1 - mu + i = 1 - (mu - i)
        acc *= dirichlet_l_nonpos((mu - i) as u32, chi.power(i))?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// O_K-module echelon (Hermite-style) over the Euclidean ring.
// ---------------------------------------------------------------------------

/// Echelon basis of the O_K-span of the given row vectors; returns (basis
/// rows, rank). Elimination uses the Euclidean algorithm on leading entries.
pub fn hnf_basis(k: &QuadField, vectors: &[Vec<QuadInt>]) -> (Vec<Vec<QuadInt>>, usize) {
    if vectors.is_empty() {
        return (vec![], 0);
    }
    let ncols = vectors[0].len();
    let mut rows: Vec<Vec<QuadInt>> = vectors.to_vec();
    let mut basis: Vec<Vec<QuadInt>> = Vec::new();
    let mut col = 0;
    while col < ncols && !rows.is_empty() {
        // reduce all rows so at most one has a nonzero entry in `col`
        loop {
            // find two rows with nonzero col entry; replace by gcd combination
            let nz: Vec<usize> = (0..rows.len())
                .filter(|&i| !rows[i][col].is_zero())
                .collect();
            if nz.len() <= 1 {
                break;
            }
            // pick the one with smallest norm as pivot
            let &piv = nz
                .iter()
                .min_by_key(|&&i| k.norm(&rows[i][col]))
                .unwrap();
            let mut progressed = false;
            for &i in &nz {
                if i == piv {
                    continue;
                }
                let q = k.div_round(&rows[i][col], &rows[piv][col]);
                if !q.is_zero() {
                    for c in 0..ncols {
                        let t = k.mul(&q, &rows[piv][c]);
                        rows[i][c] = rows[i][c].sub(&t);
                    }
                    progressed = true;
                } else {
                    // remainder step impossible: swap roles by subtracting once
                    for c in 0..ncols {
                        let t = rows[piv][c].clone();
                        rows[i][c] = rows[i][c].sub(&t);
                    }
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        if let Some(i) = (0..rows.len()).find(|&i| !rows[i][col].is_zero()) {
            basis.push(rows.remove(i));
        }
        col += 1;
    }
    let rank = basis.len();
    (basis, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_basics() {
        assert!(QuadField::new(5).is_err());
        let k = QuadField::new(3).unwrap();
        assert_eq!(k.splitting_type(3), Splitting::Ramified);
        assert_eq!(k.splitting_type(2), Splitting::Inert);
        assert_eq!(k.splitting_type(7), Splitting::Split);
        assert_eq!(k.splitting_type(5), Splitting::Inert);
        // sqrt(-3)^2 = -3
        let s = k.sqrt_minus_d();
        let s2 = k.mul(&s, &s);
        assert_eq!(s2, QuadInt::from_i64(-3, 0));
        assert_eq!(k.units().len(), 6);
        // norm multiplicativity
        let x = QuadInt::from_i64(3, -2);
        let y = QuadInt::from_i64(-1, 5);
        assert_eq!(k.norm(&k.mul(&x, &y)), k.norm(&x) * k.norm(&y));
        // trace(x + conj(x)) = 2 trace-real-part
        let t = k.trace(&x);
        assert_eq!(x.add(&k.conj(&x)), QuadInt::new(t.clone(), BigInt::zero()));
    }

    #[test]
    fn chi_multiplicative_periodic() {
        for d in SUPPORTED_D {
            let k = QuadField::new(d).unwrap();
            for a in 1i64..60 {
                for b in 1i64..20 {
                    assert_eq!(
                        k.chi_i64(a * b),
                        k.chi_i64(a) * k.chi_i64(b),
                        "chi_-{d} not multiplicative at {a},{b}"
                    );
                }
                assert_eq!(k.chi_i64(a), k.chi_i64(a + d), "chi_-{d} not periodic");
            }
        }
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(6), rat(1, 42));
        assert_eq!(bernoulli(8), rat(-1, 30));
        assert_eq!(bernoulli(12), rat(-691, 2730));
        let chi3 = Character::Chi(3);
        assert_eq!(gen_bernoulli(5, chi3), rat(-10, 3));
        // parity vanishing: odd chi, even m
        assert_eq!(gen_bernoulli(4, chi3), Rat::zero());
        assert_eq!(gen_bernoulli(2, Character::Chi(4)), Rat::zero());
    }

    #[test]
    fn l_nonpos_values() {
        assert_eq!(
            dirichlet_l_nonpos(6, Character::Trivial).unwrap(),
            rat(-1, 252)
        ); // zeta(-5)
        assert_eq!(
            dirichlet_l_nonpos(8, Character::Trivial).unwrap(),
            rat(1, 240)
        ); // zeta(-7)
        assert_eq!(
            dirichlet_l_nonpos(5, Character::Chi(3)).unwrap(),
            rat(2, 3)
        ); // L(-4, chi_-3)
    }

    #[test]
    fn lf_products() {
        let k = QuadField::new(3).unwrap();
        let a = lf_product(4, 8, &k).unwrap();
        let b = lf_product(2, 8, &k).unwrap();
        assert_eq!(a / b, rat(-1, 378));
        assert_eq!(lf_product(0, 8, &k).unwrap(), Rat::one());
        assert_eq!(
            lf_product(1, 12, &k).unwrap(),
            dirichlet_l_nonpos(12, Character::Trivial).unwrap()
        );
        assert!(lf_product(4, 4, &k).is_err());
    }

    #[test]
    fn l_pos_values() {
        // zeta(2) = pi^2/6
        let z2 = dirichlet_l_pos(2, Character::Trivial).unwrap();
        assert_eq!(z2.r, rat(1, 6));
        assert_eq!(z2.pi_half, 4);
        // L(1, chi_-3) = pi/(3 sqrt 3) = (1/9) pi sqrt(3)
        let l1 = dirichlet_l_pos(1, Character::Chi(3)).unwrap();
        assert_eq!(l1.r, rat(1, 9));
        assert_eq!(l1.pi_half, 2);
        assert_eq!(l1.sqrtd_pow, 1);
        assert!(dirichlet_l_pos(3, Character::Trivial).is_err());
        assert!(dirichlet_l_pos(2, Character::Chi(3)).is_err());
    }

    #[test]
    fn l_values_p_integral_above_weight() {
        // for p > m+1 (p not dividing D): v_p(L(1-m, chi)) >= 0
        let primes: Vec<u64> = (2..=100).filter(|&n| (2..n).all(|d| n % d != 0)).collect();
        for d in [1i64, 3, 4, 7, 8, 11] {
            let chi = if d == 1 {
                Character::Trivial
            } else {
                Character::Chi(d)
            };
            for m in 1..=30u32 {
                if chi == Character::Trivial && m == 1 {
                    continue;
                }
                let l = dirichlet_l_nonpos(m, chi).unwrap();
                if l.is_zero() {
                    continue;
                }
                for &p in &primes {
                    if p as i64 > m as i64 + 1 && d % (p as i64) != 0 {
                        let v = crate::arith::valuation_rat(&l, p).unwrap();
                        assert!(
                            v >= 0,
                            "v_{p}(L(1-{m}, chi_-{d})) = {v} < 0"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hnf_examples() {
        let k = QuadField::new(3).unwrap();
        let e1 = vec![QuadInt::one(), QuadInt::zero()];
        let e2 = vec![QuadInt::zero(), QuadInt::one()];
        let (b, r) = hnf_basis(&k, &[e1.clone(), e2.clone()]);
        assert_eq!(r, 2);
        assert_eq!(b.len(), 2);
        // {(1,1),(w,w)} -> rank 1, generator a unit multiple of (1,1)
        let w = QuadInt::from_i64(0, 1);
        let v1 = vec![QuadInt::one(), QuadInt::one()];
        let v2 = vec![w.clone(), w.clone()];
        let (b, r) = hnf_basis(&k, &[v1, v2]);
        assert_eq!(r, 1);
        assert_eq!(b[0][0], b[0][1]);
        assert_eq!(k.norm(&b[0][0]), BigInt::one());
        // empty
        let (_, r) = hnf_basis(&k, &[]);
        assert_eq!(r, 0);
    }

    #[test]
    fn quadint_parse_roundtrip() {
        for (a, b) in [(0i64, 0i64), (3, -2), (-7, 1), (5, 0)] {
            let q = QuadInt::from_i64(a, b);
            assert_eq!(QuadInt::parse(&q.to_str()).unwrap(), q);
        }
    }
}
