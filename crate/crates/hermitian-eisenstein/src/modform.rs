//! q-expansions of classical level-1 modular forms: Eisenstein series, the
//! discriminant cusp form (built two independent ways), the six one-dimensional
//! cusp-form spaces, character twists, and Hecke-eigenvalue checks.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arith::{err, pow_rat, rat_i, Rat, Result};
use crate::quadfield::{bernoulli, Character};

/// Truncated q-expansion sum_{n=0}^{terms-1} c_n q^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QExpansion {
    pub coeffs: Vec<Rat>,
}

impl QExpansion {
    pub fn new(coeffs: Vec<Rat>) -> Self {
        QExpansion { coeffs }
    }

    pub fn zero(terms: usize) -> Self {
        QExpansion::new(vec![Rat::zero(); terms])
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, n: usize) -> Rat {
        self.coeffs.get(n).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn coeff_int(&self, n: usize) -> Result<BigInt> {
        let c = self.coeff(n);
        if c.denom().is_one() {
            Ok(c.numer().clone())
        } else {
            err(format!("coefficient of q^{n} is not an integer: {c}"))
        }
    }

    pub fn add(&self, o: &QExpansion) -> QExpansion {
        let t = self.terms().min(o.terms());
        QExpansion::new((0..t).map(|n| self.coeff(n) + o.coeff(n)).collect())
    }

    pub fn sub(&self, o: &QExpansion) -> QExpansion {
        let t = self.terms().min(o.terms());
        QExpansion::new((0..t).map(|n| self.coeff(n) - o.coeff(n)).collect())
    }

    pub fn scale(&self, c: &Rat) -> QExpansion {
        QExpansion::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn mul(&self, o: &QExpansion) -> QExpansion {
        let t = self.terms().min(o.terms());
        let mut out = vec![Rat::zero(); t];
        for (i, a) in self.coeffs.iter().take(t).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().take(t - i).enumerate() {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        QExpansion::new(out)
    }

    pub fn pow(&self, e: u32) -> QExpansion {
        let t = self.terms();
        let mut acc = QExpansion::new(
            std::iter::once(Rat::one())
                .chain(std::iter::repeat(Rat::zero()))
                .take(t)
                .collect(),
        );
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiply by q^s (shift coefficients up, keeping the truncation length).
    pub fn shift(&self, s: usize) -> QExpansion {
        let t = self.terms();
        let mut out = vec![Rat::zero(); t];
        for n in 0..t.saturating_sub(s) {
            out[n + s] = self.coeff(n);
        }
        QExpansion::new(out)
    }
}

fn sigma(k: u32, n: u64) -> BigInt {
    let mut acc = BigInt::zero();
    for d in 1..=n {
        if n % d == 0 {
            acc += BigInt::from(d).pow(k);
        }
    }
    acc
}

/// Normalized Eisenstein series E_k = 1 - (2k/B_k) sum sigma_{k-1}(n) q^n.
pub fn eisenstein_qexp(k: u32, terms: usize) -> Result<QExpansion> {
    if k < 4 || k % 2 != 0 {
        return err(format!("no level-1 Eisenstein series of weight {k}"));
    }
    let factor = -rat_i(2 * k as i64) / bernoulli(k);
    let mut coeffs = Vec::with_capacity(terms);
    coeffs.push(Rat::one());
    for n in 1..terms as u64 {
        coeffs.push(&factor * Rat::from_integer(sigma(k - 1, n)));
    }
    Ok(QExpansion::new(coeffs))
}

/// Discriminant form from the Eisenstein ring: (E4^3 - E6^2)/1728.
pub fn delta_from_eisenstein(terms: usize) -> QExpansion {
    let e4 = eisenstein_qexp(4, terms).unwrap();
    let e6 = eisenstein_qexp(6, terms).unwrap();
    e4.pow(3).sub(&e6.pow(2)).scale(&rat(1, 1728))
}

fn rat(n: i64, d: i64) -> Rat {
    crate::arith::rat(n, d)
}

/// Discriminant form as the 24th power of the Euler product:
/// q prod (1-q^n)^24, with prod (1-q^n) expanded by pentagonal numbers.
pub fn delta_from_eta(terms: usize) -> QExpansion {
    let mut euler = vec![Rat::zero(); terms];
    if terms > 0 {
        euler[0] = Rat::one();
    }
    // sum_{j} (-1)^j q^{j(3j-1)/2} over all integers j
    let mut j: i64 = 1;
    loop {
        let mut hit = false;
        for g in [j * (3 * j - 1) / 2, j * (3 * j + 1) / 2] {
            if (g as usize) < terms {
                euler[g as usize] = if j % 2 == 0 { Rat::one() } else { -Rat::one() };
                hit = true;
            }
        }
        if !hit {
            break;
        }
        j += 1;
    }
    QExpansion::new(euler).pow(24).shift(1)
}

/// The normalized cusp eigenform in the six weights where the cusp space is
/// one-dimensional: 12, 16, 18, 20, 22, 26.
pub fn eigenform(k: u32, terms: usize) -> Result<QExpansion> {
    let delta = delta_from_eisenstein(terms);
    let f = match k {
        12 => delta,
        16 => delta.mul(&eisenstein_qexp(4, terms)?),
        18 => delta.mul(&eisenstein_qexp(6, terms)?),
        20 => delta.mul(&eisenstein_qexp(4, terms)?.pow(2)),
        22 => delta.mul(&eisenstein_qexp(4, terms)?.mul(&eisenstein_qexp(6, terms)?)),
        26 => delta.mul(
            &eisenstein_qexp(4, terms)?
                .pow(2)
                .mul(&eisenstein_qexp(6, terms)?),
        ),
        _ => return err(format!("cusp space of weight {k} is not one-dimensional")),
    };
    Ok(f)
}

/// Twist a(n) -> chi(n) a(n).
pub fn twist(f: &QExpansion, chi: Character) -> QExpansion {
    QExpansion::new(
        f.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| rat_i(chi.eval(n as i64)) * c)
            .collect(),
    )
}

/// Check the Hecke relations of a weight-k eigenform up to the truncation:
/// a(1) = 1, a(mn) = a(m)a(n) for coprime m,n, and
/// a(p^{r+1}) = a(p) a(p^r) - p^{k-1} a(p^{r-1}).
pub fn hecke_check(f: &QExpansion, k: u32) -> Result<()> {
    let t = f.terms();
    if t < 2 || f.coeff(1) != Rat::one() {
        return err("eigenform must be normalized with a(1) = 1");
    }
    for m in 2..t {
        for n in 2..t {
            if m * n >= t {
                break;
            }
            if num_integer::gcd(m, n) == 1 && f.coeff(m * n) != f.coeff(m) * f.coeff(n) {
                return err(format!("multiplicativity fails at ({m},{n})"));
            }
        }
    }
    for p in 2..t {
        if !(2..p).all(|d| p % d != 0) {
            continue;
        }
        let pk = pow_rat(&rat_i(p as i64), k as i64 - 1);
        let mut pr = p; // p^r, starting r = 1
        loop {
            let next = match pr.checked_mul(p) {
                Some(v) if v < t => v,
                _ => break,
            };
            let expect = f.coeff(p) * f.coeff(pr) - &pk * f.coeff(pr / p);
            if f.coeff(next) != expect {
                return err(format!("Hecke recursion fails at p={p}, p^r={pr}"));
            }
            pr = next;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eisenstein_first_coeffs() {
        let e4 = eisenstein_qexp(4, 5).unwrap();
        assert_eq!(e4.coeff(0), Rat::one());
        assert_eq!(e4.coeff(1), rat_i(240));
        assert_eq!(e4.coeff(2), rat_i(2160));
        let e6 = eisenstein_qexp(6, 3).unwrap();
        assert_eq!(e6.coeff(1), rat_i(-504));
        let e12 = eisenstein_qexp(12, 2).unwrap();
        assert_eq!(e12.coeff(1), rat(65520, 691));
        assert!(eisenstein_qexp(2, 5).is_err());
    }

    #[test]
    fn delta_two_ways_agree() {
        let a = delta_from_eisenstein(200);
        let b = delta_from_eta(200);
        assert_eq!(a, b);
        assert_eq!(a.coeff(1), Rat::one());
        assert_eq!(a.coeff(2), rat_i(-24));
        assert_eq!(a.coeff(3), rat_i(252));
        assert_eq!(a.coeff(5), rat_i(4830));
        assert_eq!(a.coeff(12), rat_i(-370944));
    }

    #[test]
    fn eigenform_values() {
        let f22 = eigenform(22, 10).unwrap();
        assert_eq!(f22.coeff(1), Rat::one());
        assert_eq!(f22.coeff(2), rat_i(-288));
        let f12 = eigenform(12, 10).unwrap();
        assert_eq!(f12.coeff(2), rat_i(-24));
        let f16 = eigenform(16, 10).unwrap();
        assert_eq!(f16.coeff(2), rat_i(216));
        assert!(eigenform(14, 10).is_err());
    }

    #[test]
    fn hecke_relations_all_weights() {
        for k in [12u32, 16, 18, 20, 22, 26] {
            let f = eigenform(k, 120).unwrap();
            hecke_check(&f, k).unwrap_or_else(|e| panic!("weight {k}: {e:?}"));
        }
        // perturbed series must fail
        let mut bad = eigenform(12, 50).unwrap();
        bad.coeffs[6] += Rat::one();
        assert!(hecke_check(&bad, 12).is_err());
    }

    #[test]
    fn twist_values() {
        let f = eigenform(12, 10).unwrap();
        let g = twist(&f, Character::Chi(3));
        assert_eq!(g.coeff(3), Rat::zero());
        assert_eq!(g.coeff(6), Rat::zero());
        assert_eq!(g.coeff(2), -f.coeff(2));
        assert_eq!(g.coeff(7), f.coeff(7));
    }
}
