//! Numerical-then-exact evaluation of the critical L-value constants: central
//! Dirichlet series values of the classical eigenforms and their quadratic
//! twists (approximate functional equation with certified error bounds),
//! Petersson norms by two independent methods, and rational reconstruction of
//! the normalized standard-L packages.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arith::{err, factorial, gamma_c, rational_reconstruct, Rat, Result, ScaledRat};
use crate::bigfloat::BigFloat;
use crate::modform::{eigenform, twist, QExpansion};
use crate::quadfield::{lf_product, Character, QuadField};

/// A self-dual degree-2 L-function given by integer q-expansion coefficients,
/// motivic weight k-1, level, and sign of the functional equation
/// Lambda(s) = omega * Lambda(k - s).
#[derive(Debug, Clone)]
pub struct LDatum {
    pub coeffs: Vec<BigInt>, // a(1), a(2), ...
    pub k: u32,
    pub level: u64,
    pub omega: i64,
}

fn divisor_count(n: u64) -> u64 {
    let mut c = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            c += if d * d == n { 1 } else { 2 };
        }
        d += 1;
    }
    c
}

impl LDatum {
    fn from_qexp(f: &QExpansion, k: u32, level: u64, omega: i64) -> Result<LDatum> {
        if f.terms() < 2 {
            return err("need at least the q^1 coefficient");
        }
        let mut coeffs = Vec::with_capacity(f.terms() - 1);
        for n in 1..f.terms() {
            coeffs.push(f.coeff_int(n)?);
        }
        let datum = LDatum {
            coeffs,
            k,
            level,
            omega,
        };
        datum.check_coefficient_bound()?;
        Ok(datum)
    }

    /// A normalized level-1 eigenform of weight k; omega = (-1)^{k/2}.
    pub fn classical(f: &QExpansion, k: u32) -> Result<LDatum> {
        let omega = if (k / 2) % 2 == 0 { 1 } else { -1 };
        Self::from_qexp(f, k, 1, omega)
    }

    /// The twist of a level-1 eigenform by the odd quadratic character of
    /// conductor D: level D^2, and the sign picks up tau(chi)^2 / D with
    /// tau(chi)^2 = chi(-1) D = -D, so it flips. (Validated downstream by the
    /// functional-equation test against the plain Dirichlet series.)
    pub fn twisted(f: &QExpansion, k: u32, field: &QuadField) -> Result<LDatum> {
        let chi = Character::Chi(field.d);
        let g = twist(f, chi);
        let tau_sq = -field.d; // Gauss sum squared: chi(-1) D with chi odd
        let omega0 = if (k / 2) % 2 == 0 { 1 } else { -1 };
        let omega = omega0 * tau_sq / field.d;
        Self::from_qexp(&g, k, (field.d * field.d) as u64, omega)
    }

    /// |a(n)| <= d(n) n^{(k-1)/2}, checked exactly via a(n)^2 <= d(n)^2 n^{k-1}.
    fn check_coefficient_bound(&self) -> Result<()> {
        for (i, a) in self.coeffs.iter().enumerate() {
            let n = (i + 1) as u64;
            let d = BigInt::from(divisor_count(n));
            let bound = &d * &d * BigInt::from(n).pow(self.k - 1);
            if a * a > bound {
                return err(format!(
                    "coefficient a({n}) = {a} violates the Ramanujan bound for weight {}",
                    self.k
                ));
            }
        }
        Ok(())
    }

    /// Completed L-function Lambda(s) = N^{s/2} (2pi)^{-s} Gamma(s) L(s) at an
    /// integer point 1 <= s <= k-1, by the two-sided incomplete-gamma
    /// expansion truncated at `nterms` coefficients.
    fn lambda_truncated(&self, s: i64, nterms: usize, prec: i64) -> Result<BigFloat> {
        if s < 1 || s > self.k as i64 - 1 {
            return err(format!(
                "completed-L expansion needs an integer point in [1, {}], got {s}",
                self.k - 1
            ));
        }
        if nterms > self.coeffs.len() {
            return err(format!(
                "insufficient q-expansion: have {} coefficients, need {nterms}",
                self.coeffs.len()
            ));
        }
        let p = prec + 32;
        let sqrt_n = BigFloat::from_i64(self.level as i64).sqrt(p);
        let two_pi = BigFloat::pi(p).shl(1);
        let mut acc = BigFloat::zero(p);
        for n in 1..=nterms {
            let a = &self.coeffs[n - 1];
            if a.is_zero() {
                continue;
            }
            let an = BigFloat::from_bigint(a.clone()).with_prec(p);
            // x_n = 2 pi n / sqrt(N), q_n = sqrt(N) / (2 pi n) = 1/x_n
            let x = two_pi.mul_i64(n as i64, p).div(&sqrt_n, p);
            let q = BigFloat::from_i64(1).with_prec(p).div(&x, p);
            let t1 = q.powi(s, p).mul(&incomplete_gamma_int(s as u32, &x, p), p);
            let t2 = q
                .powi(self.k as i64 - s, p)
                .mul(&incomplete_gamma_int(self.k - s as u32, &x, p), p)
                .mul_i64(self.omega, p);
            acc = acc.add(&an.mul(&t1.add(&t2, p), p), p);
        }
        // tail bound: |a(n)| <= n^{(k+1)/2}; both incomplete gammas are
        // <= Gamma(k) e^{-x/2} for x >= 2k (log-convexity of t^{m-1} e^{-t/2}
        // past its maximum at 2(m-1) <= 2k), so once n >= k sqrt(N)/pi the
        // term is bounded by 2 n^{(k+1)/2} max(q,1)^k Gamma(k) e^{-pi n/sqrtN}
        // which we sum by a crude geometric comparison.
        let n0 = (nterms + 1) as i64;
        let min_x_ok = (self.k as i64) * 2;
        let x0 = two_pi.mul_i64(n0, p).div(&sqrt_n, p);
        if x0.to_f64() < min_x_ok as f64 {
            return err("truncation too small for a rigorous tail bound");
        }
        let ln2_tail = tail_bound_log2(self.k, self.level, n0);
        let mut out = acc.with_prec(prec);
        let e = out.err2().max(ln2_tail) + 1.0;
        out.set_err2(e);
        Ok(out)
    }

    /// Lambda(s) with an automatic truncation chosen for the requested
    /// precision, cross-checked against a strictly longer truncation.
    pub fn lambda(&self, s: i64, prec: i64) -> Result<BigFloat> {
        let target = -(prec as f64);
        let mut n = 2 * self.k as i64;
        while tail_bound_log2(self.k, self.level, n + 1) > target {
            n += 8;
            if n as usize > self.coeffs.len() {
                let need = estimate_truncation(self.k, self.level, target);
                return err(format!(
                    "insufficient q-expansion for {prec}-bit evaluation: \
                     have {}, need about {need} coefficients",
                    self.coeffs.len()
                ));
            }
        }
        let v1 = self.lambda_truncated(s, n as usize, prec)?;
        let v2 = self.lambda_truncated(s, (n + 8).min(self.coeffs.len() as i64) as usize, prec)?;
        let d = v1.sub(&v2, prec);
        if d.mag2() > v1.err2() + 4.0 {
            return err(format!(
                "truncation instability in completed-L evaluation at s = {s}"
            ));
        }
        Ok(v1)
    }

    /// L(s) = Lambda(s) (2pi)^s / (N^{s/2} Gamma(s)) at an integer critical
    /// point.
    pub fn lvalue(&self, s: i64, prec: i64) -> Result<BigFloat> {
        let p = prec + 32;
        let lam = self.lambda(s, p)?;
        let two_pi = BigFloat::pi(p).shl(1);
        let gamma = BigFloat::from_bigint(factorial((s - 1) as u64)).with_prec(p);
        let n_pow = BigFloat::from_i64(self.level as i64)
            .sqrt(p)
            .powi(s, p);
        Ok(lam
            .mul(&two_pi.powi(s, p), p)
            .div(&n_pow, p)
            .div(&gamma, p)
            .with_prec(prec))
    }

    /// Direct Dirichlet-series evaluation sum a(n) n^{-s}, with the tail
    /// bounded by the divisor-times-Ramanujan estimate. Only useful near the
    /// right edge of the strip; serves as an independent check on `lvalue`.
    pub fn dirichlet_direct(&self, s: i64, prec: i64) -> Result<BigFloat> {
        // tail: sum_{n > N} n^{(k+1)/2 - s} <= N^{(k+1)/2 - s + 1} / (s - (k+3)/2)
        let decay = s - (self.k as i64 + 1) / 2;
        if decay < 2 {
            return err("dirichlet_direct needs s comfortably past the convergence edge");
        }
        let p = prec + 32;
        let nmax = self.coeffs.len();
        let mut acc = BigFloat::zero(p);
        for n in 1..=nmax {
            let a = &self.coeffs[n - 1];
            if a.is_zero() {
                continue;
            }
            let t = BigFloat::from_bigint(a.clone())
                .with_prec(p)
                .div(&BigFloat::from_i64(n as i64).powi(s, p), p);
            acc = acc.add(&t, p);
        }
        let tail_log2 = ((nmax + 1) as f64).log2() * (1.0 - decay as f64) + 1.0;
        let e = acc.err2().max(tail_log2) + 1.0;
        acc.set_err2(e);
        Ok(acc.with_prec(prec))
    }
}

/// log2 of the tail bound for the incomplete-gamma expansion past n terms:
/// |a(n)| <= n^{(k+1)/2}, and for x = 2 pi n / sqrt(N) >= 2k both incomplete
/// gammas are <= 2 x^{k-1} e^{-x} <= 2^k Gamma(k) e^{-x/2}; the sum over the
/// tail is geometric with ratio < 1/2 (4 bits of slack absorb it).
fn tail_bound_log2(k: u32, level: u64, n: i64) -> f64 {
    let nf = n as f64;
    let sqrt_n = (level as f64).sqrt();
    let log2_gamma_k: f64 = (1..k as u64).map(|j| (j as f64).log2()).sum();
    ((k as f64) + 1.0) / 2.0 * nf.log2() + log2_gamma_k + (k as f64)
        - std::f64::consts::PI * nf / sqrt_n * std::f64::consts::LOG2_E
        + 4.0
}

fn estimate_truncation(k: u32, level: u64, target: f64) -> i64 {
    let mut n = 2 * k as i64;
    while tail_bound_log2(k, level, n) > target && n < 1 << 24 {
        n += 8;
    }
    n
}

/// Gamma(m, x) = (m-1)! e^{-x} sum_{j<m} x^j/j! for a positive integer m.
pub fn incomplete_gamma_int(m: u32, x: &BigFloat, prec: i64) -> BigFloat {
    let p = prec + 32;
    let mut term = BigFloat::from_i64(1).with_prec(p);
    let mut acc = term.clone();
    for j in 1..m as i64 {
        term = term.mul(x, p).div(&BigFloat::from_i64(j), p);
        acc = acc.add(&term, p);
    }
    let e = x.neg().exp(p);
    BigFloat::from_bigint(factorial((m - 1) as u64))
        .with_prec(p)
        .mul(&e, p)
        .mul(&acc, p)
        .with_prec(prec)
}

// ---------------------------------------------------------------------------
// Petersson norms.
// ---------------------------------------------------------------------------

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence. Each iterate is
/// treated as an exact dyadic candidate (Newton is self-correcting, so
/// letting evaluation error compound in the ledger would be both wrong and
/// self-defeating); the final node is certified by its Newton residual.
fn legendre_nodes(n: usize, prec: i64) -> Vec<(BigFloat, BigFloat)> {
    // the three-term recurrence amplifies evaluation error by about 3 bits
    // per step near the edge roots, hence the 3n extra working bits
    let p = prec + 3 * n as i64 + 64;
    let one = BigFloat::from_i64(1).with_prec(p);
    // P_n(x), P_{n-1}(x) and P_n'(x) at an exact point x
    let eval = |x: &BigFloat| {
        let (mut p0, mut p1) = (one.clone(), x.clone());
        for j in 2..=n as i64 {
            let next = x
                .mul(&p1, p)
                .mul_i64(2 * j - 1, p)
                .sub(&p0.mul_i64(j - 1, p), p)
                .div(&BigFloat::from_i64(j), p);
            p0 = p1;
            p1 = next;
        }
        let x2m1 = x.mul(x, p).sub(&one, p);
        let dp = x
            .mul(&p1, p)
            .sub(&p0, p)
            .mul_i64(n as i64, p)
            .div(&x2m1, p);
        (p1, dp, x2m1)
    };
    let mut out = Vec::with_capacity(n);
    for i in 1..=(n + 1) / 2 {
        // initial guess cos(pi (4i - 1) / (4n + 2))
        let mut x = BigFloat::cos2pi_frac((4 * i - 1) as i64, (8 * n + 4) as i64, p);
        x.set_err2(crate::bigfloat::EXACT);
        for iter in 0..200 {
            let (pn, dp, _) = eval(&x);
            let step = pn.div(&dp, p);
            x = x.sub(&step, p);
            x.set_err2(crate::bigfloat::EXACT);
            if step.mag2() < -(prec as f64) - 24.0 {
                break;
            }
            assert!(iter < 199, "Legendre Newton iteration failed to converge");
        }
        // certify: for a simple root, |x - root| <= ~|P_n(x)/P_n'(x)|
        let (pn, dp, x2m1) = eval(&x);
        let resid = pn.div(&dp, p).mag2();
        let mut xq = x;
        xq.set_err2(xq.err2().max(resid + 2.0));
        // weight 2 / ((1 - x^2) P_n'(x)^2)
        let mut wq = BigFloat::from_i64(2)
            .with_prec(p)
            .div(&x2m1.neg().mul(&dp.mul(&dp, p), p), p);
        wq.set_err2(wq.err2().max(resid + 8.0));
        out.push((xq, wq));
    }
    // roots come in +/- pairs with equal weights
    let mut full: Vec<(BigFloat, BigFloat)> = Vec::with_capacity(n);
    for (x, w) in &out {
        full.push((x.clone(), w.clone()));
        if x.mag2() > -(prec as f64) {
            full.push((x.neg(), w.clone()));
        }
    }
    full.truncate(n);
    full
}

/// Evaluate |f(x + iy)|^2 from real integer coefficients: f = sum a_n e^{2pi i n x} e^{-2pi n y}.
/// `cs` holds (cos 2pi x, sin 2pi x); r = e^{-2pi y}.
fn abs_f_squared(
    coeffs: &[BigInt],
    nterms: usize,
    cs: &(BigFloat, BigFloat),
    r: &BigFloat,
    p: i64,
) -> BigFloat {
    let (c1, s1) = cs;
    let (mut cn, mut sn) = (c1.clone(), s1.clone());
    let mut rn = r.clone();
    let mut re = BigFloat::zero(p);
    let mut im = BigFloat::zero(p);
    for n in 1..=nterms {
        let a = &coeffs[n - 1];
        if !a.is_zero() {
            let ar = BigFloat::from_bigint(a.clone()).with_prec(p).mul(&rn, p);
            re = re.add(&ar.mul(&cn, p), p);
            im = im.add(&ar.mul(&sn, p), p);
        }
        if n < nterms {
            let c_next = cn.mul(c1, p).sub(&sn.mul(s1, p), p);
            let s_next = sn.mul(c1, p).add(&cn.mul(s1, p), p);
            cn = c_next;
            sn = s_next;
            rn = rn.mul(r, p);
        }
    }
    re.mul(&re, p).add(&im.mul(&im, p), p)
}

/// Petersson norm by direct integration over the standard fundamental domain:
/// the part above y = 1 is summed in closed form (Parseval in x plus an
/// incomplete gamma in y), the corner strip below y = 1 by tensor-product
/// Gauss-Legendre quadrature with `nodes` points per axis.
pub fn petersson_method_integral(
    f: &QExpansion,
    k: u32,
    prec: i64,
    nodes: usize,
) -> Result<BigFloat> {
    let p = prec + 48;
    let four_pi = BigFloat::pi(p).shl(2);
    // strip y >= 1: sum_n a(n)^2 Gamma(k-1, 4 pi n) / (4 pi n)^{k-1}, with
    // term n bounded by 2 n^{k+1} e^{-4 pi n} (a(n)^2 <= n^{k+1} and
    // Gamma(k-1,x)/x^{k-1} <= 2 e^{-x} for x >= k)
    let strip_term_log2 =
        |n: f64| (k as f64 + 1.0) * n.log2() + 1.0 - 4.0 * std::f64::consts::PI * n * std::f64::consts::LOG2_E;
    let mut n_strip = 1i64;
    while strip_term_log2((n_strip + 1) as f64) > -(p as f64) - 8.0 {
        n_strip += 1;
    }
    if n_strip as usize >= f.terms() {
        return err("q-expansion too short for the strip sum");
    }
    let mut strip = BigFloat::zero(p);
    for n in 1..=n_strip {
        let a = f.coeff_int(n as usize)?;
        if a.is_zero() {
            continue;
        }
        let x = four_pi.mul_i64(n, p);
        let t = incomplete_gamma_int(k - 1, &x, p)
            .div(&x.powi(k as i64 - 1, p), p)
            .mul(&BigFloat::from_bigint(&a * &a).with_prec(p), p);
        strip = strip.add(&t, p);
    }
    let e = strip
        .err2()
        .max(strip_term_log2((n_strip + 1) as f64) + 2.0);
    strip.set_err2(e);
    // corner: 2 * int_0^{1/2} dx int_{sqrt(1-x^2)}^1 dy |f|^2 y^{k-2}
    // q-truncation: |tail| bounded via |a_n| <= n^{(k+1)/2}, e^{-2 pi y} <= e^{-pi sqrt(3)}
    let decay = std::f64::consts::PI * 3f64.sqrt() * std::f64::consts::LOG2_E; // ~ 7.85 bits/term
    let mut nterms = 8usize;
    while ((k as f64 + 1.0) / 2.0 + 1.0) * (nterms as f64).log2() - decay * nterms as f64
        > -(p as f64)
    {
        nterms += 4;
    }
    if nterms >= f.terms() {
        return err(format!(
            "q-expansion too short for the corner integral: need {nterms} terms"
        ));
    }
    let coeffs: Vec<BigInt> = (1..=nterms).map(|i| f.coeff_int(i)).collect::<Result<_>>()?;
    let gl = legendre_nodes(nodes, p);
    let two_pi = BigFloat::pi(p).shl(1);
    let one = BigFloat::from_i64(1).with_prec(p);
    let half = BigFloat::from_i64(1).with_prec(p).shl(-2); // 1/4: dx scale for x = (t+1)/4
    let mut corner = BigFloat::zero(p);
    for (tx, wx) in &gl {
        // x in [0, 1/2]
        let x = tx.add(&one, p).shl(-2);
        let cs = {
            let arg = two_pi.mul(&x, p);
            let (s, c) = arg.sin_cos(p);
            (c, s)
        };
        let y0 = one.sub(&x.mul(&x, p), p).sqrt(p);
        let dy = one.sub(&y0, p).shl(-1); // (1 - y0)/2
        let mut inner = BigFloat::zero(p);
        for (ty, wy) in &gl {
            // y = ((1 - y0) t + (1 + y0)) / 2
            let y = dy.mul(ty, p).add(&one.add(&y0, p).shl(-1), p);
            let r = two_pi.mul(&y, p).neg().exp(p);
            let f2 = abs_f_squared(&coeffs, nterms, &cs, &r, p);
            inner = inner.add(&wy.mul(&f2.mul(&y.powi(k as i64 - 2, p), p), p), p);
        }
        corner = corner.add(&wx.mul(&inner.mul(&dy, p), p), p);
    }
    let corner = corner.mul(&half, p).shl(1); // x-jacobian 1/4, symmetry factor 2
    Ok(strip.add(&corner, p).with_prec(prec))
}

/// Kloosterman sum S(1, 1; c) = sum_{d mod c, (d,c)=1} cos(2 pi (d + d^{-1})/c),
/// evaluated numerically (it is a real algebraic number, irrational in
/// general): residues d + d^{-1} are tallied into a histogram mod c, then
/// paired with cos(2 pi t / c) generated by one complex rotation sweep.
fn kloosterman_11(c: u64, two_pi: &BigFloat, prec: i64) -> BigFloat {
    if c == 1 {
        return BigFloat::from_i64(1).with_prec(prec);
    }
    let mut hist = vec![0i64; c as usize];
    for d in 1..c {
        if num_integer::gcd(d, c) == 1 {
            hist[((d + mod_inverse(d, c)) % c) as usize] += 1;
        }
    }
    let p = prec + 24;
    let (s1, c1) = two_pi
        .div(&BigFloat::from_i64(c as i64), p)
        .sin_cos(p);
    let mut acc = BigFloat::from_i64(hist[0]).with_prec(p);
    let (mut ct, mut st) = (c1.clone(), s1.clone());
    for (t, &h) in hist.iter().enumerate().skip(1) {
        if h != 0 {
            acc = acc.add(&ct.mul_i64(h, p), p);
        }
        if t + 1 < c as usize {
            let cn = ct.mul(&c1, p).sub(&st.mul(&s1, p), p);
            let sn = st.mul(&c1, p).add(&ct.mul(&s1, p), p);
            ct = cn;
            st = sn;
        }
    }
    acc.with_prec(prec)
}

fn mod_inverse(a: u64, m: u64) -> u64 {
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (m as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1);
    t.rem_euclid(m as i128) as u64
}

/// J_{m}(x) by the ascending series (x modest, m integer >= 1).
fn bessel_j(m: u32, x: &BigFloat, prec: i64) -> BigFloat {
    let p = prec + 32;
    let half_x = x.shl(-1);
    let x2 = half_x.mul(&half_x, p).neg(); // -(x/2)^2
    let mut term = half_x
        .powi(m as i64, p)
        .div(&BigFloat::from_bigint(factorial(m as u64)).with_prec(p), p);
    let mut acc = term.clone();
    let mut j = 1i64;
    loop {
        term = term
            .mul(&x2, p)
            .div(&BigFloat::from_i64(j * (j + m as i64)), p);
        acc = acc.add(&term, p);
        if term.mag2() < -(p as f64) {
            break;
        }
        j += 1;
        assert!(j < 100000, "Bessel series failed to converge");
    }
    acc.with_prec(prec)
}

/// Petersson norm of the unique normalized eigenform spanning a
/// one-dimensional level-1 cusp space, via the weight-k trace identity
/// Gamma(k-1) / ((4 pi)^{k-1} (f,f)) = 1 + 2 pi i^{-k} sum_c S(1,1;c) J_{k-1}(4 pi/c) / c.
pub fn petersson_method_trace(k: u32, prec: i64) -> Result<BigFloat> {
    let p = prec + 24;
    let pi = BigFloat::pi(p);
    let two_pi = pi.shl(1);
    let four_pi = pi.shl(2);
    let sign = if (k / 2) % 2 == 0 { 1i64 } else { -1 };
    let log2_fact: f64 = (1..k as u64).map(|j| (j as f64).log2()).sum();
    let mut sum = BigFloat::zero(p);
    let mut c = 1u64;
    loop {
        // term bound: |S(1,1;c)| <= c and J_{k-1}(4 pi/c) <= (2 pi/c)^{k-1}/(k-1)!
        // (alternating series with decreasing terms once c > 6), so
        // |term| <= 2 pi (2 pi / c)^{k-1} / (k-1)!
        let lc = (c as f64).log2();
        let bound = 2.66 + (k as f64 - 1.0) * (2.652 - lc) - log2_fact;
        if bound < -(prec as f64) - 8.0 && c > 16 {
            // tail decays like c^{-(k-1)}: sum_{c' > c} <= bound * c
            let e = sum.err2().max(bound + lc + 1.0);
            sum.set_err2(e);
            break;
        }
        let s = kloosterman_11(c, &two_pi, p);
        let j = bessel_j(k - 1, &four_pi.div(&BigFloat::from_i64(c as i64), p), p);
        sum = sum.add(&s.mul(&j, p).div(&BigFloat::from_i64(c as i64), p), p);
        c += 1;
        if c > 2_000_000 {
            return err("trace-formula cutoff exceeded sanity limit");
        }
    }
    let ratio = BigFloat::from_i64(1)
        .with_prec(p)
        .add(&pi.shl(1).mul_i64(sign, p).mul(&sum, p), p);
    // (f, f) = Gamma(k-1) / ((4 pi)^{k-1} ratio)
    Ok(BigFloat::from_bigint(factorial(k as u64 - 2))
        .with_prec(p)
        .div(&four_pi.powi(k as i64 - 1, p), p)
        .div(&ratio, p)
        .with_prec(prec))
}

/// Petersson norm with cross-validation: the fundamental-domain integral is
/// computed at two node counts (96 and 128) and checked against the trace
/// formula. The trace-formula comparison is capped at 30 digits (its cost
/// grows steeply with precision at low weight); disagreement is a hard error.
pub fn petersson_norm(f: &QExpansion, k: u32, digits: u32) -> Result<BigFloat> {
    let prec = ((digits as i64 + 12) * 10) / 3 + 16;
    let a1 = petersson_method_integral(f, k, prec, 96)?;
    let mut a2 = petersson_method_integral(f, k, prec, 128)?;
    check_agreement(&a1, &a2, digits as i64, "quadrature node counts")?;
    let cross = (digits as i64 - 10).min(30).max(15);
    let bprec = (cross + 5) * 10 / 3 + 8;
    let b = petersson_method_trace(k, bprec)?;
    check_agreement(&a2, &b, cross, "integral vs trace formula")?;
    // fold the observed discretization discrepancy into the certified bound
    let d = a1.sub(&a2, prec);
    let e = a2.err2().max(d.mag2() + 1.0);
    a2.set_err2(e);
    Ok(a2)
}

fn check_agreement(a: &BigFloat, b: &BigFloat, digits: i64, what: &str) -> Result<()> {
    let p = a.prec().max(b.prec());
    let rel = a.sub(b, p).div(a, p);
    let got = -rel.mag2() / std::f64::consts::LOG2_10;
    if got < digits as f64 {
        return err(format!(
            "Petersson norm cross-check failed ({what}): {:.1} digits of agreement, need {digits}",
            got
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Exact L-packages.
// ---------------------------------------------------------------------------

/// Exactly reconstructed normalized standard-L data for a rank-1 datum: the
/// normalized value
/// bbl = Gamma_C(a1) Gamma_C(a2) L(m, f) L(m, f x chi) / (sqrt(D) (f, f))
/// and the constant c = (lf_product(n, mu) / lf_product(2, mu)) * bbl.
#[derive(Debug, Clone)]
pub struct ExactLPackage {
    /// classical critical point: both L-factors are evaluated at s = m
    pub m: i64,
    /// Gamma_C arguments a1 = mu + k1 - 1, a2 = mu + l1 - 1
    pub gamma_args: (i64, i64),
    pub bbl: Rat,
    pub lf_ratio: Rat,
    pub c_value: Rat,
    pub certified_digits: i64,
}

/// Compute the exact package for the weight-kappa eigenform attached to the
/// rank-1 datum with scalar weights (k1, l1) and parallel shift mu over the
/// field K; `n_param` selects the numerator degree of the lf-product ratio.
pub fn exact_l_package(
    n_param: i64,
    mu: i64,
    kappa: u32,
    k1: i64,
    l1: i64,
    field: &QuadField,
    digits: u32,
) -> Result<ExactLPackage> {
    if mu % 2 != 0 {
        return err("parallel shift mu must be even");
    }
    if kappa as i64 != mu + k1 + l1 {
        return err("classical weight must equal mu + k1 + l1");
    }
    let s0 = mu / 2 - 1;
    let m = s0 + kappa as i64 / 2;
    let a1 = mu + k1 - 1;
    let a2 = mu + l1 - 1;
    if m < 1 || m > kappa as i64 - 1 {
        return err(format!(
            "classical point {m} is outside the critical strip of weight {kappa}"
        ));
    }
    let prec = ((digits as i64 + 16) * 10) / 3 + 32;
    // enough coefficients for both completed-L evaluations at level D^2
    // (lvalue adds guard bits internally, hence the extra margin here)
    let need = estimate_truncation(kappa, (field.d * field.d) as u64, -(prec as f64) - 64.0) + 24;
    let f = eigenform(kappa, need as usize + 1)?;
    let lf = LDatum::classical(&f, kappa)?;
    let lchi = LDatum::twisted(&f, kappa, field)?;
    let l1v = lf.lvalue(m, prec)?;
    let l2v = lchi.lvalue(m, prec)?;
    let pet = petersson_norm(&f, kappa, digits + 12)?;
    // symbolic prefactor Gamma_C(a1) Gamma_C(a2) / sqrt(D); its pi-power must
    // cancel the expected transcendental content pi^{a1+a2} sqrt(D) of
    // L(m,f) L(m, f x chi) / (f,f) -- checked via the ScaledRat ledger.
    let prefactor = ScaledRat::new(Rat::one(), 0, -1, field.d)
        .mul(&gamma_c(a1)?)?
        .mul(&gamma_c(a2)?)?;
    let expected = ScaledRat::new(Rat::one(), 2 * (a1 + a2), 1, field.d);
    let ledger = prefactor.mul(&expected)?;
    ledger.to_rat()?; // errors unless the pi and sqrt(D) exponents cancel
    let value = prefactor
        .to_bigfloat(prec)
        .mul(&l1v, prec)
        .mul(&l2v, prec)
        .div(&pet, prec);
    let certified = value.certified_decimals();
    if certified < digits as i64 {
        return err(format!(
            "only {certified} certified digits accumulated, need {digits}"
        ));
    }
    let max_den = BigInt::from(10u32).pow(((digits.saturating_sub(16)) / 2).max(8));
    let bbl = rational_reconstruct(&value, &max_den, 10)?;
    // re-verify: the reconstructed rational must sit inside the certified ball
    let residual = value.sub(&BigFloat::from_rat(&bbl, prec), prec);
    if residual.mag2() > value.err2() + 2.0 {
        return err("reconstructed rational fails re-evaluation against the float");
    }
    let lf_ratio = lf_product(n_param, mu, field)? / lf_product(2, mu, field)?;
    let c_value = &lf_ratio * &bbl;
    Ok(ExactLPackage {
        m,
        gamma_args: (a1, a2),
        bbl,
        lf_ratio,
        c_value,
        certified_digits: certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{pow_rat, rat, rat_i, valuation_rat};

    fn bf(n: i64, d: i64, prec: i64) -> BigFloat {
        BigFloat::from_rat(&rat(n, d), prec)
    }

    #[test]
    fn incomplete_gamma_values() {
        // Gamma(1, x) = e^{-x}
        let x = bf(7, 3, 200);
        let g = incomplete_gamma_int(1, &x, 200);
        let e = x.neg().exp(200);
        assert!(g.sub(&e, 200).mag2() < -180.0);
        // Gamma(3, 0) = 2
        let g3 = incomplete_gamma_int(3, &BigFloat::zero(200), 200);
        assert!(g3.sub(&BigFloat::from_i64(2).with_prec(200), 200).mag2() < -180.0);
    }

    #[test]
    fn lvalue_matches_dirichlet_series() {
        let f = eigenform(12, 400).unwrap();
        let l = LDatum::classical(&f, 12).unwrap();
        let a = l.lvalue(11, 120).unwrap();
        let b = l.dirichlet_direct(11, 120).unwrap();
        let d = a.sub(&b, 120);
        assert!(
            d.mag2() < d.err2() + 2.0 && d.mag2() < -28.0,
            "weight 12 edge value mismatch: 2^{}",
            d.mag2()
        );
        let f22 = eigenform(22, 400).unwrap();
        let l22 = LDatum::classical(&f22, 22).unwrap();
        let a = l22.lvalue(21, 120).unwrap();
        let b = l22.dirichlet_direct(21, 120).unwrap();
        assert!(a.sub(&b, 120).mag2() < -60.0);
        // twisted datum, right edge
        let field = QuadField::new(3).unwrap();
        let lt = LDatum::twisted(&f22, 22, &field).unwrap();
        let a = lt.lvalue(21, 120).unwrap();
        let b = lt.dirichlet_direct(21, 120).unwrap();
        assert!(a.sub(&b, 120).mag2() < -60.0);
    }

    #[test]
    fn functional_equation_from_direct_series() {
        // Lambda(k - s) = omega Lambda(s), with the right edge evaluated by
        // the plain Dirichlet series -- an oracle independent of the
        // incomplete-gamma expansion.
        for (k, digits) in [(12u32, -25.0f64), (22, -55.0)] {
            let f = eigenform(k, 400).unwrap();
            let l = LDatum::classical(&f, k).unwrap();
            let prec = 200;
            let edge = k as i64 - 1;
            let direct = l.dirichlet_direct(edge, prec).unwrap();
            let two_pi = BigFloat::pi(prec).shl(1);
            let lam_edge_direct = direct
                .mul(&BigFloat::from_bigint(factorial(edge as u64 - 1)).with_prec(prec), prec)
                .div(&two_pi.powi(edge, prec), prec);
            let lam_left = l.lambda(1, prec).unwrap();
            let d = lam_edge_direct.sub(&lam_left.mul_i64(l.omega, prec), prec);
            assert!(
                d.mag2() < digits,
                "functional equation violated at weight {k}: 2^{}",
                d.mag2()
            );
        }
        // same oracle for the twisted data (this pins the twisted sign)
        let field = QuadField::new(3).unwrap();
        for (k, digits) in [(12u32, -25.0f64), (22, -55.0)] {
            let f = eigenform(k, 400).unwrap();
            let l = LDatum::twisted(&f, k, &field).unwrap();
            let prec = 200;
            let edge = k as i64 - 1;
            let direct = l.dirichlet_direct(edge, prec).unwrap();
            let two_pi = BigFloat::pi(prec).shl(1);
            let lam_edge_direct = direct
                .mul(&BigFloat::from_bigint(factorial(edge as u64 - 1)).with_prec(prec), prec)
                .mul(&BigFloat::from_i64(3).powi(edge, prec), prec)
                .div(&two_pi.powi(edge, prec), prec);
            let lam_left = l.lambda(1, prec).unwrap();
            let d = lam_edge_direct.sub(&lam_left.mul_i64(l.omega, prec), prec);
            let rel = d.div(&lam_edge_direct, prec);
            assert!(
                rel.mag2() < digits,
                "twisted functional equation violated at weight {k}: 2^{}",
                rel.mag2()
            );
        }
    }

    #[test]
    fn root_numbers() {
        let field = QuadField::new(3).unwrap();
        let f12 = eigenform(12, 10).unwrap();
        let f22 = eigenform(22, 10).unwrap();
        assert_eq!(LDatum::classical(&f12, 12).unwrap().omega, 1);
        assert_eq!(LDatum::classical(&f22, 22).unwrap().omega, -1);
        assert_eq!(LDatum::twisted(&f12, 12, &field).unwrap().omega, -1);
        assert_eq!(LDatum::twisted(&f22, 22, &field).unwrap().omega, 1);
        assert_eq!(LDatum::twisted(&f12, 12, &field).unwrap().level, 9);
    }

    #[test]
    fn coefficient_bound_rejects_junk() {
        let mut f = eigenform(12, 20).unwrap();
        f.coeffs[7] = Rat::from_integer(BigInt::one() << 40);
        assert!(LDatum::classical(&f, 12).is_err());
    }

    #[test]
    fn petersson_cross_methods() {
        let f = eigenform(12, 80).unwrap();
        let v = petersson_norm(&f, 12, 40).unwrap();
        // the norm of the weight-12 form is about 1.035e-6
        let lo = bf(1, 1_000_000, 200);
        let hi = bf(11, 10_000_000, 200);
        assert!(v.cmp_center(&lo) == std::cmp::Ordering::Greater);
        assert!(v.cmp_center(&hi) == std::cmp::Ordering::Less);
        assert!(v.certified_decimals() >= 40);
    }

    #[test]
    fn exact_package_weight22() {
        let field = QuadField::new(3).unwrap();
        let pkg = exact_l_package(4, 8, 22, 7, 7, &field, 40).unwrap();
        assert_eq!(pkg.m, 14);
        assert_eq!(pkg.gamma_args, (14, 14));
        // bbl = 2^25 * 7 * 41 / (3^12 * 5 * 19)
        let want = rat_i(7 * 41) * pow_rat(&rat_i(2), 25)
            / (pow_rat(&rat_i(3), 12) * rat_i(5 * 19));
        assert_eq!(pkg.bbl, want);
        assert_eq!(pkg.lf_ratio, rat(-1, 378));
        // c = -2^24 * 41 / (3^15 * 5 * 19)
        let want_c = -rat_i(41) * pow_rat(&rat_i(2), 24)
            / (pow_rat(&rat_i(3), 15) * rat_i(5 * 19));
        assert_eq!(pkg.c_value, want_c);
        assert_eq!(valuation_rat(&pkg.c_value, 41), Some(1));
    }

    #[test]
    fn exact_package_weight12() {
        let field = QuadField::new(3).unwrap();
        let pkg = exact_l_package(6, 12, 12, 0, 0, &field, 40).unwrap();
        assert_eq!(pkg.m, 11);
        assert_eq!(pkg.gamma_args, (11, 11));
        // c = 2^19 * 7^2 * 13 * 809 / (3^15 * 691)
        let want_c = rat_i(49 * 13 * 809) * pow_rat(&rat_i(2), 19)
            / (pow_rat(&rat_i(3), 15) * rat_i(691));
        assert_eq!(pkg.c_value, want_c);
        assert_eq!(valuation_rat(&pkg.c_value, 809), Some(1));
    }
}
