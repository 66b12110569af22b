//! Local factors F_p(X;S) of the Siegel series: degree bookkeeping, the
//! low-degree forced cases, a fixture table for D=3 at p=3, a supplemental
//! table mechanism, an exact character-sum oracle, and validators.

use std::cell::RefCell;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::arith::{err, pow_rat, rat_i, valuation_int, valuation_rat, Error, Poly, Rat, Result};
use crate::lattice::LatticeMatrix;
use crate::quadfield::{QuadField, Splitting};

const STATE_CAP: u64 = 1 << 29;
const VAL_INF: i64 = 1 << 40;

// ---------------------------------------------------------------------------
// Local class keys.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalClassKey {
    pub p: u64,
    pub splitting: Splitting,
    pub n: usize,
    /// degree of F_p: v_p of the scaled determinant
    pub d: i64,
    /// local quadratic character of det S (Hilbert-symbol datum)
    pub det_class: i64,
    /// capped elementary-divisor valuations of S over the local ring
    /// (p-adic for inert/split, uniformizer-adic for ramified)
    pub profile: Vec<i64>,
}

impl std::fmt::Display for LocalClassKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "p={} {} n={} d={} det_class={} profile={:?}",
            self.p, self.splitting, self.n, self.d, self.det_class, self.profile
        )
    }
}

/// Local quadratic character of the extension K_p / Q_p evaluated at a
/// nonzero rational, via the product formula over all other places.
fn local_char(field: &QuadField, p: u64, y: &Rat) -> Result<i64> {
    match field.splitting_type(p) {
        Splitting::Split => Ok(1),
        Splitting::Inert => {
            let v = valuation_rat(y, p).ok_or_else(|| Error("character of zero".into()))?;
            Ok(if v % 2 == 0 { 1 } else { -1 })
        }
        Splitting::Ramified => {
            let mut acc = if y.is_negative() { -1i64 } else { 1 };
            for big in [y.numer().clone(), y.denom().clone()] {
                let mut rem: i64 = big
                    .abs()
                    .try_into()
                    .map_err(|_| Error("determinant too large to factor".into()))?;
                let mut q = 2i64;
                while q * q <= rem {
                    while rem % q == 0 {
                        rem /= q;
                        if q != p as i64 {
                            acc *= field.chi_i64(q);
                        }
                    }
                    q += 1;
                }
                if rem > 1 && rem != p as i64 {
                    acc *= field.chi_i64(rem);
                }
            }
            Ok(acc)
        }
    }
}

impl LocalClassKey {
    pub fn compute(s: &LatticeMatrix, p: u64) -> Result<LocalClassKey> {
        let field = s.field;
        let det_scaled = s.det_scaled()?;
        if det_scaled.is_zero() {
            return err("local class key wants a nondegenerate matrix");
        }
        let d = valuation_int(&det_scaled, p).unwrap();
        let splitting = field.splitting_type(p);
        let det_s = Rat::from_integer(det_scaled)
            / pow_rat(&rat_i(field.d), (s.n / 2) as i64);
        let det_class = local_char(&field, p, &det_s)?;
        let profile = divisor_profile(s, p)?;
        Ok(LocalClassKey {
            p,
            splitting,
            n: s.n,
            d,
            det_class,
            profile,
        })
    }

    /// Sign in the functional equation: 1 for odd n, the det character for
    /// even n.
    pub fn xi_hat(&self) -> i64 {
        if self.n % 2 == 1 {
            1
        } else {
            self.det_class
        }
    }

    /// The Euler-factor character: +1 split, -1 inert, 0 ramified.
    pub fn xi_p(&self) -> i64 {
        match self.splitting {
            Splitting::Split => 1,
            Splitting::Inert => -1,
            Splitting::Ramified => 0,
        }
    }
}

/// Capped elementary-divisor valuations of S over the local ring at p,
/// computed from exact minor valuations.
fn divisor_profile(s: &LatticeMatrix, p: u64) -> Result<Vec<i64>> {
    let field = s.field;
    let n = s.n;
    let km = s.to_kmat();
    let splitting = field.splitting_type(p);
    // split p needs a p-adic embedding; handled on integer lifts
    if splitting == Splitting::Split {
        return split_profile(s, p);
    }
    let val = |x: &crate::quadfield::KElem| -> i64 {
        let nrm = x.norm(&field);
        match valuation_rat(&nrm, p) {
            None => VAL_INF,
            Some(v) => {
                if splitting == Splitting::Inert {
                    v / 2
                } else {
                    v
                }
            }
        }
    };
    let mut d_prev = 0i64;
    let mut profile = Vec::with_capacity(n);
    for k in 1..=n {
        let mut best = VAL_INF;
        for rows in subsets(n, k) {
            for cols in subsets(n, k) {
                let sub: crate::lattice::KMat = rows
                    .iter()
                    .map(|&i| cols.iter().map(|&j| km[i][j].clone()).collect())
                    .collect();
                let det = crate::lattice::k_mat_det(&sub, &field);
                let v = val(&det);
                if v < best {
                    best = v;
                }
            }
        }
        let e = if best >= VAL_INF { VAL_INF } else { best - d_prev };
        profile.push(e.min(VAL_INF));
        d_prev = best;
    }
    Ok(profile)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|&i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Root of x^2 - t x + n_omega mod p^prec (image of w under one embedding
/// K -> Q_p at a split prime), by scan + Hensel lifting.
fn omega_image(field: &QuadField, p: i64, prec: u32) -> Result<i64> {
    let t = field.omega_trace;
    let nn = field.omega_norm;
    let f = |x: i128, m: i128| -> i128 { (x * x - t as i128 * x + nn as i128).rem_euclid(m) };
    let mut root: i128 = (0..p as i128)
        .find(|&x| f(x, p as i128) == 0)
        .ok_or_else(|| Error(format!("p={p} is not split: no residue root")))?;
    let mut m: i128 = p as i128;
    while m < (p as i128).pow(prec) {
        m *= p as i128;
        // f(root + c*m/p) = f(root) + c*(m/p)*f'(root) mod m
        let deriv = (2 * root - t as i128).rem_euclid(m);
        let inv = mod_inv_i128(deriv, m)
            .ok_or_else(|| Error("non-unit derivative in Hensel lift".into()))?;
        let c = (-f(root, m)).rem_euclid(m) / (m / p as i128);
        let step = (c * inv).rem_euclid(p as i128);
        root = (root + step * (m / p as i128)).rem_euclid(m);
        debug_assert_eq!(f(root, m), 0);
    }
    Ok(root as i64)
}

fn mod_inv_i128(a: i128, m: i128) -> Option<i128> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r == 1 {
        Some(old_s.rem_euclid(m))
    } else {
        None
    }
}

/// Elementary-divisor profile at a split prime from a lifted integer matrix.
fn split_profile(s: &LatticeMatrix, p: u64) -> Result<Vec<i64>> {
    let n = s.n;
    // cap: total det valuation + 2 is plenty to see every divisor
    let d = valuation_int(&s.det_scaled()?, p).unwrap();
    let prec = (d + 2) as u32;
    let m = (p as i128).pow(prec);
    let lift = split_embed(s, p, prec)?;
    let val = |x: i128| -> i64 {
        if x.rem_euclid(m) == 0 {
            prec as i64
        } else {
            let mut v = 0;
            let mut y = x.rem_euclid(m);
            while y % p as i128 == 0 {
                y /= p as i128;
                v += 1;
            }
            v
        }
    };
    let mut d_prev = 0i64;
    let mut profile = Vec::with_capacity(n);
    for k in 1..=n {
        let mut best = prec as i64;
        for rows in subsets(n, k) {
            for cols in subsets(n, k) {
                let sub: Vec<Vec<i128>> = rows
                    .iter()
                    .map(|&i| cols.iter().map(|&j| lift[i][j]).collect())
                    .collect();
                best = best.min(val(int_det(&sub).rem_euclid(m)));
            }
        }
        let e = if best >= prec as i64 {
            VAL_INF
        } else {
            best - d_prev
        };
        profile.push(e);
        d_prev = best;
    }
    Ok(profile)
}

fn int_det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = 0i128;
    for j in 0..n {
        let minor: Vec<Vec<i128>> = (1..n)
            .map(|i| (0..n).filter(|&c| c != j).map(|c| m[i][c]).collect())
            .collect();
        let term = m[0][j] * int_det(&minor);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Entry-wise image of S in M_n(Z/p^prec) at a split prime.
fn split_embed(s: &LatticeMatrix, p: u64, prec: u32) -> Result<Vec<Vec<i128>>> {
    let field = s.field;
    let n = s.n;
    let m = (p as i128).pow(prec);
    let wim = omega_image(&field, p as i64, prec)? as i128;
    let r = (2 * wim - field.omega_trace as i128).rem_euclid(m); // sqrt(-D) image
    let rinv = mod_inv_i128(r, m).ok_or_else(|| Error("sqrt(-D) not a unit".into()))?;
    let mut out = vec![vec![0i128; n]; n];
    for i in 0..n {
        let di: i64 = (&s.diag[i])
            .try_into()
            .map_err(|_| Error("matrix entry too large".into()))?;
        out[i][i] = (di as i128).rem_euclid(m);
        for j in i + 1..n {
            let num = s.off_num(i, j);
            let (a, b): (i64, i64) = (
                (&num.a)
                    .try_into()
                    .map_err(|_| Error("matrix entry too large".into()))?,
                (&num.b)
                    .try_into()
                    .map_err(|_| Error("matrix entry too large".into()))?,
            );
            // entry (i,j) = (a + b w)/sqrt(-D)
            out[i][j] = ((a as i128 + b as i128 * wim) * rinv).rem_euclid(m);
            // entry (j,i) = (a + b conj(w)) / (-sqrt(-D))
            let wbar = (field.omega_trace as i128 - wim).rem_euclid(m);
            out[j][i] = ((a as i128 + b as i128 * wbar) * (m - rinv)).rem_euclid(m);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Forced cases and validators.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Forced,
    Fixture,
    Supplemental,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct SiegelPoly {
    pub key: LocalClassKey,
    pub poly: Poly,
    pub provenance: Provenance,
}

pub fn fp_degree(s: &LatticeMatrix, p: u64) -> Result<i64> {
    let det = s.det_scaled()?;
    if det.is_zero() {
        return err("fp_degree wants a nondegenerate matrix");
    }
    Ok(valuation_int(&det, p).unwrap())
}

/// Degrees 0 and 1 are pinned by the functional equation alone.
pub fn fp_forced(key: &LocalClassKey) -> Option<Poly> {
    match key.d {
        0 => Some(Poly::new(vec![Rat::one()])),
        1 => {
            let c1 = rat_i(key.xi_hat()) * pow_rat(&rat_i(key.p as i64), key.n as i64);
            Some(Poly::new(vec![Rat::one(), c1]))
        }
        _ => None,
    }
}

/// Coefficient symmetry c_{d-i} = xi_hat * p^{nd-2ni} * c_i.
pub fn fe_validate(poly: &Poly, key: &LocalClassKey) -> bool {
    let d = key.d;
    if poly.degree() != Some(d as usize) {
        return false;
    }
    let p = rat_i(key.p as i64);
    let n = key.n as i64;
    for i in 0..=d {
        let lhs = poly.coeff((d - i) as usize);
        let rhs = rat_i(key.xi_hat()) * pow_rat(&p, n * d - 2 * n * i) * poly.coeff(i as usize);
        if lhs != rhs {
            return false;
        }
    }
    true
}

/// p^{n i} divides c_i (so F_p(p^{-n}X) has integer coefficients).
pub fn integrality_validate(poly: &Poly, key: &LocalClassKey) -> bool {
    for (i, c) in poly.0.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        if !c.denom().is_one() {
            return false;
        }
        match valuation_rat(c, key.p) {
            Some(v) if v >= key.n as i64 * i as i64 => {}
            _ => return false,
        }
    }
    !poly.0.is_empty() && poly.coeff(0) == Rat::one()
}

// ---------------------------------------------------------------------------
// Character-sum oracle.
// ---------------------------------------------------------------------------

const MAXN: usize = 3;
type Q = (i128, i128);

fn qmul(x: Q, y: Q, t: i128, nn: i128) -> Q {
    (
        x.0 * y.0 - nn * x.1 * y.1,
        x.0 * y.1 + x.1 * y.0 + t * x.1 * y.1,
    )
}

fn qdet(mat: &[[Q; MAXN]; MAXN], rows: &[usize], cols: &[usize], t: i128, nn: i128) -> Q {
    if rows.len() == 1 {
        return mat[rows[0]][cols[0]];
    }
    let mut acc = (0i128, 0i128);
    for (jj, &c) in cols.iter().enumerate() {
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = qmul(
            mat[rows[0]][c],
            qdet(mat, &rows[1..], &sub_cols, t, nn),
            t,
            nn,
        );
        if jj % 2 == 0 {
            acc.0 += term.0;
            acc.1 += term.1;
        } else {
            acc.0 -= term.0;
            acc.1 -= term.1;
        }
    }
    acc
}

/// Minimum valuation over k x k minors, for k = 1..n; then successive
/// differences give the (capped) elementary divisor valuations.
fn divisor_vals<F>(mat: &[[Q; MAXN]; MAXN], n: usize, t: i128, nn: i128, val: F) -> [i64; MAXN]
where
    F: Fn(Q) -> i64,
{
    let mut e = [0i64; MAXN];
    let mut d_prev = 0i64;
    for k in 1..=n {
        let mut best = VAL_INF;
        for rmask in 0u32..(1 << n) {
            if rmask.count_ones() as usize != k {
                continue;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| rmask & (1 << i) != 0).collect();
            for cmask in 0u32..(1 << n) {
                if cmask.count_ones() as usize != k {
                    continue;
                }
                let cols: Vec<usize> = (0..n).filter(|&i| cmask & (1 << i) != 0).collect();
                let v = val(qdet(mat, &rows, &cols, t, nn));
                if v < best {
                    best = v;
                }
            }
        }
        e[k - 1] = if best >= VAL_INF {
            VAL_INF
        } else {
            best - d_prev
        };
        d_prev = best;
    }
    e
}

fn vp_i128(mut x: i128, p: i128) -> i64 {
    if x == 0 {
        return VAL_INF;
    }
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

struct SmallHermitian {
    diag: Vec<i64>,
    /// numerators over sqrt(-D) for i < j, row-major
    off: Vec<(i64, i64)>,
}

fn small_entries(s: &LatticeMatrix) -> Result<SmallHermitian> {
    let n = s.n;
    let mut diag = Vec::with_capacity(n);
    for d in &s.diag {
        diag.push(
            d.try_into()
                .map_err(|_| Error("matrix entry too large for the oracle".into()))?,
        );
    }
    let mut off = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let q = s.off_num(i, j);
            off.push((
                (&q.a)
                    .try_into()
                    .map_err(|_| Error("matrix entry too large for the oracle".into()))?,
                (&q.b)
                    .try_into()
                    .map_err(|_| Error("matrix entry too large for the oracle".into()))?,
            ));
        }
    }
    Ok(SmallHermitian { diag, off })
}

/// Shared enumeration driver: odometer over `radices`, partitioned across
/// workers by the leading coordinate; per-state results merged by addition.
fn enumerate_counts<F>(radices: &[u64], wmax: usize, charmod: usize, eval: F) -> Vec<Vec<u64>>
where
    F: Fn(&[u64]) -> Option<(usize, usize)> + Sync,
{
    let zero = || vec![vec![0u64; charmod]; wmax + 1];
    (0..radices[0])
        .into_par_iter()
        .map(|first| {
            let mut counts = zero();
            let mut state = vec![0u64; radices.len()];
            state[0] = first;
            'outer: loop {
                if let Some((w, k)) = eval(&state) {
                    counts[w][k] += 1;
                }
                let mut pos = radices.len() - 1;
                loop {
                    if pos == 0 {
                        break 'outer;
                    }
                    state[pos] += 1;
                    if state[pos] < radices[pos] {
                        break;
                    }
                    state[pos] = 0;
                    pos -= 1;
                }
            }
            counts
        })
        .reduce(zero, |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(&b) {
                for (xa, xb) in ra.iter_mut().zip(rb) {
                    *xa += xb;
                }
            }
            a
        })
}

/// Extract the integer value of a sum of p^level-th roots of unity from the
/// exponent histogram; errors if the sum is irrational.
fn root_sum_value(hist: &[u64], p: u64, level: u32) -> Result<BigInt> {
    let q = (p as usize).pow(level - 1);
    let top = (p as usize - 1) * q;
    for a in 0..q {
        for b in 0..p as usize - 1 {
            if a == 0 && b == 0 {
                continue;
            }
            if hist[a + b * q] != hist[a + top] {
                return err("character sum failed the rationality check");
            }
        }
    }
    Ok(BigInt::from(hist[0] as i128 - hist[top] as i128))
}

fn state_count(radices: &[u64]) -> Option<u64> {
    radices.iter().try_fold(1u64, |acc, &r| {
        let v = acc.checked_mul(r)?;
        if v > STATE_CAP {
            None
        } else {
            Some(v)
        }
    })
}

/// Exact local Siegel series polynomial via character sums over Hermitian
/// matrices with bounded denominators, divided by the explicit Euler factors.
/// `j_level` counts powers of the local uniformizer.
pub fn fp_oracle(s: &LatticeMatrix, p: u64, j_level: u32) -> Result<Poly> {
    let key = LocalClassKey::compute(s, p)?;
    let n = s.n;
    if n > MAXN {
        return err(format!(
            "oracle supports matrices up to {MAXN}x{MAXN}, got {n}x{n}"
        ));
    }
    if j_level == 0 {
        return err("oracle level must be at least 1");
    }
    let sh = small_entries(s)?;
    let field = s.field;
    let t = field.omega_trace as i128;
    let nn = field.omega_norm as i128;
    let j = j_level as i64;

    let (w_exact, counts, charmod_level): (usize, Vec<Vec<u64>>, u32) = match key.splitting {
        Splitting::Inert => {
            let m = (p as i64).pow(j_level);
            let mut radices = vec![m as u64; n];
            radices.extend(std::iter::repeat(m as u64).take(2 * (n * (n - 1) / 2)));
            if state_count(&radices).is_none() {
                return err(format!(
                    "oracle state space p^{} exceeds the feasibility cap",
                    j_level as usize * n * n
                ));
            }
            let wmax = 2 * n * j_level as usize;
            let counts = enumerate_counts(&radices, wmax, m as usize, |state| {
                let mut mat = [[(0i128, 0i128); MAXN]; MAXN];
                let mut tr: i64 = 0;
                for i in 0..n {
                    let di = state[i] as i64;
                    mat[i][i] = (di as i128, 0);
                    tr += sh.diag[i] * di;
                }
                let mut idx = n;
                let mut oidx = 0;
                for i in 0..n {
                    for jj in i + 1..n {
                        let a = state[idx] as i64;
                        let b = state[idx + 1] as i64;
                        idx += 2;
                        mat[i][jj] = (a as i128, b as i128);
                        mat[jj][i] = (
                            (a + field.omega_trace * b).rem_euclid(m) as i128,
                            (m - b).rem_euclid(m) as i128,
                        );
                        let (sa, sb) = sh.off[oidx];
                        oidx += 1;
                        tr += sb * a - sa * b;
                    }
                }
                let k = (-tr).rem_euclid(m) as usize;
                let e = divisor_vals(&mat, n, t, nn, |q| {
                    vp_i128(q.0, p as i128).min(vp_i128(q.1, p as i128))
                });
                let w: i64 = (0..n).map(|i| 2 * (j - e[i].min(j))).sum();
                Some((w as usize, k))
            });
            (2 * j_level as usize, counts, j_level)
        }
        Splitting::Ramified => {
            let l = j_level.div_ceil(2);
            let ml = (p as i64).pow(l);
            let diag_radix = (p as i64).pow(j_level / 2);
            let diag_scale = ml / diag_radix;
            let mut radices = vec![diag_radix as u64; n];
            radices.extend(std::iter::repeat(ml as u64).take(2 * (n * (n - 1) / 2)));
            if state_count(&radices).is_none() {
                return err("oracle state space exceeds the feasibility cap".to_string());
            }
            let need_filter = j_level % 2 == 1;
            let wmax = n * j_level as usize;
            let two_l = 2 * l as i64;
            let counts = enumerate_counts(&radices, wmax, ml as usize, |state| {
                let mut mat = [[(0i128, 0i128); MAXN]; MAXN];
                let mut tr: i64 = 0;
                for i in 0..n {
                    let ci = state[i] as i64;
                    mat[i][i] = ((ci * diag_scale) as i128, 0);
                    tr += sh.diag[i] * ci * diag_scale;
                }
                let mut idx = n;
                let mut oidx = 0;
                for i in 0..n {
                    for jj in i + 1..n {
                        let a = state[idx] as i64;
                        let b = state[idx + 1] as i64;
                        idx += 2;
                        if need_filter {
                            // entry must lie in the level-J denominator lattice
                            let nrm = (a as i128 * a as i128
                                + t * a as i128 * b as i128
                                + nn * b as i128 * b as i128)
                                .rem_euclid(p as i128);
                            if nrm != 0 {
                                return None;
                            }
                        }
                        mat[i][jj] = (a as i128, b as i128);
                        mat[jj][i] = (
                            (a + field.omega_trace * b).rem_euclid(ml) as i128,
                            (ml - b).rem_euclid(ml) as i128,
                        );
                        let (sa, sb) = sh.off[oidx];
                        oidx += 1;
                        tr += sb * a - sa * b;
                    }
                }
                let k = (-tr).rem_euclid(ml) as usize;
                let e = divisor_vals(&mat, n, t, nn, |q| {
                    let nrm = q.0 * q.0 + t * q.0 * q.1 + nn * q.1 * q.1;
                    vp_i128(nrm, p as i128)
                });
                let w: i64 = (0..n).map(|i| (two_l - e[i].min(two_l)).max(0)).sum();
                Some((w as usize, k))
            });
            (j_level as usize, counts, l)
        }
        Splitting::Split => {
            let m = (p as i64).pow(j_level);
            let iota = split_embed(s, p, j_level)?;
            let radices = vec![m as u64; n * n];
            if state_count(&radices).is_none() {
                return err("oracle state space exceeds the feasibility cap".to_string());
            }
            let wmax = 2 * n * j_level as usize;
            let counts = enumerate_counts(&radices, wmax, m as usize, |state| {
                let mut mat = [[(0i128, 0i128); MAXN]; MAXN];
                let mut tr: i128 = 0;
                for i in 0..n {
                    for jj in 0..n {
                        let a = state[i * n + jj] as i128;
                        mat[i][jj] = (a, 0);
                        tr += iota[jj][i] * a;
                    }
                }
                let k = (-tr).rem_euclid(m as i128) as usize;
                let e = divisor_vals(&mat, n, 0, 0, |q| vp_i128(q.0, p as i128));
                let w: i64 = (0..n).map(|i| 2 * (j - e[i].min(j))).sum();
                Some((w as usize, k))
            });
            (2 * j_level as usize, counts, j_level)
        }
    };

    // The sum is graded by the norm of the denominator ideal: Y^w with
    // Y = p^{-s}. Coefficients with w <= w_exact are exact; the series
    // factors as E(Y^2) * F(Y^2) with the integer Euler product below,
    // and odd-weight coefficients must vanish.
    let mut b = Vec::with_capacity(w_exact + 1);
    for hist in counts.iter().take(w_exact + 1) {
        b.push(Rat::from_integer(root_sum_value(hist, p, charmod_level)?));
    }
    for (w, c) in b.iter().enumerate() {
        if w % 2 == 1 && !c.is_zero() {
            return err(format!(
                "oracle inconsistency: odd-weight coefficient at Y^{w} is {c}"
            ));
        }
    }
    let b2: Vec<Rat> = b.iter().step_by(2).cloned().collect();
    let kmax = w_exact / 2;
    let d = key.d as usize;
    if kmax < d.div_ceil(2) {
        return err(format!(
            "oracle level {j_level} too small: only {kmax} exact coefficients for degree {d}"
        ));
    }
    // Euler product in Z = Y^2: prod (1 - p^{2i-2} Z) * prod (1 - xi p^{2i-1} Z)
    let pr = rat_i(p as i64);
    let mut euler = Poly::new(vec![Rat::one()]);
    for i in 1..=(n + 1) / 2 {
        euler = euler.mul(&Poly::new(vec![Rat::one(), -pow_rat(&pr, 2 * i as i64 - 2)]));
    }
    let xi = key.xi_p();
    if xi != 0 {
        for i in 1..=n / 2 {
            euler = euler.mul(&Poly::new(vec![
                Rat::one(),
                -rat_i(xi) * pow_rat(&pr, 2 * i as i64 - 1),
            ]));
        }
    }
    // series division b2 / euler for the exact range
    let mut f = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let mut c = b2[k].clone();
        for u in 1..=k.min(euler.0.len() - 1) {
            c -= euler.coeff(u) * &f[k - u];
        }
        f.push(c);
    }
    for (k, c) in f.iter().enumerate() {
        if k > d && !c.is_zero() {
            return err(format!(
                "oracle inconsistency: quotient coefficient at X^{k} is {c}, expected 0"
            ));
        }
    }
    // The raw quotient obeys the reflection symmetry with the extra sign
    // chi_p((-1)^{n/2}); the convention used by the rest of the pipeline
    // drops that sign. The two agree on the lower-half coefficients, so
    // convert by negating the upper half where the signs differ (only at
    // ramified p with n = 2 mod 4, where chi_p(-1) = -1).
    if key.splitting == Splitting::Ramified && n % 4 == 2 {
        for (k, c) in f.iter_mut().enumerate() {
            if 2 * k == d {
                if !c.is_zero() {
                    return err(format!(
                        "oracle inconsistency: middle coefficient X^{k} is {c}, expected 0"
                    ));
                }
            } else if 2 * k > d {
                *c = -c.clone();
            }
        }
    }
    // complete the upper half by coefficient symmetry and cross-check overlap
    let xi_hat = rat_i(key.xi_hat());
    let mut coeffs = Vec::with_capacity(d + 1);
    for k in 0..=d {
        let direct = if k <= kmax { Some(f[k].clone()) } else { None };
        let mirrored = if d - k <= kmax {
            Some(&xi_hat * pow_rat(&pr, (n * d) as i64 - 2 * (n * (d - k)) as i64) * &f[d - k])
        } else {
            None
        };
        let c = match (direct, mirrored) {
            (Some(a), Some(b)) => {
                if a != b {
                    return err(format!(
                        "oracle inconsistency: coefficient X^{k} is {a} directly but {b} by symmetry"
                    ));
                }
                a
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return err(format!(
                    "oracle level {j_level} cannot determine coefficient X^{k}"
                ))
            }
        };
        coeffs.push(c);
    }
    let poly = Poly::new(coeffs);
    for c in &poly.0 {
        if !c.denom().is_one() {
            return err(format!("oracle produced a non-integral coefficient {c}"));
        }
    }
    if poly.coeff(0) != Rat::one() {
        return err("oracle constant term is not 1".to_string());
    }
    Ok(poly)
}

// ---------------------------------------------------------------------------
// Provider chain.
// ---------------------------------------------------------------------------

pub struct FpProvider {
    pub field: QuadField,
    fixtures: Vec<(LocalClassKey, Vec<i64>)>,
    supplemental: Vec<(SupplementalKey, Vec<BigInt>)>,
    pub oracle_enabled: bool,
    memo: RefCell<HashMap<(u64, LocalClassKey), Poly>>,
}

/// Coarse key used by user-supplied tables (no divisor profile).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplementalKey {
    pub p: u64,
    pub splitting: Splitting,
    pub n: usize,
    pub d: i64,
    pub det_class: i64,
}

impl FpProvider {
    pub fn new(field: QuadField) -> FpProvider {
        let fixtures = if field.d == 3 {
            builtin_fixtures()
        } else {
            vec![]
        };
        FpProvider {
            field,
            fixtures,
            supplemental: vec![],
            oracle_enabled: true,
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn load_supplemental(&mut self, json: &serde_json::Value) -> Result<usize> {
        let list = json
            .as_array()
            .ok_or_else(|| Error("supplemental table must be a JSON array".into()))?;
        let mut added = 0;
        for item in list {
            let get = |k: &str| -> Result<&serde_json::Value> {
                item.get(k)
                    .ok_or_else(|| Error(format!("supplemental entry missing \"{k}\"")))
            };
            let p = get("p")?.as_u64().ok_or_else(|| Error("bad p".into()))?;
            let splitting = match get("splitting")?.as_str() {
                Some("inert") => Splitting::Inert,
                Some("split") => Splitting::Split,
                Some("ramified") => Splitting::Ramified,
                _ => return err("splitting must be inert|split|ramified"),
            };
            let n = get("n")?.as_u64().ok_or_else(|| Error("bad n".into()))? as usize;
            let d = get("d")?.as_i64().ok_or_else(|| Error("bad d".into()))?;
            let det_class = get("det_class")?
                .as_i64()
                .ok_or_else(|| Error("bad det_class".into()))?;
            let coeffs = get("coeffs")?
                .as_array()
                .ok_or_else(|| Error("coeffs must be an array".into()))?
                .iter()
                .map(|c| {
                    if let Some(v) = c.as_i64() {
                        Ok(BigInt::from(v))
                    } else if let Some(s) = c.as_str() {
                        s.parse().map_err(|_| Error(format!("bad coefficient {s}")))
                    } else {
                        err("coefficients must be integers or strings")
                    }
                })
                .collect::<Result<Vec<BigInt>>>()?;
            if coeffs.len() != d as usize + 1 {
                return err(format!(
                    "supplemental entry for p={p} n={n} d={d} has {} coefficients, want {}",
                    coeffs.len(),
                    d + 1
                ));
            }
            self.supplemental.push((
                SupplementalKey {
                    p,
                    splitting,
                    n,
                    d,
                    det_class,
                },
                coeffs,
            ));
            added += 1;
        }
        Ok(added)
    }

    fn serve(&self, key: &LocalClassKey, poly: Poly, provenance: Provenance) -> Result<SiegelPoly> {
        if !fe_validate(&poly, key) {
            return err(format!(
                "local factor for [{key}] fails the functional-equation check: {}",
                poly.to_json()
            ));
        }
        if !integrality_validate(&poly, key) {
            return err(format!(
                "local factor for [{key}] fails the integrality check: {}",
                poly.to_json()
            ));
        }
        self.memo
            .borrow_mut()
            .insert((key.p, key.clone()), poly.clone());
        Ok(SiegelPoly {
            key: key.clone(),
            poly,
            provenance,
        })
    }

    pub fn fp(&self, s: &LatticeMatrix, p: u64) -> Result<SiegelPoly> {
        if s.field != self.field {
            return err("matrix field does not match the provider");
        }
        let key = LocalClassKey::compute(s, p)?;
        if let Some(poly) = self.memo.borrow().get(&(p, key.clone())) {
            return Ok(SiegelPoly {
                key,
                poly: poly.clone(),
                provenance: Provenance::Forced, // memo does not track origin
            });
        }
        if let Some(poly) = fp_forced(&key) {
            return self.serve(&key, poly, Provenance::Forced);
        }
        for (fk, coeffs) in &self.fixtures {
            if *fk == key {
                let poly = Poly::new(coeffs.iter().map(|&c| rat_i(c)).collect());
                return self.serve(&key, poly, Provenance::Fixture);
            }
        }
        for (sk, coeffs) in &self.supplemental {
            if sk.p == key.p
                && sk.splitting == key.splitting
                && sk.n == key.n
                && sk.d == key.d
                && sk.det_class == key.det_class
            {
                let poly = Poly::new(
                    coeffs
                        .iter()
                        .map(|c| Rat::from_integer(c.clone()))
                        .collect(),
                );
                return self.serve(&key, poly, Provenance::Supplemental);
            }
        }
        if self.oracle_enabled {
            let j = oracle_level(&key);
            match fp_oracle(s, p, j) {
                Ok(poly) => return self.serve(&key, poly, Provenance::Oracle),
                Err(Error(e)) => {
                    return err(format!("missing local datum for [{key}]: oracle failed: {e}"))
                }
            }
        }
        err(format!("missing local datum for [{key}]"))
    }

    /// F_p evaluated at X = p^{mu - 2n}.
    pub fn fp_lookup(&self, s: &LatticeMatrix, p: u64, mu: i64) -> Result<Rat> {
        if mu < s.n as i64 {
            return err("evaluation point wants mu >= n");
        }
        let f = self.fp(s, p)?;
        let x = pow_rat(&rat_i(p as i64), mu - 2 * s.n as i64);
        Ok(f.poly.eval(&x))
    }
}

/// Pick an oracle level: preferably every coefficient of F is recovered
/// directly (exact coefficients up to degree d), falling back to the level
/// where only the lower half is direct and the rest comes from the
/// coefficient symmetry.
pub fn oracle_level(key: &LocalClassKey) -> u32 {
    let d = key.d.max(0) as u32;
    let candidates: [u32; 2] = match key.splitting {
        Splitting::Ramified => [(2 * d).max(2), (d + d % 2).max(2)],
        _ => [d.max(1), d.div_ceil(2).max(1)],
    };
    for &j in &candidates {
        if oracle_feasible(key, j) {
            return j;
        }
    }
    candidates[1]
}

fn oracle_feasible(key: &LocalClassKey, j: u32) -> bool {
    if key.n > MAXN {
        return false;
    }
    let n = key.n as u32;
    let coords = match key.splitting {
        Splitting::Ramified => n * (j / 2) + n * (n - 1) * j.div_ceil(2),
        _ => n * n * j,
    };
    coords as f64 * (key.p as f64).log2() <= (STATE_CAP as f64).log2()
}

/// The five shipped local factors for D = 3, p = 3 (with their class keys).
fn builtin_fixtures() -> Vec<(LocalClassKey, Vec<i64>)> {
    let key = |n: usize, d: i64, det_class: i64, profile: Vec<i64>| LocalClassKey {
        p: 3,
        splitting: Splitting::Ramified,
        n,
        d,
        det_class,
        profile,
    };
    vec![
        (key(3, 1, 1, vec![0, 0, 0]), vec![1, 27]),
        (key(4, 2, 1, vec![0, 0, 0, 0]), vec![1, 486, 6561]),
        (key(2, 2, 1, vec![0, 2]), vec![1, 0, 81]),
        (key(3, 2, 1, vec![0, 0, 2]), vec![1, -54, 729]),
        (key(4, 3, 1, vec![0, 0, 0, 2]), vec![1, 243, 19683, 531441]),
    ]
}

/// Primes where the local factor can differ from 1: ramified primes and
/// divisors of the scaled determinant.
pub fn support_primes(s: &LatticeMatrix) -> Result<Vec<u64>> {
    let det = s.det_scaled()?;
    if det.is_zero() {
        return err("support_primes wants a nondegenerate matrix");
    }
    let mut primes: Vec<u64> = Vec::new();
    let mut push = |q: u64| {
        if !primes.contains(&q) {
            primes.push(q);
        }
    };
    let mut rem: u64 = det
        .abs()
        .try_into()
        .map_err(|_| Error("determinant too large to factor".into()))?;
    let mut q = 2u64;
    while q * q <= rem {
        if rem % q == 0 {
            push(q);
            while rem % q == 0 {
                rem /= q;
            }
        }
        q += 1;
    }
    if rem > 1 {
        push(rem);
    }
    let mut dd = s.field.d as u64;
    let mut q = 2u64;
    while q * q <= dd {
        if dd % q == 0 {
            push(q);
            while dd % q == 0 {
                dd /= q;
            }
        }
        q += 1;
    }
    if dd > 1 {
        push(dd);
    }
    primes.sort_unstable();
    Ok(primes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeMatrix;
    use crate::quadfield::QuadField;

    fn f3() -> QuadField {
        QuadField::new(3).unwrap()
    }

    fn diag(entries: &[i64]) -> LatticeMatrix {
        LatticeMatrix::from_diag(f3(), entries)
    }

    fn poly_i(cs: &[i64]) -> Poly {
        Poly::new(cs.iter().map(|&c| rat_i(c)).collect())
    }

    #[test]
    fn degree_examples() {
        assert_eq!(fp_degree(&diag(&[1, 1, 1]), 3).unwrap(), 1);
        assert_eq!(fp_degree(&diag(&[1, 1, 1, 3]), 3).unwrap(), 3);
        assert_eq!(fp_degree(&diag(&[1, 1, 1]), 5).unwrap(), 0);
    }

    #[test]
    fn forced_examples() {
        let k = LocalClassKey::compute(&diag(&[1, 1, 1]), 3).unwrap();
        assert_eq!(fp_forced(&k).unwrap(), poly_i(&[1, 27]));
        let k0 = LocalClassKey::compute(&diag(&[1, 1]), 5).unwrap();
        assert_eq!(fp_forced(&k0).unwrap(), poly_i(&[1]));
        // 3x3 inert p=2 d=1
        let k2 = LocalClassKey::compute(&diag(&[1, 1, 2]), 2).unwrap();
        assert_eq!(k2.splitting, Splitting::Inert);
        assert_eq!(fp_forced(&k2).unwrap(), poly_i(&[1, 8]));
        // d = 2: not forced
        let k3 = LocalClassKey::compute(&diag(&[1, 3]), 3).unwrap();
        assert!(fp_forced(&k3).is_none());
    }

    #[test]
    fn fixtures_validate() {
        for (key, coeffs) in builtin_fixtures() {
            let poly = Poly::new(coeffs.iter().map(|&c| rat_i(c)).collect());
            assert!(fe_validate(&poly, &key), "fixture [{key}] fails FE");
            assert!(
                integrality_validate(&poly, &key),
                "fixture [{key}] fails integrality"
            );
        }
        // fixture keys match freshly computed keys of the defining matrices
        let mats: Vec<(LatticeMatrix, Vec<i64>)> = vec![
            (diag(&[1, 1, 1]), vec![1, 27]),
            (diag(&[1, 1, 1, 1]), vec![1, 486, 6561]),
            (diag(&[1, 3]), vec![1, 0, 81]),
            (diag(&[1, 1, 3]), vec![1, -54, 729]),
            (diag(&[1, 1, 1, 3]), vec![1, 243, 19683, 531441]),
        ];
        for (m, coeffs) in mats {
            let key = LocalClassKey::compute(&m, 3).unwrap();
            let hit = builtin_fixtures().into_iter().find(|(k, _)| *k == key);
            assert_eq!(hit.unwrap().1, coeffs, "fixture key mismatch for {key}");
        }
    }

    #[test]
    fn fe_negative_case() {
        let k = LocalClassKey::compute(&diag(&[1, 1, 1]), 3).unwrap();
        assert!(!fe_validate(&poly_i(&[1, 5]), &k));
        assert!(fe_validate(&poly_i(&[1, 27]), &k));
    }

    #[test]
    fn integrality_cases() {
        let k4 = LocalClassKey {
            p: 3,
            splitting: Splitting::Ramified,
            n: 4,
            d: 2,
            det_class: 1,
            profile: vec![0, 0, 0, 0],
        };
        assert!(integrality_validate(&poly_i(&[1, 486, 6561]), &k4));
        let k1 = LocalClassKey {
            p: 2,
            splitting: Splitting::Inert,
            n: 1,
            d: 1,
            det_class: -1,
            profile: vec![1],
        };
        assert!(integrality_validate(&poly_i(&[1, 2]), &k1));
        assert!(!integrality_validate(&poly_i(&[1, 1]), &k1));
    }

    #[test]
    fn oracle_rank1_inert() {
        let s = diag(&[2]);
        let f = fp_oracle(&s, 2, 1).unwrap();
        assert_eq!(f, poly_i(&[1, 2]));
        // stabilization
        assert_eq!(fp_oracle(&s, 2, 2).unwrap(), f);
    }

    #[test]
    fn oracle_rank2_inert() {
        let s = diag(&[1, 2]);
        let key = LocalClassKey::compute(&s, 2).unwrap();
        assert_eq!(key.d, 1);
        let f = fp_oracle(&s, 2, 1).unwrap();
        assert_eq!(f, fp_forced(&key).unwrap());
        assert_eq!(fp_oracle(&s, 2, 2).unwrap(), f);
    }

    #[test]
    fn oracle_rank2_inert_d2() {
        // d = 2 is beyond the forced range; check internal consistency
        // (symmetry cross-check inside the oracle) and level stabilization
        let s = diag(&[2, 2]);
        let key = LocalClassKey::compute(&s, 2).unwrap();
        assert_eq!(key.d, 2);
        assert_eq!(key.det_class, 1);
        let f = fp_oracle(&s, 2, 2).unwrap();
        assert!(fe_validate(&f, &key), "{}", f.to_json());
        assert!(integrality_validate(&f, &key), "{}", f.to_json());
        assert_eq!(fp_oracle(&s, 2, 3).unwrap(), f);
    }

    #[test]
    fn oracle_ramified_higher_degree() {
        // regression anchors beyond the forced range, all FE- and
        // integrality-valid under the pipeline convention
        let cases: Vec<(LatticeMatrix, u32, Vec<i64>)> = vec![
            (diag(&[3, 3]), 6, vec![1, 27, 243, 729]),
            (diag(&[1, 6]), 4, vec![1, 0, -81]),
            (diag(&[1, 9]), 6, vec![1, 0, 0, 729]),
        ];
        for (s, j, want) in cases {
            let key = LocalClassKey::compute(&s, 3).unwrap();
            let f = fp_oracle(&s, 3, j).unwrap_or_else(|e| panic!("[{key}]: {e:?}"));
            assert_eq!(f, poly_i(&want), "at [{key}]");
            assert!(fe_validate(&f, &key), "[{key}]");
            assert!(integrality_validate(&f, &key), "[{key}]");
        }
    }

    #[test]
    #[ignore = "large enumeration (~3^18 states); run explicitly"]
    fn oracle_ramified_rank3_matches_fixture() {
        // the two globally non-isometric matrices sharing this local class
        let a = diag(&[1, 1, 3]);
        let b = LatticeMatrix::from_int_entries(
            f3(),
            &[vec![2, 1, 0], vec![1, 2, 0], vec![0, 0, 1]],
        )
        .unwrap();
        let want = poly_i(&[1, -54, 729]);
        for s in [a, b] {
            let key = LocalClassKey::compute(&s, 3).unwrap();
            assert_eq!((key.n, key.d), (3, 2));
            assert_eq!(fp_oracle(&s, 3, 4).unwrap(), want, "at [{key}]");
        }
    }

    #[test]
    fn oracle_ramified_matches_fixture() {
        let s = diag(&[1, 3]);
        let f = fp_oracle(&s, 3, 4).unwrap();
        assert_eq!(f, poly_i(&[1, 0, 81]));
        // partially direct level, completed by symmetry
        assert_eq!(fp_oracle(&s, 3, 3).unwrap(), f);
        // rank-2 ramified d=1
        let s1 = diag(&[1, 1]);
        let key = LocalClassKey::compute(&s1, 3).unwrap();
        assert_eq!(key.d, 1);
        assert_eq!(fp_oracle(&s1, 3, 2).unwrap(), fp_forced(&key).unwrap());
    }

    #[test]
    fn oracle_split() {
        let s = diag(&[7]);
        let key = LocalClassKey::compute(&s, 7).unwrap();
        assert_eq!(key.splitting, Splitting::Split);
        assert_eq!(key.d, 1);
        let f = fp_oracle(&s, 7, 1).unwrap();
        assert_eq!(f, poly_i(&[1, 7]));
        assert_eq!(f, fp_forced(&key).unwrap());
    }

    #[test]
    fn oracle_worker_independence() {
        let s = diag(&[1, 2]);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| fp_oracle(&s, 2, 2).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn provider_chain() {
        let prov = FpProvider::new(f3());
        // forced
        let f = prov.fp(&diag(&[1, 1, 1]), 3).unwrap();
        assert_eq!(f.provenance, Provenance::Forced);
        assert_eq!(f.poly, poly_i(&[1, 27]));
        // fixture
        let f = prov.fp(&diag(&[1, 1, 3]), 3).unwrap();
        assert_eq!(f.provenance, Provenance::Fixture);
        assert_eq!(f.poly, poly_i(&[1, -54, 729]));
        // lookup value: F_3(3^{8-6}; I_3) = 1 + 27*9
        let v = prov.fp_lookup(&diag(&[1, 1, 1]), 3, 8).unwrap();
        assert_eq!(v, rat_i(244));
        // p outside the support: 1
        let v = prov.fp_lookup(&diag(&[1, 1, 1]), 5, 8).unwrap();
        assert_eq!(v, Rat::one());
    }

    #[test]
    fn provider_missing_class_errors() {
        let prov = FpProvider::new(f3());
        // 4x4 inert p=2 with d >= 2: no fixture, oracle infeasible
        let s = diag(&[1, 1, 2, 2]);
        let e = prov.fp(&s, 2).unwrap_err();
        assert!(e.0.contains("missing local datum"), "got: {}", e.0);
        // supplemental entry fills the gap
        let mut prov = FpProvider::new(f3());
        let key = LocalClassKey::compute(&s, 2).unwrap();
        assert_eq!(key.d, 2);
        // FE-consistent quadratic: c2 = xi*2^{4*2} c0, c1 symmetric
        let xi = key.xi_hat();
        let table = serde_json::json!([{
            "p": 2, "splitting": "inert", "n": 4, "d": 2,
            "det_class": key.det_class,
            "coeffs": [1, 0, 256 * xi]
        }]);
        prov.load_supplemental(&table).unwrap();
        let f = prov.fp(&s, 2).unwrap();
        assert_eq!(f.provenance, Provenance::Supplemental);
    }

    #[test]
    fn support_primes_examples() {
        let t1 = LatticeMatrix::from_int_entries(f3(), &[vec![2, 1], vec![1, 2]]).unwrap();
        assert_eq!(support_primes(&t1).unwrap(), vec![3]);
        assert_eq!(support_primes(&diag(&[1, 2])).unwrap(), vec![2, 3]);
    }

    #[test]
    fn forced_agreement_small_cases() {
        // oracle == forced for d <= 1 across splittings, ranks 1 and 2
        let cases: Vec<(LatticeMatrix, u64)> = vec![
            (diag(&[1]), 2),
            (diag(&[2]), 2),
            (diag(&[5]), 5),
            (diag(&[3]), 3),
            (diag(&[7]), 7),
            (diag(&[1, 2]), 2),
            (diag(&[1, 5]), 5),
            (diag(&[1, 1]), 3),
            (diag(&[2, 3]), 2),
        ];
        for (s, p) in cases {
            let key = LocalClassKey::compute(&s, p).unwrap();
            assert!(key.d <= 1, "test case should have d <= 1: {key}");
            let j = oracle_level(&key);
            let oracle = fp_oracle(&s, p, j).unwrap_or_else(|e| panic!("[{key}]: {e:?}"));
            assert_eq!(oracle, fp_forced(&key).unwrap(), "disagreement at [{key}]");
        }
    }
}
