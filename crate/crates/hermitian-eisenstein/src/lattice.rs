//! Hermitian matrices over K with half-integral structure: exact positivity
//! classification, scaled determinants, enumeration of off-diagonal completion
//! blocks for pullback sums, radical splitting of singular matrices, and
//! isometry testing.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::arith::{err, rat_i, Error, Rat, Result};
use crate::quadfield::{KElem, QuadField, QuadInt};

pub type KMat = Vec<Vec<KElem>>;

// ---------------------------------------------------------------------------
// Generic matrix helpers over K.
// ---------------------------------------------------------------------------

pub fn k_mat_zero(rows: usize, cols: usize) -> KMat {
    vec![vec![KElem::zero(); cols]; rows]
}

pub fn k_mat_identity(n: usize) -> KMat {
    let mut m = k_mat_zero(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = KElem::one();
    }
    m
}

pub fn k_mat_mul(a: &KMat, b: &KMat, k: &QuadField) -> KMat {
    let (r, mid, c) = (a.len(), b.len(), b[0].len());
    let mut out = k_mat_zero(r, c);
    for i in 0..r {
        for l in 0..mid {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..c {
                out[i][j] = out[i][j].add(&a[i][l].mul(&b[l][j], k));
            }
        }
    }
    out
}

pub fn k_mat_conj_t(a: &KMat, k: &QuadField) -> KMat {
    let (r, c) = (a.len(), a[0].len());
    let mut out = k_mat_zero(c, r);
    for i in 0..r {
        for j in 0..c {
            out[j][i] = a[i][j].conj(k);
        }
    }
    out
}

/// Determinant by Gaussian elimination over K.
pub fn k_mat_det(a: &KMat, k: &QuadField) -> KElem {
    let n = a.len();
    let mut m = a.clone();
    let mut det = KElem::one();
    for col in 0..n {
        let piv = match (col..n).find(|&i| !m[i][col].is_zero()) {
            Some(p) => p,
            None => return KElem::zero(),
        };
        if piv != col {
            m.swap(piv, col);
            det = det.neg();
        }
        let p = m[col][col].clone();
        det = det.mul(&p, k);
        let pinv = p.inv(k).unwrap();
        for i in col + 1..n {
            if m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].mul(&pinv, k);
            for j in col..n {
                let t = f.mul(&m[col][j], k);
                m[i][j] = m[i][j].sub(&t);
            }
        }
    }
    det
}

/// Inverse by Gauss-Jordan; errors on singular input.
pub fn k_mat_inv(a: &KMat, k: &QuadField) -> Result<KMat> {
    let n = a.len();
    let mut m = a.clone();
    let mut inv = k_mat_identity(n);
    for col in 0..n {
        let piv = (col..n)
            .find(|&i| !m[i][col].is_zero())
            .ok_or_else(|| Error("matrix not invertible".into()))?;
        m.swap(piv, col);
        inv.swap(piv, col);
        let pinv = m[col][col].inv(k)?;
        for j in 0..n {
            m[col][j] = m[col][j].mul(&pinv, k);
            inv[col][j] = inv[col][j].mul(&pinv, k);
        }
        for i in 0..n {
            if i == col || m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].clone();
            for j in 0..n {
                let t = f.mul(&m[col][j], k);
                m[i][j] = m[i][j].sub(&t);
                let t = f.mul(&inv[col][j], k);
                inv[i][j] = inv[i][j].sub(&t);
            }
        }
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PsdSingular,
    Indefinite,
}

/// Exact classification of a Hermitian matrix by pivoted elimination.
pub fn classify_kmat(a: &KMat, k: &QuadField) -> Result<Definiteness> {
    let n = a.len();
    for i in 0..n {
        if !a[i][i].is_rational() {
            return err("Hermitian matrix must have rational diagonal");
        }
        for j in 0..n {
            if a[i][j] != a[j][i].conj(k) {
                return err("matrix is not Hermitian");
            }
        }
    }
    let mut m = a.clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut singular = false;
    while !active.is_empty() {
        if active
            .iter()
            .all(|&i| active.iter().all(|&j| m[i][j].is_zero()))
        {
            singular = true;
            break;
        }
        let piv = active
            .iter()
            .copied()
            .find(|&i| !m[i][i].is_zero());
        let piv = match piv {
            Some(p) => p,
            // nonzero Hermitian block with all-zero diagonal is indefinite
            None => return Ok(Definiteness::Indefinite),
        };
        let d = m[piv][piv].x.clone();
        if d.is_negative() {
            return Ok(Definiteness::Indefinite);
        }
        let dinv = KElem::from_rat(Rat::one() / d);
        for &i in &active {
            if i == piv {
                continue;
            }
            for &j in &active {
                if j == piv {
                    continue;
                }
                let t = m[i][piv].mul(&dinv, k).mul(&m[piv][j], k);
                m[i][j] = m[i][j].sub(&t);
            }
        }
        active.retain(|&i| i != piv);
    }
    Ok(if singular {
        Definiteness::PsdSingular
    } else {
        Definiteness::PositiveDefinite
    })
}

// ---------------------------------------------------------------------------
// Half-integral Hermitian matrices.
// ---------------------------------------------------------------------------

/// Hermitian n x n matrix with integer diagonal and off-diagonal entries
/// x/sqrt(-D) with x integral: the coefficient lattice for Fourier expansions.
/// Only the upper triangle is stored (entry(j,i) = conj(entry(i,j))).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeMatrix {
    pub field: QuadField,
    pub n: usize,
    pub diag: Vec<BigInt>,
    /// off[idx(i,j)] = numerator of entry (i,j) over sqrt(-D), for i < j
    pub off: Vec<QuadInt>,
}

fn off_idx(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl LatticeMatrix {
    pub fn zero(field: QuadField, n: usize) -> Self {
        LatticeMatrix {
            field,
            n,
            diag: vec![BigInt::zero(); n],
            off: vec![QuadInt::zero(); n.saturating_sub(1) * n / 2],
        }
    }

    pub fn from_diag(field: QuadField, diag: &[i64]) -> Self {
        let mut m = LatticeMatrix::zero(field, diag.len());
        m.diag = diag.iter().map(|&d| BigInt::from(d)).collect();
        m
    }

    /// Build from an integer matrix (rational entries; off-diagonal values
    /// are multiplied by sqrt(-D)/sqrt(-D) = 1, i.e. stored as v*sqrt(-D)).
    pub fn from_int_entries(field: QuadField, rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = LatticeMatrix::zero(field, n);
        for i in 0..n {
            if rows[i].len() != n {
                return err("ragged matrix");
            }
            m.diag[i] = BigInt::from(rows[i][i]);
            for j in i + 1..n {
                if rows[i][j] != rows[j][i] {
                    return err("integer matrix must be symmetric");
                }
                let s = field.sqrt_minus_d();
                let v = QuadInt::from_i64(rows[i][j], 0);
                m.off[off_idx(n, i, j)] = field.mul(&v, &s);
            }
        }
        Ok(m)
    }

    pub fn set_off(&mut self, i: usize, j: usize, numerator: QuadInt) {
        assert!(i < j);
        self.off[off_idx(self.n, i, j)] = numerator;
    }

    pub fn off_num(&self, i: usize, j: usize) -> QuadInt {
        assert!(i < j);
        self.off[off_idx(self.n, i, j)].clone()
    }

    /// Entry (i,j) as an element of K.
    pub fn entry(&self, i: usize, j: usize) -> KElem {
        let k = &self.field;
        if i == j {
            return KElem::from_rat(Rat::from_integer(self.diag[i].clone()));
        }
        let (num, conj) = if i < j {
            (self.off[off_idx(self.n, i, j)].clone(), false)
        } else {
            (self.off[off_idx(self.n, j, i)].clone(), true)
        };
        // x / sqrt(-D) = -x * sqrt(-D) / D
        let s = KElem::from_quadint(&k.sqrt_minus_d());
        let mut v = KElem::from_quadint(&num)
            .mul(&s, k)
            .scale(&(-Rat::one() / rat_i(k.d)));
        if conj {
            v = v.conj(k);
        }
        v
    }

    pub fn to_kmat(&self) -> KMat {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// Reconstruct from a K-valued Hermitian matrix; errors on entries
    /// outside the half-integral lattice.
    pub fn from_kmat(field: QuadField, m: &KMat) -> Result<Self> {
        let n = m.len();
        let mut out = LatticeMatrix::zero(field, n);
        let s = KElem::from_quadint(&field.sqrt_minus_d());
        for i in 0..n {
            let d = &m[i][i];
            if !d.is_rational() || !d.x.denom().is_one() {
                return err(format!("diagonal entry ({i},{i}) = {:?} is not an integer", d));
            }
            out.diag[i] = d.x.numer().clone();
            for j in i + 1..n {
                if m[j][i] != m[i][j].conj(&field) {
                    return err("matrix is not Hermitian");
                }
                let num = m[i][j].mul(&s, &field);
                if !num.x.denom().is_one() || !num.y.denom().is_one() {
                    return err(format!(
                        "off-diagonal entry ({i},{j}) is not in the inverse different"
                    ));
                }
                out.off[off_idx(n, i, j)] =
                    QuadInt::new(num.x.numer().clone(), num.y.numer().clone());
            }
        }
        Ok(out)
    }

    pub fn is_psd(&self) -> Result<Definiteness> {
        classify_kmat(&self.to_kmat(), &self.field)
    }

    /// D^{floor(n/2)} * det(S); errors if the result is not an integer.
    pub fn det_scaled(&self) -> Result<BigInt> {
        let det = k_mat_det(&self.to_kmat(), &self.field);
        if !det.is_rational() {
            return err("determinant of a Hermitian matrix must be rational");
        }
        let scaled = det.x * crate::arith::pow_rat(&rat_i(self.field.d), (self.n / 2) as i64);
        if !scaled.denom().is_one() {
            return err(format!("scaled determinant {scaled} is not an integer"));
        }
        Ok(scaled.numer().clone())
    }

    /// U* S U for an O_K-matrix U (columns in O^n).
    pub fn transform(&self, u: &[Vec<QuadInt>]) -> Result<LatticeMatrix> {
        let k = self.field;
        let ukm: KMat = u
            .iter()
            .map(|row| row.iter().map(KElem::from_quadint).collect())
            .collect();
        let prod = k_mat_mul(&k_mat_mul(&k_mat_conj_t(&ukm, &k), &self.to_kmat(), &k), &ukm, &k);
        LatticeMatrix::from_kmat(k, &prod)
    }

    /// Block matrix [[S1, B], [B*, S2]] with B given by numerators over
    /// sqrt(-D), row-major n1 x n2.
    pub fn assemble(s1: &LatticeMatrix, s2: &LatticeMatrix, b_num: &[Vec<QuadInt>]) -> Result<LatticeMatrix> {
        if s1.field != s2.field {
            return err("mismatched fields");
        }
        let (n1, n2) = (s1.n, s2.n);
        let n = n1 + n2;
        let mut m = LatticeMatrix::zero(s1.field, n);
        for i in 0..n1 {
            m.diag[i] = s1.diag[i].clone();
            for j in i + 1..n1 {
                m.off[off_idx(n, i, j)] = s1.off_num(i, j);
            }
        }
        for i in 0..n2 {
            m.diag[n1 + i] = s2.diag[i].clone();
            for j in i + 1..n2 {
                m.off[off_idx(n, n1 + i, n1 + j)] = s2.off_num(i, j);
            }
        }
        for i in 0..n1 {
            for j in 0..n2 {
                m.off[off_idx(n, i, n1 + j)] = b_num[i][j].clone();
            }
        }
        Ok(m)
    }

    /// Value x* S x for x in O^n (always an integer).
    pub fn qform(&self, x: &[QuadInt]) -> Result<BigInt> {
        let k = &self.field;
        let xk: KMat = vec![x.iter().map(KElem::from_quadint).collect()];
        let xc = k_mat_conj_t(&xk, k);
        let v = k_mat_mul(&k_mat_mul(&xk, &self.to_kmat(), k), &xc, k)[0][0].clone();
        if !v.is_rational() || !v.x.denom().is_one() {
            return err("quadratic form value is not an integer");
        }
        Ok(v.x.numer().clone())
    }

    pub fn entry_str(&self, i: usize, j: usize) -> String {
        if i == j {
            return self.diag[i].to_string();
        }
        let num = if i < j {
            self.off_num(i, j)
        } else {
            self.field.conj(&self.off_num(j, i)).neg()
        };
        format!("({})/sqrt(-{})", num.to_str(), self.field.d)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<String>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry_str(i, j)).collect())
            .collect();
        serde_json::json!({ "d": self.field.d, "entries": rows })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<LatticeMatrix> {
        let d = v
            .get("d")
            .and_then(|x| x.as_i64())
            .ok_or_else(|| Error("matrix JSON needs integer field \"d\"".into()))?;
        let field = QuadField::new(d)?;
        let rows = v
            .get("entries")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error("matrix JSON needs \"entries\" array".into()))?;
        let n = rows.len();
        let mut m = LatticeMatrix::zero(field, n);
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error("entries must be an array of rows".into()))?;
            if row.len() != n {
                return err("entries must be square");
            }
            for (j, cell) in row.iter().enumerate() {
                let s = cell
                    .as_str()
                    .ok_or_else(|| Error("matrix entries must be strings".into()))?;
                let parsed = parse_entry(s, &field)?;
                if i == j {
                    if !parsed.is_rational() || !parsed.x.denom().is_one() {
                        return err(format!("diagonal entry {s:?} must be an integer"));
                    }
                    m.diag[i] = parsed.x.numer().clone();
                } else if i < j {
                    let sq = KElem::from_quadint(&field.sqrt_minus_d());
                    let num = parsed.mul(&sq, &field);
                    if !num.x.denom().is_one() || !num.y.denom().is_one() {
                        return err(format!("entry {s:?} is not in the inverse different"));
                    }
                    m.off[off_idx(n, i, j)] =
                        QuadInt::new(num.x.numer().clone(), num.y.numer().clone());
                } else {
                    // verified Hermitian below
                }
            }
        }
        // Hermitian consistency
        for i in 0..n {
            for j in i + 1..n {
                let s = rows[j].as_array().unwrap()[i].as_str().unwrap();
                let parsed = parse_entry(s, &field)?;
                if parsed != m.entry(j, i) {
                    return err(format!("entries ({i},{j}) and ({j},{i}) are not conjugate"));
                }
            }
        }
        Ok(m)
    }
}

/// Parse "n", "a+b*w", or "(a+b*w)/sqrt(-D)".
fn parse_entry(s: &str, field: &QuadField) -> Result<KElem> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix('(') {
        let close = rest
            .find(')')
            .ok_or_else(|| Error(format!("bad entry {s:?}")))?;
        let inner = &rest[..close];
        let tail = rest[close + 1..].trim();
        let expect = format!("/sqrt(-{})", field.d);
        if tail != expect {
            return err(format!("entry {s:?} must end with {expect}"));
        }
        let num = QuadInt::parse(inner)?;
        let sq = KElem::from_quadint(&field.sqrt_minus_d());
        Ok(KElem::from_quadint(&num)
            .mul(&sq, field)
            .scale(&(-Rat::one() / rat_i(field.d))))
    } else if s.contains('w') {
        Ok(KElem::from_quadint(&QuadInt::parse(s)?))
    } else {
        Ok(KElem::from_rat(
            s.parse::<BigInt>()
                .map(Rat::from_integer)
                .map_err(|_| Error(format!("bad entry {s:?}")))?,
        ))
    }
}

// ---------------------------------------------------------------------------
// Ellipsoid enumeration over O_K^n.
// ---------------------------------------------------------------------------

fn isqrt_floor(x: &Rat) -> BigInt {
    if x.is_negative() {
        return BigInt::from(-1);
    }
    x.floor().numer().sqrt()
}

/// All x in O^n with x* M x <= bound, for M positive definite Hermitian.
/// Coordinate boxes come from |x_i|^2 <= bound * (M^{-1})_{ii}; membership
/// is then filtered exactly.
pub fn enum_vectors(k: &QuadField, m: &KMat, bound: &Rat) -> Result<Vec<Vec<QuadInt>>> {
    let n = m.len();
    if bound.is_negative() {
        return Ok(vec![]);
    }
    let minv = k_mat_inv(m, k)?;
    let t = k.omega_trace;
    let nn = k.omega_norm;
    let mut coord_choices: Vec<Vec<QuadInt>> = Vec::with_capacity(n);
    for i in 0..n {
        let beta = bound * &minv[i][i].x;
        if beta.is_negative() {
            return err("matrix is not positive definite");
        }
        // 4|a+bw|^2 = (2a+tb)^2 + (4n - t^2) b^2
        let disc = 4 * nn - t * t;
        let bmax = isqrt_floor(&(rat_i(4) * &beta / rat_i(disc)));
        let mut opts = Vec::new();
        let mut b = -bmax.clone();
        while b <= bmax {
            let rem = rat_i(4) * &beta - Rat::from_integer(BigInt::from(disc) * &b * &b);
            let s = isqrt_floor(&rem);
            if !s.is_negative() {
                // |2a + tb| <= s
                let tb = BigInt::from(t) * &b;
                let lo_num = -&s - &tb;
                let hi_num = &s - &tb;
                let mut a = num_integer::Integer::div_ceil(&lo_num, &BigInt::from(2));
                let hi = num_integer::Integer::div_floor(&hi_num, &BigInt::from(2));
                while a <= hi {
                    opts.push(QuadInt::new(a.clone(), b.clone()));
                    a += 1;
                }
            }
            b += 1;
        }
        coord_choices.push(opts);
    }
    // cartesian product with exact filter
    let mut out = Vec::new();
    let mut stack: Vec<QuadInt> = Vec::with_capacity(n);
    fn rec(
        k: &QuadField,
        m: &KMat,
        bound: &Rat,
        choices: &[Vec<QuadInt>],
        stack: &mut Vec<QuadInt>,
        out: &mut Vec<Vec<QuadInt>>,
    ) {
        if stack.len() == choices.len() {
            let xk: Vec<KElem> = stack.iter().map(KElem::from_quadint).collect();
            let mut val = Rat::zero();
            for (i, xi) in xk.iter().enumerate() {
                for (j, xj) in xk.iter().enumerate() {
                    let term = xi.conj(k).mul(&m[i][j], k).mul(xj, k);
                    val += term.x;
                }
            }
            if &val <= bound {
                out.push(stack.clone());
            }
            return;
        }
        for c in &choices[stack.len()] {
            stack.push(c.clone());
            rec(k, m, bound, choices, stack, out);
            stack.pop();
        }
    }
    rec(k, m, bound, &coord_choices, &mut stack, &mut out);
    out.sort();
    Ok(out)
}

/// Minimal nonzero value of x* S x over O^n, for positive-definite S.
pub fn minimum(s: &LatticeMatrix) -> Result<BigInt> {
    let k = s.field;
    let m = s.to_kmat();
    // min <= smallest diagonal entry
    let cap = s.diag.iter().min().unwrap().clone();
    let vecs = enum_vectors(&k, &m, &Rat::from_integer(cap.clone()))?;
    let mut best: Option<BigInt> = None;
    for v in vecs {
        if v.iter().all(|c| c.is_zero()) {
            continue;
        }
        let val = s.qform(&v)?;
        if best.as_ref().map(|b| &val < b).unwrap_or(true) {
            best = Some(val);
        }
    }
    best.ok_or_else(|| Error("no nonzero vector found below the diagonal bound".into()))
}

// ---------------------------------------------------------------------------
// Completions: off-diagonal blocks making a block psd matrix.
// ---------------------------------------------------------------------------

/// All B (as numerator matrices over sqrt(-D), row-major n1 x n2) such that
/// [[S1, B], [B*, S2]] is positive semidefinite and half-integral.
pub fn completions(s1: &LatticeMatrix, s2: &LatticeMatrix) -> Result<Vec<Vec<Vec<QuadInt>>>> {
    let k = s1.field;
    if s2.field != k {
        return err("mismatched fields");
    }
    let (n1, n2) = (s1.n, s2.n);
    let zero_b = vec![vec![QuadInt::zero(); n2]; n1];
    let cls1 = s1.is_psd()?;
    if cls1 == Definiteness::Indefinite || s2.is_psd()? == Definiteness::Indefinite {
        return err("completions wants positive semidefinite blocks");
    }
    // S2 = 0: psd of the block matrix forces B = 0
    if s2.diag.iter().all(|d| d.is_zero()) && s2.off.iter().all(|x| x.is_zero()) {
        return Ok(vec![zero_b]);
    }
    if cls1 != Definiteness::PositiveDefinite {
        return err("completion enumeration needs a definite upper-left block (or S2 = 0)");
    }
    let s1inv = k_mat_inv(&s1.to_kmat(), &k)?;
    // column j of B is x_j / sqrt(-D): Schur bound x* S1^{-1} x <= D*(S2)_jj
    let mut col_candidates: Vec<Vec<Vec<QuadInt>>> = Vec::with_capacity(n2);
    for j in 0..n2 {
        let bound = Rat::from_integer(BigInt::from(k.d) * &s2.diag[j]);
        col_candidates.push(enum_vectors(&k, &s1inv, &bound)?);
    }
    let mut out = Vec::new();
    let mut cols: Vec<Vec<QuadInt>> = Vec::new();
    fn rec(
        s1: &LatticeMatrix,
        s2: &LatticeMatrix,
        cands: &[Vec<Vec<QuadInt>>],
        cols: &mut Vec<Vec<QuadInt>>,
        out: &mut Vec<Vec<Vec<QuadInt>>>,
    ) {
        if cols.len() == cands.len() {
            let n1 = s1.n;
            let b_num: Vec<Vec<QuadInt>> = (0..n1)
                .map(|i| cols.iter().map(|c| c[i].clone()).collect())
                .collect();
            let big = LatticeMatrix::assemble(s1, s2, &b_num).unwrap();
            if matches!(
                big.is_psd(),
                Ok(Definiteness::PositiveDefinite | Definiteness::PsdSingular)
            ) {
                out.push(b_num);
            }
            return;
        }
        for c in &cands[cols.len()] {
            cols.push(c.clone());
            rec(s1, s2, cands, cols, out);
            cols.pop();
        }
    }
    rec(s1, s2, &col_candidates, &mut cols, &mut out);
    out.sort();
    Ok(out)
}

/// Independent naive check: scan all B with coordinates in [-box, box] and
/// keep those passing the exact psd test.
pub fn completions_boxscan(
    s1: &LatticeMatrix,
    s2: &LatticeMatrix,
    boxr: i64,
) -> Result<Vec<Vec<Vec<QuadInt>>>> {
    let (n1, n2) = (s1.n, s2.n);
    let cells = n1 * n2;
    let side = (2 * boxr + 1) as u64;
    let total = side.pow(2 * cells as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut b_num = vec![vec![QuadInt::zero(); n2]; n1];
        for i in 0..n1 {
            for j in 0..n2 {
                let a = (rem % side) as i64 - boxr;
                rem /= side;
                let b = (rem % side) as i64 - boxr;
                rem /= side;
                b_num[i][j] = QuadInt::from_i64(a, b);
            }
        }
        let big = LatticeMatrix::assemble(s1, s2, &b_num)?;
        if matches!(
            big.is_psd()?,
            Definiteness::PositiveDefinite | Definiteness::PsdSingular
        ) {
            out.push(b_num);
        }
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Radical splitting via diagonalization over O_K.
// ---------------------------------------------------------------------------

/// Unimodular U (columns in O^n) with U* S U = diag(S', 0_{n-r}); returns
/// (U, S', r).
pub fn radical_split(s: &LatticeMatrix) -> Result<(Vec<Vec<QuadInt>>, LatticeMatrix, usize)> {
    let k = s.field;
    let n = s.n;
    // integral model: T = sqrt(-D) * S has entries in O
    let sq = KElem::from_quadint(&k.sqrt_minus_d());
    let skm = s.to_kmat();
    let mut t: Vec<Vec<QuadInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = skm[i][j].mul(&sq, &k);
                    QuadInt::new(v.x.numer().clone(), v.y.numer().clone())
                })
                .collect()
        })
        .collect();
    // column operations are mirrored on q; kernel of T = q * (zero-pivot coords)
    let mut q: Vec<Vec<QuadInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        QuadInt::one()
                    } else {
                        QuadInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    let mut kpos = 0usize;
    while kpos < n {
        // find minimal-norm nonzero entry in the active block
        let mut best: Option<(usize, usize, BigInt)> = None;
        for i in kpos..n {
            for j in kpos..n {
                if !t[i][j].is_zero() {
                    let nm = k.norm(&t[i][j]);
                    if best.as_ref().map(|(_, _, b)| &nm < b).unwrap_or(true) {
                        best = Some((i, j, nm));
                    }
                }
            }
        }
        let (bi, bj) = match best {
            None => break, // zero block: all remaining pivots are zero
            Some((i, j, _)) => (i, j),
        };
        // move pivot to (kpos, kpos)
        t.swap(kpos, bi);
        if bj != kpos {
            for row in t.iter_mut() {
                row.swap(kpos, bj);
            }
            for row in q.iter_mut() {
                row.swap(kpos, bj);
            }
        }
        // clear column and row below/right of the pivot
        let mut clean = true;
        for i in kpos + 1..n {
            if t[i][kpos].is_zero() {
                continue;
            }
            let f = k.div_round(&t[i][kpos], &t[kpos][kpos]);
            for j in kpos..n {
                let sub = k.mul(&f, &t[kpos][j]);
                t[i][j] = t[i][j].sub(&sub);
            }
            if !t[i][kpos].is_zero() {
                clean = false;
            }
        }
        for j in kpos + 1..n {
            if t[kpos][j].is_zero() {
                continue;
            }
            let f = k.div_round(&t[kpos][j], &t[kpos][kpos]);
            for i in 0..n {
                let sub = k.mul(&f, &t[i][kpos]);
                t[i][j] = t[i][j].sub(&sub);
                let subq = k.mul(&f, &q[i][kpos]);
                q[i][j] = q[i][j].sub(&subq);
            }
            if !t[kpos][j].is_zero() {
                clean = false;
            }
        }
        if clean
            && (kpos + 1..n).all(|i| t[i][kpos].is_zero())
            && (kpos + 1..n).all(|j| t[kpos][j].is_zero())
        {
            kpos += 1;
        }
        // otherwise: a smaller-norm entry appeared; repeat with the same kpos
    }
    let rank = kpos;
    // U: nonzero-pivot columns of q first, then kernel columns
    let mut u: Vec<Vec<QuadInt>> = vec![Vec::with_capacity(n); n];
    for j in (0..rank).chain(rank..n) {
        for (i, urow) in u.iter_mut().enumerate() {
            urow.push(q[i][j].clone());
        }
    }
    let transformed = s.transform(&u)?;
    // verify the block shape
    for i in 0..n {
        for j in 0..n {
            if (i >= rank || j >= rank) && !transformed.entry(i, j).is_zero() {
                return err("radical splitting failed to isolate the kernel");
            }
        }
    }
    // verify U unimodular
    let ukm: KMat = u
        .iter()
        .map(|row| row.iter().map(KElem::from_quadint).collect())
        .collect();
    let det = k_mat_det(&ukm, &k);
    let dq = QuadInt::new(det.x.numer().clone(), det.y.numer().clone());
    if !det.x.denom().is_one() || !det.y.denom().is_one() || k.norm(&dq) != BigInt::one() {
        return err("radical splitting produced a non-unimodular transform");
    }
    let mut sprime = LatticeMatrix::zero(k, rank);
    for i in 0..rank {
        sprime.diag[i] = transformed.diag[i].clone();
        for j in i + 1..rank {
            sprime.off[off_idx(rank, i, j)] = transformed.off_num(i, j);
        }
    }
    if rank > 0 && sprime.det_scaled()?.is_zero() {
        return err("radical splitting left a singular block");
    }
    Ok((u, sprime, rank))
}

// ---------------------------------------------------------------------------
// Isometry testing.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IsometryResult {
    Isometric(Vec<Vec<QuadInt>>),
    NotIsometric,
    Unknown,
}

/// Search for unimodular U with U* S U = T (both positive definite).
pub fn isometry_test(s: &LatticeMatrix, t: &LatticeMatrix) -> Result<IsometryResult> {
    let k = s.field;
    if t.field != k || t.n != s.n {
        return err("isometry_test wants matrices of the same size over the same field");
    }
    if s.is_psd()? != Definiteness::PositiveDefinite
        || t.is_psd()? != Definiteness::PositiveDefinite
    {
        return err("isometry_test wants positive definite matrices");
    }
    // invariant obstructions
    if s.det_scaled()? != t.det_scaled()? {
        return Ok(IsometryResult::NotIsometric);
    }
    if minimum(s)? != minimum(t)? {
        return Ok(IsometryResult::NotIsometric);
    }
    let n = s.n;
    let skm = s.to_kmat();
    let cap = t.diag.iter().max().unwrap().clone();
    let pool = enum_vectors(&k, &skm, &Rat::from_integer(cap))?;
    // column j candidates: x with x* S x = T_jj
    let mut col_cands: Vec<Vec<Vec<QuadInt>>> = Vec::with_capacity(n);
    for j in 0..n {
        let want = &t.diag[j];
        col_cands.push(
            pool.iter()
                .filter(|x| s.qform(x).map(|v| &v == want).unwrap_or(false))
                .cloned()
                .collect(),
        );
    }
    let mut cols: Vec<Vec<QuadInt>> = Vec::new();
    fn pairing(
        k: &QuadField,
        skm: &KMat,
        a: &[QuadInt],
        b: &[QuadInt],
    ) -> KElem {
        // a* S b
        let mut acc = KElem::zero();
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let term = KElem::from_quadint(ai)
                    .conj(k)
                    .mul(&skm[i][j], k)
                    .mul(&KElem::from_quadint(bj), k);
                acc = acc.add(&term);
            }
        }
        acc
    }
    fn rec(
        k: &QuadField,
        s: &LatticeMatrix,
        t: &LatticeMatrix,
        skm: &KMat,
        cands: &[Vec<Vec<QuadInt>>],
        cols: &mut Vec<Vec<QuadInt>>,
    ) -> Option<Vec<Vec<QuadInt>>> {
        let j = cols.len();
        if j == cands.len() {
            // columns -> matrix, check unimodularity
            let n = cols.len();
            let u: Vec<Vec<QuadInt>> = (0..n)
                .map(|i| cols.iter().map(|c| c[i].clone()).collect())
                .collect();
            let ukm: KMat = u
                .iter()
                .map(|row| row.iter().map(KElem::from_quadint).collect())
                .collect();
            let det = k_mat_det(&ukm, k);
            let dq = QuadInt::new(det.x.numer().clone(), det.y.numer().clone());
            if det.x.denom().is_one() && det.y.denom().is_one() && k.norm(&dq) == BigInt::one() {
                return Some(u);
            }
            return None;
        }
        'next: for c in &cands[j] {
            for (i, prev) in cols.iter().enumerate() {
                if pairing(k, skm, prev, c) != t.entry(i, j) {
                    continue 'next;
                }
            }
            cols.push(c.clone());
            if let Some(u) = rec(k, s, t, skm, cands, cols) {
                return Some(u);
            }
            cols.pop();
        }
        None
    }
    match rec(&k, s, t, &skm, &col_cands, &mut cols) {
        Some(u) => {
            // sound: verify by exact multiplication
            if s.transform(&u)? == *t {
                Ok(IsometryResult::Isometric(u))
            } else {
                err("isometry candidate failed verification")
            }
        }
        None => Ok(IsometryResult::Unknown),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadfield::QuadField;

    fn f3() -> QuadField {
        QuadField::new(3).unwrap()
    }

    fn t1() -> LatticeMatrix {
        LatticeMatrix::from_int_entries(f3(), &[vec![2, 1], vec![1, 2]]).unwrap()
    }

    #[test]
    fn psd_classification() {
        assert_eq!(t1().is_psd().unwrap(), Definiteness::PositiveDefinite);
        let z = LatticeMatrix::zero(f3(), 3);
        assert_eq!(z.is_psd().unwrap(), Definiteness::PsdSingular);
        // [[1, x],[conj x, 1]] with |x|^2 = 3: x = 1 + w over D = 3
        let mut m = LatticeMatrix::from_diag(f3(), &[1, 1]);
        let k = f3();
        let x = QuadInt::from_i64(1, 1);
        assert_eq!(k.norm(&x), BigInt::from(3));
        let num = k.mul(&x, &k.sqrt_minus_d()); // entry x = num/sqrt(-3)
        m.set_off(0, 1, num);
        assert_eq!(m.is_psd().unwrap(), Definiteness::Indefinite);
        // diag(1, 0) is psd-singular
        let d10 = LatticeMatrix::from_diag(f3(), &[1, 0]);
        assert_eq!(d10.is_psd().unwrap(), Definiteness::PsdSingular);
    }

    #[test]
    fn det_scaled_values() {
        assert_eq!(t1().det_scaled().unwrap(), BigInt::from(9));
        let i3 = LatticeMatrix::from_diag(f3(), &[1, 1, 1]);
        assert_eq!(i3.det_scaled().unwrap(), BigInt::from(3));
        let z = LatticeMatrix::zero(f3(), 2);
        assert_eq!(z.det_scaled().unwrap(), BigInt::zero());
    }

    #[test]
    fn det_scaled_unimodular_invariance() {
        let s = t1();
        let k = f3();
        let w = QuadInt::from_i64(0, 1);
        let u = vec![
            vec![QuadInt::one(), w.clone()],
            vec![QuadInt::zero(), QuadInt::one()],
        ];
        let s2 = s.transform(&u).unwrap();
        assert_eq!(s2.det_scaled().unwrap(), s.det_scaled().unwrap());
        assert_eq!(s2.is_psd().unwrap(), Definiteness::PositiveDefinite);
        let _ = k;
    }

    #[test]
    fn completions_match_boxscan() {
        let s1 = t1();
        let s2 = LatticeMatrix::from_diag(f3(), &[1]);
        let fast = completions(&s1, &s2).unwrap();
        let slow = completions_boxscan(&s1, &s2, 3).unwrap();
        assert_eq!(fast, slow);
        assert!(fast.contains(&vec![vec![QuadInt::zero()], vec![QuadInt::zero()]]));
        // closure under negation and unit scaling
        let k = f3();
        for b in &fast {
            let neg: Vec<Vec<QuadInt>> =
                b.iter().map(|r| r.iter().map(|x| x.neg()).collect()).collect();
            assert!(fast.contains(&neg));
            for u in k.units() {
                let scaled: Vec<Vec<QuadInt>> = b
                    .iter()
                    .map(|r| r.iter().map(|x| k.mul(&u, x)).collect())
                    .collect();
                assert!(fast.contains(&scaled), "not closed under unit scaling");
            }
        }
        // every member passes psd and membership (by construction of assemble)
        for b in &fast {
            let big = LatticeMatrix::assemble(&s1, &s2, b).unwrap();
            assert!(matches!(
                big.is_psd().unwrap(),
                Definiteness::PositiveDefinite | Definiteness::PsdSingular
            ));
        }
    }

    #[test]
    fn completions_zero_s2() {
        let s1 = t1();
        let z = LatticeMatrix::zero(f3(), 1);
        let c = completions(&s1, &z).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].iter().all(|r| r.iter().all(|x| x.is_zero())));
    }

    #[test]
    fn radical_split_examples() {
        // nondegenerate: rank n
        let (u, sp, r) = radical_split(&t1()).unwrap();
        assert_eq!(r, 2);
        assert_eq!(t1().transform(&u).unwrap(), t1().transform(&u).unwrap());
        assert_eq!(sp.det_scaled().unwrap().sign(), num_bigint::Sign::Plus);
        // diag(1, 0)
        let d10 = LatticeMatrix::from_diag(f3(), &[1, 0]);
        let (_, sp, r) = radical_split(&d10).unwrap();
        assert_eq!(r, 1);
        assert_eq!(sp.diag, vec![BigInt::one()]);
        // [[1,1],[1,1]]
        let ones = LatticeMatrix::from_int_entries(f3(), &[vec![1, 1], vec![1, 1]]).unwrap();
        let (u, sp, r) = radical_split(&ones).unwrap();
        assert_eq!(r, 1);
        assert_eq!(sp.diag, vec![BigInt::one()]);
        // kernel column annihilates S
        let kern: Vec<QuadInt> = u.iter().map(|row| row[1].clone()).collect();
        assert!(ones.qform(&kern).unwrap().is_zero());
        // zero matrix: rank 0
        let (_, _, r) = radical_split(&LatticeMatrix::zero(f3(), 2)).unwrap();
        assert_eq!(r, 0);
    }

    #[test]
    fn isometry_cases() {
        let s = t1();
        match isometry_test(&s, &s).unwrap() {
            IsometryResult::Isometric(u) => {
                assert_eq!(s.transform(&u).unwrap(), s);
            }
            other => panic!("expected isometric, got {other:?}"),
        }
        // T1 vs diag(1,3): same scaled determinant, different minimum
        let d13 = LatticeMatrix::from_diag(f3(), &[1, 3]);
        assert_eq!(s.det_scaled().unwrap(), d13.det_scaled().unwrap());
        assert_eq!(isometry_test(&s, &d13).unwrap(), IsometryResult::NotIsometric);
        // round-trip through a random-ish unimodular transform
        let k = f3();
        let u = vec![
            vec![QuadInt::one(), QuadInt::from_i64(2, -1)],
            vec![QuadInt::zero(), QuadInt::from_i64(0, 1)],
        ];
        let ukm: KMat = u
            .iter()
            .map(|row| row.iter().map(KElem::from_quadint).collect())
            .collect();
        let det = k_mat_det(&ukm, &k);
        let dq = QuadInt::new(det.x.numer().clone(), det.y.numer().clone());
        assert_eq!(k.norm(&dq), BigInt::one());
        let t = s.transform(&u).unwrap();
        match isometry_test(&s, &t).unwrap() {
            IsometryResult::Isometric(v) => assert_eq!(s.transform(&v).unwrap(), t),
            other => panic!("expected isometric, got {other:?}"),
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut m = t1();
        m.set_off(0, 1, QuadInt::from_i64(1, 2));
        let j = m.to_json();
        let back = LatticeMatrix::from_json(&j).unwrap();
        assert_eq!(back, m);
        let txt = serde_json::to_string(&j).unwrap();
        let back2 = LatticeMatrix::from_json(&serde_json::from_str(&txt).unwrap()).unwrap();
        assert_eq!(back2, m);
    }

    #[test]
    fn minimum_values() {
        assert_eq!(minimum(&t1()).unwrap(), BigInt::from(2));
        let d13 = LatticeMatrix::from_diag(f3(), &[1, 3]);
        assert_eq!(minimum(&d13).unwrap(), BigInt::one());
    }
}
