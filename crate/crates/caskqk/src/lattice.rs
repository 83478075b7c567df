//! Integer symplectic lattice algebra.
//!
//! A charge lattice is ℤ^{2m} with an antisymmetric integer pairing that
//! admits a Darboux basis (γ̃₁..γ̃_m, γ¹..γᵐ) with ⟨γ̃_i, γʲ⟩ = δ_iʲ. BPS
//! indices live on lattice vectors; a structure is mutually local when every
//! pair of support charges pairs to zero. `complete_darboux_basis` turns a
//! pairwise-isotropic support into a full Darboux basis whose electric block
//! spans the support, via saturation, Bézout completion and symplectic
//! Gram-Schmidt corrections.
//!
//! All arithmetic here is exact (num-bigint); unimodular basis changes can
//! blow up coefficients well past i64.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Lattice vector in the stored frame, x-block then y-block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChargeVector {
    coeffs: Vec<BigInt>,
}

impl ChargeVector {
    pub fn new(coeffs: Vec<i64>) -> Self {
        Self {
            coeffs: coeffs.into_iter().map(BigInt::from).collect(),
        }
    }

    pub fn from_bigints(coeffs: Vec<BigInt>) -> Self {
        Self { coeffs }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![BigInt::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &BigInt {
        &self.coeffs[i]
    }

    pub fn coeff_f64(&self, i: usize) -> f64 {
        bigint_to_f64(&self.coeffs[i])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn neg(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    /// y-block components n_i(γ), meaningful when the x-block vanishes.
    pub fn electric_part(&self, m: usize) -> &[BigInt] {
        &self.coeffs[m..]
    }

    /// True when the x-block (magnetic components) is zero.
    pub fn is_electric(&self, m: usize) -> bool {
        self.coeffs[..m].iter().all(|c| c.is_zero())
    }

    pub fn gcd_of_coeffs(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::zero(), |acc, c| gcd(&acc, c))
    }
}

impl std::fmt::Display for ChargeVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Rank-2m lattice with an integer antisymmetric pairing.
#[derive(Debug, Clone)]
pub struct ChargeLattice {
    m: usize,
    pairing: Vec<Vec<BigInt>>,
}

impl ChargeLattice {
    /// Standard Darboux frame: ⟨γ̃_i, γʲ⟩ = δ_iʲ, both blocks isotropic.
    pub fn standard(m: usize) -> Self {
        let d = 2 * m;
        let mut pairing = vec![vec![BigInt::zero(); d]; d];
        for i in 0..m {
            pairing[i][m + i] = BigInt::one();
            pairing[m + i][i] = -BigInt::one();
        }
        Self { m, pairing }
    }

    pub fn from_pairing(entries: Vec<Vec<i64>>) -> Result<Self> {
        let d = entries.len();
        if d == 0 || d % 2 != 0 {
            return Err(Error::Config(format!(
                "pairing must be square of even dimension, got {d} rows"
            )));
        }
        let pairing: Vec<Vec<BigInt>> = entries
            .iter()
            .map(|row| {
                if row.len() != d {
                    Err(Error::DimensionMismatch {
                        expected: d,
                        got: row.len(),
                    })
                } else {
                    Ok(row.iter().map(|&v| BigInt::from(v)).collect())
                }
            })
            .collect::<Result<_>>()?;
        for i in 0..d {
            for j in 0..d {
                if pairing[i][j] != -&pairing[j][i] {
                    return Err(Error::Config(format!(
                        "pairing is not antisymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { m: d / 2, pairing })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        2 * self.m
    }

    pub fn pairing_matrix(&self) -> &Vec<Vec<BigInt>> {
        &self.pairing
    }

    /// aᵀ · pairing · b, antisymmetric in (a, b).
    pub fn pairing_eval(&self, a: &ChargeVector, b: &ChargeVector) -> Result<BigInt> {
        let d = self.rank();
        if a.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.dim(),
            });
        }
        if b.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.dim(),
            });
        }
        Ok(pairing_rows(self, a.coeffs(), b.coeffs()))
    }

    /// True when the stored frame is already the standard Darboux frame.
    pub fn is_standard_frame(&self) -> bool {
        self.pairing == Self::standard(self.m).pairing
    }
}

/// One BPS entry: a charge and its integer index Ω(γ).
#[derive(Debug, Clone)]
pub struct BpsEntry {
    pub charge: ChargeVector,
    pub index: i64,
}

/// Finite, symmetrized BPS structure: Ω(γ) = Ω(−γ) holds by construction.
#[derive(Debug, Clone)]
pub struct BpsStructure {
    entries: Vec<BpsEntry>,
}

impl BpsStructure {
    /// Empty support (Ω = 0); degenerates every construction to semi-flat.
    pub fn trivial() -> Self {
        Self { entries: vec![] }
    }

    /// Ingests entries, dropping Ω = 0, symmetrizing under γ ↦ −γ and
    /// rejecting conflicting indices for γ and −γ.
    pub fn new(raw: Vec<(ChargeVector, i64)>, rank: usize) -> Result<Self> {
        let mut map: BTreeMap<Vec<BigInt>, i64> = BTreeMap::new();
        for (charge, index) in raw {
            if charge.dim() != rank {
                return Err(Error::DimensionMismatch {
                    expected: rank,
                    got: charge.dim(),
                });
            }
            if index == 0 {
                continue;
            }
            if charge.is_zero() {
                return Err(Error::Config("BPS support must not contain 0".into()));
            }
            for c in [charge.clone(), charge.neg()] {
                let key = c.coeffs().to_vec();
                if let Some(&old) = map.get(&key) {
                    if old != index {
                        return Err(Error::ConflictingIndex(c.to_string()));
                    }
                } else {
                    map.insert(key, index);
                }
            }
        }
        let entries = map
            .into_iter()
            .map(|(coeffs, index)| BpsEntry {
                charge: ChargeVector::from_bigints(coeffs),
                index,
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[BpsEntry] {
        &self.entries
    }

    pub fn is_trivial(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &ChargeVector> {
        self.entries.iter().map(|e| &e.charge)
    }

    /// All support charges lie in span{γ^i} of the standard frame.
    pub fn is_electric(&self, m: usize) -> bool {
        self.support().all(|c| c.is_electric(m))
    }

    /// d_i = gcd{n_i(γ)} over the support, None when all n_i vanish.
    pub fn electric_gcds(&self, m: usize) -> Vec<Option<BigInt>> {
        (0..m)
            .map(|i| {
                let g = self
                    .support()
                    .fold(BigInt::zero(), |acc, c| gcd(&acc, c.coeff(m + i)));
                if g.is_zero() {
                    None
                } else {
                    Some(g)
                }
            })
            .collect()
    }
}

/// True iff every pair of support charges pairs to zero. The Ω(γ) = Ω(−γ)
/// half of the definition holds by construction of `BpsStructure`.
pub fn validate_mutual_locality(lattice: &ChargeLattice, bps: &BpsStructure) -> bool {
    let charges: Vec<&ChargeVector> = bps.support().collect();
    for (i, a) in charges.iter().enumerate() {
        for b in &charges[i..] {
            match lattice.pairing_eval(a, b) {
                Ok(p) if p.is_zero() => {}
                _ => return false,
            }
        }
    }
    true
}

/// A Darboux basis (γ̃₁..γ̃_m, γ¹..γᵐ) expressed in the lattice's stored frame.
#[derive(Debug, Clone)]
pub struct DarbouxBasis {
    pub gamma_tilde: Vec<ChargeVector>,
    pub gamma: Vec<ChargeVector>,
}

impl DarbouxBasis {
    /// Exact check that Bᵀ·pairing·B is the standard symplectic form.
    pub fn verify(&self, lattice: &ChargeLattice) -> Result<()> {
        let m = lattice.m();
        if self.gamma_tilde.len() != m || self.gamma.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.gamma_tilde.len(),
            });
        }
        let all: Vec<&ChargeVector> = self.gamma_tilde.iter().chain(self.gamma.iter()).collect();
        let std = ChargeLattice::standard(m);
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let got = lattice.pairing_eval(a, b)?;
                let want = &std.pairing_matrix()[i][j];
                if &got != want {
                    return Err(Error::Config(format!(
                        "basis fails Darboux property at ({i}, {j}): got {got}, want {want}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Integer coordinates of `v` over the γ-block, if they exist.
    pub fn electric_coordinates(&self, v: &ChargeVector) -> Option<Vec<BigInt>> {
        let cols: Vec<Vec<BigInt>> = self.gamma.iter().map(|g| g.coeffs().to_vec()).collect();
        integer_solve(&cols, v.coeffs())
    }
}

/// Completes a pairwise-isotropic support S to a Darboux basis with
/// S ⊂ span_ℤ{γ¹..γᵐ}.
///
/// The steps follow the constructive existence proof: primitive closure of
/// span(S), extension to a maximal isotropic sublattice L, then for each
/// basis vector of L a Bézout partner corrected against the pairs found so
/// far. The output basis is not canonical; only the postconditions are.
pub fn complete_darboux_basis(
    lattice: &ChargeLattice,
    support: &[ChargeVector],
) -> Result<DarbouxBasis> {
    let d = lattice.rank();
    let m = lattice.m();

    for v in support {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
    }
    for (i, a) in support.iter().enumerate() {
        for b in &support[i..] {
            let p = lattice.pairing_eval(a, b)?;
            if !p.is_zero() {
                return Err(Error::NonIsotropicSupport {
                    a: a.to_string(),
                    b: b.to_string(),
                    pairing: p.to_string(),
                });
            }
        }
    }

    // L := primitive closure of span(S)
    let gens: Vec<Vec<BigInt>> = support
        .iter()
        .filter(|v| !v.is_zero())
        .map(|v| v.coeffs().to_vec())
        .collect();
    let mut l_basis = saturate(&gens, d);

    // extend to a maximal isotropic sublattice, one primitive vector at a time
    while l_basis.len() < m {
        let perp = pairing_perp(lattice, &l_basis);
        let next = perp
            .into_iter()
            .find(|k| !in_rational_span(&l_basis, k))
            .ok_or(Error::NonUnimodularPairing)?;
        let mut gens = l_basis.clone();
        gens.push(next);
        l_basis = saturate(&gens, d);
    }
    if l_basis.len() != m {
        return Err(Error::NonUnimodularPairing);
    }
    for a in &l_basis {
        for b in &l_basis {
            if !pairing_rows(lattice, a, b).is_zero() {
                return Err(Error::NonUnimodularPairing);
            }
        }
    }

    // ambient Darboux basis used for the Bézout steps
    let ambient = symplectic_basis(lattice)?;

    let mut gamma: Vec<ChargeVector> = Vec::with_capacity(m);
    let mut gamma_tilde: Vec<ChargeVector> = Vec::with_capacity(m);

    for alpha in &l_basis {
        // γ^{r+1} = α + Σ_i ⟨α, γ̃_i⟩ γ^i
        let mut g = alpha.clone();
        for (gt, gv) in gamma_tilde.iter().zip(gamma.iter()) {
            let c = pairing_rows(lattice, alpha, gt.coeffs());
            add_scaled(&mut g, gv.coeffs(), &c);
        }
        let g = ChargeVector::from_bigints(g);
        if !g.gcd_of_coeffs().is_one() {
            return Err(Error::NonUnimodularPairing);
        }

        // coordinates of γ in the ambient Darboux basis: γ = b^i β̃_i + b_i β^i
        let cols: Vec<Vec<BigInt>> = ambient
            .gamma_tilde
            .iter()
            .chain(ambient.gamma.iter())
            .map(|v| v.coeffs().to_vec())
            .collect();
        let coords = integer_solve(&cols, g.coeffs()).ok_or(Error::NonUnimodularPairing)?;
        let (gcd_all, bezout) = extended_gcd_slice(&coords);
        if !gcd_all.is_one() {
            return Err(Error::NonUnimodularPairing);
        }
        // Bézout Σ c^i b^i + Σ c_i b_i = 1 gives α̃ = Σ c_i β̃_i − Σ c^i β^i
        // with ⟨α̃, γ⟩ = 1
        let mut at = vec![BigInt::zero(); d];
        for i in 0..m {
            add_scaled(&mut at, ambient.gamma_tilde[i].coeffs(), &bezout[m + i]);
            let neg = -&bezout[i];
            add_scaled(&mut at, ambient.gamma[i].coeffs(), &neg);
        }

        // γ̃_{r+1} = α̃ − Σ ⟨α̃, γ^i⟩ γ̃_i + Σ ⟨α̃, γ̃_i⟩ γ^i
        let mut gt_new = at.clone();
        for (gt, gv) in gamma_tilde.iter().zip(gamma.iter()) {
            let c1 = -pairing_rows(lattice, &at, gv.coeffs());
            add_scaled(&mut gt_new, gt.coeffs(), &c1);
            let c2 = pairing_rows(lattice, &at, gt.coeffs());
            add_scaled(&mut gt_new, gv.coeffs(), &c2);
        }

        gamma.push(g);
        gamma_tilde.push(ChargeVector::from_bigints(gt_new));
    }

    Ok(DarbouxBasis { gamma_tilde, gamma })
}

/// Darboux basis of the full lattice by symplectic reduction: find a
/// unimodular pair, correct the complement, recurse.
pub fn symplectic_basis(lattice: &ChargeLattice) -> Result<DarbouxBasis> {
    let d = lattice.rank();
    let m = lattice.m();
    let mut working: Vec<Vec<BigInt>> = unit_basis(d);
    let mut gamma_tilde = Vec::with_capacity(m);
    let mut gamma = Vec::with_capacity(m);

    while !working.is_empty() {
        let p = working[0].clone();
        // Bézout combination q of the rest with ⟨p, q⟩ = 1
        let vals: Vec<BigInt> = working[1..]
            .iter()
            .map(|w| pairing_rows(lattice, &p, w))
            .collect();
        let (g, coeffs) = extended_gcd_slice(&vals);
        if !g.is_one() {
            return Err(Error::NonUnimodularPairing);
        }
        let mut q = vec![BigInt::zero(); d];
        for (w, c) in working[1..].iter().zip(coeffs.iter()) {
            add_scaled(&mut q, w, c);
        }
        // correct the rest into the symplectic complement of span{p, q}:
        // e ← e − ⟨e, q⟩ p + ⟨e, p⟩ q
        let mut rest = Vec::with_capacity(working.len().saturating_sub(1));
        for e in &working[1..] {
            let mut v = e.clone();
            let c1 = -pairing_rows(lattice, e, &q);
            add_scaled(&mut v, &p, &c1);
            let c2 = pairing_rows(lattice, e, &p);
            add_scaled(&mut v, &q, &c2);
            if v.iter().any(|x| !x.is_zero()) {
                rest.push(v);
            }
        }
        // drop the redundant generator of span{p, q} hiding in the corrections
        let rest = saturate(&rest, d);
        gamma_tilde.push(ChargeVector::from_bigints(p));
        gamma.push(ChargeVector::from_bigints(q));
        working = rest;
    }
    if gamma.len() != m {
        return Err(Error::NonUnimodularPairing);
    }
    Ok(DarbouxBasis { gamma_tilde, gamma })
}

// ---------------------------------------------------------------------------
// exact integer linear algebra helpers
// ---------------------------------------------------------------------------

fn bigint_to_f64(v: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

fn unit_basis(d: usize) -> Vec<Vec<BigInt>> {
    (0..d)
        .map(|i| {
            let mut v = vec![BigInt::zero(); d];
            v[i] = BigInt::one();
            v
        })
        .collect()
}

fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let mut a = a.abs();
    let mut b = b.abs();
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

/// Extended gcd over a slice: returns (g, c) with Σ c_i v_i = g ≥ 0.
fn extended_gcd_slice(vals: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let mut g = BigInt::zero();
    let mut coeffs = vec![BigInt::zero(); vals.len()];
    for (i, v) in vals.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        if g.is_zero() {
            let s = if v.is_negative() {
                -BigInt::one()
            } else {
                BigInt::one()
            };
            g = v.abs();
            coeffs[i] = s;
            continue;
        }
        let (d, x, y) = extended_gcd(&g, v);
        for c in coeffs.iter_mut() {
            *c = &*c * &x;
        }
        coeffs[i] = y;
        g = d;
    }
    (g, coeffs)
}

/// (g, x, y) with a·x + b·y = g = gcd(a, b) ≥ 0.
fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r);
        let s = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if r0.is_negative() {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

fn add_scaled(target: &mut [BigInt], src: &[BigInt], c: &BigInt) {
    if c.is_zero() {
        return;
    }
    for (t, s) in target.iter_mut().zip(src.iter()) {
        *t += c * s;
    }
}

fn pairing_rows(lattice: &ChargeLattice, a: &[BigInt], b: &[BigInt]) -> BigInt {
    let d = lattice.rank();
    let mut acc = BigInt::zero();
    for i in 0..d {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..d {
            let p = &lattice.pairing_matrix()[i][j];
            if !p.is_zero() && !b[j].is_zero() {
                acc += &a[i] * p * &b[j];
            }
        }
    }
    acc
}

/// Column echelon reduction A·U = E with unimodular U; shared by the kernel
/// and solve routines. Returns (E as rows, U as columns, pivots (row, col)).
#[allow(clippy::type_complexity)]
fn column_echelon(
    a_rows: &[Vec<BigInt>],
    cols: usize,
) -> (Vec<Vec<BigInt>>, Vec<Vec<BigInt>>, Vec<(usize, usize)>) {
    let rows = a_rows.len();
    let mut mat = a_rows.to_vec();
    let mut u = unit_basis(cols);
    let mut pivots = vec![];
    let mut pivot = 0usize;
    for r in 0..rows {
        if pivot >= cols {
            break;
        }
        let mut had_pivot = false;
        loop {
            let mut best: Option<(usize, BigInt)> = None;
            for j in pivot..cols {
                if !mat[r][j].is_zero() {
                    let a = mat[r][j].abs();
                    if best.as_ref().map(|(_, b)| &a < b).unwrap_or(true) {
                        best = Some((j, a));
                    }
                }
            }
            let Some((j0, _)) = best else { break };
            had_pivot = true;
            if j0 != pivot {
                for row in mat.iter_mut() {
                    row.swap(j0, pivot);
                }
                u.swap(j0, pivot);
            }
            let pv = mat[r][pivot].clone();
            let mut done = true;
            for j in (pivot + 1)..cols {
                if mat[r][j].is_zero() {
                    continue;
                }
                let q = div_round(&mat[r][j], &pv);
                if !q.is_zero() {
                    for row in mat.iter_mut() {
                        let s = &row[pivot] * &q;
                        row[j] -= s;
                    }
                    let (up, uj) = borrow_two(&mut u, pivot, j);
                    for (t, s) in uj.iter_mut().zip(up.iter()) {
                        *t -= &q * s;
                    }
                }
                if !mat[r][j].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if had_pivot {
            pivots.push((r, pivot));
            pivot += 1;
        }
    }
    (mat, u, pivots)
}

/// (&v[a], &mut v[b]) for a != b.
fn borrow_two<T>(v: &mut [T], a: usize, b: usize) -> (&T, &mut T) {
    assert!(a != b);
    if a < b {
        let (left, right) = v.split_at_mut(b);
        (&left[a], &mut right[0])
    } else {
        let (left, right) = v.split_at_mut(b + 1);
        (&right[a - b - 1], &mut left[b])
    }
}

/// Rounded division used by the column reduction (keeps entries small).
fn div_round(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    let (q, r) = (a / b, a % b);
    if &r.abs() * &two > b.abs() {
        if r.is_negative() == b.is_negative() {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

/// Basis of the right integer kernel {v : A v = 0}; such kernels are
/// saturated sublattices.
fn integer_kernel(a_rows: &[Vec<BigInt>], cols: usize) -> Vec<Vec<BigInt>> {
    let rows = a_rows.len();
    let (mat, u, _) = column_echelon(a_rows, cols);
    (0..cols)
        .filter(|&j| (0..rows).all(|r| mat[r][j].is_zero()))
        .map(|j| u[j].clone())
        .collect()
}

/// Basis of the primitive closure (saturation) of the span of `gens` in ℤ^d:
/// the integer kernel of a kernel basis.
fn saturate(gens: &[Vec<BigInt>], d: usize) -> Vec<Vec<BigInt>> {
    let nonzero: Vec<Vec<BigInt>> = gens
        .iter()
        .filter(|g| g.iter().any(|x| !x.is_zero()))
        .cloned()
        .collect();
    if nonzero.is_empty() {
        return vec![];
    }
    let ker = integer_kernel(&nonzero, d);
    if ker.is_empty() {
        return unit_basis(d);
    }
    integer_kernel(&ker, d)
}

/// Basis of {v : ⟨l, v⟩ = 0 for all rows l}, the pairing-orthogonal lattice.
fn pairing_perp(lattice: &ChargeLattice, l_rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let d = lattice.rank();
    if l_rows.is_empty() {
        return unit_basis(d);
    }
    let lp: Vec<Vec<BigInt>> = l_rows
        .iter()
        .map(|l| {
            (0..d)
                .map(|j| {
                    let mut acc = BigInt::zero();
                    for i in 0..d {
                        if !l[i].is_zero() {
                            acc += &l[i] * &lattice.pairing_matrix()[i][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    integer_kernel(&lp, d)
}

fn rank_of(rows: &[Vec<BigInt>], d: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    d - integer_kernel(rows, d).len()
}

fn in_rational_span(rows: &[Vec<BigInt>], v: &[BigInt]) -> bool {
    let mut ext = rows.to_vec();
    ext.push(v.to_vec());
    let d = v.len();
    rank_of(rows, d) == rank_of(&ext, d)
}

/// Solve Σ c_j cols[j] = target over ℤ, if a solution exists.
fn integer_solve(cols: &[Vec<BigInt>], target: &[BigInt]) -> Option<Vec<BigInt>> {
    let d = target.len();
    let n = cols.len();
    if n == 0 {
        return if target.iter().all(|t| t.is_zero()) {
            Some(vec![])
        } else {
            None
        };
    }
    let a_rows: Vec<Vec<BigInt>> = (0..d)
        .map(|r| (0..n).map(|j| cols[j][r].clone()).collect())
        .collect();
    let (mat, u, pivots) = column_echelon(&a_rows, n);

    let mut rem: Vec<BigInt> = target.to_vec();
    let mut y = vec![BigInt::zero(); n];
    for &(r, j) in &pivots {
        let e = &mat[r][j];
        let (q, rr) = (&rem[r] / e, &rem[r] % e);
        if !rr.is_zero() {
            return None;
        }
        y[j] = q.clone();
        for (row, rem_r) in mat.iter().zip(rem.iter_mut()) {
            let s = &row[j] * &q;
            *rem_r -= s;
        }
    }
    if rem.iter().any(|x| !x.is_zero()) {
        return None;
    }
    // c = U y
    let mut c = vec![BigInt::zero(); n];
    for (j, yj) in y.iter().enumerate() {
        if !yj.is_zero() {
            for i in 0..n {
                c[i] += &u[j][i] * yj;
            }
        }
    }
    Some(c)
}
