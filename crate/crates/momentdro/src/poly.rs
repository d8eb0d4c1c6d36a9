//! Sparse multivariate polynomials over a graded monomial basis.
//!
//! Monomials are ordered graded-lexicographically: lower total degree first,
//! and within equal degree the earlier variables dominate, so for two
//! variables the degree-2 basis reads `1, x1, x2, x1^2, x1*x2, x2^2`.
//! Every matrix row/column layout in this crate derives from this order.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::{Error, Result};

/// A monomial power vector, one entry per variable.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Exponent(pub Vec<u32>);

impl Exponent {
    pub fn zeros(var_count: usize) -> Self {
        Exponent(vec![0; var_count])
    }

    /// Unit exponent for variable `i`.
    pub fn unit(var_count: usize, i: usize) -> Self {
        let mut v = vec![0; var_count];
        v[i] = 1;
        Exponent(v)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.0.len(), other.0.len());
        Exponent(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Graded order: total degree first; within a degree the exponent with
        // the larger power on the earliest differing variable comes first.
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// The ordered monomial basis of `R[u]_degree` in `var_count` variables.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    pub var_count: usize,
    pub degree: u32,
    pub exponents: Vec<Exponent>,
    index: std::collections::HashMap<Exponent, usize>,
}

/// Number of monomials in `var_count` variables of total degree at most `degree`,
/// i.e. C(var_count + degree, degree).
pub fn basis_len(var_count: usize, degree: u32) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 1..=degree as u128 {
        num *= var_count as u128 + i;
        den *= i;
    }
    (num / den) as usize
}

impl GradedBasis {
    pub fn new(var_count: usize, degree: u32) -> Self {
        assert!(var_count >= 1, "basis needs at least one variable");
        let mut exponents = Vec::with_capacity(basis_len(var_count, degree));
        let mut current = vec![0u32; var_count];
        for deg in 0..=degree {
            Self::gen_degree(var_count, deg, 0, &mut current, &mut exponents);
        }
        let index = exponents
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        GradedBasis {
            var_count,
            degree,
            exponents,
            index,
        }
    }

    // Compositions of `deg` into the remaining slots, largest leading power first.
    fn gen_degree(
        var_count: usize,
        deg: u32,
        pos: usize,
        current: &mut Vec<u32>,
        out: &mut Vec<Exponent>,
    ) {
        if pos == var_count - 1 {
            current[pos] = deg;
            out.push(Exponent(current.clone()));
            current[pos] = 0;
            return;
        }
        for k in (0..=deg).rev() {
            current[pos] = k;
            Self::gen_degree(var_count, deg - k, pos + 1, current, out);
        }
        current[pos] = 0;
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Monomial vector `[v]_degree` evaluated at a point.
    pub fn eval_monomials(&self, point: &[f64]) -> Vec<f64> {
        assert_eq!(point.len(), self.var_count);
        self.exponents
            .iter()
            .map(|e| {
                e.0.iter()
                    .zip(point)
                    .map(|(&p, &v)| v.powi(p as i32))
                    .product()
            })
            .collect()
    }
}

/// Sparse multivariate polynomial with real coefficients.
///
/// Zero coefficients are never stored; the zero polynomial has an empty
/// term map and degree 0.
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial {
    pub var_count: usize,
    pub terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(var_count: usize) -> Self {
        Polynomial {
            var_count,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(var_count: usize, c: f64) -> Self {
        let mut p = Self::zero(var_count);
        if c != 0.0 {
            p.terms.insert(Exponent::zeros(var_count), c);
        }
        p
    }

    pub fn variable(var_count: usize, i: usize) -> Self {
        let mut p = Self::zero(var_count);
        p.terms.insert(Exponent::unit(var_count, i), 1.0);
        p
    }

    pub fn monomial(var_count: usize, e: Exponent, c: f64) -> Self {
        assert_eq!(e.len(), var_count);
        let mut p = Self::zero(var_count);
        if c != 0.0 {
            p.terms.insert(e, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: Exponent, c: f64) {
        assert_eq!(e.len(), self.var_count);
        let entry = self.terms.entry(e.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Partial degree over a contiguous variable block.
    pub fn degree_in(&self, block: std::ops::Range<usize>) -> u32 {
        self.terms
            .keys()
            .map(|e| e.0[block.clone()].iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn coefficient(&self, e: &Exponent) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.var_count {
            return Err(Error::DimensionMismatch {
                expected: self.var_count,
                got: point.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, &c)| {
                c * e
                    .0
                    .iter()
                    .zip(point)
                    .map(|(&p, &v)| v.powi(p as i32))
                    .product::<f64>()
            })
            .sum())
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.var_count);
        }
        Polynomial {
            var_count: self.var_count,
            terms: self.terms.iter().map(|(e, &c)| (e.clone(), c * s)).collect(),
        }
    }

    /// First partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.var_count);
        for (e, &c) in &self.terms {
            let p = e.0[i];
            if p > 0 {
                let mut v = e.0.clone();
                v[i] = p - 1;
                out.add_term(Exponent(v), c * p as f64);
            }
        }
        out
    }

    /// Dense coefficient vector over `basis`; errors if a term falls outside it.
    pub fn coefficient_vector(&self, basis: &GradedBasis) -> Result<Vec<f64>> {
        let mut out = vec![0.0; basis.len()];
        for (e, &c) in &self.terms {
            let idx = basis.index_of(e).ok_or(Error::DegreeOverflow {
                degree: e.total_degree(),
                max: basis.degree,
            })?;
            out[idx] = c;
        }
        Ok(out)
    }

    /// Embed into a larger variable space, placing this polynomial's variables
    /// at offset `offset` of a `total` variable block.
    pub fn embed(&self, total: usize, offset: usize) -> Polynomial {
        assert!(offset + self.var_count <= total);
        let mut out = Polynomial::zero(total);
        for (e, &c) in &self.terms {
            let mut v = vec![0u32; total];
            v[offset..offset + self.var_count].copy_from_slice(&e.0);
            out.add_term(Exponent(v), c);
        }
        out
    }

    /// Inverse of `embed` for the leading block: removes the first `count`
    /// variables, which must not appear in any term.
    pub fn drop_leading(&self, count: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.var_count - count);
        for (e, &c) in &self.terms {
            assert!(e.0[..count].iter().all(|&d| d == 0));
            out.add_term(Exponent(e.0[count..].to_vec()), c);
        }
        out
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.var_count, other.var_count);
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.var_count, other.var_count);
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.var_count, other.var_count);
        let mut out = Polynomial::zero(self.var_count);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                out.add_term(ea.add(eb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Symmetric matrix of polynomials, e.g. a Hessian.
#[derive(Clone, Debug)]
pub struct PolyMatrix {
    pub size: usize,
    pub entries: Vec<Vec<Polynomial>>,
}

impl PolyMatrix {
    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i][j]
    }

    pub fn eval(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                m[(i, j)] = self.entries[i][j].eval(point)?;
            }
        }
        Ok(m)
    }
}

/// Symbolic Hessian of `p` with respect to the variable block `block`.
pub fn hessian(p: &Polynomial, block: std::ops::Range<usize>) -> PolyMatrix {
    let vars: Vec<usize> = block.collect();
    let size = vars.len();
    let firsts: Vec<Polynomial> = vars.iter().map(|&i| p.diff(i)).collect();
    let mut entries = vec![vec![Polynomial::zero(p.var_count); size]; size];
    for a in 0..size {
        for b in a..size {
            let second = firsts[a].diff(vars[b]);
            entries[a][b] = second.clone();
            entries[b][a] = second;
        }
    }
    PolyMatrix { size, entries }
}

/// Coefficient decomposition of `h(x, xi)` with respect to the trailing
/// `xi` block: returns the vector `h(x)` with `h(x,xi) = sum_b h_b(x) xi^b`,
/// ordered by the graded basis of the `xi` block at degree `d`.
pub fn decompose_in_xi(h: &Polynomial, n: usize, p: usize, d: u32) -> Result<Vec<Polynomial>> {
    assert_eq!(h.var_count, n + p);
    let xi_basis = GradedBasis::new(p, d);
    let mut out = vec![Polynomial::zero(n); xi_basis.len()];
    for (e, &c) in &h.terms {
        let (x_part, xi_part) = e.0.split_at(n);
        let xi_exp = Exponent(xi_part.to_vec());
        let idx = xi_basis
            .index_of(&xi_exp)
            .ok_or(Error::DegreeOverflow {
                degree: xi_exp.total_degree(),
                max: d,
            })?;
        out[idx].add_term(Exponent(x_part.to_vec()), c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn univariate_basis() {
        let b = GradedBasis::new(1, 3);
        let exps: Vec<Vec<u32>> = b.exponents.iter().map(|e| e.0.clone()).collect();
        assert_eq!(exps, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn bivariate_basis_order() {
        // The degree-2 monomial column order used throughout: 1, x1, x2, x1^2, x1x2, x2^2.
        let b = GradedBasis::new(2, 2);
        let exps: Vec<Vec<u32>> = b.exponents.iter().map(|e| e.0.clone()).collect();
        assert_eq!(
            exps,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn basis_count_and_prefix() {
        let b = GradedBasis::new(2, 4);
        assert_eq!(b.len(), 15);
        // Prefix property: basis(n, d) is a prefix of basis(n, d+1).
        let small = GradedBasis::new(3, 2);
        let large = GradedBasis::new(3, 3);
        assert_eq!(&large.exponents[..small.len()], &small.exponents[..]);
    }

    fn parse_terms(var_count: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        let mut p = Polynomial::zero(var_count);
        for (e, c) in terms {
            p.add_term(Exponent(e.to_vec()), *c);
        }
        p
    }

    #[test]
    fn eval_basic() {
        let one = Polynomial::constant(2, 1.0);
        assert_relative_eq!(one.eval(&[3.7, -2.0]).unwrap(), 1.0);

        // f = 2x1 - 3x2 + x1^2 - x1x2 + x2^2 at (-1/2, 1)
        let f = parse_terms(
            2,
            &[
                (&[1, 0], 2.0),
                (&[0, 1], -3.0),
                (&[2, 0], 1.0),
                (&[1, 1], -1.0),
                (&[0, 2], 1.0),
            ],
        );
        assert_relative_eq!(f.eval(&[-0.5, 1.0]).unwrap(), -2.25, epsilon = 1e-14);

        // h(x, xi) = x1x2 - x1 xi1^2 - x2^2 xi2^2 at x = (-1/6,-1/6), xi = (0, 1)
        let h = parse_terms(
            4,
            &[
                (&[1, 1, 0, 0], 1.0),
                (&[1, 0, 2, 0], -1.0),
                (&[0, 2, 0, 2], -1.0),
            ],
        );
        let v = h.eval(&[-1.0 / 6.0, -1.0 / 6.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let p = Polynomial::variable(2, 0);
        assert!(p.eval(&[1.0]).is_err());
    }

    #[test]
    fn hessian_quadratic() {
        let p = parse_terms(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0)]);
        let h = hessian(&p, 0..2);
        assert_eq!(h.entry(0, 0), &Polynomial::constant(2, 2.0));
        assert_eq!(h.entry(1, 1), &Polynomial::constant(2, 2.0));
        assert!(h.entry(0, 1).is_zero());

        let f = parse_terms(
            2,
            &[
                (&[1, 0], 2.0),
                (&[0, 1], -3.0),
                (&[2, 0], 1.0),
                (&[1, 1], -1.0),
                (&[0, 2], 1.0),
            ],
        );
        let hf = hessian(&f, 0..2);
        assert_eq!(hf.entry(0, 0), &Polynomial::constant(2, 2.0));
        assert_eq!(hf.entry(0, 1), &Polynomial::constant(2, -1.0));
        assert_eq!(hf.entry(1, 0), &Polynomial::constant(2, -1.0));
        assert_eq!(hf.entry(1, 1), &Polynomial::constant(2, 2.0));
    }

    #[test]
    fn hessian_in_x_block() {
        // h = 1 + x1*xi - 2 x2*xi^2 + (x1 - x2^2)*xi^3 over (x1, x2, xi);
        // -d2h/dx2^2 = 2 xi^3, everything else vanishes.
        let h = parse_terms(
            3,
            &[
                (&[0, 0, 0], 1.0),
                (&[1, 0, 1], 1.0),
                (&[0, 1, 2], -2.0),
                (&[1, 0, 3], 1.0),
                (&[0, 2, 3], -1.0),
            ],
        );
        let neg_h = -&h;
        let m = hessian(&neg_h, 0..2);
        assert!(m.entry(0, 0).is_zero());
        assert!(m.entry(0, 1).is_zero());
        let expect = parse_terms(3, &[(&[0, 0, 3], 2.0)]);
        assert_eq!(m.entry(1, 1), &expect);
    }

    #[test]
    fn decompose_worked_example() {
        // h = (1+x1)^2 + x1 xi1 + x2 xi2 + (x1^2+x2) xi1^2 + 2 x1x2 xi1 xi2 + (x1+x2^2) xi2^2
        let h = parse_terms(
            4,
            &[
                (&[0, 0, 0, 0], 1.0),
                (&[1, 0, 0, 0], 2.0),
                (&[2, 0, 0, 0], 1.0),
                (&[1, 0, 1, 0], 1.0),
                (&[0, 1, 0, 1], 1.0),
                (&[2, 0, 2, 0], 1.0),
                (&[0, 1, 2, 0], 1.0),
                (&[1, 1, 1, 1], 2.0),
                (&[1, 0, 0, 2], 1.0),
                (&[0, 2, 0, 2], 1.0),
            ],
        );
        let parts = decompose_in_xi(&h, 2, 2, 2).unwrap();
        assert_eq!(parts.len(), 6);
        let sq = parse_terms(2, &[(&[0, 0], 1.0), (&[1, 0], 2.0), (&[2, 0], 1.0)]);
        assert_eq!(parts[0], sq); // (1+x1)^2
        assert_eq!(parts[1], Polynomial::variable(2, 0)); // x1
        assert_eq!(parts[2], Polynomial::variable(2, 1)); // x2
        let e4 = parse_terms(2, &[(&[2, 0], 1.0), (&[0, 1], 1.0)]);
        assert_eq!(parts[3], e4); // x1^2 + x2
        let e5 = parse_terms(2, &[(&[1, 1], 2.0)]);
        assert_eq!(parts[4], e5); // 2 x1 x2
        let e6 = parse_terms(2, &[(&[1, 0], 1.0), (&[0, 2], 1.0)]);
        assert_eq!(parts[5], e6); // x1 + x2^2
    }

    #[test]
    fn decompose_xi_independent() {
        let h = parse_terms(3, &[(&[2, 1, 0], 3.0)]).clone();
        let parts = decompose_in_xi(&h, 2, 1, 2).unwrap();
        assert_eq!(parts[0], parse_terms(2, &[(&[2, 1], 3.0)]));
        assert!(parts[1].is_zero());
        assert!(parts[2].is_zero());
    }

    #[test]
    fn decompose_roundtrip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 2;
        let p = 2;
        let basis = GradedBasis::new(n + p, 4);
        let mut h = Polynomial::zero(n + p);
        for e in &basis.exponents {
            let xi_deg: u32 = e.0[n..].iter().sum();
            if xi_deg <= 3 {
                h.add_term(e.clone(), rng.gen_range(-1.0..1.0));
            }
        }
        let parts = decompose_in_xi(&h, n, p, 3).unwrap();
        let xi_basis = GradedBasis::new(p, 3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xi: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mons = xi_basis.eval_monomials(&xi);
            let rebuilt: f64 = parts
                .iter()
                .zip(&mons)
                .map(|(q, m)| q.eval(&x).unwrap() * m)
                .sum();
            let full: Vec<f64> = x.iter().chain(&xi).copied().collect();
            assert_relative_eq!(rebuilt, h.eval(&full).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn product_eval_property() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut a = Polynomial::zero(3);
            let mut b = Polynomial::zero(3);
            let basis = GradedBasis::new(3, 3);
            for e in &basis.exponents {
                if rng.gen_bool(0.4) {
                    a.add_term(e.clone(), rng.gen_range(-2.0..2.0));
                }
                if rng.gen_bool(0.4) {
                    b.add_term(e.clone(), rng.gen_range(-2.0..2.0));
                }
            }
            let prod = &a * &b;
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = prod.eval(&v).unwrap();
            let rhs = a.eval(&v).unwrap() * b.eval(&v).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}
