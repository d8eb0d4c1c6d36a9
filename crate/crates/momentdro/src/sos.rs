//! SOS and quadratic-module encodings with Gram certificates, plus the
//! SOS-convexity test and the robust SOS-concavity sufficient test.
//!
//! Targets may have coefficients that are affine expressions in conic
//! decision variables, so the same encoder serves standalone feasibility
//! checks and coefficient-matching constraints inside larger programs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::conic::{packed_lower_index, unpack_symmetric, Cone, ConicProgramBuilder, SolveStatus};
use crate::poly::{hessian, Exponent, GradedBasis, PolyMatrix, Polynomial};
use crate::{Error, Result};

/// An affine expression `constant + sum coef * var` over conic variables.
#[derive(Clone, Debug, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn variable(v: usize, coef: f64) -> Self {
        Affine {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_var(&mut self, v: usize, coef: f64) {
        self.terms.push((v, coef));
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * vals[v]).sum::<f64>()
    }
}

/// A polynomial whose coefficients are [`Affine`] expressions.
#[derive(Clone, Debug)]
pub struct LinearPoly {
    pub var_count: usize,
    pub terms: BTreeMap<Exponent, Affine>,
}

impl LinearPoly {
    pub fn zero(var_count: usize) -> Self {
        LinearPoly {
            var_count,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        LinearPoly {
            var_count: p.var_count,
            terms: p
                .terms
                .iter()
                .map(|(e, &c)| (e.clone(), Affine::constant(c)))
                .collect(),
        }
    }

    pub fn add_constant(&mut self, e: Exponent, c: f64) {
        self.entry(e).constant += c;
    }

    pub fn add_variable(&mut self, e: Exponent, var: usize, coef: f64) {
        self.entry(e).add_var(var, coef);
    }

    fn entry(&mut self, e: Exponent) -> &mut Affine {
        debug_assert_eq!(e.len(), self.var_count);
        self.terms.entry(e).or_default()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Substitutes conic variable values, yielding an ordinary polynomial.
    pub fn eval_coeffs(&self, vals: &[f64]) -> Polynomial {
        let mut p = Polynomial::zero(self.var_count);
        for (e, a) in &self.terms {
            p.add_term(e.clone(), a.eval(vals));
        }
        p
    }
}

/// A symmetric matrix of [`LinearPoly`] entries, stored as the upper
/// triangle row by row.
#[derive(Clone, Debug)]
pub struct LinearPolyMatrix {
    pub size: usize,
    entries: Vec<LinearPoly>,
}

impl LinearPolyMatrix {
    pub fn scalar(p: LinearPoly) -> Self {
        LinearPolyMatrix {
            size: 1,
            entries: vec![p],
        }
    }

    pub fn from_poly_matrix(m: &PolyMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.size {
            for j in i..m.size {
                entries.push(LinearPoly::from_poly(m.entry(i, j)));
            }
        }
        LinearPolyMatrix {
            size: m.size,
            entries,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinearPoly {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[i * self.size - i * (i + 1) / 2 + j]
    }

    pub fn var_count(&self) -> usize {
        self.entries[0].var_count
    }
}

/// One Gram variable block of an encoding.
#[derive(Clone, Copy, Debug)]
pub struct GramBlock {
    /// Start of the packed block in the conic variable vector.
    pub offset: usize,
    /// Side of the full (unpacked) Gram matrix.
    pub side: usize,
    /// Half-degree of the monomial basis attached to this generator.
    pub half_degree: u32,
}

/// A coefficient-matching encoding of
/// `target(u) = sum_l g_l(u) * (I_size (x) [u]_{s_l})' X_l (I_size (x) [u]_{s_l})`
/// with every `X_l` psd.
#[derive(Clone, Debug)]
pub struct QmodEncoding {
    pub var_count: usize,
    pub size: usize,
    pub order: u32,
    pub gens: Vec<Polynomial>,
    pub grams: Vec<GramBlock>,
    /// Equality-row index per (i, j, monomial), for dual recovery.
    pub rows: BTreeMap<(usize, usize, Exponent), usize>,
    target: LinearPolyMatrix,
}

impl QmodEncoding {
    pub fn row(&self, i: usize, j: usize, e: &Exponent) -> Option<usize> {
        self.rows.get(&(i, j, e.clone())).copied()
    }

    /// The solved Gram matrix of generator `l`, unpacked.
    pub fn gram_matrix(&self, vals: &[f64], l: usize) -> DMatrix<f64> {
        let b = &self.grams[l];
        unpack_symmetric(&vals[b.offset..b.offset + b.side * (b.side + 1) / 2], b.side)
    }

    /// Reassembles entry (i, j) of the right-hand side from solved Grams.
    pub fn reconstruct_entry(&self, vals: &[f64], i: usize, j: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.var_count);
        for (l, g) in self.gens.iter().enumerate() {
            let block = &self.grams[l];
            let basis = GradedBasis::new(self.var_count, block.half_degree);
            let nl = basis.len();
            let x = self.gram_matrix(vals, l);
            for a in 0..nl {
                for b in 0..nl {
                    let coef = x[(i * nl + a, j * nl + b)];
                    if coef == 0.0 {
                        continue;
                    }
                    let ab = basis.exponents[a].add(&basis.exponents[b]);
                    for (gamma, &gc) in &g.terms {
                        out.add_term(gamma.add(&ab), gc * coef);
                    }
                }
            }
        }
        out
    }

    /// Max-norm coefficient residual between the reassembled right-hand
    /// side and the target, after substituting the solved variable values.
    pub fn residual(&self, vals: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size {
            for j in i..self.size {
                let lhs = self.target.entry(i, j).eval_coeffs(vals);
                let rhs = self.reconstruct_entry(vals, i, j);
                let diff = &lhs - &rhs;
                for (_, c) in &diff.terms {
                    worst = worst.max(c.abs());
                }
            }
        }
        worst
    }
}

/// Adds the Gram blocks and coefficient-matching rows expressing that the
/// symmetric matrix polynomial `target` lies in the order-`2k` truncation of
/// the matrix quadratic module generated by `gens` (which must include the
/// unit generator explicitly if wanted).
pub fn encode_matrix_qmod(
    builder: &mut ConicProgramBuilder,
    target: &LinearPolyMatrix,
    gens: &[Polynomial],
    k: u32,
) -> Result<QmodEncoding> {
    let var_count = target.var_count();
    let size = target.size;
    if gens.is_empty() {
        return Err(Error::Semantic("empty generator list".into()));
    }
    for g in gens {
        if g.var_count != var_count {
            return Err(Error::DimensionMismatch {
                expected: var_count,
                got: g.var_count,
            });
        }
        if g.degree() > 2 * k {
            return Err(Error::DegreeOverflow {
                degree: g.degree(),
                max: 2 * k,
            });
        }
    }
    for i in 0..size {
        for j in i..size {
            let deg = target.entry(i, j).degree();
            if deg > 2 * k {
                return Err(Error::DegreeOverflow {
                    degree: deg,
                    max: 2 * k,
                });
            }
        }
    }

    let mut grams = Vec::with_capacity(gens.len());
    for g in gens {
        let s = k - g.degree().div_ceil(2);
        let side = size * GradedBasis::new(var_count, s).len();
        let offset = builder.add_block(Cone::Psd(side));
        grams.push(GramBlock {
            offset,
            side,
            half_degree: s,
        });
    }

    // accumulate, per (i, j, monomial), the linear gram contributions
    let mut lhs: BTreeMap<(usize, usize, Exponent), BTreeMap<usize, f64>> = BTreeMap::new();
    for (l, g) in gens.iter().enumerate() {
        let block = &grams[l];
        let basis = GradedBasis::new(var_count, block.half_degree);
        let nl = basis.len();
        for i in 0..size {
            for j in i..size {
                for a in 0..nl {
                    for b in 0..nl {
                        let ri = i * nl + a;
                        let rj = j * nl + b;
                        let var =
                            block.offset + packed_lower_index(block.side, ri.max(rj), ri.min(rj));
                        let ab = basis.exponents[a].add(&basis.exponents[b]);
                        for (gamma, &gc) in &g.terms {
                            *lhs.entry((i, j, gamma.add(&ab)))
                                .or_default()
                                .entry(var)
                                .or_insert(0.0) += gc;
                        }
                    }
                }
            }
        }
    }
    // rows also cover target monomials absent from the gram span
    for i in 0..size {
        for j in i..size {
            for e in target.entry(i, j).terms.keys() {
                lhs.entry((i, j, e.clone())).or_default();
            }
        }
    }

    let mut rows = BTreeMap::new();
    for (key, gram_terms) in lhs {
        let (i, j, ref e) = key;
        let mut entries: Vec<(usize, f64)> = gram_terms
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .collect();
        let mut rhs = 0.0;
        if let Some(aff) = target.entry(i, j).terms.get(e) {
            rhs = aff.constant;
            for &(v, c) in &aff.terms {
                entries.push((v, -c));
            }
        }
        let row = builder.add_row(entries, rhs);
        rows.insert(key, row);
    }

    Ok(QmodEncoding {
        var_count,
        size,
        order: k,
        gens: gens.to_vec(),
        grams,
        rows,
        target: target.clone(),
    })
}

/// Scalar SOS membership: `target` in `Sigma[u]_{2k}`.
pub fn encode_sos(
    builder: &mut ConicProgramBuilder,
    target: &LinearPoly,
    k: u32,
) -> Result<QmodEncoding> {
    let unit = Polynomial::constant(target.var_count, 1.0);
    encode_matrix_qmod(
        builder,
        &LinearPolyMatrix::scalar(target.clone()),
        &[unit],
        k,
    )
}

/// Scalar quadratic-module membership: `target` in `qmod(g)_{2k}`, with the
/// unit generator prepended automatically.
pub fn encode_qmod_membership(
    builder: &mut ConicProgramBuilder,
    target: &LinearPoly,
    g: &[Polynomial],
    k: u32,
) -> Result<QmodEncoding> {
    let mut gens = vec![Polynomial::constant(target.var_count, 1.0)];
    gens.extend_from_slice(g);
    encode_matrix_qmod(builder, &LinearPolyMatrix::scalar(target.clone()), &gens, k)
}

/// A feasibility witness: the encoding plus the solved variable vector.
#[derive(Clone, Debug)]
pub struct GramCertificate {
    pub encoding: Option<QmodEncoding>,
    pub point: Vec<f64>,
}

impl GramCertificate {
    fn vacuous() -> Self {
        GramCertificate {
            encoding: None,
            point: Vec::new(),
        }
    }

    /// Reassembly residual; zero for vacuous certificates.
    pub fn residual(&self) -> f64 {
        self.encoding
            .as_ref()
            .map(|e| e.residual(&self.point))
            .unwrap_or(0.0)
    }
}

/// Solves a pure feasibility program; `None` means infeasible.
pub(crate) fn solve_feasibility(builder: ConicProgramBuilder) -> Result<Option<Vec<f64>>> {
    let prog = builder.build();
    let sol = prog.solve()?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(Some(sol.v)),
        SolveStatus::Infeasible => Ok(None),
        SolveStatus::Unbounded => Err(Error::Solver(
            "feasibility program reported unbounded".into(),
        )),
    }
}

/// SOS membership test for an ordinary polynomial.
pub fn check_sos(p: &Polynomial, k: u32) -> Result<Option<GramCertificate>> {
    let mut builder = ConicProgramBuilder::new();
    let enc = encode_sos(&mut builder, &LinearPoly::from_poly(p), k)?;
    Ok(solve_feasibility(builder)?.map(|point| GramCertificate {
        encoding: Some(enc),
        point,
    }))
}

/// SOS-convexity: does `hess(psi) = (I (x) [x]_{k-1})' X (I (x) [x]_{k-1})`
/// admit a psd `X`? This Gram representation is exact, so `None` means the
/// polynomial is not SOS-convex (for even degree; odd degree is never
/// convex unless affine).
/// Evaluates a polynomial matrix at a point and returns its largest
/// eigenvalue; used for cheap sampling-based refutations before the SDP.
fn max_eigenvalue_at(m: &PolyMatrix, point: &[f64]) -> Result<f64> {
    let mut h = DMatrix::zeros(m.size, m.size);
    for i in 0..m.size {
        for j in 0..m.size {
            h[(i, j)] = m.entries[i][j].eval(point)?;
        }
    }
    Ok(nalgebra::SymmetricEigen::new(h).eigenvalues.max())
}

pub fn check_sos_convex(psi: &Polynomial) -> Result<Option<GramCertificate>> {
    let deg = psi.degree();
    if deg <= 1 {
        return Ok(Some(GramCertificate::vacuous()));
    }
    if deg % 2 == 1 {
        return Ok(None);
    }
    let hess = hessian(psi, 0..psi.var_count);
    // a sampled point with an indefinite Hessian refutes convexity outright
    // and saves the feasibility solve
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let neg = PolyMatrix {
            size: hess.size,
            entries: hess
                .entries
                .iter()
                .map(|row| row.iter().map(|p| -p).collect())
                .collect(),
        };
        for _ in 0..64 {
            let x: Vec<f64> = (0..psi.var_count).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if max_eigenvalue_at(&neg, &x)? > 1e-7 {
                return Ok(None);
            }
        }
    }
    let target = LinearPolyMatrix::from_poly_matrix(&hess);
    let unit = Polynomial::constant(psi.var_count, 1.0);
    let mut builder = ConicProgramBuilder::new();
    let enc = encode_matrix_qmod(&mut builder, &target, &[unit], deg / 2 - 1)?;
    Ok(solve_feasibility(builder)?.map(|point| GramCertificate {
        encoding: Some(enc),
        point,
    }))
}

pub fn is_sos_convex(psi: &Polynomial) -> Result<bool> {
    Ok(check_sos_convex(psi)?.is_some())
}

/// Outcome of the robust SOS-concavity test; the test is sufficient only,
/// so failure is reported as `Unknown`, never as a refutation.
#[derive(Clone, Debug)]
pub enum RobustConcavity {
    Certified(GramCertificate),
    Unknown,
}

impl RobustConcavity {
    pub fn is_certified(&self) -> bool {
        matches!(self, RobustConcavity::Certified(_))
    }
}

/// Tests whether `-hess_x(h)` lies in the matrix quadratic module generated
/// by `g` (polynomials in the trailing `p` variables of `h`) at order
/// `2k'`: a sufficient condition for `h` to be SOS-concave in `x` for every
/// point of `S = {g >= 0}`.
pub fn is_robust_sos_concave(
    h: &Polynomial,
    n: usize,
    p: usize,
    g: &[Polynomial],
    k_prime: u32,
) -> Result<RobustConcavity> {
    if h.var_count != n + p {
        return Err(Error::DimensionMismatch {
            expected: n + p,
            got: h.var_count,
        });
    }
    if h.degree_in(0..n) <= 1 {
        // affine in x: concave outright
        return Ok(RobustConcavity::Certified(GramCertificate::vacuous()));
    }
    let hess = hessian(h, 0..n);
    // sampling refutation: a support point where some x sees a convex
    // direction of h rules the certificate out without solving anything
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut tried = 0;
        let mut draws = 0;
        while tried < 64 && draws < 4096 {
            draws += 1;
            let xi: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if g.iter().any(|gj| gj.eval(&xi).map_or(true, |v| v < 0.0)) {
                continue;
            }
            tried += 1;
            let mut point: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            point.extend_from_slice(&xi);
            if max_eigenvalue_at(&hess, &point)? > 1e-7 {
                return Ok(RobustConcavity::Unknown);
            }
        }
    }
    for gj in g {
        if gj.var_count != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: gj.var_count,
            });
        }
    }
    let neg = PolyMatrix {
        size: n,
        entries: hess
            .entries
            .iter()
            .map(|row| row.iter().map(|p| -p).collect())
            .collect(),
    };
    // for an x-quadratic h the Hessian entries only involve the trailing
    // xi variables; encoding the membership over those alone keeps the
    // Gram blocks an order of magnitude smaller
    let x_free = h.degree_in(0..n) <= 2;
    let (target, gens) = if x_free {
        let reduced = PolyMatrix {
            size: n,
            entries: neg
                .entries
                .iter()
                .map(|row| row.iter().map(|e| e.drop_leading(n)).collect())
                .collect(),
        };
        let mut gens = vec![Polynomial::constant(p, 1.0)];
        gens.extend(g.iter().cloned());
        (LinearPolyMatrix::from_poly_matrix(&reduced), gens)
    } else {
        let mut gens = vec![Polynomial::constant(n + p, 1.0)];
        gens.extend(g.iter().map(|gj| gj.embed(n + p, n)));
        (LinearPolyMatrix::from_poly_matrix(&neg), gens)
    };
    let mut builder = ConicProgramBuilder::new();
    let enc = encode_matrix_qmod(&mut builder, &target, &gens, k_prime)?;
    match solve_feasibility(builder)? {
        Some(point) => Ok(RobustConcavity::Certified(GramCertificate {
            encoding: Some(enc),
            point,
        })),
        None => Ok(RobustConcavity::Unknown),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{riesz, AtomicMeasure};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn poly(var_count: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        let mut p = Polynomial::zero(var_count);
        for (e, c) in terms {
            p.add_term(Exponent(e.to_vec()), *c);
        }
        p
    }

    #[test]
    fn sos_square() {
        // (1 + s)^2: the Gram over [1, s] is forced to the all-ones matrix.
        let p = poly(1, &[(&[0], 1.0), (&[1], 2.0), (&[2], 1.0)]);
        let cert = check_sos(&p, 1).unwrap().expect("should be sos");
        assert!(cert.residual() < 1e-7);
        let enc = cert.encoding.as_ref().unwrap();
        let gram = enc.gram_matrix(&cert.point, 0);
        assert_relative_eq!(gram[(0, 0)], 1.0, epsilon = 1e-5);
        assert_relative_eq!(gram[(0, 1)], 1.0, epsilon = 1e-5);
        assert_relative_eq!(gram[(1, 1)], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn sos_odd_rejected() {
        let p = poly(1, &[(&[1], 1.0)]);
        assert!(check_sos(&p, 1).unwrap().is_none());
    }

    #[test]
    fn sos_random_gram() {
        // [v]_2' B'B [v]_2 is sos by construction.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let basis = GradedBasis::new(2, 2);
        let nb = basis.len();
        let bmat: Vec<Vec<f64>> = (0..nb)
            .map(|_| (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut target = Polynomial::zero(2);
        for r in 0..nb {
            let mut row = Polynomial::zero(2);
            for (c, e) in basis.exponents.iter().enumerate() {
                row.add_term(e.clone(), bmat[r][c]);
            }
            target = &target + &(&row * &row);
        }
        let cert = check_sos(&target, 2).unwrap().expect("constructive sos");
        assert!(cert.residual() < 1e-6);
    }

    #[test]
    fn qmod_generator_itself() {
        let g1 = poly(1, &[(&[1], 1.0)]); // s >= 0
        let mut builder = ConicProgramBuilder::new();
        encode_qmod_membership(&mut builder, &LinearPoly::from_poly(&g1), &[g1.clone()], 1)
            .unwrap();
        assert!(solve_feasibility(builder).unwrap().is_some());
    }

    #[test]
    fn qmod_interval_member_and_nonmember() {
        let g = [poly(1, &[(&[1], 1.0)]), poly(1, &[(&[0], 1.0), (&[1], -1.0)])];
        // 1 + s is nonnegative on [0, 1]: 1*1 + 1*s
        let member = poly(1, &[(&[0], 1.0), (&[1], 1.0)]);
        let mut builder = ConicProgramBuilder::new();
        encode_qmod_membership(&mut builder, &LinearPoly::from_poly(&member), &g, 1).unwrap();
        assert!(solve_feasibility(builder).unwrap().is_some());

        // s - 1 is negative at 0, hence outside every truncation
        let outside = poly(1, &[(&[1], 1.0), (&[0], -1.0)]);
        for k in 1..=3 {
            let mut builder = ConicProgramBuilder::new();
            encode_qmod_membership(&mut builder, &LinearPoly::from_poly(&outside), &g, k)
                .unwrap();
            assert!(
                solve_feasibility(builder).unwrap().is_none(),
                "order {k} should be infeasible"
            );
        }
    }

    #[test]
    fn qmod_monotone_in_order() {
        let g = [poly(1, &[(&[1], 1.0)]), poly(1, &[(&[0], 1.0), (&[1], -1.0)])];
        // members of qmod(g) at k = 1 stay members at k = 2
        let targets = [
            poly(1, &[(&[0], 1.0), (&[1], 1.0)]),
            poly(1, &[(&[0], 0.5), (&[1], -0.5)]),
            poly(1, &[(&[1], 1.0), (&[2], 1.0)]),
        ];
        for t in &targets {
            for k in [1, 2] {
                let mut builder = ConicProgramBuilder::new();
                encode_qmod_membership(&mut builder, &LinearPoly::from_poly(t), &g, k).unwrap();
                assert!(
                    solve_feasibility(builder).unwrap().is_some(),
                    "{t:?} at order {k}"
                );
            }
        }
    }

    #[test]
    fn sos_convex_basic() {
        assert!(is_sos_convex(&poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0)])).unwrap());
        assert!(!is_sos_convex(&poly(2, &[(&[2, 0], -1.0)])).unwrap());
        // quartic with indefinite Hessian
        assert!(!is_sos_convex(&poly(2, &[(&[2, 2], 1.0)])).unwrap());
    }

    #[test]
    fn sos_convex_quadratic_objective() {
        // 2x1 - 3x2 + x1^2 - x1x2 + x2^2 has constant Hessian [[2,-1],[-1,2]].
        let f = poly(
            2,
            &[
                (&[1, 0], 2.0),
                (&[0, 1], -3.0),
                (&[2, 0], 1.0),
                (&[1, 1], -1.0),
                (&[0, 2], 1.0),
            ],
        );
        let cert = check_sos_convex(&f).unwrap().expect("convex quadratic");
        assert!(cert.residual() < 1e-7);
    }

    #[test]
    fn sos_convex_affine_and_odd() {
        assert!(is_sos_convex(&poly(2, &[(&[1, 0], 3.0), (&[0, 0], -1.0)])).unwrap());
        assert!(!is_sos_convex(&poly(1, &[(&[3], 1.0)])).unwrap());
    }

    #[test]
    fn robust_concave_univariate() {
        // h = (x2 - x1^2) s + x1 x2 s^2 + (x1 - x2^2) s^3 over S = [0, 1]:
        // -hess_x h = diag(2s, 2s^3).
        let h = poly(
            3,
            &[
                (&[0, 1, 1], 1.0),
                (&[2, 0, 1], -1.0),
                (&[1, 1, 2], 1.0),
                (&[1, 0, 3], 1.0),
                (&[0, 2, 3], -1.0),
            ],
        );
        let g = [poly(1, &[(&[1], 1.0)]), poly(1, &[(&[0], 1.0), (&[1], -1.0)])];
        let res = is_robust_sos_concave(&h, 2, 1, &g, 2).unwrap();
        let RobustConcavity::Certified(cert) = res else {
            panic!("expected certification");
        };
        assert!(cert.residual() < 1e-6);
    }

    #[test]
    fn robust_concave_unknown() {
        // h = x1 x2 - x1 s1^2 - x2^2 s2^2: -hess_x h is indefinite at s = 0.
        let h = poly(
            4,
            &[
                (&[1, 1, 0, 0], 1.0),
                (&[1, 0, 2, 0], -1.0),
                (&[0, 2, 0, 2], -1.0),
            ],
        );
        let g = [
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0)]),
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[0, 1], -1.0)]),
        ];
        for k in [1, 2] {
            let res = is_robust_sos_concave(&h, 2, 2, &g, k).unwrap();
            assert!(!res.is_certified(), "order {k} must stay unknown");
        }
    }

    #[test]
    fn robust_concave_triangle() {
        // -hess_x h = 2 diag(s1^3, s2^3) over the triangle
        // {s1 >= 0, s2 - s1 >= 0, 1 - s1 - s2 >= 0}.
        let h = poly(
            4,
            &[
                (&[1, 0, 2, 0], 1.0),
                (&[0, 1, 0, 2], -1.0),
                (&[2, 0, 3, 0], -1.0),
                (&[0, 2, 0, 3], -1.0),
            ],
        );
        let g = [
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 1], 1.0), (&[1, 0], -1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0), (&[0, 1], -1.0)]),
        ];
        let res = is_robust_sos_concave(&h, 2, 2, &g, 2).unwrap();
        let RobustConcavity::Certified(cert) = res else {
            panic!("expected certification");
        };
        assert!(cert.residual() < 1e-6);
    }

    #[test]
    fn jensen_for_sos_convex() {
        // For SOS-convex psi and any w with w0 = 1, M_t[w] psd:
        // psi(pi(w)) <= <psi, w>. Sample w as moments of random probability
        // measures.
        let psi = poly(
            2,
            &[
                (&[1, 0], 2.0),
                (&[0, 1], -3.0),
                (&[2, 0], 1.0),
                (&[1, 1], -1.0),
                (&[0, 2], 1.0),
            ],
        );
        assert!(is_sos_convex(&psi).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let atoms: Vec<(f64, Vec<f64>)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(0.01..1.0),
                        vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                    )
                })
                .collect();
            let mass: f64 = atoms.iter().map(|(t, _)| t).sum();
            let atoms = atoms
                .into_iter()
                .map(|(t, u)| (t / mass, u))
                .collect::<Vec<_>>();
            let w = AtomicMeasure { atoms }.moments(2, 2);
            let proj = [w.values[1], w.values[2]];
            let lhs = psi.eval(&proj).unwrap();
            let rhs = riesz(&psi, &w).unwrap();
            assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }
    }
}

