//! Truncated moment sequences, moment/localizing matrices, flat truncation
//! and atomic-measure extraction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly::{basis_len, Exponent, GradedBasis, Polynomial};
use crate::{Error, Result};

/// A truncated moment sequence: a dense vector indexed by the graded
/// monomial basis of `var_count` variables up to `degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct TMS {
    pub var_count: usize,
    pub degree: u32,
    pub values: Vec<f64>,
}

impl TMS {
    pub fn new(var_count: usize, degree: u32, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), basis_len(var_count, degree));
        TMS {
            var_count,
            degree,
            values,
        }
    }

    pub fn zeros(var_count: usize, degree: u32) -> Self {
        TMS {
            var_count,
            degree,
            values: vec![0.0; basis_len(var_count, degree)],
        }
    }

    /// Moment vector `[v]_degree` of the Dirac measure at `point`.
    pub fn dirac(point: &[f64], degree: u32) -> Self {
        let basis = GradedBasis::new(point.len(), degree);
        TMS {
            var_count: point.len(),
            degree,
            values: basis.eval_monomials(point),
        }
    }

    pub fn basis(&self) -> GradedBasis {
        GradedBasis::new(self.var_count, self.degree)
    }
}

/// Riesz pairing `<f, w> = sum_a f_a w_a`.
pub fn riesz(f: &Polynomial, w: &TMS) -> Result<f64> {
    if f.var_count != w.var_count {
        return Err(Error::DimensionMismatch {
            expected: w.var_count,
            got: f.var_count,
        });
    }
    let basis = w.basis();
    let mut acc = 0.0;
    for (e, &c) in &f.terms {
        let idx = basis.index_of(e).ok_or(Error::DegreeOverflow {
            degree: e.total_degree(),
            max: w.degree,
        })?;
        acc += c * w.values[idx];
    }
    Ok(acc)
}

/// The `k`th order moment matrix `M_k[w]`, rows/columns indexed by the
/// graded basis of degree `k`.
pub fn moment_matrix(w: &TMS, k: u32) -> Result<DMatrix<f64>> {
    localizing_matrix(&Polynomial::constant(w.var_count, 1.0), w, k)
}

/// The `k`th order localizing matrix `L_g^{(k)}[w]` of side `C(n+s, s)`,
/// `s = k - ceil(deg(g)/2)`, with entry `(a, b) = sum_c g_c w_{c+a+b}`.
pub fn localizing_matrix(g: &Polynomial, w: &TMS, k: u32) -> Result<DMatrix<f64>> {
    if 2 * k < g.degree() || w.degree < 2 * k {
        return Err(Error::DegreeOverflow {
            degree: 2 * k,
            max: w.degree,
        });
    }
    let s = k - g.degree().div_ceil(2);
    let row_basis = GradedBasis::new(w.var_count, s);
    let full = w.basis();
    let m = row_basis.len();
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let ab = row_basis.exponents[a].add(&row_basis.exponents[b]);
            let mut acc = 0.0;
            for (gamma, &c) in &g.terms {
                let idx = full.index_of(&gamma.add(&ab)).ok_or(Error::DegreeOverflow {
                    degree: gamma.total_degree() + ab.total_degree(),
                    max: w.degree,
                })?;
                acc += c * w.values[idx];
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc;
        }
    }
    Ok(out)
}

/// Degree-`d` truncation `z|_d`; a prefix restriction by the graded order.
pub fn truncate(z: &TMS, d: u32) -> Result<TMS> {
    if d > z.degree {
        return Err(Error::DegreeOverflow {
            degree: d,
            max: z.degree,
        });
    }
    let len = basis_len(z.var_count, d);
    Ok(TMS {
        var_count: z.var_count,
        degree: d,
        values: z.values[..len].to_vec(),
    })
}

/// The projection `pi(w) = (w_{e_1}, ..., w_{e_n})`.
pub fn project_pi(w: &TMS) -> Vec<f64> {
    assert!(w.degree >= 1);
    w.values[1..=w.var_count].to_vec()
}

/// Numeric rank: the number of singular values above `tol * max(s_1, 1)`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let cutoff = tol * sv[0].max(1.0);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Result of a successful flat truncation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlatTruncation {
    pub d1: u32,
    pub rank: usize,
}

/// Searches for the smallest `d1` in `[d0, k1]` with
/// `rank M_{d1}[z] == rank M_{d1-d2}[z]`. Absence is a value, not an error.
pub fn flat_truncation_check(z: &TMS, d0: u32, d2: u32, k1: u32, rank_tol: f64) -> Option<FlatTruncation> {
    debug_assert!(z.degree >= 2 * k1);
    for d1 in d0.max(d2)..=k1 {
        let hi = moment_matrix(z, d1).ok()?;
        let lo = moment_matrix(z, d1 - d2).ok()?;
        let r_hi = numeric_rank(&hi, rank_tol);
        let r_lo = numeric_rank(&lo, rank_tol);
        if r_hi == r_lo {
            return Some(FlatTruncation { d1, rank: r_hi });
        }
    }
    None
}

/// A finitely atomic measure `sum_i theta_i * delta_{u_i}`.
#[derive(Clone, Debug)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, Vec<f64>)>,
}

impl AtomicMeasure {
    pub fn var_count(&self) -> usize {
        self.atoms.first().map(|(_, u)| u.len()).unwrap_or(0)
    }

    /// Moment vector of the measure up to degree `d`.
    pub fn moments(&self, var_count: usize, d: u32) -> TMS {
        let basis = GradedBasis::new(var_count, d);
        let mut values = vec![0.0; basis.len()];
        for (theta, u) in &self.atoms {
            for (v, m) in values.iter_mut().zip(basis.eval_monomials(u)) {
                *v += theta * m;
            }
        }
        TMS {
            var_count,
            degree: d,
            values,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(t, _)| t).sum()
    }
}

/// Extraction options; the random multiplication-operator combination is
/// seeded so results are reproducible.
#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions {
    pub seed: u64,
    pub rank_tol: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            seed: 0,
            rank_tol: 1e-6,
        }
    }
}

/// Recovers an `r`-atomic measure from a tms whose moment matrix is flat at
/// degree `d1` (with `d2 = ceil(deg(g)/2)`).
///
/// The method: factor `M_{d1}[z]`, pick a monomial basis of the column space
/// by graded-order row echelon, form multiplication operators for each
/// variable on that basis, simultaneously diagonalize them via the Schur
/// decomposition of a seeded random convex combination, then fit weights by
/// least squares against the moment vector.
pub fn extract_atoms(
    z: &TMS,
    d1: u32,
    d2: u32,
    r: usize,
    opts: &ExtractOptions,
) -> Result<AtomicMeasure> {
    let p = z.var_count;
    let m = moment_matrix(z, d1)?;
    let n = m.nrows();
    if r == 0 {
        return Ok(AtomicMeasure { atoms: vec![] });
    }
    if r > n {
        return Err(Error::Extraction(format!(
            "rank {r} exceeds moment matrix side {n}"
        )));
    }

    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let lam_max = eig.eigenvalues[order[0]].max(0.0);
    if lam_max <= 0.0 {
        return Err(Error::Extraction("moment matrix is numerically zero".into()));
    }
    // V has one row per degree-d1 monomial; M_{d1}[z] ~ V V^T.
    let mut v = DMatrix::zeros(n, r);
    for (col, &src) in order.iter().take(r).enumerate() {
        let lam = eig.eigenvalues[src].max(0.0);
        let scale = lam.sqrt();
        for row in 0..n {
            v[(row, col)] = eig.eigenvectors[(row, src)] * scale;
        }
    }

    // Graded-order row echelon: the first r independent rows give the
    // monomial basis of the quotient space.
    let basis = GradedBasis::new(p, d1);
    let mut pivots: Vec<usize> = Vec::with_capacity(r);
    let mut q: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(r);
    let piv_tol = 1e-9 * lam_max.sqrt();
    for row in 0..n {
        if pivots.len() == r {
            break;
        }
        let mut res = v.row(row).transpose();
        for u in &q {
            let c = u.dot(&res);
            res -= u * c;
        }
        let norm = res.norm();
        if norm > piv_tol {
            pivots.push(row);
            q.push(res / norm);
        }
    }
    if pivots.len() < r {
        return Err(Error::Extraction(format!(
            "only {} independent rows found for rank {r}",
            pivots.len()
        )));
    }

    // B: the pivot rows of V; its conditioning controls the whole extraction.
    let mut b = DMatrix::zeros(r, r);
    for (j, &row) in pivots.iter().enumerate() {
        b.row_mut(j).copy_from(&v.row(row));
    }
    let b_svd = b.clone().svd(true, true);
    let smax = b_svd.singular_values[0];
    let smin = b_svd.singular_values[r - 1];
    if smin < 1e-10 * smax {
        return Err(Error::Extraction(format!(
            "ill-conditioned multiplication basis (sigma ratio {:.3e})",
            smin / smax
        )));
    }
    let bt_lu = b.transpose().lu();

    // Multiplication operators: row j of N_i expresses xi_i * b_j on the basis.
    let mut ops: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    for i in 0..p {
        let mut op = DMatrix::zeros(r, r);
        for (j, &piv) in pivots.iter().enumerate() {
            let mono = basis.exponents[piv].add(&Exponent::unit(p, i));
            let idx = basis.index_of(&mono).ok_or_else(|| {
                Error::Extraction(format!(
                    "basis monomial of degree {} escapes the flat window (d2 = {d2})",
                    mono.total_degree()
                ))
            })?;
            let rhs = v.row(idx).transpose();
            let coeffs = bt_lu
                .solve(&rhs)
                .ok_or_else(|| Error::Extraction("singular multiplication solve".into()))?;
            op.row_mut(j).copy_from(&coeffs.transpose());
        }
        ops.push(op);
    }

    // Seeded random convex combination, then a real Schur decomposition;
    // the Schur vectors jointly (near-)diagonalize every operator.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let lambdas: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = lambdas.iter().sum();
    let mut combo = DMatrix::zeros(r, r);
    for (lam, op) in lambdas.iter().zip(&ops) {
        combo += op * (*lam / total);
    }
    let schur = nalgebra::Schur::new(combo);
    let (qmat, t) = schur.unpack();
    for j in 0..r - 1 {
        if t[(j + 1, j)].abs() > 1e-6 * (1.0 + t[(j, j)].abs() + t[(j + 1, j + 1)].abs()) {
            return Err(Error::Extraction(
                "complex eigenvalue block in multiplication operator".into(),
            ));
        }
    }
    let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(r);
    for j in 0..r {
        let qj = qmat.column(j);
        let point: Vec<f64> = ops.iter().map(|op| (qj.transpose() * op * qj)[(0, 0)]).collect();
        atoms.push(point);
    }

    // Weights by least squares against the flat window of the moment vector.
    let fit_deg = 2 * (d1 - d2);
    let fit_basis = GradedBasis::new(p, fit_deg);
    let rows = fit_basis.len();
    let mut a = DMatrix::zeros(rows, r);
    for (j, u) in atoms.iter().enumerate() {
        for (i, val) in fit_basis.eval_monomials(u).iter().enumerate() {
            a[(i, j)] = *val;
        }
    }
    let target = nalgebra::DVector::from_vec(z.values[..rows].to_vec());
    let theta = a
        .svd(true, true)
        .solve(&target, 1e-12)
        .map_err(|e| Error::Extraction(e.to_string()))?;

    let mut out = Vec::with_capacity(r);
    for (j, u) in atoms.into_iter().enumerate() {
        let w = theta[j];
        if w < -1e-8 {
            return Err(Error::Extraction(format!("negative atom weight {w:.3e}")));
        }
        if w > 1e-8 {
            out.push((w, u));
        }
    }
    Ok(AtomicMeasure { atoms: out })
}
