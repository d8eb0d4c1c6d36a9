//! Problem model: objective, constraints, robust constraint, support set,
//! the moment ambiguity cone, degree bookkeeping and the coefficient
//! matrix `H` with `h(x, xi) = (H [x]_{2t})' [xi]_d`.

use nalgebra::DMatrix;

use crate::poly::{basis_len, decompose_in_xi, Exponent, GradedBasis, Polynomial};
use crate::{Error, Result};

/// Degree bookkeeping for a problem instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degrees {
    /// Degree of `h` in the random variables.
    pub d: u32,
    /// Half-degree of the decision-variable moment vector.
    pub t: u32,
    /// Initial relaxation order.
    pub d0: u32,
    /// Half-degree of the support generators.
    pub d2: u32,
}

/// How a [`ConeYDescription`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Supplied directly as a homogeneous cone.
    UserHomogeneous,
    /// Derived from a normalized description with the `y_0 = 1` marker.
    AutoHomogenized,
}

/// One conic block of the ambiguity cone: a linear map of the moment vector
/// `y` into a nonnegative, second-order, or psd cone.
#[derive(Clone, Debug)]
pub enum YBlock {
    /// Rows `<q, y> >= 0`, one per polynomial `q` in the random variables
    /// (the constant coefficient of `q` pairs with `y_0`, which makes any
    /// affine constraint on the `y_0 = 1` slice homogeneous for free).
    Linear(Vec<Polynomial>),
    /// Entrywise bounds `l * y_0 <= y <= u * y_0`; `None` leaves a side
    /// unbounded.
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    /// `|y|_2 <= scale * y_0`.
    NormBound { scale: f64 },
    /// `M(y) <= scale * y_0 * I` where `M(y)` has moment entries `y_e`
    /// listed as a packed lower triangle.
    PsdUpperBound {
        side: usize,
        entries: Vec<Exponent>,
        scale: f64,
    },
}

/// The homogeneous cone generated by the moment ambiguity set.
#[derive(Clone, Debug)]
pub struct ConeYDescription {
    pub p: usize,
    pub d: u32,
    pub blocks: Vec<YBlock>,
    pub provenance: Provenance,
}

impl ConeYDescription {
    fn validate(p: usize, d: u32, blocks: &[YBlock]) -> Result<()> {
        let len = basis_len(p, d);
        for block in blocks {
            match block {
                YBlock::Linear(qs) => {
                    for q in qs {
                        if q.var_count != p {
                            return Err(Error::DimensionMismatch {
                                expected: p,
                                got: q.var_count,
                            });
                        }
                        if q.degree() > d {
                            return Err(Error::DegreeOverflow {
                                degree: q.degree(),
                                max: d,
                            });
                        }
                    }
                }
                YBlock::Box { lower, upper } => {
                    if lower.len() != len || upper.len() != len {
                        return Err(Error::DimensionMismatch {
                            expected: len,
                            got: lower.len().max(upper.len()),
                        });
                    }
                }
                YBlock::NormBound { scale } => {
                    if !(*scale > 0.0) {
                        return Err(Error::Semantic(format!(
                            "norm bound scale must be positive, got {scale}"
                        )));
                    }
                }
                YBlock::PsdUpperBound {
                    side,
                    entries,
                    scale,
                } => {
                    if entries.len() != side * (side + 1) / 2 {
                        return Err(Error::DimensionMismatch {
                            expected: side * (side + 1) / 2,
                            got: entries.len(),
                        });
                    }
                    for e in entries {
                        if e.len() != p {
                            return Err(Error::DimensionMismatch {
                                expected: p,
                                got: e.len(),
                            });
                        }
                        if e.total_degree() > d {
                            return Err(Error::DegreeOverflow {
                                degree: e.total_degree(),
                                max: d,
                            });
                        }
                    }
                    if !(*scale > 0.0) {
                        return Err(Error::Semantic(format!(
                            "psd bound scale must be positive, got {scale}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Takes a homogeneous description as-is.
    pub fn user(p: usize, d: u32, blocks: Vec<YBlock>) -> Result<Self> {
        Self::validate(p, d, &blocks)?;
        Ok(ConeYDescription {
            p,
            d,
            blocks,
            provenance: Provenance::UserHomogeneous,
        })
    }

    /// Homogenizes a description normalized by `y_0 = 1`: constant terms in
    /// the supported patterns become multiples of `y_0` (which the block
    /// encodings already express) and the ray constraint `y_0 >= 0` is
    /// appended.
    pub fn homogenize(p: usize, d: u32, mut blocks: Vec<YBlock>) -> Result<Self> {
        Self::validate(p, d, &blocks)?;
        blocks.push(YBlock::Linear(vec![Polynomial::constant(p, 1.0)]));
        Ok(ConeYDescription {
            p,
            d,
            blocks,
            provenance: Provenance::AutoHomogenized,
        })
    }

    pub fn basis_len(&self) -> usize {
        basis_len(self.p, self.d)
    }

    /// Largest constraint violation of a candidate moment vector; zero (up
    /// to roundoff) iff `y` is in the cone.
    pub fn membership_distance(&self, y: &[f64]) -> Result<f64> {
        let len = self.basis_len();
        if y.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: y.len(),
            });
        }
        let basis = GradedBasis::new(self.p, self.d);
        let mut worst: f64 = 0.0;
        for block in &self.blocks {
            match block {
                YBlock::Linear(qs) => {
                    for q in qs {
                        let mut acc = 0.0;
                        for (e, &c) in &q.terms {
                            acc += c * y[basis.index_of(e).unwrap()];
                        }
                        worst = worst.max(-acc);
                    }
                }
                YBlock::Box { lower, upper } => {
                    for i in 0..len {
                        if let Some(l) = lower[i] {
                            worst = worst.max(l * y[0] - y[i]);
                        }
                        if let Some(u) = upper[i] {
                            worst = worst.max(y[i] - u * y[0]);
                        }
                    }
                }
                YBlock::NormBound { scale } => {
                    let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    worst = worst.max(norm - scale * y[0]);
                }
                YBlock::PsdUpperBound {
                    side,
                    entries,
                    scale,
                } => {
                    let mut m = DMatrix::zeros(*side, *side);
                    let mut it = entries.iter();
                    for j in 0..*side {
                        for i in j..*side {
                            let v = y[basis.index_of(it.next().unwrap()).unwrap()];
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                    let slack = DMatrix::identity(*side, *side) * (scale * y[0]) - m;
                    let min_eig = nalgebra::SymmetricEigen::new(slack).eigenvalues.min();
                    worst = worst.max(-min_eig);
                }
            }
        }
        Ok(worst)
    }

    /// Whether the cone is described by linear inequalities only.
    pub fn is_polyhedral(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| matches!(b, YBlock::Linear(_) | YBlock::Box { .. }))
    }

    /// Expands all linear inequalities into dense coefficient rows `a` with
    /// `a . y >= 0`, in graded moment order. Errors on non-polyhedral cones.
    pub fn linear_rows(&self) -> Result<Vec<Vec<f64>>> {
        let len = self.basis_len();
        let basis = GradedBasis::new(self.p, self.d);
        let mut rows = Vec::new();
        for block in &self.blocks {
            match block {
                YBlock::Linear(qs) => {
                    for q in qs {
                        let mut row = vec![0.0; len];
                        for (e, &c) in &q.terms {
                            row[basis.index_of(e).unwrap()] += c;
                        }
                        rows.push(row);
                    }
                }
                YBlock::Box { lower, upper } => {
                    for i in 0..len {
                        if let Some(l) = lower[i] {
                            let mut row = vec![0.0; len];
                            row[i] += 1.0;
                            row[0] -= l;
                            rows.push(row);
                        }
                        if let Some(u) = upper[i] {
                            let mut row = vec![0.0; len];
                            row[i] -= 1.0;
                            row[0] += u;
                            rows.push(row);
                        }
                    }
                }
                _ => {
                    return Err(Error::Unsupported(
                        "dual generators require a polyhedral ambiguity cone".into(),
                    ))
                }
            }
        }
        Ok(rows)
    }
}

/// Generator form of the dual cone of a polyhedral ambiguity cone: the dual
/// consists of all nonnegative combinations of the returned coefficient
/// rows, read as polynomials in the random variables.
pub fn dual_generators_y(cone: &ConeYDescription) -> Result<Vec<Vec<f64>>> {
    cone.linear_rows()
}

/// The dense coefficient matrix of `h(x) = H [x]_{2t}`, rows indexed by the
/// graded basis of the random variables at degree `d`, columns by the graded
/// basis of the decision variables at degree `2t`.
#[derive(Clone, Debug, PartialEq)]
pub struct HMatrix {
    pub matrix: DMatrix<f64>,
    pub d: u32,
    pub t: u32,
}

/// A distributionally robust optimization instance.
#[derive(Clone, Debug)]
pub struct DROProblem {
    pub n: usize,
    pub p: usize,
    pub f: Polynomial,
    pub c: Vec<Polynomial>,
    pub h: Polynomial,
    pub g: Vec<Polynomial>,
    pub y: ConeYDescription,
}

impl DROProblem {
    pub fn new(
        n: usize,
        p: usize,
        f: Polynomial,
        c: Vec<Polynomial>,
        h: Polynomial,
        g: Vec<Polynomial>,
        y: ConeYDescription,
    ) -> Result<Self> {
        if f.var_count != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.var_count,
            });
        }
        for ci in &c {
            if ci.var_count != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: ci.var_count,
                });
            }
        }
        if h.var_count != n + p {
            return Err(Error::DimensionMismatch {
                expected: n + p,
                got: h.var_count,
            });
        }
        for gj in &g {
            if gj.var_count != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: gj.var_count,
                });
            }
        }
        let problem = DROProblem {
            n,
            p,
            f,
            c,
            h,
            g,
            y,
        };
        // the moment order of the ambiguity set need not match the
        // xi-degree of h: a higher order only tightens the set, a lower one
        // constrains a prefix of the moments h pairs with
        if problem.y.p != p {
            return Err(Error::Semantic(format!(
                "ambiguity cone is over {} random variables, h over {}",
                problem.y.p, p
            )));
        }
        Ok(problem)
    }

    /// Degree bookkeeping. `t` and `d0` are clamped to at least 1 so the
    /// moment matrices below never degenerate to empty blocks.
    pub fn degrees(&self) -> Degrees {
        let d = self.h.degree_in(self.n..self.n + self.p).max(self.y.d);
        let deg_c = self.c.iter().map(|c| c.degree()).max().unwrap_or(0);
        let t = [
            self.h.degree_in(0..self.n).div_ceil(2),
            self.f.degree().div_ceil(2),
            deg_c.div_ceil(2),
        ]
        .into_iter()
        .max()
        .unwrap()
        .max(1);
        let deg_g = self.g.iter().map(|g| g.degree()).max().unwrap_or(0);
        let d0 = d.div_ceil(2).max(deg_g.div_ceil(2)).max(1);
        let d2 = deg_g.div_ceil(2).max(1);
        Degrees { d, t, d0, d2 }
    }

    /// Builds the `H` matrix of the robust constraint.
    pub fn h_matrix(&self) -> Result<HMatrix> {
        let deg = self.degrees();
        let coeffs = decompose_in_xi(&self.h, self.n, self.p, deg.d)?;
        let col_basis = GradedBasis::new(self.n, 2 * deg.t);
        let mut m = DMatrix::zeros(coeffs.len(), col_basis.len());
        for (r, hb) in coeffs.iter().enumerate() {
            for (col, &v) in hb.coefficient_vector(&col_basis)?.iter().enumerate() {
                m[(r, col)] = v;
            }
        }
        Ok(HMatrix {
            matrix: m,
            d: deg.d,
            t: deg.t,
        })
    }
}
