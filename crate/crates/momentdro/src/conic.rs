//! Conic programming layer: a solver-agnostic standard form
//!
//! ```text
//!     min  c' v   s.t.  A v = b,   v in K1 x K2 x ... x Km
//! ```
//!
//! where each block cone is free, nonnegative, second-order, or a packed
//! symmetric psd block, plus a backend that maps the program onto Clarabel.
//!
//! Psd blocks store the lower triangle column by column, unscaled, so a
//! block of side `m` occupies `m (m + 1) / 2` variables.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use crate::{Error, Result};

/// A cone for one variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    /// Unrestricted slice of the given length.
    Free(usize),
    /// Componentwise nonnegative slice.
    Nonneg(usize),
    /// `(t, x)` with `t >= |x|`; the argument is the total length.
    SecondOrder(usize),
    /// Packed lower triangle of a psd matrix of the given side.
    Psd(usize),
}

impl Cone {
    pub fn len(&self) -> usize {
        match *self {
            Cone::Free(n) | Cone::Nonneg(n) | Cone::SecondOrder(n) => n,
            Cone::Psd(m) => m * (m + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index of entry `(i, j)`, `i >= j`, in a packed lower triangle of side `m`
/// stored column by column.
pub fn packed_lower_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(j <= i && i < m);
    // column j starts after columns 0..j of lengths m, m-1, ...
    j * m - j * (j + 1) / 2 + i
}

/// Expands a packed lower triangle into a full symmetric matrix.
pub fn unpack_symmetric(packed: &[f64], m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            let v = packed[packed_lower_index(m, i, j)];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
struct Row {
    entries: Vec<(usize, f64)>,
    rhs: f64,
}

/// Incremental builder for a [`ConicProgram`].
#[derive(Clone, Debug, Default)]
pub struct ConicProgramBuilder {
    blocks: Vec<Cone>,
    num_vars: usize,
    objective: Vec<(usize, f64)>,
    rows: Vec<Row>,
}

impl ConicProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable block and returns its starting index.
    pub fn add_block(&mut self, cone: Cone) -> usize {
        let offset = self.num_vars;
        self.num_vars += cone.len();
        self.blocks.push(cone);
        offset
    }

    /// Adds `coef` to the objective coefficient of variable `var`.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective.push((var, coef));
    }

    /// Appends an equality row `sum entries = rhs`; returns its index.
    pub fn add_row(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(Row { entries, rhs });
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn build(self) -> ConicProgram {
        let mut objective = vec![0.0; self.num_vars];
        for (v, c) in self.objective {
            objective[v] += c;
        }
        ConicProgram {
            blocks: self.blocks,
            num_vars: self.num_vars,
            objective,
            rows: self.rows,
        }
    }
}

/// A conic program in the crate's standard form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    blocks: Vec<Cone>,
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged only to reduced accuracy; usable but flagged.
    Inaccurate,
    Infeasible,
    Unbounded,
}

/// Primal/dual solution of a conic program.
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: f64,
    /// Primal variable vector, in the builder's block layout.
    pub v: Vec<f64>,
    /// Dual multipliers of the equality rows, one per [`ConicProgramBuilder::add_row`].
    pub eq_duals: Vec<f64>,
    /// Per-block dual slices in the same layout as the primal blocks
    /// (psd duals unpacked from the solver's scaled storage); free blocks
    /// get zeros.
    pub cone_duals: Vec<Vec<f64>>,
}

/// Per-block feasibility report from [`ConicProgram::validate_solution`].
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// Max-norm residual of the equality system.
    pub eq_residual: f64,
    /// Distance-to-cone estimate per block (negative part of the minimum
    /// eigenvalue for psd blocks, norm excess for second-order blocks).
    pub cone_distances: Vec<f64>,
    pub worst: f64,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn blocks(&self) -> &[Cone] {
        &self.blocks
    }

    /// Solves the program with Clarabel.
    ///
    /// Equality rows map onto the zero cone; each non-free variable block
    /// gets membership rows `s = v_block` against the matching Clarabel
    /// cone, converting psd blocks between the packed-lower layout and
    /// Clarabel's scaled upper-triangle vectorization.
    pub fn solve(&self) -> Result<ConicSolution> {
        self.solve_impl(false)
    }

    /// Re-solve with tightened interior-point tolerances, for use when a
    /// default-tolerance solve comes back inaccurate.
    pub fn solve_tight(&self) -> Result<ConicSolution> {
        self.solve_impl(true)
    }

    fn solve_impl(&self, tight: bool) -> Result<ConicSolution> {
        let n = self.num_vars;
        let m_eq = self.rows.len();

        // (row, col, value) triplets for the Clarabel constraint matrix.
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        for row in &self.rows {
            let r = b.len();
            for &(c, val) in &row.entries {
                debug_assert!(c < n);
                trips.push((r, c, val));
            }
            b.push(row.rhs);
        }
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }

        let mut offset = 0usize;
        // membership row range of each block, for cone-dual recovery
        let mut dual_rows: Vec<usize> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            dual_rows.push(b.len());
            match *block {
                Cone::Free(len) => {
                    offset += len;
                }
                Cone::Nonneg(len) => {
                    if len > 0 {
                        for i in 0..len {
                            trips.push((b.len(), offset + i, -1.0));
                            b.push(0.0);
                        }
                        cones.push(SupportedConeT::NonnegativeConeT(len));
                    }
                    offset += len;
                }
                Cone::SecondOrder(len) => {
                    if len > 0 {
                        for i in 0..len {
                            trips.push((b.len(), offset + i, -1.0));
                            b.push(0.0);
                        }
                        cones.push(SupportedConeT::SecondOrderConeT(len));
                    }
                    offset += len;
                }
                Cone::Psd(side) => {
                    if side > 0 {
                        let sqrt2 = std::f64::consts::SQRT_2;
                        // Clarabel's triangle order: columns of the upper
                        // triangle, so svec slot j(j+1)/2 + i holds entry
                        // (i, j) with i <= j, off-diagonals scaled by sqrt 2.
                        for j in 0..side {
                            for i in 0..=j {
                                let q = j * (j + 1) / 2 + i;
                                let p = packed_lower_index(side, j, i);
                                let scale = if i == j { 1.0 } else { sqrt2 };
                                trips.push((b.len() + q, offset + p, -scale));
                            }
                        }
                        for _ in 0..side * (side + 1) / 2 {
                            b.push(0.0);
                        }
                        cones.push(SupportedConeT::PSDTriangleConeT(side));
                    }
                    offset += block.len();
                }
            }
        }

        let m_total = b.len();
        let a = csc_from_triplets(m_total, n, &mut trips);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut settings = DefaultSettings {
            verbose: false,
            ..Default::default()
        };
        if tight {
            settings.tol_gap_abs = 1e-10;
            settings.tol_gap_rel = 1e-10;
            settings.tol_feas = 1e-10;
            settings.max_iter = 400;
        }
        let mut solver = DefaultSolver::new(&p, &self.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            other => return Err(Error::Solver(format!("solver stopped with {other:?}"))),
        };

        let z = &solver.solution.z;
        let mut cone_duals = Vec::with_capacity(self.blocks.len());
        for (block, &start) in self.blocks.iter().zip(&dual_rows) {
            let dual = match *block {
                Cone::Free(len) => vec![0.0; len],
                Cone::Nonneg(len) | Cone::SecondOrder(len) => z[start..start + len].to_vec(),
                Cone::Psd(side) => {
                    let sqrt2 = std::f64::consts::SQRT_2;
                    let mut packed = vec![0.0; block.len()];
                    for j in 0..side {
                        for i in 0..=j {
                            let q = j * (j + 1) / 2 + i;
                            let scale = if i == j { 1.0 } else { sqrt2 };
                            packed[packed_lower_index(side, j, i)] = z[start + q] / scale;
                        }
                    }
                    packed
                }
            };
            cone_duals.push(dual);
        }

        Ok(ConicSolution {
            status,
            objective: solver.solution.obj_val,
            dual_objective: solver.solution.obj_val_dual,
            v: solver.solution.x.clone(),
            eq_duals: z[..m_eq].to_vec(),
            cone_duals,
        })
    }

    /// Residual and cone-membership check for a primal point.
    pub fn validate_solution(&self, v: &[f64]) -> Result<ResidualReport> {
        if v.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: v.len(),
            });
        }
        let mut eq_residual: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.entries.iter().map(|&(c, a)| a * v[c]).sum();
            eq_residual = eq_residual.max((lhs - row.rhs).abs());
        }
        let mut cone_distances = Vec::with_capacity(self.blocks.len());
        let mut offset = 0usize;
        for block in &self.blocks {
            let dist = match *block {
                Cone::Free(_) => 0.0,
                Cone::Nonneg(len) => v[offset..offset + len]
                    .iter()
                    .fold(0.0f64, |acc, &x| acc.max(-x)),
                Cone::SecondOrder(len) => {
                    if len == 0 {
                        0.0
                    } else {
                        let t = v[offset];
                        let norm: f64 = v[offset + 1..offset + len]
                            .iter()
                            .map(|x| x * x)
                            .sum::<f64>()
                            .sqrt();
                        (norm - t).max(0.0)
                    }
                }
                Cone::Psd(side) => {
                    if side == 0 {
                        0.0
                    } else {
                        let mat = unpack_symmetric(&v[offset..offset + block.len()], side);
                        let min_eig = nalgebra::SymmetricEigen::new(mat).eigenvalues.min();
                        (-min_eig).max(0.0)
                    }
                }
            };
            cone_distances.push(dist);
            offset += block.len();
        }
        let worst = cone_distances
            .iter()
            .fold(eq_residual, |acc, &d| acc.max(d));
        Ok(ResidualReport {
            eq_residual,
            cone_distances,
            worst,
        })
    }

    /// Serializes the program in a line-oriented text format: a header with
    /// the cone layout, then one line per objective/matrix nonzero and per
    /// right-hand side. [`ConicProgram::parse`] reads it back exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic vars {} rows {}", self.num_vars, self.rows.len());
        for block in &self.blocks {
            let _ = match *block {
                Cone::Free(n) => writeln!(out, "block free {n}"),
                Cone::Nonneg(n) => writeln!(out, "block nonneg {n}"),
                Cone::SecondOrder(n) => writeln!(out, "block soc {n}"),
                Cone::Psd(m) => writeln!(out, "block psd {m}"),
            };
        }
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "obj {i} {c:?}");
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, a) in &row.entries {
                let _ = writeln!(out, "a {r} {c} {a:?}");
            }
            if row.rhs != 0.0 {
                let _ = writeln!(out, "b {r} {:?}", row.rhs);
            }
        }
        out
    }

    /// Parses the [`ConicProgram::dump`] text format.
    pub fn parse(text: &str) -> Result<ConicProgram> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            col: 1,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "empty conic program dump"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let [_, _, nv, _, nr] = head[..] else {
            return Err(bad(1, "expected `conic vars N rows M` header"));
        };
        let num_vars: usize = nv.parse().map_err(|_| bad(1, "bad variable count"))?;
        let num_rows: usize = nr.parse().map_err(|_| bad(1, "bad row count"))?;

        let mut blocks = Vec::new();
        let mut objective = vec![0.0; num_vars];
        let mut rows = vec![
            Row {
                entries: Vec::new(),
                rhs: 0.0,
            };
            num_rows
        ];
        for (idx, line) in lines {
            let lineno = idx + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                [] => {}
                ["block", kind, n] => {
                    let n: usize = n.parse().map_err(|_| bad(lineno, "bad block size"))?;
                    blocks.push(match *kind {
                        "free" => Cone::Free(n),
                        "nonneg" => Cone::Nonneg(n),
                        "soc" => Cone::SecondOrder(n),
                        "psd" => Cone::Psd(n),
                        _ => return Err(bad(lineno, "unknown cone kind")),
                    });
                }
                ["obj", i, c] => {
                    let i: usize = i.parse().map_err(|_| bad(lineno, "bad variable index"))?;
                    let c: f64 = c.parse().map_err(|_| bad(lineno, "bad coefficient"))?;
                    *objective
                        .get_mut(i)
                        .ok_or_else(|| bad(lineno, "objective index out of range"))? = c;
                }
                ["a", r, c, v] => {
                    let r: usize = r.parse().map_err(|_| bad(lineno, "bad row index"))?;
                    let c: usize = c.parse().map_err(|_| bad(lineno, "bad column index"))?;
                    let v: f64 = v.parse().map_err(|_| bad(lineno, "bad coefficient"))?;
                    rows.get_mut(r)
                        .ok_or_else(|| bad(lineno, "row index out of range"))?
                        .entries
                        .push((c, v));
                }
                ["b", r, v] => {
                    let r: usize = r.parse().map_err(|_| bad(lineno, "bad row index"))?;
                    let v: f64 = v.parse().map_err(|_| bad(lineno, "bad value"))?;
                    rows.get_mut(r)
                        .ok_or_else(|| bad(lineno, "row index out of range"))?
                        .rhs = v;
                }
                _ => return Err(bad(lineno, "unrecognized line")),
            }
        }
        if blocks.iter().map(|b| b.len()).sum::<usize>() != num_vars {
            return Err(bad(1, "cone blocks do not cover the variables"));
        }
        Ok(ConicProgram {
            blocks,
            num_vars,
            objective,
            rows,
        })
    }
}

/// Builds a CSC matrix from (row, col, value) triplets, summing duplicates.
fn csc_from_triplets(m: usize, n: usize, trips: &mut Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    trips.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval: Vec<usize> = Vec::with_capacity(trips.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(trips.len());
    let mut it = trips.iter().peekable();
    for col in 0..n {
        colptr.push(rowval.len());
        while let Some(&&(r, c, v)) = it.peek() {
            if c != col {
                break;
            }
            it.next();
            if rowval.len() > colptr[col] && *rowval.last().unwrap() == r {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
            }
        }
    }
    colptr.push(rowval.len());
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn packed_index_roundtrip() {
        // side 3: (0,0) (1,0) (2,0) (1,1) (2,1) (2,2)
        let expect = [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)];
        for (p, &(i, j)) in expect.iter().enumerate() {
            assert_eq!(packed_lower_index(3, i, j), p);
        }
        let m = unpack_symmetric(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3);
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 2.0);
        assert_eq!(m[(2, 1)], 5.0);
        assert_eq!(m[(2, 2)], 6.0);
    }

    #[test]
    fn lp_bound() {
        // min x s.t. x - u = 1, u >= 0
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Free(1));
        let u = b.add_block(Cone::Nonneg(1));
        b.add_objective(x, 1.0);
        b.add_row(vec![(x, 1.0), (u, -1.0)], 1.0);
        let prog = b.build();
        let sol = prog.solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.v[x], 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.eq_duals[0].abs(), 1.0, epsilon = 1e-7);
        assert!(prog.validate_solution(&sol.v).unwrap().worst < 1e-7);
    }

    #[test]
    fn lp_infeasible() {
        // x >= 0 and x = -1
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Nonneg(1));
        b.add_row(vec![(x, 1.0)], -1.0);
        let sol = b.build().solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn soc_norm() {
        // min t s.t. |(1, 2)| <= t
        let mut b = ConicProgramBuilder::new();
        let v = b.add_block(Cone::SecondOrder(3));
        b.add_objective(v, 1.0);
        b.add_row(vec![(v + 1, 1.0)], 1.0);
        b.add_row(vec![(v + 2, 1.0)], 2.0);
        let prog = b.build();
        let sol = prog.solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 5.0f64.sqrt(), epsilon = 1e-7);
        assert!(prog.validate_solution(&sol.v).unwrap().worst < 1e-7);
    }

    #[test]
    fn sdp_trace() {
        // min tr(X) over psd 2x2 with X12 = 1; optimum 2 at the all-ones matrix.
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Psd(2));
        b.add_objective(x + packed_lower_index(2, 0, 0), 1.0);
        b.add_objective(x + packed_lower_index(2, 1, 1), 1.0);
        b.add_row(vec![(x + packed_lower_index(2, 1, 0), 1.0)], 1.0);
        let prog = b.build();
        let sol = prog.solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.objective, 2.0, epsilon = 1e-6);
        let mat = unpack_symmetric(&sol.v[x..x + 3], 2);
        assert_relative_eq!(mat[(0, 0)], 1.0, epsilon = 1e-5);
        assert_relative_eq!(mat[(1, 1)], 1.0, epsilon = 1e-5);
        assert!(prog.validate_solution(&sol.v).unwrap().worst < 1e-6);
    }

    #[test]
    fn sdp_mixed_blocks() {
        // min X11 + X22 + y  s.t.  X12 = 1, y - X11 = 0, y >= 0, X psd.
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Psd(2));
        let y = b.add_block(Cone::Nonneg(1));
        b.add_objective(x, 1.0);
        b.add_objective(x + 2, 1.0);
        b.add_objective(y, 1.0);
        b.add_row(vec![(x + 1, 1.0)], 1.0);
        b.add_row(vec![(y, 1.0), (x, -1.0)], 0.0);
        let prog = b.build();
        let sol = prog.solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // objective becomes 2 X11 + X22 with X11 X22 >= 1: minimized at
        // X11 = 1/sqrt(2), X22 = sqrt(2), value 2 sqrt(2).
        assert_relative_eq!(sol.objective, 2.0 * 2.0f64.sqrt(), epsilon = 1e-5);
        assert!(prog.validate_solution(&sol.v).unwrap().worst < 1e-6);
    }

    #[test]
    fn dump_contains_structure() {
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Psd(2));
        b.add_objective(x, 1.5);
        b.add_row(vec![(x + 1, 1.0)], 1.0);
        let prog = b.build();
        let text = prog.dump();
        assert!(text.contains("block psd 2"));
        assert!(text.contains("conic vars 3 rows 1"));
        let back = ConicProgram::parse(&text).unwrap();
        assert_eq!(back, prog);
    }

    #[test]
    fn dump_roundtrip_mixed() {
        let mut b = ConicProgramBuilder::new();
        let x = b.add_block(Cone::Free(2));
        let u = b.add_block(Cone::Nonneg(1));
        let s = b.add_block(Cone::SecondOrder(3));
        b.add_objective(x, -0.25);
        b.add_objective(s + 1, 3.5);
        b.add_row(vec![(x, 1.0), (u, -2.0)], 1.5);
        b.add_row(vec![(x + 1, 0.125), (s, 1.0)], 0.0);
        let prog = b.build();
        let back = ConicProgram::parse(&prog.dump()).unwrap();
        assert_eq!(back, prog);
    }
}
