//! Conic-program assembly: the moment/SOS relaxation pair, the direct
//! moment relaxation used as a cross-check, the truncated moment problem
//! for worst-case measure extraction, the heuristic polynomial
//! optimization fallback, and feasibility verification of a candidate.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{
    packed_lower_index, Cone, ConicProgram, ConicProgramBuilder, ConicSolution, SolveStatus,
};
use crate::model::{dual_generators_y, ConeYDescription, DROProblem, YBlock};
use crate::moment::{
    self, extract_atoms, flat_truncation_check, moment_matrix, riesz, truncate, ExtractOptions,
    TMS,
};
use crate::poly::{basis_len, decompose_in_xi, Exponent, GradedBasis, Polynomial};
use crate::sos::{encode_qmod_membership, solve_feasibility, LinearPoly, QmodEncoding};
use crate::{Error, Result};

/// Default limit on the side of any single psd block.
pub const DEFAULT_PSD_CAP: usize = 2000;

fn check_cap(side: usize, cap: usize) -> Result<()> {
    if side > cap {
        return Err(Error::DimensionCap { side, cap });
    }
    Ok(())
}

/// Adds a psd slack block for the localizing matrix `L_g^(k)` of the moment
/// variables starting at `var_offset` (indexed by `full`), together with the
/// equality rows tying the slack to the moments. Returns the block offset.
fn add_localizing_block(
    builder: &mut ConicProgramBuilder,
    g: &Polynomial,
    var_offset: usize,
    full: &GradedBasis,
    k: u32,
    cap: usize,
) -> Result<usize> {
    let s = k - g.degree().div_ceil(2);
    let row_basis = GradedBasis::new(full.var_count, s);
    let side = row_basis.len();
    check_cap(side, cap)?;
    let offset = builder.add_block(Cone::Psd(side));
    for j in 0..side {
        for i in j..side {
            let ab = row_basis.exponents[i].add(&row_basis.exponents[j]);
            let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
            for (gamma, &gc) in &g.terms {
                let idx = full.index_of(&gamma.add(&ab)).ok_or(Error::DegreeOverflow {
                    degree: gamma.total_degree() + ab.total_degree(),
                    max: full.degree,
                })?;
                *terms.entry(var_offset + idx).or_insert(0.0) += gc;
            }
            let mut entries: Vec<(usize, f64)> =
                terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
            entries.push((offset + packed_lower_index(side, i, j), -1.0));
            builder.add_row(entries, 0.0);
        }
    }
    Ok(offset)
}

/// Adds `M_k` and all `L_g^(k)` blocks expressing that the moment variables
/// at `var_offset` lie in the order-`2k` moment cone of the support set.
fn add_support_blocks(
    builder: &mut ConicProgramBuilder,
    g: &[Polynomial],
    var_offset: usize,
    full: &GradedBasis,
    k: u32,
    cap: usize,
) -> Result<()> {
    let unit = Polynomial::constant(full.var_count, 1.0);
    add_localizing_block(builder, &unit, var_offset, full, k, cap)?;
    for gj in g {
        if gj.is_zero() {
            continue;
        }
        add_localizing_block(builder, gj, var_offset, full, k, cap)?;
    }
    Ok(())
}

/// Adds membership blocks forcing the moment variables at `y_offset`
/// (length `basis_len(p, d)`, graded order) into the ambiguity cone.
fn add_cone_y_blocks(
    builder: &mut ConicProgramBuilder,
    cone: &ConeYDescription,
    y_offset: usize,
    cap: usize,
) -> Result<()> {
    let ny = cone.basis_len();
    let basis = GradedBasis::new(cone.p, cone.d);
    for block in &cone.blocks {
        match block {
            YBlock::Linear(qs) => {
                if qs.is_empty() {
                    continue;
                }
                let offset = builder.add_block(Cone::Nonneg(qs.len()));
                for (i, q) in qs.iter().enumerate() {
                    let mut entries: Vec<(usize, f64)> = q
                        .terms
                        .iter()
                        .map(|(e, &c)| (y_offset + basis.index_of(e).unwrap(), c))
                        .collect();
                    entries.push((offset + i, -1.0));
                    builder.add_row(entries, 0.0);
                }
            }
            YBlock::Box { lower, upper } => {
                let count = lower.iter().flatten().count() + upper.iter().flatten().count();
                if count == 0 {
                    continue;
                }
                let offset = builder.add_block(Cone::Nonneg(count));
                let mut slot = 0;
                for i in 0..ny {
                    if let Some(l) = lower[i] {
                        // y_i - l y_0 >= 0
                        let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
                        *terms.entry(y_offset + i).or_insert(0.0) += 1.0;
                        *terms.entry(y_offset).or_insert(0.0) -= l;
                        let mut entries: Vec<(usize, f64)> = terms.into_iter().collect();
                        entries.push((offset + slot, -1.0));
                        builder.add_row(entries, 0.0);
                        slot += 1;
                    }
                    if let Some(u) = upper[i] {
                        let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
                        *terms.entry(y_offset + i).or_insert(0.0) -= 1.0;
                        *terms.entry(y_offset).or_insert(0.0) += u;
                        let mut entries: Vec<(usize, f64)> = terms.into_iter().collect();
                        entries.push((offset + slot, -1.0));
                        builder.add_row(entries, 0.0);
                        slot += 1;
                    }
                }
            }
            YBlock::NormBound { scale } => {
                let offset = builder.add_block(Cone::SecondOrder(ny + 1));
                builder.add_row(vec![(y_offset, *scale), (offset, -1.0)], 0.0);
                for i in 0..ny {
                    builder.add_row(vec![(y_offset + i, 1.0), (offset + 1 + i, -1.0)], 0.0);
                }
            }
            YBlock::PsdUpperBound {
                side,
                entries,
                scale,
            } => {
                check_cap(*side, cap)?;
                let offset = builder.add_block(Cone::Psd(*side));
                let mut it = entries.iter();
                for j in 0..*side {
                    for i in j..*side {
                        // slack = scale*y_0*[i==j] - y_e
                        let e = it.next().unwrap();
                        let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
                        *terms.entry(y_offset + basis.index_of(e).unwrap()).or_insert(0.0) -= 1.0;
                        if i == j {
                            *terms.entry(y_offset).or_insert(0.0) += *scale;
                        }
                        let mut row: Vec<(usize, f64)> =
                            terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
                        row.push((offset + packed_lower_index(*side, i, j), -1.0));
                        builder.add_row(row, 0.0);
                    }
                }
            }
        }
    }
    Ok(())
}

/// No-duality-gap diagnostics for a solved relaxation.
#[derive(Clone, Copy, Debug)]
pub struct GapReport {
    pub gamma: f64,
    pub riesz_f: f64,
    /// `<f, w*> - gamma_k`; nonnegative up to solver accuracy.
    pub gap: f64,
    pub passed: bool,
}

/// Result of solving one order of the relaxation pair.
#[derive(Clone, Debug)]
pub struct RelaxationOutcome {
    pub k: u32,
    pub gamma_k: f64,
    pub w_star: TMS,
    /// The solver's interior point of the primal optimal face, before any
    /// extreme-point selection: its rank counts the face, so it is the
    /// right object for uniqueness-style certificates.
    pub w_center: TMS,
    pub y_star: TMS,
    /// The interior dual moments before extreme-point selection. Mass that
    /// rides a degenerate direction of the dual optimal face survives here
    /// but can collapse in `y_star`, so measure extraction starts from this.
    pub y_center: TMS,
    pub z_star: TMS,
    pub status: SolveStatus,
    pub gap: GapReport,
    /// Dual recovery of `w` hit a vanishing normalizer.
    pub degenerate_recovery: bool,
    /// `w_star` was re-computed from the direct relaxation.
    pub recovered_from_direct: bool,
}

impl RelaxationOutcome {
    /// Largest violation across the outcome's structural invariants:
    /// `w_0 = 1`, psd-ness of the moment and localizing matrices of `w`,
    /// support membership of `z`, and `y = z|_d`.
    pub fn invariant_violation(&self, problem: &DROProblem) -> Result<f64> {
        let deg = problem.degrees();
        let mut worst = (self.w_star.values[0] - 1.0).abs();
        let min_eig = |m: &nalgebra::DMatrix<f64>| {
            nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min()
        };
        worst = worst.max(-min_eig(&moment_matrix(&self.w_star, deg.t)?));
        for ci in &problem.c {
            worst = worst.max(-min_eig(&moment::localizing_matrix(ci, &self.w_star, deg.t)?));
        }
        worst = worst.max(-min_eig(&moment_matrix(&self.z_star, self.k)?));
        for gj in &problem.g {
            worst = worst.max(-min_eig(&moment::localizing_matrix(gj, &self.z_star, self.k)?));
        }
        let y = truncate(&self.z_star, deg.d)?;
        for (a, b) in y.values.iter().zip(&self.y_star.values) {
            worst = worst.max((a - b).abs());
        }
        if !self.gap.passed {
            worst = worst.max(self.gap.gap.abs());
        }
        Ok(worst)
    }
}

/// The relaxation pair at order `k`, solved in its SOS (dual) form with a
/// recovery map for the moment vector `w` of the primal form.
pub struct PairRelaxation {
    pub program: ConicProgram,
    pub encoding: QmodEncoding,
    pub k: u32,
    z_order: u32,
    gamma: usize,
    z_offset: usize,
    coeff_rows: Vec<usize>,
    nz: usize,
}

pub fn build_moment_sos_pair(problem: &DROProblem, k: u32) -> Result<PairRelaxation> {
    build_moment_sos_pair_with_cap(problem, k, DEFAULT_PSD_CAP)
}

struct PairSkeleton {
    builder: ConicProgramBuilder,
    gamma: usize,
    z_offset: usize,
    nz: usize,
    encoding: QmodEncoding,
    coeff_rows: Vec<usize>,
}

pub fn build_moment_sos_pair_with_cap(
    problem: &DROProblem,
    k: u32,
    cap: usize,
) -> Result<PairRelaxation> {
    build_moment_sos_pair_extended(problem, k, k, cap)
}

/// Builds the pair with the dual moment block carried at `z_order >= k`.
/// When the ambiguity cone pins fewer moment degrees than `h` pairs with,
/// the order-`k` support conditions alone leave the top-degree moments of
/// `z` loose enough for a recession ray (mass zero, top moments free PSD)
/// and the pair is unbounded; the extra order restores the localizing
/// chain that bounds those moments by `z_0`.
pub fn build_moment_sos_pair_extended(
    problem: &DROProblem,
    k: u32,
    z_order: u32,
    cap: usize,
) -> Result<PairRelaxation> {
    let mut sk = assemble_pair(problem, k, z_order, cap)?;
    sk.builder.add_objective(sk.gamma, -1.0); // maximize gamma
    Ok(PairRelaxation {
        program: sk.builder.build(),
        encoding: sk.encoding,
        k,
        z_order,
        gamma: sk.gamma,
        z_offset: sk.z_offset,
        coeff_rows: sk.coeff_rows,
        nz: sk.nz,
    })
}

/// `z_order >= k` lets callers carry the dual moment block at a higher order
/// than the pair itself requires; the extra support blocks only tighten the
/// feasible `z`, the coefficient-matching rows read the degree-`2t` prefix.
fn assemble_pair(problem: &DROProblem, k: u32, z_order: u32, cap: usize) -> Result<PairSkeleton> {
    let deg = problem.degrees();
    if k < deg.d0 || 2 * k < deg.d {
        return Err(Error::Semantic(format!(
            "relaxation order {k} below the initial order {}",
            deg.d0
        )));
    }
    debug_assert!(z_order >= k);
    let n = problem.n;
    let p = problem.p;
    let nz = basis_len(p, 2 * z_order);
    let ny = basis_len(p, deg.d);

    // gram sides of qmod(c)_{2t} and the support blocks, checked up front
    check_cap(basis_len(n, deg.t), cap)?;
    for ci in &problem.c {
        check_cap(basis_len(n, deg.t - ci.degree().div_ceil(2)), cap)?;
    }
    check_cap(basis_len(p, z_order), cap)?;

    let mut builder = ConicProgramBuilder::new();
    let gamma = builder.add_block(Cone::Free(1));
    let z_offset = builder.add_block(Cone::Free(nz));

    // target of the coefficient-matching constraint:
    // f(x) - y' H [x]_{2t} - gamma, with y = z|_d
    let hm = problem.h_matrix()?;
    let x_basis = GradedBasis::new(n, 2 * deg.t);
    let mut target = LinearPoly::zero(n);
    for (col, e) in x_basis.exponents.iter().enumerate() {
        target.add_constant(e.clone(), problem.f.coefficient(e));
        for r in 0..ny {
            let c = hm.matrix[(r, col)];
            if c != 0.0 {
                target.add_variable(e.clone(), z_offset + r, -c);
            }
        }
    }
    target.add_variable(Exponent::zeros(n), gamma, -1.0);

    let encoding = encode_qmod_membership(&mut builder, &target, &problem.c, deg.t)?;
    add_support_blocks(
        &mut builder,
        &problem.g,
        z_offset,
        &GradedBasis::new(p, 2 * z_order),
        z_order,
        cap,
    )?;
    add_cone_y_blocks(&mut builder, &problem.y, z_offset, cap)?;

    let zero = Exponent::zeros(n);
    let coeff_rows: Vec<usize> = x_basis
        .exponents
        .iter()
        .map(|e| encoding.row(0, 0, e).or_else(|| encoding.row(0, 0, &zero)))
        .map(Option::unwrap)
        .collect();

    Ok(PairSkeleton {
        builder,
        gamma,
        z_offset,
        nz,
        encoding,
        coeff_rows,
    })
}

/// Re-solves the pair at a fixed optimal value, minimizing a generic SOS
/// objective over the dual optimal face. Interior-point solvers return the
/// analytic center of the face, whose undetermined moments usually admit no
/// representing measure; minimizing a generic nonnegative functional moves
/// `z` to an extreme point. Carrying the moment block at `z_order > k`
/// imposes higher-order support conditions on the face, so the selected
/// extreme point is one that extends to a longer pseudo-moment sequence --
/// in practice the atomic vertex whenever the face contains one.
fn select_extreme_dual(
    problem: &DROProblem,
    k: u32,
    z_order: u32,
    cap: usize,
    gamma_k: f64,
    seed: u64,
) -> Result<Option<TMS>> {
    let mut sk = assemble_pair(problem, k, z_order, cap)?;
    builder_pin_gamma(&mut sk.builder, sk.gamma, gamma_k);
    let r = random_sos_objective(problem.p, z_order, seed);
    let full = GradedBasis::new(problem.p, 2 * z_order);
    for (e, &c) in &r.terms {
        sk.builder.add_objective(sk.z_offset + full.index_of(e).unwrap(), c);
    }
    let sol = solve_refined(&sk.builder.build())?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(Some(TMS::new(
            problem.p,
            2 * z_order,
            sol.v[sk.z_offset..sk.z_offset + sk.nz].to_vec(),
        ))),
        _ => Ok(None),
    }
}

/// Default-tolerance solve followed by a tightened re-solve. Minimizers on
/// a flat piece of the objective move like the square root of the residual
/// gap, so the default gap of ~1e-8 leaves only ~1e-4 accuracy in the
/// recovered point; the refined pass buys back the missing digits. The
/// refined point is kept only when the tighter run still converges cleanly.
fn solve_refined(program: &ConicProgram) -> Result<ConicSolution> {
    let sol = program.solve()?;
    if sol.status == SolveStatus::Optimal {
        if let Ok(tight) = program.solve_tight() {
            if tight.status == SolveStatus::Optimal {
                return Ok(tight);
            }
        }
    }
    Ok(sol)
}

/// Adds `gamma >= gamma_k - delta` via a nonnegative slack variable.
fn builder_pin_gamma(builder: &mut ConicProgramBuilder, gamma: usize, gamma_k: f64) {
    let delta = 1e-7 * gamma_k.abs().max(1.0);
    let slack = builder.add_block(Cone::Nonneg(1));
    builder.add_row(vec![(gamma, 1.0), (slack, -1.0)], gamma_k - delta);
}

impl PairRelaxation {
    pub fn solve(&self, problem: &DROProblem) -> Result<RelaxationOutcome> {
        let deg = problem.degrees();
        let sol = solve_refined(&self.program)?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::Inaccurate => {}
            SolveStatus::Infeasible => {
                return Err(Error::Solver(format!(
                    "relaxation pair at order {} is infeasible",
                    self.k
                )))
            }
            SolveStatus::Unbounded => {
                return Err(Error::Solver(format!(
                    "relaxation pair at order {} is unbounded",
                    self.k
                )))
            }
        }
        let gamma_k = sol.v[self.gamma];
        let mut z_vals = sol.v[self.z_offset..self.z_offset + self.nz].to_vec();
        // for an ambiguity set normalized by y_0 = 1, report the dual
        // moments on that slice (cone membership is scale-invariant)
        if problem.y.provenance == crate::model::Provenance::AutoHomogenized && z_vals[0] > 1e-9 {
            let z0 = z_vals[0];
            for v in &mut z_vals {
                *v /= z0;
            }
        }
        let z_star = TMS::new(problem.p, 2 * self.z_order, z_vals);
        let y_star = truncate(&z_star, deg.d)?;

        let raw: Vec<f64> = self.coeff_rows.iter().map(|&r| sol.eq_duals[r]).collect();
        let w0 = raw[0];
        let degenerate = w0.abs() < 1e-9;
        let w_star = if degenerate {
            let mut w = TMS::zeros(problem.n, 2 * deg.t);
            w.values[0] = 1.0;
            w
        } else {
            TMS::new(problem.n, 2 * deg.t, raw.iter().map(|v| v / w0).collect())
        };
        let riesz_f = riesz(&problem.f, &w_star)?;
        let gap = riesz_f - gamma_k;
        let scale = gamma_k.abs().max(1.0);
        Ok(RelaxationOutcome {
            k: self.k,
            gamma_k,
            w_center: w_star.clone(),
            w_star,
            y_center: y_star.clone(),
            y_star,
            z_star,
            status: sol.status,
            gap: GapReport {
                gamma: gamma_k,
                riesz_f,
                gap,
                passed: !degenerate && gap >= -1e-6 * scale && gap.abs() <= 1e-4 * scale.max(10.0),
            },
            degenerate_recovery: degenerate,
            recovered_from_direct: false,
        })
    }
}

/// The direct moment relaxation in `w`, with the dual cone of a polyhedral
/// ambiguity cone parameterized by explicit generators.
pub struct DirectRelaxation {
    pub program: ConicProgram,
    w_offset: usize,
    nw: usize,
    t: u32,
}

pub fn build_direct_relaxation(problem: &DROProblem, k: u32) -> Result<DirectRelaxation> {
    build_direct_relaxation_with_cap(problem, k, DEFAULT_PSD_CAP)
}

pub fn build_direct_relaxation_with_cap(
    problem: &DROProblem,
    k: u32,
    cap: usize,
) -> Result<DirectRelaxation> {
    let (mut builder, w_offset, nw, t) = assemble_direct(problem, k, cap)?;
    let x_basis = GradedBasis::new(problem.n, 2 * t);
    for (col, e) in x_basis.exponents.iter().enumerate() {
        let c = problem.f.coefficient(e);
        if c != 0.0 {
            builder.add_objective(w_offset + col, c);
        }
    }
    Ok(DirectRelaxation {
        program: builder.build(),
        w_offset,
        nw,
        t,
    })
}

fn assemble_direct(
    problem: &DROProblem,
    k: u32,
    cap: usize,
) -> Result<(ConicProgramBuilder, usize, usize, u32)> {
    let deg = problem.degrees();
    if k < deg.d0 || 2 * k < deg.d {
        return Err(Error::Semantic(format!(
            "relaxation order {k} below the initial order {}",
            deg.d0
        )));
    }
    let gens = dual_generators_y(&problem.y)?;
    let n = problem.n;
    let p = problem.p;
    let nw = basis_len(n, 2 * deg.t);
    let ny = basis_len(p, deg.d);

    let mut builder = ConicProgramBuilder::new();
    let w_offset = builder.add_block(Cone::Free(nw));
    let lambda = builder.add_block(Cone::Nonneg(gens.len()));

    builder.add_row(vec![(w_offset, 1.0)], 1.0); // w_0 = 1
    add_support_blocks(
        &mut builder,
        &problem.c,
        w_offset,
        &GradedBasis::new(n, 2 * deg.t),
        deg.t,
        cap,
    )?;

    // (H w)'[xi]_d - sum_a lambda_a q_a in qmod(g)_{2k}
    let hm = problem.h_matrix()?;
    let x_basis = GradedBasis::new(n, 2 * deg.t);
    let xi_basis = GradedBasis::new(p, deg.d);
    let mut target = LinearPoly::zero(p);
    for r in 0..ny {
        let e = xi_basis.exponents[r].clone();
        for col in 0..x_basis.len() {
            let c = hm.matrix[(r, col)];
            if c != 0.0 {
                target.add_variable(e.clone(), w_offset + col, c);
            }
        }
        for (a, gen) in gens.iter().enumerate() {
            let ga = gen.get(r).copied().unwrap_or(0.0);
            if ga != 0.0 {
                target.add_variable(e.clone(), lambda + a, -ga);
            }
        }
    }
    encode_qmod_membership(&mut builder, &target, &problem.g, k)?;

    Ok((builder, w_offset, nw, deg.t))
}

/// Analogue of the dual-side selection for the primal moments: re-solves
/// the direct relaxation with `<f, w>` pinned at the optimal value and a
/// generic SOS objective, moving `w` to an extreme point of the optimal
/// face (the rank-one moment vector whenever the minimizer is unique).
/// Polyhedral ambiguity cones only.
fn select_extreme_primal(
    problem: &DROProblem,
    k: u32,
    cap: usize,
    value: f64,
    seed: u64,
) -> Result<Option<TMS>> {
    let (mut builder, w_offset, nw, t) = assemble_direct(problem, k, cap)?;
    let delta = 1e-7 * value.abs().max(1.0);
    let slack = builder.add_block(Cone::Nonneg(1));
    let x_basis = GradedBasis::new(problem.n, 2 * t);
    let mut row: Vec<(usize, f64)> = vec![(slack, 1.0)];
    for (col, e) in x_basis.exponents.iter().enumerate() {
        let c = problem.f.coefficient(e);
        if c != 0.0 {
            row.push((w_offset + col, c));
        }
    }
    builder.add_row(row, value + delta);
    let r = random_sos_objective(problem.n, t, seed);
    for (e, &c) in &r.terms {
        builder.add_objective(w_offset + x_basis.index_of(e).unwrap(), c);
    }
    let sol = solve_refined(&builder.build())?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(Some(TMS::new(
            problem.n,
            2 * t,
            sol.v[w_offset..w_offset + nw].to_vec(),
        ))),
        _ => Ok(None),
    }
}

impl DirectRelaxation {
    /// Returns the optimal value and moment vector.
    pub fn solve(&self, problem: &DROProblem) -> Result<(f64, TMS)> {
        let sol = solve_refined(&self.program)?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::Inaccurate => {}
            other => {
                return Err(Error::Solver(format!(
                    "direct relaxation stopped with {other:?}"
                )))
            }
        }
        let w = TMS::new(
            problem.n,
            2 * self.t,
            sol.v[self.w_offset..self.w_offset + self.nw].to_vec(),
        );
        Ok((sol.objective, w))
    }
}

/// Solves the pair at order `k`, falling back to the direct relaxation for
/// the moment vector when dual recovery degenerates.
pub fn solve_order(
    problem: &DROProblem,
    k: u32,
    z_order: u32,
    cap: usize,
) -> Result<RelaxationOutcome> {
    let pair = build_moment_sos_pair_extended(problem, k, z_order, cap)?;
    let mut out = pair.solve(problem)?;
    if out.degenerate_recovery && problem.y.is_polyhedral() {
        let direct = build_direct_relaxation_with_cap(problem, k, cap)?;
        let (value, w) = direct.solve(problem)?;
        let riesz_f = riesz(&problem.f, &w)?;
        let scale = out.gamma_k.abs().max(1.0);
        out.gap = GapReport {
            gamma: out.gamma_k,
            riesz_f,
            gap: riesz_f - out.gamma_k,
            passed: (value - out.gamma_k).abs() <= 1e-4 * scale.max(10.0),
        };
        out.w_center = w.clone();
        out.w_star = w;
        out.recovered_from_direct = true;
    }
    Ok(out)
}

/// `solve_order` followed by the extreme-point selection pass for the dual
/// moments; the selected `z` replaces the analytic-center one when the
/// re-solve succeeds.
pub fn solve_order_selected(
    problem: &DROProblem,
    k: u32,
    z_order: u32,
    cap: usize,
    seed: u64,
) -> Result<RelaxationOutcome> {
    let mut out = solve_order(problem, k, z_order, cap)?;
    if let Some(mut z) = select_extreme_dual(problem, k, z_order, cap, out.gamma_k, seed)? {
        if problem.y.provenance == crate::model::Provenance::AutoHomogenized
            && z.values[0] > 1e-9
        {
            let z0 = z.values[0];
            for v in &mut z.values {
                *v /= z0;
            }
        }
        let deg = problem.degrees();
        out.y_star = truncate(&z, deg.d)?;
        // keep the full degree-2*z_order moments: the extension carries the
        // evidence for flat truncation checks downstream
        out.z_star = z;
    }
    if problem.y.is_polyhedral() {
        if let Some(w) = select_extreme_primal(problem, k, cap, out.gamma_k, seed)? {
            let riesz_f = riesz(&problem.f, &w)?;
            let scale = out.gamma_k.abs().max(1.0);
            if (w.values[0] - 1.0).abs() <= 1e-6 && (riesz_f - out.gamma_k).abs() <= 1e-4 * scale
            {
                out.gap = GapReport {
                    gamma: out.gamma_k,
                    riesz_f,
                    gap: riesz_f - out.gamma_k,
                    passed: true,
                };
                out.w_star = w;
            }
        }
    }
    Ok(out)
}

/// A sum-of-squares polynomial `[xi]_k1' (B'B) [xi]_k1` with `B` a seeded
/// standard-Gaussian matrix; used as a generic extraction objective.
pub fn random_sos_objective(p: usize, k1: u32, seed: u64) -> Polynomial {
    use rand::distributions::Distribution;
    let basis = GradedBasis::new(p, k1);
    let m = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    let b = nalgebra::DMatrix::from_fn(m, m, |_, _| normal.sample(&mut rng));
    let gram = b.transpose() * &b;
    let mut r = Polynomial::zero(p);
    for i in 0..m {
        for j in 0..m {
            r.add_term(basis.exponents[i].add(&basis.exponents[j]), gram[(i, j)]);
        }
    }
    r
}

/// Outcome of the truncated moment problem used to certify that `y*` admits
/// a representing measure on the support set.
#[derive(Clone, Debug)]
pub enum TkmpOutcome {
    Feasible(TMS),
    Infeasible,
}

/// The truncated moment problem: minimize `<R, z_hat>` over extensions
/// `z_hat` of `y_star` that satisfy the order-`k1` support constraints.
pub struct Tkmp {
    pub program: ConicProgram,
    p: usize,
    k1: u32,
    nz: usize,
}

pub fn build_tkmp(y_star: &TMS, g: &[Polynomial], k1: u32, r_obj: &Polynomial) -> Result<Tkmp> {
    let p = y_star.var_count;
    if 2 * k1 < y_star.degree || r_obj.degree() > 2 * k1 {
        return Err(Error::DegreeOverflow {
            degree: y_star.degree.max(r_obj.degree()),
            max: 2 * k1,
        });
    }
    let nz = basis_len(p, 2 * k1);
    let full = GradedBasis::new(p, 2 * k1);
    let mut builder = ConicProgramBuilder::new();
    let z_offset = builder.add_block(Cone::Free(nz));
    for (i, &v) in y_star.values.iter().enumerate() {
        builder.add_row(vec![(z_offset + i, 1.0)], v);
    }
    add_support_blocks(&mut builder, g, z_offset, &full, k1, DEFAULT_PSD_CAP)?;
    for (e, &c) in &r_obj.terms {
        builder.add_objective(z_offset + full.index_of(e).unwrap(), c);
    }
    Ok(Tkmp {
        program: builder.build(),
        p,
        k1,
        nz,
    })
}

impl Tkmp {
    pub fn solve(&self) -> Result<TkmpOutcome> {
        let mut sol = self.program.solve()?;
        if sol.status == SolveStatus::Inaccurate {
            if let Ok(tight) = self.program.solve_tight() {
                sol = tight;
            }
        }
        match sol.status {
            SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(TkmpOutcome::Feasible(TMS::new(
                self.p,
                2 * self.k1,
                sol.v[..self.nz].to_vec(),
            ))),
            SolveStatus::Infeasible => Ok(TkmpOutcome::Infeasible),
            SolveStatus::Unbounded => Err(Error::Solver(
                "truncated moment problem reported unbounded".into(),
            )),
        }
    }
}

/// Outcome of the heuristic deterministic polynomial optimization.
#[derive(Clone, Debug)]
pub enum HeuristicOutcome {
    Optimizer { x: Vec<f64>, value: f64 },
    Infeasible,
    Inconclusive,
}

/// The scalarized robust constraint `h(x)' y*` as a polynomial in `x`.
pub fn scalarized_constraint(problem: &DROProblem, y_star: &TMS) -> Result<Polynomial> {
    let deg = problem.degrees();
    let coeffs = decompose_in_xi(&problem.h, problem.n, problem.p, deg.d)?;
    if y_star.values.len() != coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.len(),
            got: y_star.values.len(),
        });
    }
    let mut hy = Polynomial::zero(problem.n);
    for (hr, &yr) in coeffs.iter().zip(&y_star.values) {
        if yr != 0.0 {
            hy = &hy + &hr.scale(yr);
        }
    }
    Ok(hy)
}

/// Minimizes `f` over `c(x) >= 0` and `h(x)' y* >= 0` by a plain moment
/// hierarchy over `x`, with flat truncation for optimizer extraction.
pub fn solve_heuristic_pop(
    problem: &DROProblem,
    y_star: &TMS,
    max_order: u32,
) -> Result<HeuristicOutcome> {
    let hy = scalarized_constraint(problem, y_star)?;
    let mut cons = problem.c.clone();
    if !hy.is_zero() && hy.degree() > 0 {
        cons.push(hy);
    }
    let n = problem.n;
    let d2 = cons
        .iter()
        .map(|c| c.degree().div_ceil(2))
        .max()
        .unwrap_or(0)
        .max(1);
    let k0 = d2.max(problem.f.degree().div_ceil(2)).max(1);
    let mut bound: Option<f64> = None;
    for kappa in k0..=max_order.max(k0) {
        match lasserre_step(&problem.f, &cons, n, k0, d2, kappa)? {
            LasserreStep::Optimizer(x, value) => {
                return Ok(HeuristicOutcome::Optimizer { x, value })
            }
            LasserreStep::Infeasible => return Ok(HeuristicOutcome::Infeasible),
            LasserreStep::Bound(v) => bound = Some(v),
        }
    }
    // The minimizer may not be unique, in which case the moments above stay
    // non-flat. Select one by minimizing |x|^2 over the optimal-value slice.
    if let Some(f_lb) = bound.filter(|v| v.is_finite()) {
        let slack = 1e-5 * f_lb.abs().max(1.0);
        let mut slice = problem.f.scale(-1.0);
        slice.add_term(Exponent::zeros(n), f_lb + slack);
        let mut cons2 = cons.clone();
        cons2.push(slice);
        let mut norm = Polynomial::zero(n);
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = 2;
            norm.add_term(Exponent(e), 1.0);
        }
        let d2b = d2.max(problem.f.degree().div_ceil(2));
        for kappa in k0..=max_order.max(k0) {
            if let LasserreStep::Optimizer(x, _) =
                lasserre_step(&norm, &cons2, n, k0, d2b, kappa)?
            {
                let value = problem.f.eval(&x)?;
                if value <= f_lb + 10.0 * slack {
                    return Ok(HeuristicOutcome::Optimizer { x, value });
                }
            }
        }
    }
    Ok(HeuristicOutcome::Inconclusive)
}

enum LasserreStep {
    Optimizer(Vec<f64>, f64),
    Bound(f64),
    Infeasible,
}

/// One order of a plain moment hierarchy for `min obj` over `cons >= 0`;
/// returns an extracted minimizer when the moments pass flat truncation.
fn lasserre_step(
    obj: &Polynomial,
    cons: &[Polynomial],
    n: usize,
    k0: u32,
    d2: u32,
    kappa: u32,
) -> Result<LasserreStep> {
    let full = GradedBasis::new(n, 2 * kappa);
    let mut builder = ConicProgramBuilder::new();
    let mu = builder.add_block(Cone::Free(full.len()));
    builder.add_row(vec![(mu, 1.0)], 1.0);
    add_support_blocks(&mut builder, cons, mu, &full, kappa, DEFAULT_PSD_CAP)?;
    for (e, &c) in &obj.terms {
        builder.add_objective(mu + full.index_of(e).unwrap(), c);
    }
    let sol = builder.build().solve()?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        SolveStatus::Infeasible => return Ok(LasserreStep::Infeasible),
        SolveStatus::Unbounded => return Ok(LasserreStep::Bound(f64::NEG_INFINITY)),
    }
    let m = TMS::new(n, 2 * kappa, sol.v[..full.len()].to_vec());
    if let Some(flat) = flat_truncation_check(&m, k0, d2, kappa, 1e-6) {
        let measure = extract_atoms(&m, flat.d1, d2, flat.rank, &ExtractOptions::default())?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (_, point) in &measure.atoms {
            let v = obj.eval(point)?;
            if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, point.clone()));
            }
        }
        if let Some((value, x)) = best {
            return Ok(LasserreStep::Optimizer(x, value));
        }
    }
    Ok(LasserreStep::Bound(sol.objective))
}

/// The feasibility-verification value `eta_k`: the minimum of `h(x_hat)' y`
/// over the ambiguity cone intersected with the order-`2k` support
/// constraints. `-inf` when the program is unbounded below.
pub fn verify_feasibility(x_hat: &[f64], problem: &DROProblem, k: u32) -> Result<f64> {
    let deg = problem.degrees();
    if x_hat.len() != problem.n {
        return Err(Error::DimensionMismatch {
            expected: problem.n,
            got: x_hat.len(),
        });
    }
    let coeffs = decompose_in_xi(&problem.h, problem.n, problem.p, deg.d)?;
    let nz = basis_len(problem.p, 2 * k);
    let full = GradedBasis::new(problem.p, 2 * k);
    let mut builder = ConicProgramBuilder::new();
    let z_offset = builder.add_block(Cone::Free(nz));
    add_support_blocks(&mut builder, &problem.g, z_offset, &full, k, DEFAULT_PSD_CAP)?;
    add_cone_y_blocks(&mut builder, &problem.y, z_offset, DEFAULT_PSD_CAP)?;
    for (r, hr) in coeffs.iter().enumerate() {
        let b = hr.eval(x_hat)?;
        if b != 0.0 {
            builder.add_objective(z_offset + r, b);
        }
    }
    let sol = builder.build().solve()?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(sol.objective),
        SolveStatus::Unbounded => Ok(f64::NEG_INFINITY),
        SolveStatus::Infeasible => Err(Error::Solver(
            "feasibility verification program reported infeasible".into(),
        )),
    }
}

/// Re-derives membership of `(H w*)'[xi]_d` in the sum of the truncated
/// quadratic module and the dual ambiguity cone, as an independent check of
/// the recovered moment vector. Polyhedral ambiguity cones only.
pub fn check_recovery(problem: &DROProblem, outcome: &RelaxationOutcome) -> Result<bool> {
    let gens = dual_generators_y(&problem.y)?;
    let deg = problem.degrees();
    let hm = problem.h_matrix()?;
    let x_basis = GradedBasis::new(problem.n, 2 * deg.t);
    let hw = &hm.matrix
        * nalgebra::DVector::from_vec(
            x_basis
                .exponents
                .iter()
                .map(|e| {
                    let idx = GradedBasis::new(problem.n, 2 * deg.t).index_of(e).unwrap();
                    outcome.w_star.values[idx]
                })
                .collect::<Vec<f64>>(),
        );
    let xi_basis = GradedBasis::new(problem.p, deg.d);
    let mut builder = ConicProgramBuilder::new();
    let lambda = builder.add_block(Cone::Nonneg(gens.len()));
    let mut target = LinearPoly::zero(problem.p);
    for r in 0..xi_basis.len() {
        let e = xi_basis.exponents[r].clone();
        target.add_constant(e.clone(), hw[r]);
        for (a, gen) in gens.iter().enumerate() {
            let ga = gen.get(r).copied().unwrap_or(0.0);
            if ga != 0.0 {
                target.add_variable(e.clone(), lambda + a, -ga);
            }
        }
    }
    // small slack for numerical recovery error
    target.add_constant(Exponent::zeros(problem.p), 1e-6);
    encode_qmod_membership(&mut builder, &target, &problem.g, outcome.k)?;
    Ok(solve_feasibility(builder)?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConeYDescription, YBlock};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn poly(var_count: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        let mut p = Polynomial::zero(var_count);
        for (e, c) in terms {
            p.add_term(Exponent(e.to_vec()), *c);
        }
        p
    }

    fn interval_support() -> Vec<Polynomial> {
        vec![poly(1, &[(&[1], 1.0)]), poly(1, &[(&[0], 1.0), (&[1], -1.0)])]
    }

    fn interval_cone() -> ConeYDescription {
        let qs = vec![
            poly(1, &[(&[0], 1.0), (&[1], -1.0)]),
            poly(1, &[(&[1], 1.0), (&[2], -2.0)]),
            poly(1, &[(&[2], 2.0), (&[3], -3.0)]),
            poly(1, &[(&[3], 3.0)]),
        ];
        ConeYDescription::user(1, 3, vec![YBlock::Linear(qs)]).unwrap()
    }

    fn univariate_linear() -> DROProblem {
        // min x1 - 2x2 with an SOS-concave robust constraint on [0,1]
        let f = poly(2, &[(&[1, 0], 1.0), (&[0, 1], -2.0)]);
        let c = vec![
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0), (&[0, 1], -1.0)]),
        ];
        let h = poly(
            3,
            &[
                (&[0, 0, 0], 1.0),
                (&[1, 0, 1], 1.0),
                (&[0, 1, 2], -2.0),
                (&[1, 0, 3], 1.0),
                (&[0, 2, 3], -1.0),
            ],
        );
        DROProblem::new(2, 1, f, c, h, interval_support(), interval_cone()).unwrap()
    }

    fn univariate_quadratic() -> DROProblem {
        // min 2x1 - 3x2 + x1^2 - x1x2 + x2^2 over the box [-1,1]^2
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
        let c = vec![
            poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[0, 2], -1.0)]),
        ];
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
        DROProblem::new(2, 1, f, c, h, interval_support(), interval_cone()).unwrap()
    }

    fn square_support() -> Vec<Polynomial> {
        vec![
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0)]),
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[0, 1], -1.0)]),
        ]
    }

    fn square_cone() -> ConeYDescription {
        // y00 = 1, y10 + y20 <= 1, 2 y02 <= 2, homogenized
        let qs = vec![
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0), (&[2, 0], -1.0)]),
            poly(2, &[(&[0, 0], 2.0), (&[0, 2], -2.0)]),
        ];
        ConeYDescription::homogenize(2, 2, vec![YBlock::Linear(qs)]).unwrap()
    }

    fn bilinear_rank1() -> DROProblem {
        let f = poly(2, &[(&[2, 0], 1.0), (&[1, 1], 2.0), (&[0, 1], 1.0)]);
        let c = vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])];
        let h = poly(
            4,
            &[
                (&[1, 1, 0, 0], 1.0),
                (&[1, 0, 2, 0], -1.0),
                (&[0, 2, 0, 2], -1.0),
            ],
        );
        DROProblem::new(2, 2, f, c, h, square_support(), square_cone()).unwrap()
    }

    fn heuristic_nonconvex() -> DROProblem {
        let f = poly(2, &[(&[1, 1], 1.0), (&[0, 2], -1.0)]);
        let c = vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], 1.0)])];
        let h = poly(
            4,
            &[
                (&[1, 1, 0, 0], 1.0),
                (&[1, 0, 2, 0], 1.0),
                (&[0, 2, 0, 2], -1.0),
            ],
        );
        DROProblem::new(2, 2, f, c, h, square_support(), square_cone()).unwrap()
    }

    #[test]
    fn pair_univariate_linear() {
        let problem = univariate_linear();
        let deg = problem.degrees();
        let pair = build_moment_sos_pair(&problem, deg.d0).unwrap();
        let out = pair.solve(&problem).unwrap();
        assert_relative_eq!(out.gamma_k, -2.0, epsilon = 1e-5);
        // the degree-1 moments are determined; the trailing entries lie on a
        // non-unique optimal face, so only the projection is pinned down
        let x_star = crate::moment::project_pi(&out.w_star);
        assert_relative_eq!(out.w_star.values[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(x_star[0], 0.0, epsilon = 1e-5);
        assert_relative_eq!(x_star[1], 1.0, epsilon = 1e-5);
        assert_relative_eq!(out.gap.riesz_f, -2.0, epsilon = 1e-5);
        assert!(out.invariant_violation(&problem).unwrap() < 1e-6);
        // the reference optimizer attains the same value on the same face
        let reference = TMS::new(2, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(
            riesz(&problem.f, &reference).unwrap(),
            out.gamma_k,
            epsilon = 1e-5
        );
    }

    #[test]
    fn direct_matches_pair_univariate_linear() {
        let problem = univariate_linear();
        let k = problem.degrees().d0;
        let pair_val = build_moment_sos_pair(&problem, k)
            .unwrap()
            .solve(&problem)
            .unwrap()
            .gamma_k;
        let (direct_val, w) = build_direct_relaxation(&problem, k)
            .unwrap()
            .solve(&problem)
            .unwrap();
        assert_relative_eq!(direct_val, -2.0, epsilon = 1e-5);
        assert_relative_eq!(direct_val, pair_val, epsilon = 1e-5);
        assert_relative_eq!(w.values[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn direct_univariate_quadratic() {
        let problem = univariate_quadratic();
        let k = problem.degrees().d0;
        let (value, w) = build_direct_relaxation(&problem, k)
            .unwrap()
            .solve(&problem)
            .unwrap();
        assert_relative_eq!(value, -2.25, epsilon = 1e-5);
        let expect = [1.0, -0.5, 1.0, 0.25, -0.5, 1.0];
        for (got, want) in w.values.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-3);
        }
        let pair_val = build_moment_sos_pair(&problem, k)
            .unwrap()
            .solve(&problem)
            .unwrap()
            .gamma_k;
        assert_relative_eq!(pair_val, value, epsilon = 1e-5);
    }

    #[test]
    fn pair_bilinear_rank1() {
        let problem = bilinear_rank1();
        let pair = build_moment_sos_pair(&problem, 1).unwrap();
        let out = pair.solve(&problem).unwrap();
        assert_relative_eq!(out.gamma_k, -1.0 / 12.0, epsilon = 1e-4);
        let sixth = 1.0 / 6.0;
        let w_expect = [
            1.0,
            -sixth,
            -sixth,
            sixth * sixth,
            sixth * sixth,
            sixth * sixth,
        ];
        for (got, want) in out.w_star.values.iter().zip(w_expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-3);
        }
        // only the moments paired with h are pinned down by the program;
        // the reference dual optimizer (the moments of a point mass at
        // (0, 1)) shares them
        let y = &out.y_star.values;
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(y[3], 0.0, epsilon = 1e-3); // y20
        assert_relative_eq!(y[5], 1.0, epsilon = 1e-3); // y02
        assert!(problem.y.membership_distance(y).unwrap() < 1e-6);
        assert!(out.invariant_violation(&problem).unwrap() < 1e-5);
    }

    #[test]
    fn selected_primal_is_atomic() {
        let problem = univariate_linear();
        let k = problem.degrees().d0;
        let out = solve_order_selected(&problem, k, k, DEFAULT_PSD_CAP, 0).unwrap();
        // the primal selection lands on the moments of the point mass at
        // the unique minimizer (0, 1)
        let w_expect = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        for (got, want) in out.w_star.values.iter().zip(w_expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-4);
        }
        assert_eq!(
            crate::moment::numeric_rank(&moment_matrix(&out.w_star, 1).unwrap(), 1e-5),
            1
        );
    }

    #[test]
    fn selected_dual_is_atomic() {
        let problem = bilinear_rank1();
        // carrying z at order 2 forces the order-2 support conditions on
        // the face, ruling out the non-representable vertices
        let out = solve_order_selected(&problem, 1, 2, DEFAULT_PSD_CAP, 0).unwrap();
        // the selection pass should land on the moments of the point mass
        // at (0, 1), the unique atomic point of the dual optimal face
        let y_expect = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        for (got, want) in out.y_star.values.iter().zip(y_expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-4);
        }
        let m = moment_matrix(&out.y_star, 1).unwrap();
        assert_eq!(crate::moment::numeric_rank(&m, 1e-6), 1);
    }

    #[test]
    fn vacuous_robust_constraint_is_lp() {
        // h = 1: the robust constraint never binds and the pair reduces to
        // minimizing a linear objective over the simplex
        let f = poly(2, &[(&[1, 0], 1.0), (&[0, 1], -2.0)]);
        let c = vec![
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0), (&[0, 1], -1.0)]),
        ];
        let h = poly(3, &[(&[0, 0, 0], 1.0)]);
        let y = ConeYDescription::homogenize(1, 0, vec![]).unwrap();
        let problem = DROProblem::new(2, 1, f, c, h, interval_support(), y).unwrap();
        let d0 = problem.degrees().d0;
        let out = solve_order(&problem, d0, d0, DEFAULT_PSD_CAP).unwrap();
        assert_relative_eq!(out.gamma_k, -2.0, epsilon = 1e-6);
    }

    #[test]
    fn pair_vs_direct_random_instances() {
        for seed in 0..3u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = poly(
                1,
                &[
                    (&[1], rng.gen_range(-1.0..1.0)),
                    (&[2], rng.gen_range(0.0..1.0)),
                ],
            );
            let c = vec![poly(1, &[(&[0], 1.0), (&[2], -1.0)])];
            let mut h = poly(2, &[(&[0, 0], 2.0)]);
            for ex in 0..=2u32 {
                for exi in 0..=3u32 {
                    if ex + exi > 0 {
                        h.add_term(Exponent(vec![ex, exi]), rng.gen_range(-0.5..0.5));
                    }
                }
            }
            let problem =
                DROProblem::new(1, 1, f, c, h, interval_support(), interval_cone()).unwrap();
            let k = problem.degrees().d0;
            let pair_val = build_moment_sos_pair(&problem, k)
                .unwrap()
                .solve(&problem)
                .unwrap()
                .gamma_k;
            let (direct_val, _) = build_direct_relaxation(&problem, k)
                .unwrap()
                .solve(&problem)
                .unwrap();
            assert_relative_eq!(pair_val, direct_val, epsilon = 1e-5);
        }
    }

    #[test]
    fn gamma_monotone_and_sandwiched() {
        let problem = bilinear_rank1();
        let g1 = build_moment_sos_pair(&problem, 1)
            .unwrap()
            .solve(&problem)
            .unwrap();
        let g2 = build_moment_sos_pair(&problem, 2)
            .unwrap()
            .solve(&problem)
            .unwrap();
        assert!(g1.gamma_k <= g2.gamma_k + 1e-6);
        // x = 0 is feasible: h(0, xi) = 0 and c(0) = 1
        assert!(g2.gamma_k <= problem.f.eval(&[0.0, 0.0]).unwrap() + 1e-6);
        assert!(g1.gamma_k <= g1.gap.riesz_f + 1e-6);
    }

    #[test]
    fn recovery_membership_check() {
        let problem = univariate_linear();
        let d0 = problem.degrees().d0;
        let out = solve_order(&problem, d0, d0, DEFAULT_PSD_CAP).unwrap();
        assert!(check_recovery(&problem, &out).unwrap());
    }

    #[test]
    fn psd_cap_refusal() {
        let problem = univariate_linear();
        match build_moment_sos_pair_with_cap(&problem, 2, 2) {
            Err(Error::DimensionCap { cap: 2, .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
            Ok(_) => panic!("expected a cap refusal"),
        }
    }

    #[test]
    fn random_sos_objective_properties() {
        let r1 = random_sos_objective(2, 2, 7);
        let r2 = random_sos_objective(2, 2, 7);
        assert_eq!(r1.terms, r2.terms);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let pt = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            assert!(r1.eval(&pt).unwrap() >= -1e-9);
        }
        assert!(crate::sos::check_sos(&r1, 2).unwrap().is_some());
    }

    #[test]
    fn tkmp_point_mass_roundtrip() {
        let y = TMS::dirac(&[0.3], 3);
        let r = random_sos_objective(1, 2, 11);
        let tkmp = build_tkmp(&y, &interval_support(), 2, &r).unwrap();
        match tkmp.solve().unwrap() {
            TkmpOutcome::Feasible(z) => {
                let flat = flat_truncation_check(&z, 1, 1, 2, 1e-6).expect("flat");
                assert_eq!(flat.rank, 1);
                let measure =
                    extract_atoms(&z, flat.d1, 1, flat.rank, &ExtractOptions::default()).unwrap();
                assert_eq!(measure.atoms.len(), 1);
                assert_relative_eq!(measure.atoms[0].1[0], 0.3, epsilon = 1e-5);
                assert_relative_eq!(measure.atoms[0].0, 1.0, epsilon = 1e-5);
            }
            TkmpOutcome::Infeasible => panic!("expected feasible"),
        }
    }

    #[test]
    fn tkmp_detects_infeasibility() {
        // y2 = -1 contradicts psd-ness of any moment-matrix extension
        let y = TMS::new(1, 3, vec![1.0, 0.0, -1.0, 0.0]);
        let r = random_sos_objective(1, 2, 3);
        let tkmp = build_tkmp(&y, &interval_support(), 2, &r).unwrap();
        assert!(matches!(tkmp.solve().unwrap(), TkmpOutcome::Infeasible));
    }

    #[test]
    fn heuristic_unconstrained_quadratic() {
        let f = poly(2, &[
            (&[2, 0], 1.0),
            (&[1, 0], -2.0),
            (&[0, 2], 1.0),
            (&[0, 1], 4.0),
            (&[0, 0], 5.0),
        ]);
        let h = poly(3, &[(&[0, 0, 0], 1.0)]);
        let y = ConeYDescription::homogenize(1, 0, vec![]).unwrap();
        let problem = DROProblem::new(2, 1, f, vec![], h, interval_support(), y).unwrap();
        let y_star = TMS::new(1, 0, vec![1.0]);
        match solve_heuristic_pop(&problem, &y_star, 3).unwrap() {
            HeuristicOutcome::Optimizer { x, value } => {
                assert_relative_eq!(x[0], 1.0, epsilon = 1e-5);
                assert_relative_eq!(x[1], -2.0, epsilon = 1e-5);
                assert_relative_eq!(value, 0.0, epsilon = 1e-6);
            }
            other => panic!("expected optimizer, got {other:?}"),
        }
    }

    #[test]
    fn heuristic_nonconvex_instance() {
        let problem = heuristic_nonconvex();
        let y_star = TMS::new(2, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        match solve_heuristic_pop(&problem, &y_star, 3).unwrap() {
            HeuristicOutcome::Optimizer { x, value } => {
                assert!(x[0].abs() < 1e-3 && x[1].abs() < 1e-3, "x = {x:?}");
                assert_relative_eq!(value, 0.0, epsilon = 1e-5);
            }
            other => panic!("expected optimizer, got {other:?}"),
        }
    }

    #[test]
    fn heuristic_matches_grid_search() {
        let f = poly(
            2,
            &[
                (&[4, 0], 1.0),
                (&[0, 4], 1.0),
                (&[2, 0], -2.0),
                (&[0, 2], -1.0),
                (&[1, 1], 0.3),
            ],
        );
        let c = vec![poly(2, &[(&[0, 0], 4.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])];
        let h = poly(3, &[(&[0, 0, 0], 3.0), (&[1, 0, 0], 1.0), (&[0, 1, 1], 1.0)]);
        let y = ConeYDescription::homogenize(1, 1, vec![]).unwrap();
        let problem = DROProblem::new(2, 1, f.clone(), c.clone(), h, interval_support(), y).unwrap();
        let y_star = TMS::new(1, 1, vec![1.0, 0.5]);
        let hy = scalarized_constraint(&problem, &y_star).unwrap();
        let value = match solve_heuristic_pop(&problem, &y_star, 4).unwrap() {
            HeuristicOutcome::Optimizer { value, .. } => value,
            other => panic!("expected optimizer, got {other:?}"),
        };
        let mut grid_best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let pt = [-2.0 + 0.01 * i as f64, -2.0 + 0.01 * j as f64];
                if c[0].eval(&pt).unwrap() >= 0.0 && hy.eval(&pt).unwrap() >= 0.0 {
                    grid_best = grid_best.min(f.eval(&pt).unwrap());
                }
            }
        }
        assert_relative_eq!(value, grid_best, epsilon = 1e-3);
    }

    #[test]
    fn verify_zero_constraint_vector() {
        let problem = heuristic_nonconvex();
        // h((0,0), xi) = 0 identically
        let eta = verify_feasibility(&[0.0, 0.0], &problem, 1).unwrap();
        assert!(eta.abs() <= 1e-7, "eta = {eta}");
    }

    #[test]
    fn verify_detects_violation() {
        // h(x, xi) = -1 at x = 0: scaling any member ray drives the value
        // to -infinity
        let f = poly(1, &[(&[1], 1.0)]);
        let h = poly(2, &[(&[0, 0], -1.0), (&[1, 1], 1.0)]);
        let y = ConeYDescription::homogenize(1, 1, vec![]).unwrap();
        let problem = DROProblem::new(1, 1, f, vec![], h, interval_support(), y).unwrap();
        let eta = verify_feasibility(&[0.0], &problem, 1).unwrap();
        assert!(eta == f64::NEG_INFINITY || eta < -1e3, "eta = {eta}");
    }
}
