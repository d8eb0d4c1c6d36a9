//! The outer solve loop: relaxation orders, optimality certificates,
//! worst-case measure extraction, and the verified heuristic fallback.

use std::path::PathBuf;

use nalgebra::DMatrix;

use crate::model::DROProblem;
use crate::moment::{
    extract_atoms, flat_truncation_check, moment_matrix, project_pi, AtomicMeasure,
    ExtractOptions, FlatTruncation, TMS,
};
use crate::relax::{
    build_moment_sos_pair_extended, build_tkmp, random_sos_objective, solve_heuristic_pop,
    solve_order_selected, verify_feasibility, GapReport, HeuristicOutcome, RelaxationOutcome,
    TkmpOutcome, DEFAULT_PSD_CAP,
};
use crate::sos::{is_robust_sos_concave, is_sos_convex, RobustConcavity};
use crate::Result;

/// Knobs for [`run`]. `Default` matches the documented behavior of the CLI.
#[derive(Clone, Debug)]
pub struct DriverOptions {
    /// Last relaxation order to try; `None` means `d0 + 3`.
    pub max_order: Option<u32>,
    /// Cap on the moment-extension order `k1`; `None` means `d0 + 4`.
    pub max_k1: Option<u32>,
    /// Relative singular-value cutoff for numeric rank decisions.
    pub rank_tol: f64,
    /// Seed for every randomized ingredient (generic objectives, atom
    /// extraction); two runs with equal seeds produce identical results.
    pub seed: u64,
    /// Refuse to build psd blocks with side beyond this.
    pub psd_cap: usize,
    /// Relative tolerance for value agreement in certificates.
    pub cert_tol: f64,
    /// Order budget of the heuristic fallback hierarchy.
    pub heuristic_max_order: u32,
    /// When set, every conic program solved by the driver is written there
    /// in the text interchange format.
    pub dump_dir: Option<PathBuf>,
    /// Skips the SOS-convexity battery and takes its outcome as given.
    /// Meant for model families that are convex by construction (the
    /// portfolio builders); the reported convexity flags are then asserted,
    /// not certified.
    pub assume_sos_convex: bool,
}

impl Default for DriverOptions {
    fn default() -> Self {
        DriverOptions {
            max_order: None,
            max_k1: None,
            rank_tol: 1e-6,
            seed: 0,
            psd_cap: DEFAULT_PSD_CAP,
            cert_tol: 1e-5,
            heuristic_max_order: 3,
            dump_dir: None,
            assume_sos_convex: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    /// SOS-convex objective and constraint set plus robustly SOS-concave
    /// constraint, with a closed relaxation gap: the projection of `w*` is a
    /// global minimizer.
    SosConvexTight,
    /// Rank-one moment matrix of `w*` together with an atomic dual measure:
    /// the relaxation is exact at this order.
    RankOne,
    /// A candidate from the deterministic fallback whose feasibility value
    /// is nonnegative and whose objective matches the lower bound.
    HeuristicVerified,
    /// Only the lower bound is certified.
    LowerBoundOnly,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::SosConvexTight => "sos_convex_tight",
            CertificateKind::RankOne => "rank_one",
            CertificateKind::HeuristicVerified => "heuristic_verified",
            CertificateKind::LowerBoundOnly => "lower_bound_only",
        }
    }
}

/// Evidence backing the reported optimality status.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub objective_sos_convex: bool,
    pub constraints_sos_convex: bool,
    pub robust_sos_concave: bool,
    /// Numeric rank of the moment matrix of `w*` at order `t`.
    pub rank_moment_w: usize,
    /// Flat truncation evidence on the dual moment extension, when found.
    pub flat: Option<FlatTruncation>,
    /// Feasibility-verification value of the reported `x*`, when computed.
    pub eta: Option<f64>,
    pub gap: GapReport,
    /// A rank decision sat within an order of magnitude of the cutoff;
    /// the certificate is numerically fragile.
    pub fragile_rank: bool,
}

/// One line of the solve log; every stage the driver visits leaves a row.
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub k: u32,
    pub k1: Option<u32>,
    pub stage: &'static str,
    pub status: String,
    pub gamma: Option<f64>,
    pub rank: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct DROResult {
    /// Reported minimizer (or heuristic candidate); `None` when only the
    /// bound is available.
    pub x_star: Option<Vec<f64>>,
    /// The relaxation bound at the final order; equals the optimal value
    /// whenever a certificate other than `lower_bound_only` is reported.
    pub f_star: f64,
    /// `f` evaluated at `x_star`.
    pub f_value: Option<f64>,
    pub k_final: u32,
    pub k1_final: u32,
    pub certificate: Certificate,
    /// Worst-case distribution attaining the robust constraint, when the
    /// dual moments pass flat truncation.
    pub worst_case: Option<AtomicMeasure>,
    pub trace: Vec<TraceEntry>,
}

struct Battery {
    objective: bool,
    constraints: bool,
    robust: bool,
}

impl Battery {
    fn all(&self) -> bool {
        self.objective && self.constraints && self.robust
    }
}

fn convexity_battery(
    problem: &DROProblem,
    assume: bool,
    trace: &mut Vec<TraceEntry>,
) -> Result<Battery> {
    if assume {
        trace.push(TraceEntry {
            k: 0,
            k1: None,
            stage: "convexity",
            status: "assumed".into(),
            gamma: None,
            rank: None,
        });
        return Ok(Battery {
            objective: true,
            constraints: true,
            robust: true,
        });
    }
    let objective = is_sos_convex(&problem.f)?;
    let mut constraints = true;
    for ci in &problem.c {
        if !is_sos_convex(&ci.scale(-1.0))? {
            constraints = false;
            break;
        }
    }
    let k_prime = problem.h.degree().div_ceil(2).max(1);
    let mut robust = is_robust_sos_concave(
        &problem.h,
        problem.n,
        problem.p,
        &problem.g,
        k_prime,
    )?;
    if matches!(robust, RobustConcavity::Unknown) {
        // one retry at the next order before giving up on the test
        robust = is_robust_sos_concave(
            &problem.h,
            problem.n,
            problem.p,
            &problem.g,
            k_prime + 1,
        )?;
    }
    let battery = Battery {
        objective,
        constraints,
        robust: robust.is_certified(),
    };
    trace.push(TraceEntry {
        k: 0,
        k1: None,
        stage: "convexity",
        status: format!(
            "objective={} constraints={} robust={}",
            battery.objective, battery.constraints, battery.robust
        ),
        gamma: None,
        rank: None,
    });
    Ok(battery)
}

/// Numeric rank with a fragility flag: a singular value within one order of
/// magnitude of the cutoff means the decision could flip under perturbation.
fn rank_with_flag(m: &DMatrix<f64>, tol: f64) -> (usize, bool) {
    if m.is_empty() {
        return (0, false);
    }
    let sv = m.clone().singular_values();
    let top = sv[0].max(1.0);
    let rank = sv.iter().filter(|&&s| s > tol * top).count();
    let fragile = sv
        .iter()
        .any(|&s| s > 0.1 * tol * top && s < 10.0 * tol * top);
    (rank, fragile)
}

/// Does the atomic measure reproduce the dual moments it was extracted from?
fn measure_matches(measure: &AtomicMeasure, y_star: &TMS) -> bool {
    let got = measure.moments(y_star.var_count, y_star.degree);
    let scale = y_star.values[0].abs().max(1.0);
    got.values
        .iter()
        .zip(&y_star.values)
        .all(|(a, b)| (a - b).abs() <= 1e-3 * scale)
}

fn dump_program(dir: &PathBuf, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

enum WorstCase {
    Measure(AtomicMeasure, FlatTruncation),
    /// `y*` admits no order-`k1` extension at all: the relaxation order
    /// itself must grow.
    Infeasible,
    /// Extensions exist but none passed flat truncation within the `k1` cap.
    NotFlat,
}

/// The truncated-moment-problem loop: extend `y*` at order `k1`, raise `k1`
/// until the extension is flat or the cap is hit.
fn worst_case_loop(
    problem: &DROProblem,
    y_star: &TMS,
    k: u32,
    k1: &mut u32,
    k1_cap: u32,
    options: &DriverOptions,
    trace: &mut Vec<TraceEntry>,
) -> Result<WorstCase> {
    let deg = problem.degrees();
    loop {
        let r = random_sos_objective(problem.p, *k1, options.seed);
        let tkmp = match build_tkmp(y_star, &problem.g, *k1, &r) {
            Ok(t) => t,
            // the extension outgrew the psd cap; stop escalating
            Err(crate::Error::DimensionCap { .. }) => return Ok(WorstCase::NotFlat),
            Err(e) => return Err(e),
        };
        if let Some(dir) = &options.dump_dir {
            dump_program(dir, &format!("tkmp_k{k}_k1{}.conic", *k1), &tkmp.program.dump())?;
        }
        let outcome = match tkmp.solve() {
            Ok(o) => o,
            // a numerical breakdown in the extension solve only costs the
            // measure, never the bound; give up on the extraction
            Err(crate::Error::Solver(_)) => return Ok(WorstCase::NotFlat),
            Err(e) => return Err(e),
        };
        match outcome {
            TkmpOutcome::Infeasible => {
                trace.push(TraceEntry {
                    k,
                    k1: Some(*k1),
                    stage: "tkmp",
                    status: "infeasible".into(),
                    gamma: None,
                    rank: None,
                });
                return Ok(WorstCase::Infeasible);
            }
            TkmpOutcome::Feasible(z_hat) => {
                let flat =
                    flat_truncation_check(&z_hat, deg.d0, deg.d2, *k1, options.rank_tol);
                trace.push(TraceEntry {
                    k,
                    k1: Some(*k1),
                    stage: "tkmp",
                    status: if flat.is_some() { "flat" } else { "not-flat" }.into(),
                    gamma: None,
                    rank: flat.map(|f| f.rank),
                });
                if let Some(flat) = flat {
                    let opts = ExtractOptions {
                        seed: options.seed,
                        rank_tol: options.rank_tol,
                    };
                    match extract_atoms(&z_hat, flat.d1, deg.d2, flat.rank, &opts) {
                        Ok(m) if measure_matches(&m, y_star) => {
                            return Ok(WorstCase::Measure(m, flat))
                        }
                        _ => {} // extraction failed; treat as not flat and push k1
                    }
                }
                if *k1 < k1_cap {
                    *k1 += 1;
                } else {
                    return Ok(WorstCase::NotFlat);
                }
            }
        }
    }
}

/// Solves the DRO problem by the full pipeline: convexity battery, the
/// relaxation hierarchy with extreme-point dual selection, worst-case
/// measure extraction, certificate classification, and — when the moment
/// data stays ambiguous — a deterministic heuristic with a posteriori
/// feasibility verification.
pub fn run(problem: &DROProblem, options: &DriverOptions) -> Result<DROResult> {
    let deg = problem.degrees();
    let k_max = options.max_order.unwrap_or(deg.d0 + 3).max(deg.d0);
    let k1_init = (deg.d + 1).div_ceil(2).max(deg.d2);
    let k1_cap = options.max_k1.unwrap_or(deg.d0 + 4).max(k1_init);
    let mut k1 = k1_init;
    let mut trace = Vec::new();

    let battery = convexity_battery(problem, options.assume_sos_convex, &mut trace)?;

    let mut last: Option<RelaxationOutcome> = None;
    let mut k = deg.d0;
    while k <= k_max {
        let z_order = k.max(k1);
        let out = solve_order_selected(problem, k, z_order, options.psd_cap, options.seed)?;
        if let Some(dir) = &options.dump_dir {
            let pair = build_moment_sos_pair_extended(problem, k, z_order, options.psd_cap)?;
            dump_program(dir, &format!("pair_k{k}.conic"), &pair.program.dump())?;
        }
        trace.push(TraceEntry {
            k,
            k1: None,
            stage: "relaxation",
            status: format!("{:?}", out.status),
            gamma: Some(out.gamma_k),
            rank: None,
        });

        // measure extraction starts from the interior dual moments: the
        // extreme-point selection can drop mass that rides a degenerate
        // direction of the dual optimal face, and the extension of the
        // center keeps every atom of the worst-case distribution
        let mut evidence: Option<(AtomicMeasure, FlatTruncation)> = None;
        let mut infeasible = false;
        match worst_case_loop(problem, &out.y_center, k, &mut k1, k1_cap, options, &mut trace)? {
            WorstCase::Measure(m, flat) => evidence = Some((m, flat)),
            WorstCase::Infeasible => infeasible = true,
            WorstCase::NotFlat => {}
        }
        // the selected dual moments may already be flat; a rank-one hit
        // here is the short-circuit certificate for a unique dual measure
        if evidence.is_none() {
            if let Some(flat) =
                flat_truncation_check(&out.z_star, deg.d0, deg.d2, z_order, options.rank_tol)
            {
                let opts = ExtractOptions {
                    seed: options.seed,
                    rank_tol: options.rank_tol,
                };
                if let Ok(m) = extract_atoms(&out.z_star, flat.d1, deg.d2, flat.rank, &opts) {
                    if measure_matches(&m, &out.y_star) {
                        trace.push(TraceEntry {
                            k,
                            k1: Some(z_order),
                            stage: "flat",
                            status: "selected-dual".into(),
                            gamma: None,
                            rank: Some(flat.rank),
                        });
                        evidence = Some((m, flat));
                    }
                }
            }
        }
        if evidence.is_none() {
            match worst_case_loop(problem, &out.y_star, k, &mut k1, k1_cap, options, &mut trace)? {
                WorstCase::Measure(m, flat) => evidence = Some((m, flat)),
                WorstCase::Infeasible => infeasible = true,
                WorstCase::NotFlat => {}
            }
        }
        if evidence.is_none() && infeasible {
            if battery.all() && out.gap.passed {
                // the certificate does not depend on the extension;
                // report it without a worst-case measure
                return classify(problem, &out, &battery, None, k, k1, trace, options);
            }
            last = Some(out);
            k += 1;
            continue;
        }
        return classify(problem, &out, &battery, evidence, k, k1, trace, options);
    }

    let out = last.expect("at least one order was solved");
    let k_final = out.k;
    classify(problem, &out, &battery, None, k_final, k1, trace, options)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    problem: &DROProblem,
    out: &RelaxationOutcome,
    battery: &Battery,
    evidence: Option<(AtomicMeasure, FlatTruncation)>,
    k: u32,
    k1: u32,
    mut trace: Vec<TraceEntry>,
    options: &DriverOptions,
) -> Result<DROResult> {
    let deg = problem.degrees();
    let scale = out.gamma_k.abs().max(1.0);
    let tol = options.cert_tol * scale;
    // rank is judged on the interior face point: rank one there means the
    // whole optimal face is a single moment vector
    let (rank_w, fragile_rank) =
        rank_with_flag(&moment_matrix(&out.w_center, deg.t)?, options.rank_tol);
    let (measure, flat) = match evidence {
        Some((m, f)) => (Some(m), Some(f)),
        None => (None, None),
    };

    let mut certificate = Certificate {
        kind: CertificateKind::LowerBoundOnly,
        objective_sos_convex: battery.objective,
        constraints_sos_convex: battery.constraints,
        robust_sos_concave: battery.robust,
        rank_moment_w: rank_w,
        flat,
        eta: None,
        gap: out.gap.clone(),
        fragile_rank,
    };
    let mut x_star: Option<Vec<f64>> = None;
    let mut f_value: Option<f64> = None;

    // a rank-one center means the optimal face is a single moment vector;
    // the center carries more digits than the re-selected extreme point,
    // whose pinning slack costs square-root accuracy
    let w_report = if rank_w == 1 { &out.w_center } else { &out.w_star };
    if battery.all() && out.gap.passed {
        let x = project_pi(w_report);
        f_value = Some(problem.f.eval(&x)?);
        x_star = Some(x);
        certificate.kind = CertificateKind::SosConvexTight;
    } else if rank_w == 1 && out.gap.passed && measure.is_some() {
        let x = project_pi(w_report);
        let value = problem.f.eval(&x)?;
        if (value - out.gamma_k).abs() <= 10.0 * tol {
            f_value = Some(value);
            x_star = Some(x);
            certificate.kind = CertificateKind::RankOne;
        }
    }

    if certificate.kind == CertificateKind::LowerBoundOnly {
        match solve_heuristic_pop(problem, &out.y_star, options.heuristic_max_order)? {
            HeuristicOutcome::Optimizer { x, value } => {
                let eta = verify_feasibility(&x, problem, k)?;
                trace.push(TraceEntry {
                    k,
                    k1: Some(k1),
                    stage: "heuristic",
                    status: format!("candidate value {value:.6}, eta {eta:.3e}"),
                    gamma: None,
                    rank: None,
                });
                certificate.eta = Some(eta);
                f_value = Some(value);
                x_star = Some(x);
                if eta >= -tol && (value - out.gamma_k).abs() <= 10.0 * tol {
                    certificate.kind = CertificateKind::HeuristicVerified;
                }
            }
            other => {
                trace.push(TraceEntry {
                    k,
                    k1: Some(k1),
                    stage: "heuristic",
                    status: format!("{other:?}"),
                    gamma: None,
                    rank: None,
                });
            }
        }
    }

    trace.push(TraceEntry {
        k,
        k1: Some(k1),
        stage: "certificate",
        status: certificate.kind.as_str().into(),
        gamma: Some(out.gamma_k),
        rank: Some(rank_w),
    });

    Ok(DROResult {
        x_star,
        f_star: out.gamma_k,
        f_value,
        k_final: k,
        k1_final: k1,
        certificate,
        worst_case: measure,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConeYDescription, YBlock};
    use crate::poly::{Exponent, Polynomial};
    use approx::assert_relative_eq;

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

    fn square_support() -> Vec<Polynomial> {
        vec![
            poly(2, &[(&[1, 0], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[1, 0], -1.0)]),
            poly(2, &[(&[0, 1], 1.0)]),
            poly(2, &[(&[0, 0], 1.0), (&[0, 1], -1.0)]),
        ]
    }

    fn square_cone() -> ConeYDescription {
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
            &[(&[1, 1, 0, 0], 1.0), (&[1, 0, 2, 0], -1.0), (&[0, 2, 0, 2], -1.0)],
        );
        DROProblem::new(2, 2, f, c, h, square_support(), square_cone()).unwrap()
    }

    fn heuristic_nonconvex() -> DROProblem {
        let f = poly(2, &[(&[1, 1], 1.0), (&[0, 2], -1.0)]);
        let c = vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], 1.0)])];
        let h = poly(
            4,
            &[(&[1, 1, 0, 0], 1.0), (&[1, 0, 2, 0], 1.0), (&[0, 2, 0, 2], -1.0)],
        );
        DROProblem::new(2, 2, f, c, h, square_support(), square_cone()).unwrap()
    }

    #[test]
    fn convex_tight_instance() {
        let problem = univariate_linear();
        let result = run(&problem, &DriverOptions::default()).unwrap();
        assert_eq!(result.certificate.kind, CertificateKind::SosConvexTight);
        assert_relative_eq!(result.f_star, -2.0, epsilon = 1e-5);
        let x = result.x_star.unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-5);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn rank_one_instance() {
        let problem = bilinear_rank1();
        let result = run(&problem, &DriverOptions::default()).unwrap();
        assert_eq!(result.certificate.kind, CertificateKind::RankOne);
        assert_relative_eq!(result.f_star, -1.0 / 12.0, epsilon = 1e-5);
        let x = result.x_star.unwrap();
        assert_relative_eq!(x[0], -1.0 / 6.0, epsilon = 1e-3);
        assert_relative_eq!(x[1], -1.0 / 6.0, epsilon = 1e-3);
        assert_eq!(result.certificate.rank_moment_w, 1);
        let wc = result.worst_case.unwrap();
        assert!(!wc.atoms.is_empty());
    }

    #[test]
    fn heuristic_instance() {
        let problem = heuristic_nonconvex();
        let result = run(&problem, &DriverOptions::default()).unwrap();
        assert_eq!(result.certificate.kind, CertificateKind::HeuristicVerified);
        let x = result.x_star.unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-3);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-3);
        assert_relative_eq!(result.f_value.unwrap(), 0.0, epsilon = 1e-5);
        assert!(result.certificate.eta.unwrap() >= -1e-5);
    }

    #[test]
    fn deterministic_across_runs() {
        let problem = bilinear_rank1();
        let a = run(&problem, &DriverOptions::default()).unwrap();
        let b = run(&problem, &DriverOptions::default()).unwrap();
        assert_eq!(a.f_star.to_bits(), b.f_star.to_bits());
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ta, tb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ta.stage, tb.stage);
            assert_eq!(ta.status, tb.status);
        }
    }

    #[test]
    fn trace_is_complete() {
        let problem = univariate_linear();
        let result = run(&problem, &DriverOptions::default()).unwrap();
        let stages: Vec<&str> = result.trace.iter().map(|t| t.stage).collect();
        assert_eq!(stages[0], "convexity");
        assert!(stages.contains(&"relaxation"));
        assert_eq!(*stages.last().unwrap(), "certificate");
        // every order from d0 to k_final shows up as a relaxation row
        let deg = problem.degrees();
        for k in deg.d0..=result.k_final {
            assert!(result
                .trace
                .iter()
                .any(|t| t.stage == "relaxation" && t.k == k));
        }
    }
}
