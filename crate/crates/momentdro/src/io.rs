//! Text formats: the polynomial grammar used in problem files, the JSON
//! problem schema, and the JSON result report.
//!
//! Polynomials are sums of monomial terms over variables `x1..xn` and
//! `xi1..xip`, e.g. `3*x1^2*xi2 - 0.5`. Factors within a term are joined by
//! `*`, exponents by `^`; parentheses are not part of the grammar.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{DROResult, TraceEntry};
use crate::model::{ConeYDescription, DROProblem, YBlock};
use crate::poly::{Exponent, Polynomial};
use crate::{Error, Result};

/// Names available while parsing: `x1..x{x}` and `xi1..xi{xi}`. The `xi`
/// block maps behind the `x` block, matching the variable layout of the
/// robust constraint.
#[derive(Clone, Copy, Debug)]
pub struct VarSet {
    pub x: usize,
    pub xi: usize,
}

impl VarSet {
    pub fn var_count(&self) -> usize {
        self.x + self.xi
    }

    fn resolve(&self, name: &str) -> Option<usize> {
        let (count, offset, digits) = if let Some(rest) = name.strip_prefix("xi") {
            (self.xi, self.x, rest)
        } else if let Some(rest) = name.strip_prefix('x') {
            (self.x, 0, rest)
        } else {
            return None;
        };
        let idx: usize = digits.parse().ok()?;
        if idx >= 1 && idx <= count {
            Some(offset + idx - 1)
        } else {
            None
        }
    }
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (line, col) = (self.line, self.col);
        let mut s = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            s.push(self.bump().unwrap());
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            s.push(self.bump().unwrap());
            if matches!(self.peek(), Some('+' | '-')) {
                s.push(self.bump().unwrap());
            }
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                s.push(self.bump().unwrap());
            }
        }
        s.parse().map_err(|_| Error::Parse {
            line,
            col,
            msg: format!("invalid number `{s}`"),
        })
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            s.push(self.bump().unwrap());
        }
        s
    }

    fn uint(&mut self) -> Result<u32> {
        let (line, col) = (self.line, self.col);
        let mut s = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            s.push(self.bump().unwrap());
        }
        s.parse().map_err(|_| Error::Parse {
            line,
            col,
            msg: if s.is_empty() {
                "expected a nonnegative integer exponent".into()
            } else {
                format!("invalid exponent `{s}`")
            },
        })
    }
}

/// Parses the sum-of-terms grammar into a [`Polynomial`] over the given
/// variable set.
pub fn parse_polynomial(text: &str, vars: &VarSet) -> Result<Polynomial> {
    let mut cur = Cursor::new(text);
    let mut poly = Polynomial::zero(vars.var_count());
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(cur.err("empty polynomial"));
    }
    let mut first = true;
    loop {
        cur.skip_ws();
        let mut sign = 1.0;
        match cur.peek() {
            Some('+') => {
                cur.bump();
            }
            Some('-') => {
                cur.bump();
                sign = -1.0;
            }
            Some(_) if first => {}
            Some(c) => return Err(cur.err(format!("expected `+` or `-`, found `{c}`"))),
            None => break,
        }
        first = false;
        let (coef, exponent) = parse_term(&mut cur, vars)?;
        poly.add_term(exponent, sign * coef);
        cur.skip_ws();
        if cur.peek().is_none() {
            break;
        }
    }
    Ok(poly)
}

fn parse_term(cur: &mut Cursor, vars: &VarSet) -> Result<(f64, Exponent)> {
    let mut coef = 1.0;
    let mut exponent = vec![0u32; vars.var_count()];
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => {
                coef *= cur.number()?;
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let (line, col) = (cur.line, cur.col);
                let name = cur.ident();
                let idx = vars.resolve(&name).ok_or(Error::Parse {
                    line,
                    col,
                    msg: format!("unknown variable `{name}`"),
                })?;
                let mut e = 1;
                if cur.peek() == Some('^') {
                    cur.bump();
                    if cur.peek() == Some('-') {
                        return Err(cur.err("negative exponents are not allowed"));
                    }
                    e = cur.uint()?;
                }
                exponent[idx] += e;
            }
            Some(c) => return Err(cur.err(format!("unexpected character `{c}` in term"))),
            None => return Err(cur.err("unexpected end of input in term")),
        }
        cur.skip_ws();
        if cur.peek() == Some('*') {
            cur.bump();
        } else {
            break;
        }
    }
    Ok((coef, Exponent(exponent)))
}

/// Renders a polynomial back into the grammar of [`parse_polynomial`].
pub fn format_polynomial(poly: &Polynomial, vars: &VarSet) -> String {
    if poly.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (e, &c) in &poly.terms {
        let mut mono = String::new();
        for (i, &exp) in e.0.iter().enumerate() {
            if exp == 0 {
                continue;
            }
            if !mono.is_empty() {
                mono.push('*');
            }
            if i < vars.x {
                mono.push_str(&format!("x{}", i + 1));
            } else {
                mono.push_str(&format!("xi{}", i - vars.x + 1));
            }
            if exp > 1 {
                mono.push_str(&format!("^{exp}"));
            }
        }
        let mag = c.abs();
        let body = if mono.is_empty() {
            format!("{mag}")
        } else if mag == 1.0 {
            mono
        } else {
            format!("{mag}*{mono}")
        };
        if out.is_empty() {
            if c < 0.0 {
                out.push_str("- ");
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}

/// JSON schema of one ambiguity-set block.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum AmbiguityBlockFile {
    /// `<q, y> >= 0` for each polynomial `q` in the `xi` variables, pairing
    /// coefficients against moments.
    Linear { polys: Vec<String> },
    /// Entrywise bounds on `y / y_0` in graded order; `null` leaves a side
    /// open.
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    NormBound { scale: f64 },
    /// `M(y) <= scale * y_0 * I` with the packed lower triangle of `M`
    /// listed as monomials in the `xi` variables.
    PsdUpper {
        side: usize,
        entries: Vec<String>,
        scale: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityFile {
    pub degree: u32,
    /// `true` when the blocks already describe the homogeneous cone;
    /// `false` (the default) for a description on the `y_0 = 1` slice,
    /// which is homogenized on load.
    #[serde(default)]
    pub homogeneous: bool,
    pub blocks: Vec<AmbiguityBlockFile>,
}

/// JSON schema of a full problem instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub p: usize,
    pub objective: String,
    #[serde(default)]
    pub constraints: Vec<String>,
    pub robust_constraint: String,
    pub support: Vec<String>,
    pub ambiguity: AmbiguityFile,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_problem(&self) -> Result<DROProblem> {
        let x_vars = VarSet { x: self.n, xi: 0 };
        let xi_vars = VarSet { x: 0, xi: self.p };
        let all_vars = VarSet {
            x: self.n,
            xi: self.p,
        };
        let f = parse_polynomial(&self.objective, &x_vars)?;
        let c = self
            .constraints
            .iter()
            .map(|s| parse_polynomial(s, &x_vars))
            .collect::<Result<Vec<_>>>()?;
        let h = parse_polynomial(&self.robust_constraint, &all_vars)?;
        let g = self
            .support
            .iter()
            .map(|s| parse_polynomial(s, &xi_vars))
            .collect::<Result<Vec<_>>>()?;
        let blocks = self
            .ambiguity
            .blocks
            .iter()
            .map(|b| block_from_file(b, &xi_vars))
            .collect::<Result<Vec<_>>>()?;
        let y = if self.ambiguity.homogeneous {
            ConeYDescription::user(self.p, self.ambiguity.degree, blocks)?
        } else {
            ConeYDescription::homogenize(self.p, self.ambiguity.degree, blocks)?
        };
        DROProblem::new(self.n, self.p, f, c, h, g, y)
    }

    /// Renders a problem back into the file schema; useful for bundling
    /// instances and for round-trip tests.
    pub fn from_problem(problem: &DROProblem) -> Self {
        let x_vars = VarSet {
            x: problem.n,
            xi: 0,
        };
        let xi_vars = VarSet {
            x: 0,
            xi: problem.p,
        };
        let all_vars = VarSet {
            x: problem.n,
            xi: problem.p,
        };
        let mut blocks: Vec<AmbiguityBlockFile> = problem
            .y
            .blocks
            .iter()
            .map(|b| block_to_file(b, &xi_vars))
            .collect();
        let homogeneous = problem.y.provenance == crate::model::Provenance::UserHomogeneous;
        if !homogeneous {
            // drop the y_0 >= 0 row appended during homogenization
            blocks.pop();
        }
        ProblemFile {
            n: problem.n,
            p: problem.p,
            objective: format_polynomial(&problem.f, &x_vars),
            constraints: problem
                .c
                .iter()
                .map(|ci| format_polynomial(ci, &x_vars))
                .collect(),
            robust_constraint: format_polynomial(&problem.h, &all_vars),
            support: problem
                .g
                .iter()
                .map(|gj| format_polynomial(gj, &xi_vars))
                .collect(),
            ambiguity: AmbiguityFile {
                degree: problem.y.d,
                homogeneous,
                blocks,
            },
        }
    }
}

fn block_from_file(block: &AmbiguityBlockFile, xi_vars: &VarSet) -> Result<YBlock> {
    Ok(match block {
        AmbiguityBlockFile::Linear { polys } => YBlock::Linear(
            polys
                .iter()
                .map(|s| parse_polynomial(s, xi_vars))
                .collect::<Result<Vec<_>>>()?,
        ),
        AmbiguityBlockFile::Box { lower, upper } => YBlock::Box {
            lower: lower.clone(),
            upper: upper.clone(),
        },
        AmbiguityBlockFile::NormBound { scale } => YBlock::NormBound { scale: *scale },
        AmbiguityBlockFile::PsdUpper {
            side,
            entries,
            scale,
        } => {
            let mut exps = Vec::with_capacity(entries.len());
            for s in entries {
                let p = parse_polynomial(s, xi_vars)?;
                if p.terms.len() != 1 || p.terms.values().any(|&c| c != 1.0) {
                    return Err(Error::Semantic(format!(
                        "psd_upper entry `{s}` must be a plain monomial"
                    )));
                }
                exps.push(p.terms.keys().next().unwrap().clone());
            }
            YBlock::PsdUpperBound {
                side: *side,
                entries: exps,
                scale: *scale,
            }
        }
    })
}

fn block_to_file(block: &YBlock, xi_vars: &VarSet) -> AmbiguityBlockFile {
    match block {
        YBlock::Linear(polys) => AmbiguityBlockFile::Linear {
            polys: polys.iter().map(|p| format_polynomial(p, xi_vars)).collect(),
        },
        YBlock::Box { lower, upper } => AmbiguityBlockFile::Box {
            lower: lower.clone(),
            upper: upper.clone(),
        },
        YBlock::NormBound { scale } => AmbiguityBlockFile::NormBound { scale: *scale },
        YBlock::PsdUpperBound {
            side,
            entries,
            scale,
        } => AmbiguityBlockFile::PsdUpper {
            side: *side,
            entries: entries
                .iter()
                .map(|e| {
                    let mut m = Polynomial::zero(xi_vars.var_count());
                    m.add_term(e.clone(), 1.0);
                    format_polynomial(&m, xi_vars)
                })
                .collect(),
            scale: *scale,
        },
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorstCaseAtomFile {
    pub weight: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRowFile {
    pub k: u32,
    pub k1: Option<u32>,
    pub stage: String,
    pub status: String,
    pub gamma: Option<f64>,
    pub rank: Option<usize>,
}

/// JSON report of a solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultFile {
    pub certificate: String,
    pub f_star: f64,
    pub f_value: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub k_final: u32,
    pub k1_final: u32,
    pub rank_moment_w: usize,
    pub eta: Option<f64>,
    pub gap: f64,
    pub gap_passed: bool,
    pub fragile_rank: bool,
    pub objective_sos_convex: bool,
    pub constraints_sos_convex: bool,
    pub robust_sos_concave: bool,
    pub worst_case: Option<Vec<WorstCaseAtomFile>>,
    pub trace: Vec<TraceRowFile>,
}

impl ResultFile {
    pub fn from_result(result: &DROResult) -> Self {
        let cert = &result.certificate;
        ResultFile {
            certificate: cert.kind.as_str().into(),
            f_star: result.f_star,
            f_value: result.f_value,
            x_star: result.x_star.clone(),
            k_final: result.k_final,
            k1_final: result.k1_final,
            rank_moment_w: cert.rank_moment_w,
            eta: cert.eta,
            gap: cert.gap.gap,
            gap_passed: cert.gap.passed,
            fragile_rank: cert.fragile_rank,
            objective_sos_convex: cert.objective_sos_convex,
            constraints_sos_convex: cert.constraints_sos_convex,
            robust_sos_concave: cert.robust_sos_concave,
            worst_case: result.worst_case.as_ref().map(|m| {
                m.atoms
                    .iter()
                    .map(|(weight, point)| WorstCaseAtomFile {
                        weight: *weight,
                        point: point.clone(),
                    })
                    .collect()
            }),
            trace: result.trace.iter().map(trace_row).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn trace_row(entry: &TraceEntry) -> TraceRowFile {
    TraceRowFile {
        k: entry.k,
        k1: entry.k1,
        stage: entry.stage.into(),
        status: entry.status.clone(),
        gamma: entry.gamma,
        rank: entry.rank,
    }
}
