use std::io::Write;

use crate::error::{Error, Result};

/// Sparse affine expression `sum coeff_i * x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, var: usize, coeff: f64) -> Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, var: usize, coeff: f64) {
        self.terms.push((var, coeff));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|&(_, c)| c.is_finite())
    }
}

/// One constraint. `Soc` means `||rows(x)||_2 <= rhs(x)`.
#[derive(Debug, Clone)]
pub enum Cone {
    Soc { rows: Vec<LinExpr>, rhs: LinExpr },
    NonNeg(LinExpr),
    Zero(LinExpr),
}

impl Cone {
    /// Euclidean amount by which `x` violates the constraint; 0 when feasible.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Cone::Soc { rows, rhs } => {
                let norm = rows
                    .iter()
                    .map(|r| r.eval(x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (norm - rhs.eval(x)).max(0.0)
            }
            Cone::NonNeg(e) => (-e.eval(x)).max(0.0),
            Cone::Zero(e) => e.eval(x).abs(),
        }
    }
}

/// Validated immutable program; see the module docs for the problem form.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    n: usize,
    quad_diag: Vec<f64>,
    gram_rows: Vec<LinExpr>,
    linear: Vec<f64>,
    constant: f64,
    cones: Vec<Cone>,
    /// 1 + l2 norm of all cone constant offsets; denominator of the primal
    /// residual scaling.
    offset_scale: f64,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    /// Normalization constant for the primal residual: 1 + l2 norm of all
    /// constraint offsets.
    pub fn offset_scale(&self) -> f64 {
        self.offset_scale
    }

    pub fn has_quadratic(&self) -> bool {
        self.quad_diag.iter().any(|&p| p != 0.0) || !self.gram_rows.is_empty()
    }

    /// Objective value at `x`, including the constant term.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let quad: f64 = self
            .quad_diag
            .iter()
            .zip(x)
            .map(|(&p, &xi)| 0.5 * p * xi * xi)
            .sum();
        let gram: f64 = self.gram_rows.iter().map(|g| 0.5 * g.eval(x).powi(2)).sum();
        let lin: f64 = self.linear.iter().zip(x).map(|(&q, &xi)| q * xi).sum();
        quad + gram + lin + self.constant
    }

    /// Worst violation over all cones at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    /// The documented primal residual: max cone violation over the offset
    /// scale. Pure function of `(self, x)`.
    pub fn primal_residual_at(&self, x: &[f64]) -> f64 {
        self.max_violation(x) / self.offset_scale
    }

    /// Lower the program to `min c' y  s.t.  A y + s = b, s in K` with rows
    /// ordered zero block, nonnegative block, then second-order blocks. When a
    /// quadratic objective is present one auxiliary epigraph variable is
    /// appended (index `n`) together with its epigraph cone (last block).
    /// Second-order cones with no norm rows degrade to nonnegative rows.
    pub fn standard_form(&self) -> StandardForm {
        let has_quad = self.has_quadratic();
        let n_std = self.n + usize::from(has_quad);
        let mut c = self.linear.clone();
        c.resize(n_std, 0.0);
        if has_quad {
            c[self.n] = 1.0;
        }

        // Constraint s-block is (rhs - row-vector expressions); in
        // `A y + s = b` terms each expression e(y) >= cone means
        // row = -coeffs(e), b-entry = constant(e).
        let mut zero_rows: Vec<(SparseRow, f64)> = Vec::new();
        let mut nonneg_rows: Vec<(SparseRow, f64)> = Vec::new();
        let mut soc_blocks: Vec<Vec<(SparseRow, f64)>> = Vec::new();
        let as_row = |e: &LinExpr| {
            let mut cols = Vec::with_capacity(e.terms.len());
            let mut vals = Vec::with_capacity(e.terms.len());
            for &(i, coeff) in &e.terms {
                cols.push(i);
                vals.push(-coeff);
            }
            (SparseRow { cols, vals }, e.constant)
        };
        for cone in &self.cones {
            match cone {
                Cone::Zero(e) => zero_rows.push(as_row(e)),
                Cone::NonNeg(e) => nonneg_rows.push(as_row(e)),
                Cone::Soc { rows, rhs } => {
                    if rows.is_empty() {
                        nonneg_rows.push(as_row(rhs));
                    } else {
                        let mut blk = Vec::with_capacity(rows.len() + 1);
                        blk.push(as_row(rhs));
                        blk.extend(rows.iter().map(&as_row));
                        soc_blocks.push(blk);
                    }
                }
            }
        }
        if has_quad {
            // (1/2) x'Dx + (1/2)||Gx + g0||^2 <= t  iff
            // ||(sqrt(2 d_i) x_i .., sqrt(2)(Gx + g0), t - 1)|| <= t + 1.
            let mut blk = Vec::new();
            blk.push((
                SparseRow {
                    cols: vec![self.n],
                    vals: vec![-1.0],
                },
                1.0,
            ));
            for (i, &p) in self.quad_diag.iter().enumerate() {
                if p != 0.0 {
                    blk.push((
                        SparseRow {
                            cols: vec![i],
                            vals: vec![-(2.0 * p).sqrt()],
                        },
                        0.0,
                    ));
                }
            }
            let sqrt2 = std::f64::consts::SQRT_2;
            for g in &self.gram_rows {
                let (mut row, cst) = as_row(g);
                for v in &mut row.vals {
                    *v *= sqrt2;
                }
                blk.push((row, sqrt2 * cst));
            }
            blk.push((
                SparseRow {
                    cols: vec![self.n],
                    vals: vec![-1.0],
                },
                -1.0,
            ));
            soc_blocks.push(blk);
        }

        let mut rows = Vec::new();
        let mut b = Vec::new();
        let push = |pairs: Vec<(SparseRow, f64)>, rows: &mut Vec<SparseRow>, b: &mut Vec<f64>| {
            for (r, offset) in pairs {
                rows.push(r);
                b.push(offset);
            }
        };
        let zero_len = zero_rows.len();
        push(zero_rows, &mut rows, &mut b);
        let nonneg_len = nonneg_rows.len();
        push(nonneg_rows, &mut rows, &mut b);
        let mut soc_dims = Vec::with_capacity(soc_blocks.len());
        for blk in soc_blocks {
            soc_dims.push(blk.len());
            push(blk, &mut rows, &mut b);
        }
        StandardForm {
            n: n_std,
            n_orig: self.n,
            c,
            rows,
            b,
            zero_len,
            nonneg_len,
            soc_dims,
        }
    }

    /// Plain-text dump for offline cross-checking. Schema: a `conic-program v1`
    /// header, then one line per item; expressions are written as
    /// `<constant> [<var> <coeff>]...`.
    pub fn dump_debug<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let expr = |e: &LinExpr| {
            let mut s = format!("{:.17e}", e.constant);
            for &(i, c) in &e.terms {
                s.push_str(&format!(" {i} {c:.17e}"));
            }
            s
        };
        writeln!(out, "conic-program v1")?;
        writeln!(out, "vars {}", self.n)?;
        writeln!(out, "objective constant {:.17e}", self.constant)?;
        for (i, &q) in self.linear.iter().enumerate() {
            if q != 0.0 {
                writeln!(out, "objective linear {i} {q:.17e}")?;
            }
        }
        for (i, &p) in self.quad_diag.iter().enumerate() {
            if p != 0.0 {
                writeln!(out, "objective quad_diag {i} {p:.17e}")?;
            }
        }
        for g in &self.gram_rows {
            writeln!(out, "objective gram_row {}", expr(g))?;
        }
        for cone in &self.cones {
            match cone {
                Cone::Soc { rows, rhs } => {
                    writeln!(out, "cone soc {}", rows.len())?;
                    for r in rows {
                        writeln!(out, "  row {}", expr(r))?;
                    }
                    writeln!(out, "  rhs {}", expr(rhs))?;
                }
                Cone::NonNeg(e) => writeln!(out, "cone nonneg {}", expr(e))?,
                Cone::Zero(e) => writeln!(out, "cone zero {}", expr(e))?,
            }
        }
        Ok(())
    }
}

/// Row of the standard-form constraint matrix, sparse by column.
#[derive(Debug, Clone)]
pub struct SparseRow {
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.cols
            .iter()
            .zip(&self.vals)
            .map(|(&i, &v)| v * x[i])
            .sum()
    }

    /// y += scale * a (scatter into a dense vector).
    pub fn axpy_into(&self, scale: f64, y: &mut [f64]) {
        for (&i, &v) in self.cols.iter().zip(&self.vals) {
            y[i] += scale * v;
        }
    }
}

/// Lowered standard form; see [`ConicProgram::standard_form`]. Row blocks in
/// order: `zero_len` equality rows, `nonneg_len` nonnegative rows, then one
/// block of `soc_dims[j]` rows per second-order cone (first row of each block
/// is the cone's scalar side).
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub n: usize,
    pub n_orig: usize,
    pub c: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub zero_len: usize,
    pub nonneg_len: usize,
    pub soc_dims: Vec<usize>,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// `out = A x` (dense result).
    pub fn mat_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in self.rows.iter().zip(out.iter_mut()) {
            *o = r.dot(x);
        }
    }

    /// `out = A' z` (dense result).
    pub fn mat_t_vec(&self, z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &zi) in self.rows.iter().zip(z.iter()) {
            r.axpy_into(zi, out);
        }
    }
}

/// Incremental builder; all structural errors (bad indices, negative diagonal
/// weights, non-finite coefficients) surface at `build` time so `solve` never
/// sees a malformed program.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    n: usize,
    quad_diag: Vec<f64>,
    gram_rows: Vec<LinExpr>,
    linear: Vec<f64>,
    constant: f64,
    cones: Vec<Cone>,
}

impl ProgramBuilder {
    pub fn new(num_vars: usize) -> Self {
        Self {
            n: num_vars,
            quad_diag: vec![0.0; num_vars],
            gram_rows: Vec::new(),
            linear: vec![0.0; num_vars],
            constant: 0.0,
            cones: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `(1/2) * p * x_var^2` to the objective; `p` must be >= 0.
    pub fn add_quadratic_diag(&mut self, var: usize, p: f64) -> &mut Self {
        self.quad_diag[var] += p;
        self
    }

    /// Adds `(1/2) * (expr)^2` to the objective.
    pub fn add_gram_row(&mut self, expr: LinExpr) -> &mut Self {
        self.gram_rows.push(expr);
        self
    }

    /// Adds `coeff * x_var` to the objective.
    pub fn add_linear(&mut self, var: usize, coeff: f64) -> &mut Self {
        self.linear[var] += coeff;
        self
    }

    /// Adds a constant to the objective.
    pub fn add_constant(&mut self, r: f64) -> &mut Self {
        self.constant += r;
        self
    }

    /// `||rows(x)||_2 <= rhs(x)`.
    pub fn add_soc(&mut self, rows: Vec<LinExpr>, rhs: LinExpr) -> &mut Self {
        self.cones.push(Cone::Soc { rows, rhs });
        self
    }

    pub fn add_nonneg(&mut self, expr: LinExpr) -> &mut Self {
        self.cones.push(Cone::NonNeg(expr));
        self
    }

    pub fn add_eq(&mut self, expr: LinExpr) -> &mut Self {
        self.cones.push(Cone::Zero(expr));
        self
    }

    pub fn add_cone(&mut self, cone: Cone) -> &mut Self {
        self.cones.push(cone);
        self
    }

    pub fn build(self) -> Result<ConicProgram> {
        let n = self.n;
        let check_expr = |e: &LinExpr, what: &str| -> Result<()> {
            if let Some(max) = e.max_var() {
                if max >= n {
                    return Err(Error::Config(format!(
                        "{what} references variable {max}, but the program has {n} variables"
                    )));
                }
            }
            if !e.is_finite() {
                return Err(Error::Config(format!("{what} has a non-finite coefficient")));
            }
            Ok(())
        };
        for (i, &p) in self.quad_diag.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::Config(format!(
                    "quadratic diagonal weight for variable {i} is {p}; must be finite and >= 0"
                )));
            }
        }
        for g in &self.gram_rows {
            check_expr(g, "objective gram row")?;
        }
        if self.linear.iter().any(|c| !c.is_finite()) || !self.constant.is_finite() {
            return Err(Error::Config("objective has a non-finite coefficient".into()));
        }
        let mut offset_sq = 0.0;
        for cone in &self.cones {
            match cone {
                Cone::Soc { rows, rhs } => {
                    for r in rows {
                        check_expr(r, "cone row")?;
                        offset_sq += r.constant * r.constant;
                    }
                    check_expr(rhs, "cone rhs")?;
                    offset_sq += rhs.constant * rhs.constant;
                }
                Cone::NonNeg(e) | Cone::Zero(e) => {
                    check_expr(e, "cone expression")?;
                    offset_sq += e.constant * e.constant;
                }
            }
        }
        Ok(ConicProgram {
            n,
            quad_diag: self.quad_diag,
            gram_rows: self.gram_rows,
            linear: self.linear,
            constant: self.constant,
            cones: self.cones,
            offset_scale: 1.0 + offset_sq.sqrt(),
        })
    }
}
