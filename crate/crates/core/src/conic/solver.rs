//! Homogeneous self-dual interior-point iteration for the lowered standard
//! form. Ruiz equilibration of the problem data, Nesterov-Todd scaling,
//! Mehrotra predictor-corrector, dense normal-equations KKT solve with a
//! small Schur complement for the equality block and iterative refinement
//! against the unregularized system. Convergence is always judged on the
//! original (unequilibrated) data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::program::{ConicProgram, StandardForm};
use super::{ConicSolution, SolveStatus};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Static regularization added to the normal matrix diagonal; refinement
/// corrects the bias it introduces.
const STATIC_REG: f64 = 1e-11;

/// Minimizes `program` to relative tolerance `tol` (see module docs for the
/// residual definitions), giving up after `max_iters` interior-point steps.
pub fn solve(program: &ConicProgram, tol: f64, max_iters: usize) -> ConicSolution {
    let sf_orig = program.standard_form();
    let m = sf_orig.num_rows();
    if m == 0 {
        // A quadratic objective always lowers to an epigraph cone, so m == 0
        // means a purely linear objective with no constraints: constant if
        // all coefficients vanish, unbounded otherwise.
        let x = vec![0.0; sf_orig.n_orig];
        let unbounded = sf_orig.c.iter().any(|&ci| ci != 0.0);
        return if unbounded {
            certificate_solution(&sf_orig, SolveStatus::Unbounded, Vec::new(), Vec::new())
        } else {
            ConicSolution {
                status: SolveStatus::Optimal,
                objective_value: program.objective_value(&x),
                x,
                x_std: vec![0.0; sf_orig.n],
                s_std: Vec::new(),
                z_std: Vec::new(),
                primal_residual: 0.0,
                dual_residual: 0.0,
                gap: 0.0,
                iterations: 0,
            }
        };
    }

    let layout = Layout::new(&sf_orig);
    let (sf, eq) = equilibrate(&sf_orig, &layout);
    let nu = (layout.nonneg.len() + layout.socs.len()) as f64;
    let norm_b = l2(&sf_orig.b);
    let norm_c = l2(&sf_orig.c);
    let inv_obj = 1.0 / eq.obj;

    let mut y = vec![0.0; sf.n];
    let mut z = vec![0.0; m];
    let mut s = vec![0.0; m];
    for i in layout.nonneg.clone() {
        s[i] = 1.0;
        z[i] = 1.0;
    }
    for blk in &layout.socs {
        s[blk.start] = 1.0;
        z[blk.start] = 1.0;
    }
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let mut ax = vec![0.0; m];
    let mut atz = vec![0.0; sf.n];
    let mut stalls = 0usize;
    let mut iterations = 0usize;
    // Numerical degeneracy near the optimum can degrade late iterates, so
    // the best point seen is what MaxIterations reports.
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, usize)> = None;

    for iter in 0..max_iters {
        iterations = iter;

        // Residuals of the homogeneous embedding.
        sf.mat_t_vec(&z, &mut atz);
        let rd: Vec<f64> = (0..sf.n).map(|i| atz[i] + sf.c[i] * tau).collect();
        sf.mat_vec(&y, &mut ax);
        let rp: Vec<f64> = (0..m).map(|i| ax[i] + s[i] - sf.b[i] * tau).collect();
        let rg = dot(&sf.c, &y) + dot(&sf.b, &z) + kappa;

        // Convergence is judged on the de-homogenized point mapped back to
        // the original data, with exactly the quantities the solution will
        // report.
        let inv_tau = 1.0 / tau;
        let xh: Vec<f64> = (0..sf.n).map(|j| eq.col[j] * y[j] * inv_tau).collect();
        let sh: Vec<f64> = (0..m).map(|i| s[i] * inv_tau / eq.row[i]).collect();
        let zh: Vec<f64> = (0..m).map(|i| eq.row[i] * z[i] * inv_tau * inv_obj).collect();
        let relp_std = {
            sf_orig.mat_vec(&xh, &mut ax);
            let mut acc = 0.0;
            for i in 0..m {
                let r = ax[i] + sh[i] - sf_orig.b[i];
                acc += r * r;
            }
            acc.sqrt() / (1.0 + norm_b)
        };
        let reld = {
            sf_orig.mat_t_vec(&zh, &mut atz);
            let mut acc = 0.0;
            for i in 0..sf.n {
                let r = atz[i] + sf_orig.c[i];
                acc += r * r;
            }
            acc.sqrt() / (1.0 + norm_c)
        };
        let cx = dot(&sf_orig.c, &xh);
        let gap = dot(&sh, &zh) / (1.0 + cx.abs());
        let prim_orig = program.primal_residual_at(&xh[..sf.n_orig]);
        let score = relp_std.max(reld).max(gap).max(prim_orig);
        if score <= tol {
            return optimal_solution(program, &sf_orig, xh, sh, zh, iter, SolveStatus::Optimal);
        }
        if score.is_finite() && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, xh, sh, zh, iter));
        }

        // Certificate checks once the homogenizing variable has collapsed.
        // Rays are mapped back to the original data; the scalar objective
        // factor drops out of a ray's normalization.
        if tau < 1e-8 * kappa.max(1.0) {
            let zr: Vec<f64> = (0..m).map(|i| eq.row[i] * z[i]).collect();
            let bz = dot(&sf_orig.b, &zr);
            if bz < 0.0 {
                let scale = -1.0 / bz;
                let zc: Vec<f64> = zr.iter().map(|v| v * scale).collect();
                sf_orig.mat_t_vec(&zc, &mut atz);
                if l2(&atz) <= tol.sqrt() * (1.0 + norm_c) {
                    return certificate_solution(&sf_orig, SolveStatus::Infeasible, Vec::new(), zc);
                }
            }
            let xr: Vec<f64> = (0..sf.n).map(|j| eq.col[j] * y[j]).collect();
            let cy = dot(&sf_orig.c, &xr);
            if cy < 0.0 {
                let scale = -1.0 / cy;
                let xc: Vec<f64> = xr.iter().map(|v| v * scale).collect();
                sf_orig.mat_vec(&xc, &mut ax);
                let mut acc = 0.0;
                for i in 0..m {
                    let r = ax[i] + (s[i] / eq.row[i]) * scale;
                    acc += r * r;
                }
                if acc.sqrt() <= tol.sqrt() * (1.0 + norm_b) {
                    return certificate_solution(&sf_orig, SolveStatus::Unbounded, xc, Vec::new());
                }
            }
        }

        let mu = (dot(&s, &z) + tau * kappa) / (nu + 1.0);
        if !mu.is_finite() || mu < 1e-14 {
            // Below this the scaled KKT system carries no usable digits.
            break;
        }
        let scaling = Scaling::compute(&layout, &s, &z);
        let factor = match KktFactor::assemble(&sf, &layout, &scaling) {
            Some(f) => f,
            None => break,
        };

        // Constant system: K [g1; g2] = [-c; b].
        let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
        let mut g1 = vec![0.0; sf.n];
        let mut g2 = vec![0.0; m];
        factor.solve(&neg_c, &sf.b, &mut g1, &mut g2);
        let dt_den = dot(&sf.c, &g1) + dot(&sf.b, &g2) - kappa / tau;

        // Predictor (affine) direction.
        let mut d_s = vec![0.0; m];
        scaling.neg_lambda_sq(&layout, &mut d_s);
        let d_k = -tau * kappa;
        let (_dx_a, dz_a, ds_a, dtau_a, dkappa_a) = direction(
            &sf, &layout, &scaling, &factor, &rd, &rp, rg, &d_s, d_k, tau, kappa, &g1, &g2, dt_den,
        );
        let alpha_aff = step_max(&layout, &s, &ds_a, &z, &dz_a, tau, dtau_a, kappa, dkappa_a).min(1.0);

        let mu_aff = {
            let mut acc = 0.0;
            for i in 0..m {
                acc += (s[i] + alpha_aff * ds_a[i]) * (z[i] + alpha_aff * dz_a[i]);
            }
            (acc + (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkappa_a)) / (nu + 1.0)
        };
        let sigma = ((mu_aff / mu).powi(3)).clamp(0.0, 1.0);

        // Corrector: centering plus the Mehrotra second-order term.
        scaling.neg_lambda_sq(&layout, &mut d_s);
        scaling.subtract_cross_term(&layout, &ds_a, &dz_a, &mut d_s);
        scaling.add_identity(&layout, sigma * mu, &mut d_s);
        let d_k = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, dz, ds, dtau, dkappa) = direction(
            &sf, &layout, &scaling, &factor, &rd, &rp, rg, &d_s, d_k, tau, kappa, &g1, &g2, dt_den,
        );
        let alpha = (0.99 * step_max(&layout, &s, &ds, &z, &dz, tau, dtau, kappa, dkappa)).min(1.0);

        if std::env::var("IPM_TRACE").is_ok() {
            eprintln!(
                "it {iter} tau {tau:.3e} kappa {kappa:.3e} mu {mu:.3e} sigma {sigma:.3e} a_aff {alpha_aff:.3e} a {alpha:.3e} relp {relp_std:.3e} reld {reld:.3e} gap {gap:.3e} orig {prim_orig:.3e} dt_den {dt_den:.3e}"
            );
        }

        if !alpha.is_finite() || !dtau.is_finite() {
            break;
        }
        if alpha < 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }

        for i in 0..sf.n {
            y[i] += alpha * dx[i];
        }
        for i in 0..m {
            z[i] += alpha * dz[i];
            s[i] += alpha * ds[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    // Out of iterations or numerically stuck: report the best iterate seen.
    // Anything meeting the tolerance already returned from inside the loop,
    // so this is always a MaxIterations outcome with honest residuals.
    match best {
        Some((_score, xh, sh, zh, iter)) => {
            optimal_solution(program, &sf_orig, xh, sh, zh, iter, SolveStatus::MaxIterations)
        }
        None => {
            let inv_tau = 1.0 / tau;
            let xh: Vec<f64> = (0..sf.n).map(|j| eq.col[j] * y[j] * inv_tau).collect();
            let sh: Vec<f64> = (0..m).map(|i| s[i] * inv_tau / eq.row[i]).collect();
            let zh: Vec<f64> = (0..m).map(|i| eq.row[i] * z[i] * inv_tau * inv_obj).collect();
            optimal_solution(program, &sf_orig, xh, sh, zh, iterations, SolveStatus::MaxIterations)
        }
    }
}

fn optimal_solution(
    program: &ConicProgram,
    sf: &StandardForm,
    xh: Vec<f64>,
    sh: Vec<f64>,
    zh: Vec<f64>,
    iterations: usize,
    status: SolveStatus,
) -> ConicSolution {
    let x = xh[..sf.n_orig].to_vec();
    let mut atz = vec![0.0; sf.n];
    sf.mat_t_vec(&zh, &mut atz);
    let mut acc = 0.0;
    for i in 0..sf.n {
        let r = atz[i] + sf.c[i];
        acc += r * r;
    }
    let dual_residual = acc.sqrt() / (1.0 + l2(&sf.c));
    let gap = dot(&sh, &zh) / (1.0 + dot(&sf.c, &xh).abs());
    ConicSolution {
        status,
        objective_value: program.objective_value(&x),
        primal_residual: program.primal_residual_at(&x),
        x,
        x_std: xh,
        s_std: sh,
        z_std: zh,
        dual_residual,
        gap,
        iterations: iterations + 1,
    }
}

/// Infeasible/unbounded returns carry the certificate in `x_std` (primal ray)
/// or `z_std` (dual ray); point-wise diagnostics are meaningless, so the
/// objective and residual fields are NaN.
fn certificate_solution(
    sf: &StandardForm,
    status: SolveStatus,
    x_ray: Vec<f64>,
    z_ray: Vec<f64>,
) -> ConicSolution {
    ConicSolution {
        status,
        x: vec![f64::NAN; sf.n_orig],
        x_std: x_ray,
        s_std: Vec::new(),
        z_std: z_ray,
        objective_value: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        iterations: 0,
    }
}

/// Row ranges of each cone block within the standard form.
struct Layout {
    zero: std::ops::Range<usize>,
    nonneg: std::ops::Range<usize>,
    socs: Vec<std::ops::Range<usize>>,
}

impl Layout {
    fn new(sf: &StandardForm) -> Self {
        let zero = 0..sf.zero_len;
        let nonneg = sf.zero_len..sf.zero_len + sf.nonneg_len;
        let mut start = nonneg.end;
        let socs = sf
            .soc_dims
            .iter()
            .map(|&d| {
                let r = start..start + d;
                start = r.end;
                r
            })
            .collect();
        Self { zero, nonneg, socs }
    }
}

/// Diagonal scalings produced by [`equilibrate`]: the iterated matrix is
/// `diag(row) * A * diag(col)` with `b` scaled by `row`, `c` by `obj * col`.
/// Mapping iterates back: `x = col .* x~`, `s = s~ ./ row`,
/// `z = row .* z~ / obj`.
struct Equilibration {
    row: Vec<f64>,
    col: Vec<f64>,
    obj: f64,
}

const RUIZ_SWEEPS: usize = 3;

/// Ruiz equilibration: alternating row/column scalings driving every row and
/// column of `A` toward unit infinity norm, then a scalar normalization of
/// the objective. All rows of one second-order cone share a single factor so
/// membership is preserved; nonnegative and equality rows scale per row.
fn equilibrate(sf: &StandardForm, layout: &Layout) -> (StandardForm, Equilibration) {
    let m = sf.num_rows();
    let n = sf.n;
    let mut scaled = sf.clone();
    let mut row = vec![1.0f64; m];
    let mut col = vec![1.0f64; n];

    for _ in 0..RUIZ_SWEEPS {
        let mut rnorm = vec![0.0f64; m];
        for (i, r) in scaled.rows.iter().enumerate() {
            for &v in &r.vals {
                rnorm[i] = rnorm[i].max(v.abs());
            }
        }
        for blk in &layout.socs {
            let mx = rnorm[blk.clone()].iter().copied().fold(0.0f64, f64::max);
            for i in blk.clone() {
                rnorm[i] = mx;
            }
        }
        for i in 0..m {
            if rnorm[i] > 0.0 && rnorm[i].is_finite() {
                let f = 1.0 / rnorm[i].sqrt();
                row[i] *= f;
                for v in &mut scaled.rows[i].vals {
                    *v *= f;
                }
                scaled.b[i] *= f;
            }
        }

        let mut cnorm = vec![0.0f64; n];
        for r in &scaled.rows {
            for (&j, &v) in r.cols.iter().zip(&r.vals) {
                cnorm[j] = cnorm[j].max(v.abs());
            }
        }
        let mut cf = vec![1.0f64; n];
        for j in 0..n {
            if cnorm[j] > 0.0 && cnorm[j].is_finite() {
                cf[j] = 1.0 / cnorm[j].sqrt();
                col[j] *= cf[j];
            }
        }
        for r in &mut scaled.rows {
            for (&j, v) in r.cols.iter().zip(r.vals.iter_mut()) {
                *v *= cf[j];
            }
        }
    }

    for (cj, &dj) in scaled.c.iter_mut().zip(&col) {
        *cj *= dj;
    }
    let cinf = scaled.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let obj = if cinf > 0.0 && cinf.is_finite() {
        1.0 / cinf
    } else {
        1.0
    };
    for v in &mut scaled.c {
        *v *= obj;
    }

    (scaled, Equilibration { row, col, obj })
}

/// Nesterov-Todd scaling state: `W` maps the dual into the scaled space,
/// `lambda = W z = W^{-1} s`.
struct Scaling {
    /// s_i / z_i per nonnegative row (the diagonal of W^2).
    nonneg_w2: Vec<f64>,
    socs: Vec<SocScaling>,
    lambda: Vec<f64>,
}

struct SocScaling {
    /// theta^2 = a_s / a_z; W = theta * V(wbar).
    theta2: f64,
    wbar: Vec<f64>,
}

impl Scaling {
    fn compute(layout: &Layout, s: &[f64], z: &[f64]) -> Self {
        let nonneg_w2: Vec<f64> = layout.nonneg.clone().map(|i| s[i] / z[i]).collect();
        let mut lambda = vec![0.0; s.len()];
        for gi in layout.nonneg.clone() {
            lambda[gi] = (s[gi] * z[gi]).sqrt();
        }
        let mut socs = Vec::with_capacity(layout.socs.len());
        for blk in &layout.socs {
            let sb = &s[blk.clone()];
            let zb = &z[blk.clone()];
            let a_s = soc_res(sb).max(f64::MIN_POSITIVE).sqrt();
            let a_z = soc_res(zb).max(f64::MIN_POSITIVE).sqrt();
            let d = blk.len();
            let mut wbar = vec![0.0; d];
            let gamma = {
                let mut sz = 0.0;
                for i in 0..d {
                    sz += (sb[i] / a_s) * (zb[i] / a_z);
                }
                ((1.0 + sz) / 2.0).sqrt()
            };
            wbar[0] = (sb[0] / a_s + zb[0] / a_z) / (2.0 * gamma);
            for i in 1..d {
                wbar[i] = (sb[i] / a_s - zb[i] / a_z) / (2.0 * gamma);
            }
            let theta2 = a_s / a_z;
            let theta = theta2.sqrt();
            let lb = &mut lambda[blk.clone()];
            v_mul(&wbar, zb, lb);
            for v in lb.iter_mut() {
                *v *= theta;
            }
            socs.push(SocScaling { theta2, wbar });
        }
        Self {
            nonneg_w2,
            socs,
            lambda,
        }
    }

    /// out = W v (zero rows map to zero).
    fn w_apply(&self, layout: &Layout, v: &[f64], out: &mut [f64]) {
        for i in layout.zero.clone() {
            out[i] = 0.0;
        }
        for (j, i) in layout.nonneg.clone().enumerate() {
            out[i] = self.nonneg_w2[j].sqrt() * v[i];
        }
        for (blk, sc) in layout.socs.iter().zip(&self.socs) {
            let theta = sc.theta2.sqrt();
            v_mul(&sc.wbar, &v[blk.clone()], &mut out[blk.clone()]);
            for o in &mut out[blk.clone()] {
                *o *= theta;
            }
        }
    }

    /// out = W^{-1} v.
    fn w_inv_apply(&self, layout: &Layout, v: &[f64], out: &mut [f64]) {
        for i in layout.zero.clone() {
            out[i] = 0.0;
        }
        for (j, i) in layout.nonneg.clone().enumerate() {
            out[i] = v[i] / self.nonneg_w2[j].sqrt();
        }
        for (blk, sc) in layout.socs.iter().zip(&self.socs) {
            let theta = sc.theta2.sqrt();
            v_inv_mul(&sc.wbar, &v[blk.clone()], &mut out[blk.clone()]);
            for o in &mut out[blk.clone()] {
                *o /= theta;
            }
        }
    }

    /// out = H v = W(W v); zero rows map to zero.
    fn h_apply(&self, layout: &Layout, v: &[f64], out: &mut [f64]) {
        for i in layout.zero.clone() {
            out[i] = 0.0;
        }
        for (j, i) in layout.nonneg.clone().enumerate() {
            out[i] = self.nonneg_w2[j] * v[i];
        }
        let mut tmp = Vec::new();
        for (blk, sc) in layout.socs.iter().zip(&self.socs) {
            tmp.resize(blk.len(), 0.0);
            v_mul(&sc.wbar, &v[blk.clone()], &mut tmp);
            let chunk = &mut out[blk.clone()];
            v_mul(&sc.wbar, &tmp, chunk);
            for o in chunk.iter_mut() {
                *o *= sc.theta2;
            }
        }
    }

    /// out = H^{-1} v restricted to cone rows (zero rows untouched -> caller
    /// handles them).
    fn h_inv_apply(&self, layout: &Layout, v: &[f64], out: &mut [f64]) {
        for (j, i) in layout.nonneg.clone().enumerate() {
            out[i] = v[i] / self.nonneg_w2[j];
        }
        for (blk, sc) in layout.socs.iter().zip(&self.socs) {
            // H^{-1} = theta^{-2} (2 (J wbar)(J wbar)' - J).
            let w = &sc.wbar;
            let vb = &v[blk.clone()];
            let mut jw_dot = w[0] * vb[0];
            for i in 1..vb.len() {
                jw_dot -= w[i] * vb[i];
            }
            let ob = &mut out[blk.clone()];
            ob[0] = (2.0 * jw_dot * w[0] - vb[0]) / sc.theta2;
            for i in 1..vb.len() {
                ob[i] = (-2.0 * jw_dot * w[i] + vb[i]) / sc.theta2;
            }
        }
    }

    /// d_s = -(lambda o lambda) on cone rows, 0 on zero rows.
    fn neg_lambda_sq(&self, layout: &Layout, d_s: &mut [f64]) {
        for i in layout.zero.clone() {
            d_s[i] = 0.0;
        }
        for i in layout.nonneg.clone() {
            d_s[i] = -self.lambda[i] * self.lambda[i];
        }
        for blk in &layout.socs {
            let l = &self.lambda[blk.clone()];
            let dot_ll: f64 = l.iter().map(|v| v * v).sum();
            let l0 = l[0];
            let db = &mut d_s[blk.clone()];
            db[0] = -dot_ll;
            for i in 1..l.len() {
                db[i] = -2.0 * l0 * l[i];
            }
        }
    }

    /// d_s -= (W^{-1} ds_a) o (W dz_a), the Mehrotra second-order term.
    fn subtract_cross_term(&self, layout: &Layout, ds_a: &[f64], dz_a: &[f64], d_s: &mut [f64]) {
        let m = ds_a.len();
        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        self.w_inv_apply(layout, ds_a, &mut p);
        self.w_apply(layout, dz_a, &mut q);
        for i in layout.nonneg.clone() {
            d_s[i] -= p[i] * q[i];
        }
        for blk in &layout.socs {
            let pb = &p[blk.clone()];
            let qb = &q[blk.clone()];
            let pq0: f64 = pb.iter().zip(qb).map(|(a, b)| a * b).sum();
            let db = &mut d_s[blk.clone()];
            db[0] -= pq0;
            for i in 1..blk.len() {
                db[i] -= pb[0] * qb[i] + qb[0] * pb[i];
            }
        }
    }

    /// d_s += value * e per cone (e = 1 on nonneg rows, (1,0,..) on cones).
    fn add_identity(&self, layout: &Layout, value: f64, d_s: &mut [f64]) {
        for i in layout.nonneg.clone() {
            d_s[i] += value;
        }
        for blk in &layout.socs {
            d_s[blk.start] += value;
        }
    }

    /// out = lambda \ d (Jordan division) on cone rows, 0 on zero rows.
    fn lambda_div(&self, layout: &Layout, d: &[f64], out: &mut [f64]) {
        for i in layout.zero.clone() {
            out[i] = 0.0;
        }
        for i in layout.nonneg.clone() {
            out[i] = d[i] / self.lambda[i];
        }
        for blk in &layout.socs {
            let l = &self.lambda[blk.clone()];
            let db = &d[blk.clone()];
            let l0 = l[0];
            let l1_dot_d1: f64 = l[1..].iter().zip(&db[1..]).map(|(a, b)| a * b).sum();
            let l1_sq: f64 = l[1..].iter().map(|v| v * v).sum();
            let det = l0 * l0 - l1_sq;
            let y0 = (l0 * db[0] - l1_dot_d1) / det;
            let ob = &mut out[blk.clone()];
            ob[0] = y0;
            for i in 1..l.len() {
                ob[i] = (db[i] - y0 * l[i]) / l0;
            }
        }
    }
}

/// V(wbar) u for the canonical symmetric square root of the cone scaling.
fn v_mul(wbar: &[f64], u: &[f64], out: &mut [f64]) {
    let w0 = wbar[0];
    let dot: f64 = wbar[1..].iter().zip(&u[1..]).map(|(a, b)| a * b).sum();
    out[0] = w0 * u[0] + dot;
    let coef = u[0] + dot / (1.0 + w0);
    for i in 1..u.len() {
        out[i] = u[i] + coef * wbar[i];
    }
}

/// V(wbar)^{-1} u; identical form with the off-diagonal sign flipped.
fn v_inv_mul(wbar: &[f64], u: &[f64], out: &mut [f64]) {
    let w0 = wbar[0];
    let dot: f64 = wbar[1..].iter().zip(&u[1..]).map(|(a, b)| a * b).sum();
    out[0] = w0 * u[0] - dot;
    let coef = -u[0] + dot / (1.0 + w0);
    for i in 1..u.len() {
        out[i] = u[i] + coef * wbar[i];
    }
}

/// u0^2 - ||u1||^2, the cone quadratic form.
fn soc_res(u: &[f64]) -> f64 {
    let tail: f64 = u[1..].iter().map(|v| v * v).sum();
    u[0] * u[0] - tail
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest step to the cone boundary from strictly interior `u` along `du`.
fn soc_step(u: &[f64], du: &[f64]) -> f64 {
    let qa = soc_res(du);
    let qb = 2.0 * (u[0] * du[0] - u[1..].iter().zip(&du[1..]).map(|(a, b)| a * b).sum::<f64>());
    let qc = soc_res(u);
    if qc <= 0.0 {
        return 0.0;
    }
    let lin_bound = if du[0] < 0.0 { -u[0] / du[0] } else { f64::INFINITY };
    let quad_bound = if qa.abs() < 1e-300 {
        if qb < 0.0 {
            -qc / qb
        } else {
            f64::INFINITY
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            // No real crossing; with qc > 0 the form stays positive.
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            // Stable root pairing: r1 * r2 = qc / qa.
            let q = -0.5 * (qb + qb.signum() * sq);
            let candidates = [q / qa, qc / q];
            candidates
                .into_iter()
                .filter(|r| r.is_finite() && *r > 0.0)
                .fold(f64::INFINITY, f64::min)
        }
    };
    lin_bound.min(quad_bound)
}

#[allow(clippy::too_many_arguments)]
fn step_max(
    layout: &Layout,
    s: &[f64],
    ds: &[f64],
    z: &[f64],
    dz: &[f64],
    tau: f64,
    dtau: f64,
    kappa: f64,
    dkappa: f64,
) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in layout.nonneg.clone() {
        if ds[i] < 0.0 {
            alpha = alpha.min(-s[i] / ds[i]);
        }
        if dz[i] < 0.0 {
            alpha = alpha.min(-z[i] / dz[i]);
        }
    }
    for blk in &layout.socs {
        alpha = alpha.min(soc_step(&s[blk.clone()], &ds[blk.clone()]));
        alpha = alpha.min(soc_step(&z[blk.clone()], &dz[blk.clone()]));
    }
    if dtau < 0.0 {
        alpha = alpha.min(-tau / dtau);
    }
    if dkappa < 0.0 {
        alpha = alpha.min(-kappa / dkappa);
    }
    alpha
}

/// One Newton direction for a given complementarity right-hand side.
#[allow(clippy::too_many_arguments)]
fn direction(
    sf: &StandardForm,
    layout: &Layout,
    scaling: &Scaling,
    factor: &KktFactor,
    rd: &[f64],
    rp: &[f64],
    rg: f64,
    d_s: &[f64],
    d_k: f64,
    tau: f64,
    kappa: f64,
    g1: &[f64],
    g2: &[f64],
    dt_den: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64) {
    let m = rp.len();
    let mut ds_tilde = vec![0.0; m];
    scaling.lambda_div(layout, d_s, &mut ds_tilde);
    let mut w_ds = vec![0.0; m];
    scaling.w_apply(layout, &ds_tilde, &mut w_ds);

    let r1: Vec<f64> = rd.iter().map(|v| -v).collect();
    let r2: Vec<f64> = (0..m).map(|i| -rp[i] - w_ds[i]).collect();
    let mut u1 = vec![0.0; sf.n];
    let mut u2 = vec![0.0; m];
    factor.solve(&r1, &r2, &mut u1, &mut u2);

    let dtau = (-rg - dot(&sf.c, &u1) - dot(&sf.b, &u2) - d_k / tau) / dt_den;
    let dx: Vec<f64> = (0..sf.n).map(|i| u1[i] + dtau * g1[i]).collect();
    let dz: Vec<f64> = (0..m).map(|i| u2[i] + dtau * g2[i]).collect();

    // ds = W(ds_tilde - W dz); zero rows keep ds = 0.
    let mut w_dz = vec![0.0; m];
    scaling.w_apply(layout, &dz, &mut w_dz);
    let diff: Vec<f64> = (0..m).map(|i| ds_tilde[i] - w_dz[i]).collect();
    let mut ds = vec![0.0; m];
    scaling.w_apply(layout, &diff, &mut ds);

    let dkappa = (d_k - kappa * dtau) / tau;
    (dx, dz, ds, dtau, dkappa)
}

/// rank-1 update `data += w * row row'` on a column-major n x n buffer.
fn add_outer(data: &mut [f64], n: usize, row: &super::program::SparseRow, w: f64) {
    for (ai, &i) in row.cols.iter().enumerate() {
        let vi = row.vals[ai] * w;
        for (aj, &j) in row.cols.iter().enumerate() {
            data[i + j * n] += vi * row.vals[aj];
        }
    }
}

/// Factorization of the quasidefinite KKT system
/// `[[0, A'], [A, -H]]` via normal equations on the cone rows plus a Schur
/// complement over the equality rows.
struct KktFactor<'a> {
    sf: &'a StandardForm,
    layout: &'a Layout,
    scaling: &'a Scaling,
    chol: Cholesky<f64, Dyn>,
    /// Mq^{-1} A_E' (n x p).
    ve: DMatrix<f64>,
    schur: Cholesky<f64, Dyn>,
    p: usize,
}

impl<'a> KktFactor<'a> {
    fn assemble(sf: &'a StandardForm, layout: &'a Layout, scaling: &'a Scaling) -> Option<Self> {
        let n = sf.n;
        let mut mq = DMatrix::<f64>::zeros(n, n);
        {
            let data = mq.as_mut_slice(); // column-major
            for (j, gi) in layout.nonneg.clone().enumerate() {
                add_outer(data, n, &sf.rows[gi], 1.0 / scaling.nonneg_w2[j]);
            }
            for (blk, sc) in layout.socs.iter().zip(&scaling.socs) {
                let inv_t2 = 1.0 / sc.theta2;
                // A' H^{-1} A = theta^{-2} (A'A + 2 uu' - 2 a0 a0'),
                // u = A' (J wbar).
                let mut u = vec![0.0; n];
                for (local, gi) in blk.clone().enumerate() {
                    let row = &sf.rows[gi];
                    add_outer(data, n, row, inv_t2);
                    let coef = if local == 0 { sc.wbar[0] } else { -sc.wbar[local] };
                    row.axpy_into(coef, &mut u);
                }
                let support: Vec<usize> = (0..n).filter(|&i| u[i] != 0.0).collect();
                for &i in &support {
                    let vi = 2.0 * inv_t2 * u[i];
                    for &j in &support {
                        data[i + j * n] += vi * u[j];
                    }
                }
                let a0 = &sf.rows[blk.start];
                add_outer(data, n, a0, -2.0 * inv_t2);
            }
        }
        // Regularization anchored to the scaling-independent matrix norm
        // (max squared column norm of A), not to the Mq diagonal: the latter
        // grows like 1/mu near convergence and would swamp the small
        // eigenvalues, stalling refinement.
        let mut col_norm2 = vec![0.0f64; n];
        for row in &sf.rows {
            for (&c, &v) in row.cols.iter().zip(&row.vals) {
                col_norm2[c] += v * v;
            }
        }
        let a_scale = col_norm2.iter().copied().fold(0.0f64, f64::max);
        let mut delta = STATIC_REG * (1.0 + a_scale);
        let p = layout.zero.len();
        for _attempt in 0..4 {
            let mut reg = mq.clone();
            for i in 0..n {
                reg[(i, i)] += delta;
            }
            if let Some(chol) = Cholesky::new(reg) {
                // Ve = Mq^{-1} A_E'; Schur = A_E Ve + delta I.
                let mut ve = DMatrix::<f64>::zeros(n, p);
                for (col, gi) in layout.zero.clone().enumerate() {
                    let mut rhs = DVector::<f64>::zeros(n);
                    for (&ci, &vv) in sf.rows[gi].cols.iter().zip(&sf.rows[gi].vals) {
                        rhs[ci] += vv;
                    }
                    let sol = chol.solve(&rhs);
                    ve.set_column(col, &sol);
                }
                let mut schur_m = DMatrix::<f64>::zeros(p, p);
                for (r, gi) in layout.zero.clone().enumerate() {
                    for c in 0..p {
                        let mut acc = 0.0;
                        for (&ci, &vv) in sf.rows[gi].cols.iter().zip(&sf.rows[gi].vals) {
                            acc += vv * ve[(ci, c)];
                        }
                        schur_m[(r, c)] = acc;
                    }
                    schur_m[(r, r)] += delta;
                }
                if let Some(schur) = Cholesky::new(schur_m) {
                    return Some(KktFactor {
                        sf,
                        layout,
                        scaling,
                        chol,
                        ve,
                        schur,
                        p,
                    });
                }
            }
            delta *= 100.0;
        }
        None
    }

    /// Solves `[[0, A'], [A, -H]] [dx; dz] = [r1; r2]`, then refines against
    /// the unregularized system until the backward error stops improving.
    fn solve(&self, r1: &[f64], r2: &[f64], dx: &mut [f64], dz: &mut [f64]) {
        self.solve_raw(r1, r2, dx, dz);
        let n = self.sf.n;
        let m = r2.len();
        let scale = 1.0 + l2(r1) + l2(r2);
        let mut prev = f64::INFINITY;
        let mut atz = vec![0.0; n];
        let mut ax = vec![0.0; m];
        let mut hdz = vec![0.0; m];
        let mut cx = vec![0.0; n];
        let mut cz = vec![0.0; m];
        for _round in 0..6 {
            self.sf.mat_t_vec(dz, &mut atz);
            let res1: Vec<f64> = (0..n).map(|i| r1[i] - atz[i]).collect();
            self.sf.mat_vec(dx, &mut ax);
            self.scaling.h_apply(self.layout, dz, &mut hdz);
            let res2: Vec<f64> = (0..m).map(|i| r2[i] - (ax[i] - hdz[i])).collect();
            let norm = l2(&res1) + l2(&res2);
            if std::env::var("IPM_TRACE_REFINE").is_ok() {
                eprintln!("  refine round {_round}: norm {norm:.3e} scale {scale:.3e}");
            }
            if !norm.is_finite() || norm <= 1e-14 * scale || norm >= 0.9 * prev {
                break;
            }
            prev = norm;
            self.solve_raw(&res1, &res2, &mut cx, &mut cz);
            for i in 0..n {
                dx[i] += cx[i];
            }
            for i in 0..m {
                dz[i] += cz[i];
            }
        }
    }

    fn solve_raw(&self, r1: &[f64], r2: &[f64], dx: &mut [f64], dz: &mut [f64]) {
        let n = self.sf.n;
        // rhs1 = r1 + A_C' H^{-1} r2_C.
        let m = r2.len();
        let mut hinv_r2 = vec![0.0; m];
        self.scaling.h_inv_apply(self.layout, r2, &mut hinv_r2);
        let mut rhs1 = DVector::<f64>::zeros(n);
        for i in 0..n {
            rhs1[i] = r1[i];
        }
        for gi in self.layout.nonneg.start..m {
            self.sf.rows[gi].axpy_into(hinv_r2[gi], rhs1.as_mut_slice());
        }
        let u = self.chol.solve(&rhs1);
        let x_final = if self.p > 0 {
            let mut rhs_s = DVector::<f64>::zeros(self.p);
            for (r, gi) in self.layout.zero.clone().enumerate() {
                rhs_s[r] = self.sf.rows[gi].dot(u.as_slice()) - r2[gi];
            }
            let w = self.schur.solve(&rhs_s);
            for (r, gi) in self.layout.zero.clone().enumerate() {
                dz[gi] = w[r];
            }
            &u - &self.ve * &w
        } else {
            u
        };
        dx.copy_from_slice(x_final.as_slice());
        // dz on cone rows: H^{-1} (A_C dx - r2_C).
        let mut acdx = vec![0.0; m];
        for gi in self.layout.nonneg.start..m {
            acdx[gi] = self.sf.rows[gi].dot(dx) - r2[gi];
        }
        let mut dz_cone = vec![0.0; m];
        self.scaling.h_inv_apply(self.layout, &acdx, &mut dz_cone);
        for gi in self.layout.nonneg.start..m {
            dz[gi] = dz_cone[gi];
        }
    }
}
