//! Operator splitting over `{x : A x = b} ∩ K` for a product `K` of real PSD
//! cones, on the svec representation (off-diagonals carry a factor `√2`, so
//! the Euclidean inner product of svecs equals the trace inner product).

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::program::ConicProgram;
use super::{ConicSolution, SolveStatus, SolverOptions};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RAY_WINDOW: usize = 1000;
const PIVOT_RATIO: f64 = 1e-13;

struct Layout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut len = 0;
        for &n in sizes {
            offsets.push(len);
            len += n * (n + 1) / 2;
        }
        Self {
            sizes: sizes.to_vec(),
            offsets,
            len,
        }
    }

    #[inline]
    fn index(&self, block: usize, r: usize, c: usize) -> usize {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.offsets[block] + c * (c + 1) / 2 + r
    }

    fn unpack(&self, block: usize, v: &[f64]) -> DMatrix<f64> {
        let n = self.sizes[block];
        let off = self.offsets[block];
        let mut m = DMatrix::zeros(n, n);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for c in 0..n {
            let base = off + c * (c + 1) / 2;
            for r in 0..c {
                let x = v[base + r] * s;
                m[(r, c)] = x;
                m[(c, r)] = x;
            }
            m[(c, c)] = v[base + c];
        }
        m
    }

    fn pack(&self, block: usize, m: &DMatrix<f64>, v: &mut [f64]) {
        let n = self.sizes[block];
        let off = self.offsets[block];
        let s = std::f64::consts::SQRT_2;
        for c in 0..n {
            let base = off + c * (c + 1) / 2;
            for r in 0..c {
                v[base + r] = s * 0.5 * (m[(r, c)] + m[(c, r)]);
            }
            v[base + c] = m[(c, c)];
        }
    }
}

/// Sparse rows of the svec constraint matrix.
struct Rows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Rows {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, &ym) in self.rows.iter().zip(y) {
            if ym != 0.0 {
                for &(j, v) in row {
                    out[j] += v * ym;
                }
            }
        }
    }
}

fn build_rows(program: &ConicProgram, layout: &Layout) -> Rows {
    let rows = program
        .constraints()
        .iter()
        .map(|con| {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for (b, a) in &con.terms {
                for &(r, c, v) in a.entries() {
                    let coef = if r == c { v } else { std::f64::consts::SQRT_2 * v };
                    entries.push((layout.index(*b, r, c), coef));
                }
            }
            entries.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (j, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            merged
        })
        .collect();
    Rows { rows }
}

/// Cholesky factor of `A Aᵀ` with a degree-ascending symmetric permutation.
struct NormalSolver {
    perm: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl NormalSolver {
    fn new(rows: &Rows, nvars: usize) -> Result<Self> {
        let m = rows.rows.len();
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvars];
        for (i, row) in rows.rows.iter().enumerate() {
            for &(j, v) in row {
                by_col[j].push((i, v));
            }
        }
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for col in &by_col {
            for &(i, vi) in col {
                for &(k, vk) in col {
                    triplets.push((i, k, vi * vk));
                }
            }
        }
        let mut degree = vec![0usize; m];
        {
            let mut seen: Vec<(usize, usize)> = triplets.iter().map(|t| (t.0, t.1)).collect();
            seen.sort_unstable();
            seen.dedup();
            for (i, _) in seen {
                degree[i] += 1;
            }
        }
        let mut perm: Vec<usize> = (0..m).collect();
        perm.sort_by_key(|&i| (degree[i], i));
        let mut inverse = vec![0usize; m];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut coo = CooMatrix::new(m, m);
        for (i, k, v) in triplets {
            coo.push(inverse[i], inverse[k], v);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).map_err(|_| {
            Error::InvalidProgram("constraint rows are linearly dependent (A Aᵀ is singular)".into())
        })?;
        let l = chol.l();
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for c in 0..m {
            let col = l.col(c);
            let d = col
                .row_indices()
                .iter()
                .zip(col.values())
                .find(|(&r, _)| r == c)
                .map(|(_, &v)| v * v)
                .unwrap_or(0.0);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if !(dmin > PIVOT_RATIO * dmax) {
            return Err(Error::InvalidProgram(format!(
                "constraint rows are numerically dependent (pivot ratio {:.3e})",
                dmin / dmax.max(f64::MIN_POSITIVE)
            )));
        }
        Ok(Self { perm, chol })
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.perm.len();
        let mut b = DMatrix::zeros(m, 1);
        for (new, &old) in self.perm.iter().enumerate() {
            b[(new, 0)] = rhs[old];
        }
        self.chol.solve_mut(&mut b);
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = b[(new, 0)];
        }
    }
}

fn project_block(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, m[(0, 0)].max(0.0)));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("iterate diverged to non-finite values".into()));
    }
    let m_orig = m.clone();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 1000 * n)
        .ok_or_else(|| Error::Eigen(format!("no convergence projecting {n}x{n} block")))?;
    let positive = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    let mut out = DMatrix::zeros(n, n);
    if positive == 0 {
        return Ok(out);
    }
    // sum over whichever eigenvalue set is smaller
    let keep_positive = positive <= n - positive;
    let picked: Vec<usize> = (0..n).filter(|&k| (eig.eigenvalues[k] > 0.0) == keep_positive).collect();
    let v = DMatrix::from_fn(n, picked.len(), |r, c| eig.eigenvectors[(r, picked[c])]);
    let w = DMatrix::from_fn(n, picked.len(), |r, c| eig.eigenvectors[(r, picked[c])] * eig.eigenvalues[picked[c]]);
    out.gemm(1.0, &w, &v.transpose(), 0.0);
    if keep_positive {
        Ok(out)
    } else {
        Ok(m_orig - out)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(super) fn solve(program: &ConicProgram, options: &SolverOptions) -> Result<ConicSolution> {
    program.validate()?;
    options.validate()?;
    let layout = Layout::new(program.blocks());
    let nvars = layout.len;
    let mut rows = build_rows(program, &layout);
    let m = rows.rows.len();
    if let Some(i) = rows.rows.iter().position(|r| r.is_empty()) {
        return Err(Error::InvalidProgram(format!("constraint {i} cancels to zero")));
    }

    let mut row_scale = vec![0.0; m];
    let mut b = vec![0.0; m];
    for (i, (row, con)) in rows.rows.iter_mut().zip(program.constraints()).enumerate() {
        let s = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        row_scale[i] = s;
        row.iter_mut().for_each(|e| e.1 /= s);
        b[i] = con.rhs / s;
    }
    let b_orig: Vec<f64> = program.constraints().iter().map(|c| c.rhs).collect();
    let b_norm = norm(&b_orig);

    let mut c = vec![0.0; nvars];
    for (blk, cm) in program.objective().iter().enumerate() {
        for &(r, col, v) in cm.entries() {
            let coef = if r == col { v } else { std::f64::consts::SQRT_2 * v };
            c[layout.index(blk, r, col)] += coef;
        }
    }
    let c_norm = norm(&c);

    let normal = NormalSolver::new(&rows, nvars)?;

    let mut rho = options.rho;
    let alpha = options.alpha;
    let mut z = vec![0.0; nvars];
    let mut u = vec![0.0; nvars];
    let mut x = vec![0.0; nvars];
    let mut v = vec![0.0; nvars];
    let mut t = vec![0.0; m];
    let mut av = vec![0.0; m];
    let mut atv = vec![0.0; nvars];
    let mut y = vec![0.0; m];
    let mut y_prev = vec![0.0; m];
    let mut z_prev = vec![0.0; nvars];
    let mut xh_u = vec![0.0; nvars];

    let mut r_p = f64::INFINITY;
    let mut r_d = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let mut pobj = 0.0;
    let mut dobj = 0.0;
    let mut primal_bad_run = 0usize;
    let mut dual_bad_run = 0usize;
    let mut status = SolveStatus::MaxIter;
    let mut ray: Option<Vec<f64>> = None;
    let mut primal_ray: Option<Vec<DMatrix<f64>>> = None;
    let mut iterations = 0usize;
    let mut stall_best = f64::INFINITY;
    let mut stall_since = 0usize;

    for k in 1..=options.max_iter {
        iterations = k;
        // affine step
        for j in 0..nvars {
            v[j] = z[j] - u[j] - c[j] / rho;
        }
        rows.apply(&v, &mut av);
        for i in 0..m {
            av[i] -= b[i];
        }
        normal.solve(&av, &mut t);
        rows.apply_transpose(&t, &mut atv);
        for j in 0..nvars {
            x[j] = v[j] - atv[j];
        }
        y_prev.copy_from_slice(&y);
        for i in 0..m {
            y[i] = -rho * t[i];
        }

        // cone step
        z_prev.copy_from_slice(&z);
        for j in 0..nvars {
            xh_u[j] = alpha * x[j] + (1.0 - alpha) * z[j] + u[j];
        }
        for blk in 0..layout.sizes.len() {
            let projected = project_block(layout.unpack(blk, &xh_u))?;
            layout.pack(blk, &projected, &mut z);
        }
        for j in 0..nvars {
            u[j] = xh_u[j] - z[j];
        }

        let check = k % options.check_interval == 0 || k == options.max_iter;
        let adapt = k % options.adapt_interval == 0;
        if !(check || adapt) {
            continue;
        }

        // residuals in original units
        rows.apply(&z, &mut av);
        let rp_abs = av
            .iter()
            .zip(&b)
            .zip(&row_scale)
            .map(|((a, bi), s)| ((a - bi) * s).powi(2))
            .sum::<f64>()
            .sqrt();
        rows.apply_transpose(&y, &mut atv);
        let rd_abs = (0..nvars)
            .map(|j| (c[j] - atv[j] + rho * u[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        r_p = rp_abs / (1.0 + b_norm);
        r_d = rd_abs / (1.0 + c_norm);
        pobj = dot(&c, &z);
        dobj = dot(&b, &y);
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if r_p <= options.eps_feas && r_d <= options.eps_feas && gap <= options.eps_gap {
            status = SolveStatus::Optimal;
            break;
        }

        // stall: no 10% progress on the worst residual within the window
        let worst = r_p.max(r_d).max(gap);
        if worst < 0.9 * stall_best {
            stall_best = worst;
            stall_since = k;
        } else if options.stall_window > 0 && k - stall_since >= options.stall_window {
            break;
        }

        if check {
            let span = options.check_interval;
            if r_p > 1e3 * options.eps_feas {
                primal_bad_run += span;
            } else {
                primal_bad_run = 0;
            }
            if r_d > 1e3 * options.eps_feas {
                dual_bad_run += span;
            } else {
                dual_bad_run = 0;
            }
            if primal_bad_run >= RAY_WINDOW && k % options.adapt_interval == 0 {
                let dy: Vec<f64> = y.iter().zip(&y_prev).zip(&row_scale).map(|((a, p), s)| (a - p) / s).collect();
                if let Some(r) = check_dual_ray(program, &dy, &b_orig, options.eps_feas)? {
                    ray = Some(r);
                    status = SolveStatus::Infeasible;
                    break;
                }
            }
            if dual_bad_run >= RAY_WINDOW && k % options.adapt_interval == 0 {
                let dz: Vec<f64> = z.iter().zip(&z_prev).map(|(a, p)| a - p).collect();
                let blocks: Vec<DMatrix<f64>> = (0..layout.sizes.len()).map(|blk| layout.unpack(blk, &dz)).collect();
                if let Some(r) = check_primal_ray(program, blocks, options.eps_feas)? {
                    primal_ray = Some(r);
                    status = SolveStatus::Unbounded;
                    break;
                }
            }
        }

        if adapt && r_p.is_finite() && r_d > 0.0 {
            let ratio = r_p / r_d;
            if !(0.1..=10.0).contains(&ratio) {
                let new_rho = (rho * ratio.sqrt()).clamp(RHO_MIN, RHO_MAX);
                let f = rho / new_rho;
                u.iter_mut().for_each(|ui| *ui *= f);
                rho = new_rho;
            }
        }
    }

    let x_blocks: Vec<DMatrix<f64>> = (0..layout.sizes.len()).map(|blk| layout.unpack(blk, &z)).collect();
    let s_flat: Vec<f64> = u.iter().map(|ui| -rho * ui).collect();
    let s_blocks: Vec<DMatrix<f64>> = (0..layout.sizes.len()).map(|blk| layout.unpack(blk, &s_flat)).collect();
    let y_orig: Vec<f64> = y.iter().zip(&row_scale).map(|(yi, s)| yi / s).collect();

    Ok(ConicSolution {
        status,
        x: x_blocks,
        y: y_orig,
        s: s_blocks,
        primal_objective: pobj,
        dual_objective: dobj,
        primal_residual: r_p,
        dual_residual: r_d,
        gap,
        iterations,
        rho,
        dual_ray: ray,
        primal_ray,
    })
}

/// Accepts `dy` as a Farkas certificate if, normalized to `bᵀy = 1`,
/// every block of `Σ y_m A_m` has largest eigenvalue at most `eps`.
fn check_dual_ray(program: &ConicProgram, dy: &[f64], b: &[f64], eps: f64) -> Result<Option<Vec<f64>>> {
    let by = dot(b, dy);
    if !(by > 0.0) || !by.is_finite() {
        return Ok(None);
    }
    let ray: Vec<f64> = dy.iter().map(|v| v / by).collect();
    for block in program.adjoint(&ray) {
        let (vals, _) = crate::operator::eigen::real_symmetric_eigen(block)?;
        if vals.last().copied().unwrap_or(0.0) > eps {
            return Ok(None);
        }
    }
    Ok(Some(ray))
}

/// Accepts `dx` as an improving direction if, normalized to `cᵀd = -1`, it is
/// PSD to `-eps` per block and satisfies `A d = 0` to `eps`.
fn check_primal_ray(program: &ConicProgram, dx: Vec<DMatrix<f64>>, eps: f64) -> Result<Option<Vec<DMatrix<f64>>>> {
    let cd = program.objective_value(&dx);
    if !(cd < 0.0) || !cd.is_finite() {
        return Ok(None);
    }
    let d: Vec<DMatrix<f64>> = dx.into_iter().map(|m| m / (-cd)).collect();
    for block in &d {
        let (vals, _) = crate::operator::eigen::real_symmetric_eigen(block.clone())?;
        if vals.first().copied().unwrap_or(0.0) < -eps {
            return Ok(None);
        }
    }
    let resid: f64 = program
        .constraints()
        .iter()
        .map(|con| con.terms.iter().map(|(blk, a)| a.inner(&d[*blk])).sum::<f64>().powi(2))
        .sum::<f64>()
        .sqrt();
    if resid > eps {
        return Ok(None);
    }
    Ok(Some(d))
}
