//! Infeasible-start primal-dual path-following method with the HKM search
//! direction and a Mehrotra predictor-corrector.
//!
//! Internally the problem is the standard pair
//!
//! ```text
//! (P)  min ⟨C, X⟩  s.t. 𝒜(X) = b, X ⪰ 0
//! (D)  max bᵀy     s.t. C - 𝒜ᵀ(y) = Z ⪰ 0
//! ```
//!
//! with `C = F_0`, `A_i = -F_i` and `b = -c`, so that the user's LMI
//! variables are the dual `y`. Blocks and variables are equilibrated before
//! the iteration starts.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{LmiProblem, SdpSolution, SdpStatus, SolverSettings, WarmStart};
use crate::linalg::{frob_dot, symmetrize};

struct DenseBlock {
    c: DMatrix<f64>,
    vars: Vec<usize>,
    coeffs: Vec<DMatrix<f64>>,
    /// Row `k` holds `vec(coeffs[k])`.
    flat: DMatrix<f64>,
}

struct LinearRows {
    c: DVector<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

struct Scaled {
    blocks: Vec<DenseBlock>,
    lin: LinearRows,
    b: DVector<f64>,
    var_scale: DVector<f64>,
}

fn scale_problem(p: &LmiProblem) -> Scaled {
    let m = p.n_vars;

    let block_w: Vec<f64> = p
        .lmis
        .iter()
        .map(|blk| {
            let mx = blk
                .terms
                .iter()
                .map(|(_, c)| c.norm())
                .fold(blk.constant.norm(), f64::max);
            if mx > 0.0 {
                1.0 / mx
            } else {
                1.0
            }
        })
        .collect();
    let lin_w: Vec<f64> = p
        .nonneg
        .iter()
        .map(|row| {
            let mx = row
                .terms
                .iter()
                .map(|(_, c)| c.abs())
                .fold(row.constant.abs(), f64::max);
            if mx > 0.0 {
                1.0 / mx
            } else {
                1.0
            }
        })
        .collect();

    let mut col_sq = vec![0.0; m];
    for (blk, w) in p.lmis.iter().zip(&block_w) {
        for (v, c) in &blk.terms {
            col_sq[*v] += (w * c.norm()).powi(2);
        }
    }
    for (row, w) in p.nonneg.iter().zip(&lin_w) {
        for (v, c) in &row.terms {
            col_sq[*v] += (w * c).powi(2);
        }
    }
    let var_scale = DVector::from_iterator(m, col_sq.iter().map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 1.0 }));

    let blocks = p
        .lmis
        .iter()
        .zip(&block_w)
        .map(|(blk, &w)| {
            let d = blk.dim();
            let vars: Vec<usize> = blk.terms.iter().map(|(v, _)| *v).collect();
            let coeffs: Vec<DMatrix<f64>> = blk.terms.iter().map(|(v, c)| c * (-w * var_scale[*v])).collect();
            let mut flat = DMatrix::zeros(coeffs.len(), d * d);
            for (k, a) in coeffs.iter().enumerate() {
                for (idx, val) in a.iter().enumerate() {
                    flat[(k, idx)] = *val;
                }
            }
            DenseBlock {
                c: &blk.constant * w,
                vars,
                coeffs,
                flat,
            }
        })
        .collect();

    let lin = LinearRows {
        c: DVector::from_iterator(p.nonneg.len(), p.nonneg.iter().zip(&lin_w).map(|(r, w)| r.constant * w)),
        rows: p
            .nonneg
            .iter()
            .zip(&lin_w)
            .map(|(r, &w)| r.terms.iter().map(|(v, c)| (*v, -c * w * var_scale[*v])).collect())
            .collect(),
    };

    let mut b = DVector::from_iterator(m, (0..m).map(|i| -p.objective[i] * var_scale[i]));
    let bmax = b.amax();
    if bmax > 0.0 {
        b /= bmax;
    }

    Scaled {
        blocks,
        lin,
        b,
        var_scale,
    }
}

struct Iterate {
    y: DVector<f64>,
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    zl: DVector<f64>,
}

impl Scaled {
    fn a_op(&self, x: &[DMatrix<f64>], xl: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.b.len());
        for (blk, xj) in self.blocks.iter().zip(x) {
            for (v, a) in blk.vars.iter().zip(&blk.coeffs) {
                out[*v] += frob_dot(a, xj);
            }
        }
        for (row, xv) in self.lin.rows.iter().zip(xl.iter()) {
            for (v, a) in row {
                out[*v] += a * xv;
            }
        }
        out
    }

    fn a_adj(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let dense = self
            .blocks
            .iter()
            .map(|blk| {
                let mut s = DMatrix::zeros(blk.c.nrows(), blk.c.ncols());
                for (v, a) in blk.vars.iter().zip(&blk.coeffs) {
                    s += a * y[*v];
                }
                s
            })
            .collect();
        let lin = DVector::from_iterator(
            self.lin.rows.len(),
            self.lin
                .rows
                .iter()
                .map(|row| row.iter().map(|(v, a)| a * y[*v]).sum::<f64>()),
        );
        (dense, lin)
    }

    fn barrier_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.c.nrows()).sum::<usize>() + self.lin.rows.len()
    }

    fn c_norm(&self) -> f64 {
        (self.blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>() + self.lin.c.norm_squared()).sqrt()
    }

    fn initial_point(&self) -> Iterate {
        let m = self.b.len();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for blk in &self.blocks {
            let d = blk.c.nrows() as f64;
            let mut xi: f64 = 10f64.max(d.sqrt());
            let mut eta: f64 = 10f64.max(d.sqrt()).max(blk.c.norm());
            for (v, a) in blk.vars.iter().zip(&blk.coeffs) {
                let an = a.norm();
                xi = xi.max(d * (1.0 + self.b[*v].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
            x.push(DMatrix::identity(blk.c.nrows(), blk.c.nrows()) * xi);
            z.push(DMatrix::identity(blk.c.nrows(), blk.c.nrows()) * eta);
        }
        let p = self.lin.rows.len();
        Iterate {
            y: DVector::zeros(m),
            x,
            z,
            xl: DVector::from_element(p, 10.0),
            zl: DVector::from_element(p, 10.0f64.max(self.lin.c.amax())),
        }
    }
}

/// Largest `α` with `X + α ΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step_dense(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lam = symmetrize(&m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step_lin(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn chol_spd(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// Factorizes the Schur complement, regularizing the diagonal if needed.
fn factor_schur(o: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(o.clone()) {
        return Some(c);
    }
    let dmax = o.diagonal().amax().max(1e-300);
    let mut reg = 1e-14;
    while reg < 1e-4 {
        let mut r = o.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg * dmax;
        }
        if let Some(c) = Cholesky::new(r) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

struct Direction {
    dy: DVector<f64>,
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dzl: DVector<f64>,
}

struct Workspace<'a> {
    prob: &'a Scaled,
    it: &'a Iterate,
    zinv: &'a [DMatrix<f64>],
    rp: &'a DVector<f64>,
    rd: &'a [DMatrix<f64>],
    rdl: &'a DVector<f64>,
    schur: &'a Cholesky<f64, Dyn>,
}

impl Workspace<'_> {
    /// Solves the Newton system for the given complementarity target terms
    /// `K` (dense) and `k` (scalar rows).
    fn direction(&self, k_dense: Vec<DMatrix<f64>>, k_lin: DVector<f64>) -> Direction {
        let it = self.it;
        let t_dense: Vec<DMatrix<f64>> = k_dense
            .iter()
            .zip(&it.x)
            .zip(self.rd)
            .zip(self.zinv)
            .map(|(((k, x), rd), zi)| k - x * rd * zi)
            .collect();
        let t_lin = DVector::from_iterator(
            k_lin.len(),
            (0..k_lin.len()).map(|l| k_lin[l] - it.xl[l] * self.rdl[l] / it.zl[l]),
        );
        let rhs = self.rp - self.prob.a_op(&t_dense, &t_lin);
        let mut dir = self.assemble(&k_dense, &k_lin, self.schur.solve(&rhs));
        // Iterative refinement: the Schur matrix is ill-conditioned near the
        // optimum, and solve error shows up directly as `𝒜(ΔX) ≠ r_p`.
        let mut err = self.rp - self.prob.a_op(&dir.dx, &dir.dxl);
        for _ in 0..2 {
            let refined = self.assemble(&k_dense, &k_lin, &dir.dy + self.schur.solve(&err));
            let e = self.rp - self.prob.a_op(&refined.dx, &refined.dxl);
            if e.norm() >= err.norm() {
                break;
            }
            dir = refined;
            err = e;
        }
        dir
    }

    fn assemble(&self, k_dense: &[DMatrix<f64>], k_lin: &DVector<f64>, dy: DVector<f64>) -> Direction {
        let it = self.it;
        let (ady, adyl) = self.prob.a_adj(&dy);
        let dz: Vec<DMatrix<f64>> = self.rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
        let dx: Vec<DMatrix<f64>> = k_dense
            .iter()
            .zip(&it.x)
            .zip(&dz)
            .zip(self.zinv)
            .map(|(((k, x), dzj), zi)| symmetrize(&(k - x * dzj * zi)))
            .collect();
        let dzl = self.rdl - adyl;
        let dxl = DVector::from_iterator(
            k_lin.len(),
            (0..k_lin.len()).map(|l| k_lin[l] - it.xl[l] * dzl[l] / it.zl[l]),
        );
        Direction { dy, dx, dz, dxl, dzl }
    }
}

fn step_lengths(xchol: &[Cholesky<f64, Dyn>], zchol: &[Cholesky<f64, Dyn>], it: &Iterate, d: &Direction) -> (f64, f64) {
    let mut ap = max_step_lin(&it.xl, &d.dxl);
    let mut ad = max_step_lin(&it.zl, &d.dzl);
    for (c, dx) in xchol.iter().zip(&d.dx) {
        ap = ap.min(max_step_dense(c, dx));
    }
    for (c, dz) in zchol.iter().zip(&d.dz) {
        ad = ad.min(max_step_dense(c, dz));
    }
    (ap, ad)
}

fn complementarity(x: &[DMatrix<f64>], z: &[DMatrix<f64>], xl: &DVector<f64>, zl: &DVector<f64>) -> f64 {
    x.iter().zip(z).map(|(a, b)| frob_dot(a, b)).sum::<f64>() + xl.dot(zl)
}

/// Solves the LMI problem. `warm` seeds the iterate from a previous solve of
/// a problem with identical structure; it is ignored when shapes differ.
pub fn solve(problem: &LmiProblem, settings: &SolverSettings, warm: Option<&WarmStart>) -> SdpSolution {
    let prob = scale_problem(problem);
    let m = prob.b.len();
    let n_barrier = prob.barrier_dim() as f64;
    let b_norm = prob.b.norm();
    let c_norm = prob.c_norm();

    let mut it = prob.initial_point();
    if let Some(w) = warm {
        seed_from_warm(&mut it, w);
    }

    let mut status = SdpStatus::MaxIterations;
    let mut gap = f64::INFINITY;
    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;
    let mut iterations = 0;
    let mut prev_step = 1.0f64;
    let mut stalled = 0;
    let mut near: Option<(DVector<f64>, f64, f64, f64)> = None;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let Some(zchol) = it.z.iter().map(chol_spd).collect::<Option<Vec<_>>>() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let Some(xchol) = it.x.iter().map(chol_spd).collect::<Option<Vec<_>>>() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let zinv: Vec<DMatrix<f64>> = zchol.iter().map(|c| c.inverse()).collect();

        let ax = prob.a_op(&it.x, &it.xl);
        let rp = &prob.b - &ax;
        let (aty, atyl) = prob.a_adj(&it.y);
        let rd: Vec<DMatrix<f64>> = prob
            .blocks
            .iter()
            .zip(&aty)
            .zip(&it.z)
            .map(|((blk, a), z)| &blk.c - a - z)
            .collect();
        let rdl = &prob.lin.c - &atyl - &it.zl;

        let pobj = prob
            .blocks
            .iter()
            .zip(&it.x)
            .map(|(b, x)| frob_dot(&b.c, x))
            .sum::<f64>()
            + prob.lin.c.dot(&it.xl);
        let dobj = prob.b.dot(&it.y);
        let compl = complementarity(&it.x, &it.z, &it.xl, &it.zl);
        let mu = compl / n_barrier;

        let denom = 1.0 + pobj.abs() + dobj.abs();
        // The duality gap only bounds suboptimality of `y` once `X` is
        // feasible; `yᵀ r_p` accounts for the remaining multiplier residual.
        gap = ((pobj - dobj).abs().max(compl) + rp.dot(&it.y).abs()) / denom;
        // Relative to ‖X‖ too: the multipliers can grow to 1e8 when γ is large
        // compared with H, and 𝒜(X) then carries rounding of order eps·‖X‖.
        let x_norm = (it.x.iter().map(|x| x.norm_squared()).sum::<f64>() + it.xl.norm_squared()).sqrt();
        pinf = rp.norm() / (1.0 + b_norm + x_norm);
        dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rdl.norm_squared()).sqrt() / (1.0 + c_norm);

        if gap <= settings.tol && pinf <= settings.tol && (dinf <= settings.tol_lmi || lmi_holds(&prob, &it.y)) {
            status = SdpStatus::Optimal;
            break;
        }
        if gap <= settings.tol_near
            && pinf <= settings.tol_near
            && near.as_ref().is_none_or(|(_, g, _, _)| gap < *g)
            && (dinf <= settings.tol_lmi || lmi_holds(&prob, &it.y))
        {
            near = Some((it.y.clone(), gap, pinf, dinf));
        }

        // Certificates of infeasibility: a diverging X with ⟨C, X⟩ → -∞ and
        // 𝒜(X) bounded proves the LMI empty; a diverging y with bᵀy → ∞ and
        // 𝒜ᵀ(y) ⪯ 0 proves unboundedness.
        if pobj < 0.0 && ax.norm() <= settings.tol_infeasible * (-pobj) {
            status = SdpStatus::Infeasible;
            break;
        }
        if dobj > 0.0 && (c_norm + dinf * (1.0 + c_norm)) <= settings.tol_infeasible * dobj {
            status = SdpStatus::Unbounded;
            break;
        }
        if iter == settings.max_iter {
            break;
        }

        let mut o = DMatrix::<f64>::zeros(m, m);
        for ((blk, x), zi) in prob.blocks.iter().zip(&it.x).zip(&zinv) {
            let nt = blk.vars.len();
            if nt == 0 {
                continue;
            }
            let d = blk.c.nrows();
            let mut gflat = DMatrix::zeros(nt, d * d);
            for (k, a) in blk.coeffs.iter().enumerate() {
                let g = x * a * zi;
                for (idx, val) in g.iter().enumerate() {
                    gflat[(k, idx)] = *val;
                }
            }
            let ob = &blk.flat * gflat.transpose();
            for (a, va) in blk.vars.iter().enumerate() {
                for (b, vb) in blk.vars.iter().enumerate() {
                    o[(*va, *vb)] += ob[(a, b)];
                }
            }
        }
        for (l, row) in prob.lin.rows.iter().enumerate() {
            let w = it.xl[l] / it.zl[l];
            for (va, a) in row {
                for (vb, b) in row {
                    o[(*va, *vb)] += a * b * w;
                }
            }
        }
        let o = symmetrize(&o);
        let Some(schur) = factor_schur(&o) else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        let ws = Workspace {
            prob: &prob,
            it: &it,
            zinv: &zinv,
            rp: &rp,
            rd: &rd,
            rdl: &rdl,
            schur: &schur,
        };

        // Predictor.
        let k_aff: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let aff = ws.direction(k_aff, -&it.xl);
        let (ap, ad) = step_lengths(&xchol, &zchol, &it, &aff);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let x_a: Vec<DMatrix<f64>> = it.x.iter().zip(&aff.dx).map(|(x, d)| x + d * ap).collect();
        let z_a: Vec<DMatrix<f64>> = it.z.iter().zip(&aff.dz).map(|(z, d)| z + d * ad).collect();
        let mu_aff = complementarity(&x_a, &z_a, &(&it.xl + &aff.dxl * ap), &(&it.zl + &aff.dzl * ad)) / n_barrier;
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = (mu_aff / mu).max(0.0).powf(expon).min(1.0);

        // Corrector.
        let k_cor: Vec<DMatrix<f64>> =
            it.x.iter()
                .zip(&zinv)
                .zip(aff.dx.iter().zip(&aff.dz))
                .map(|((x, zi), (dx, dz))| zi * (sigma * mu) - x - dx * dz * zi)
                .collect();
        let k_cor_l = DVector::from_iterator(
            it.xl.len(),
            (0..it.xl.len()).map(|l| (sigma * mu - it.xl[l] * it.zl[l] - aff.dxl[l] * aff.dzl[l]) / it.zl[l]),
        );
        let dir = ws.direction(k_cor, k_cor_l);
        let (ap, ad) = step_lengths(&xchol, &zchol, &it, &dir);
        let eta = 0.9 + 0.09 * prev_step;
        let ap = (eta * ap).min(1.0);
        let ad = (eta * ad).min(1.0);
        prev_step = ap.min(ad);
        if prev_step < 1e-10 {
            stalled += 1;
            if stalled >= 3 {
                status = SdpStatus::NumericalFailure;
                break;
            }
        } else {
            stalled = 0;
        }

        for (x, d) in it.x.iter_mut().zip(&dir.dx) {
            *x += d * ap;
        }
        it.xl += &dir.dxl * ap;
        it.y += &dir.dy * ad;
        for (z, d) in it.z.iter_mut().zip(&dir.dz) {
            *z += d * ad;
        }
        it.zl += &dir.dzl * ad;
    }

    let mut y_final = it.y.clone();
    if matches!(status, SdpStatus::MaxIterations | SdpStatus::NumericalFailure) {
        if let Some((y_near, g, p, d)) = near {
            status = SdpStatus::NearOptimal;
            y_final = y_near;
            gap = g;
            pinf = p;
            dinf = d;
        }
    }
    let y = y_final.component_mul(&prob.var_scale);
    let objective = problem.objective.dot(&y);
    SdpSolution {
        status,
        y,
        objective,
        iterations,
        gap,
        multiplier_residual: pinf,
        lmi_residual: dinf,
        warm: Some(WarmStart {
            y: it.y.clone(),
            x_blocks: it.x,
            z_blocks: it.z,
            x_lin: it.xl,
            z_lin: it.zl,
        }),
    }
}

/// The scaled LMI evaluated directly at `y` is PSD and all rows nonnegative,
/// up to the rounding error of forming `C - 𝒜ᵀ(y)` itself.
fn lmi_holds(prob: &Scaled, y: &DVector<f64>) -> bool {
    let (aty, atyl) = prob.a_adj(y);
    let dense_ok = prob.blocks.iter().zip(&aty).all(|(blk, a)| {
        let d = blk.c.nrows();
        let magnitude = blk.c.norm()
            + blk
                .vars
                .iter()
                .zip(&blk.coeffs)
                .map(|(v, c)| y[*v].abs() * c.norm())
                .sum::<f64>();
        let rounding = 4.0 * d as f64 * f64::EPSILON * magnitude;
        let s = &blk.c - a + DMatrix::identity(d, d) * rounding;
        chol_spd(&s).is_some()
    });
    let lin_ok = prob.lin.rows.iter().enumerate().all(|(l, row)| {
        let magnitude = prob.lin.c[l].abs() + row.iter().map(|(v, a)| (y[*v] * a).abs()).sum::<f64>();
        prob.lin.c[l] - atyl[l] >= -4.0 * f64::EPSILON * magnitude
    });
    dense_ok && lin_ok
}

fn seed_from_warm(it: &mut Iterate, w: &WarmStart) {
    let shapes_match = w.y.len() == it.y.len()
        && w.x_blocks.len() == it.x.len()
        && w.x_blocks.iter().zip(&it.x).all(|(a, b)| a.shape() == b.shape())
        && w.x_lin.len() == it.xl.len();
    if !shapes_match {
        return;
    }
    // Blend with the default start so the iterate stays well inside the cone.
    const KEEP: f64 = 0.5;
    it.y = &w.y * KEEP;
    for (x, wx) in it.x.iter_mut().zip(&w.x_blocks) {
        *x = &*x * (1.0 - KEEP) + wx * KEEP;
    }
    for (z, wz) in it.z.iter_mut().zip(&w.z_blocks) {
        *z = &*z * (1.0 - KEEP) + wz * KEEP;
    }
    it.xl = &it.xl * (1.0 - KEEP) + &w.x_lin * KEEP;
    it.zl = &it.zl * (1.0 - KEEP) + &w.z_lin * KEEP;
}
