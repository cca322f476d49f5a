//! LMI synthesis of the robust state-feedback gain.
//!
//! Decision variables are `γ`, symmetric `H`, `L` and the multipliers `τ`.
//! The optimal gain is `F = L H⁻¹` and the cost certificate is
//! `V(x) = xᵀ P x` with `P = γ H⁻¹`.
//!
//! The problem is homogeneous in `(γ, H, L, τ)` apart from the constraint
//! LMIs, so it is solved in variables normalized by `‖x_t‖²`: with
//! `s = ‖x_t‖²` the substitution `(γ, H, L, τ) = s (γ̂, Ĥ, L̂, τ̂)` maps it to
//! the same family of LMIs at the unit state `x_t/√s`, input weight `s S_u`,
//! state weight `s S_x` and margin `δ/s`.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::consistency::{MultiplierMode, PiBlocks};
use crate::error::{check_len, check_shape, Error, Result};
use crate::linalg::{min_eigenvalue, put_block, put_sym_block, spd_condition, symmetrize};
use crate::sdp::{self, AffineMatrix, AffineScalar, LmiProblem, SdpStatus, SolverSettings, WarmStart};

/// Upper-triangular `M` with `MᵀM = W`.
pub fn factor_weight(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !w.is_square() {
        return Err(Error::Dimension {
            operand: "weight",
            expected: "square".into(),
            actual: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    if (w - w.transpose()).norm() > 1e-12 * w.norm() {
        return Err(Error::Invalid("weight matrix is not symmetric".into()));
    }
    let lmin = min_eigenvalue(w);
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "weight",
            min_eigenvalue: lmin,
        });
    }
    let chol = Cholesky::new(symmetrize(w)).ok_or(Error::NotPositiveDefinite {
        what: "weight",
        min_eigenvalue: lmin,
    })?;
    Ok(chol.l().transpose())
}

/// Stage-cost weights `Q ≻ 0`, `R ≻ 0` with cached factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    m_q: DMatrix<f64>,
    m_r: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let m_q = factor_weight(&q).map_err(|e| relabel(e, "Q"))?;
        let m_r = factor_weight(&r).map_err(|e| relabel(e, "R"))?;
        Ok(Self { q, r, m_q, m_r })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn m_q(&self) -> &DMatrix<f64> {
        &self.m_q
    }

    pub fn m_r(&self) -> &DMatrix<f64> {
        &self.m_r
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }
}

fn relabel(e: Error, what: &'static str) -> Error {
    match e {
        Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::NotPositiveDefinite { what, min_eigenvalue },
        Error::Dimension { expected, actual, .. } => Error::Dimension {
            operand: what,
            expected,
            actual,
        },
        other => other,
    }
}

/// Ellipsoidal constraints `‖u‖_{S_u} ≤ 1`, `‖x‖_{S_x} ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSets {
    s_u: DMatrix<f64>,
    s_u_inv: DMatrix<f64>,
    s_x: DMatrix<f64>,
}

impl ConstraintSets {
    pub fn new(s_u: DMatrix<f64>, s_x: DMatrix<f64>) -> Result<Self> {
        check_shape("S_u", (s_u.nrows(), s_u.nrows()), s_u.shape())?;
        check_shape("S_x", (s_x.nrows(), s_x.nrows()), s_x.shape())?;
        let lmin = min_eigenvalue(&s_u);
        if !(lmin > 0.0) {
            return Err(Error::NotPositiveDefinite {
                what: "S_u",
                min_eigenvalue: lmin,
            });
        }
        let s_u_inv = Cholesky::new(symmetrize(&s_u))
            .ok_or(Error::Singular { what: "S_u" })?
            .inverse();
        let xmin = min_eigenvalue(&s_x);
        if xmin < -1e-12 * (1.0 + s_x.norm()) {
            return Err(Error::NotPositiveSemidefinite {
                what: "S_x",
                min_eigenvalue: xmin,
            });
        }
        Ok(Self {
            s_u,
            s_u_inv: symmetrize(&s_u_inv),
            s_x,
        })
    }

    pub fn s_u(&self) -> &DMatrix<f64> {
        &self.s_u
    }

    pub fn s_u_inv(&self) -> &DMatrix<f64> {
        &self.s_u_inv
    }

    pub fn s_x(&self) -> &DMatrix<f64> {
        &self.s_x
    }

    /// `S_x = 0` disables the state constraint.
    pub fn has_state_constraint(&self) -> bool {
        self.s_x.iter().any(|v| *v != 0.0)
    }

    /// `‖u‖_{S_u}`.
    pub fn input_norm(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.s_u * u)).max(0.0).sqrt()
    }

    /// `‖x‖_{S_x}`.
    pub fn state_norm(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.s_x * x)).max(0.0).sqrt()
    }
}

/// Encoding of the state-constraint LMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateConstraintForm {
    /// `[[S_x, I], [I, H]] ⪰ 0`, i.e. `S_x ⪰ γ⁻¹ P`. This bounds `H` from
    /// below, so it does not keep the certified ellipsoid inside the
    /// state-constraint set and becomes badly conditioned near the origin.
    Standard,
    /// `[[I, S_x^{1/2} H], [H S_x^{1/2}, H]] ⪰ 0`, i.e. `γ⁻¹ P ⪰ S_x`: the
    /// certified ellipsoid lies inside the state-constraint set.
    #[default]
    Containment,
}

impl std::str::FromStr for StateConstraintForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "containment" => Ok(Self::Containment),
            other => Err(Error::Invalid(format!("unknown state constraint form '{other}'"))),
        }
    }
}

impl std::fmt::Display for StateConstraintForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Containment => "containment",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub multiplier_mode: MultiplierMode,
    /// Include the input and state constraint LMIs.
    pub constraints: bool,
    pub state_form: StateConstraintForm,
    /// Strictness margin `δ = margin_abs + margin_rel ‖x_t‖²` on the decrease
    /// LMI. The default is purely relative so the margin scales with the
    /// problem; a fixed absolute part dominates once `‖x_t‖` is small.
    pub margin_abs: f64,
    pub margin_rel: f64,
    /// States with `‖x_t‖₂` at or below this skip the solve.
    pub origin_threshold: f64,
    pub solver: SolverSettings,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            multiplier_mode: MultiplierMode::PerSample,
            constraints: true,
            state_form: StateConstraintForm::Containment,
            margin_abs: 0.0,
            margin_rel: 1e-8,
            origin_threshold: 1e-9,
            solver: SolverSettings::default(),
        }
    }
}

impl SynthesisOptions {
    pub fn margin(&self, x_t: &DVector<f64>) -> f64 {
        self.margin_abs + self.margin_rel * x_t.norm_squared()
    }
}

/// Positions of `γ`, `H`, `L`, `τ` in the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n: usize,
    pub m: usize,
    pub n_tau: usize,
}

impl VarLayout {
    pub fn new(n: usize, m: usize, n_tau: usize) -> Self {
        Self { n, m, n_tau }
    }

    pub fn for_blocks(blocks: &PiBlocks, mode: MultiplierMode) -> Self {
        let n_tau = match mode {
            MultiplierMode::PerSample => blocks.len(),
            MultiplierMode::Common => 1,
        };
        Self::new(blocks.n(), blocks.m(), n_tau)
    }

    pub fn gamma(&self) -> usize {
        0
    }

    fn n_h(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Index of `H[i][j]` (`i ≤ j`, upper triangle).
    pub fn h(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        1 + i * self.n - i * (i + 1) / 2 + j
    }

    pub fn l(&self, i: usize, j: usize) -> usize {
        1 + self.n_h() + i * self.n + j
    }

    pub fn tau(&self, k: usize) -> usize {
        1 + self.n_h() + self.m * self.n + k
    }

    pub fn len(&self) -> usize {
        1 + self.n_h() + self.m * self.n + self.n_tau
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(i, j)` pairs of the upper triangle with the symmetric basis matrix.
    fn h_basis(&self) -> Vec<(usize, DMatrix<f64>)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                let mut e = DMatrix::zeros(self.n, self.n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                out.push((self.h(i, j), e));
            }
        }
        out
    }

    fn l_basis(&self) -> Vec<(usize, DMatrix<f64>)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in 0..self.n {
                let mut e = DMatrix::zeros(self.m, self.n);
                e[(i, j)] = 1.0;
                out.push((self.l(i, j), e));
            }
        }
        out
    }

    pub fn pack(&self, d: &Decision) -> DVector<f64> {
        let mut y = DVector::zeros(self.len());
        y[self.gamma()] = d.gamma;
        for i in 0..self.n {
            for j in i..self.n {
                y[self.h(i, j)] = d.h[(i, j)];
            }
        }
        for i in 0..self.m {
            for j in 0..self.n {
                y[self.l(i, j)] = d.l[(i, j)];
            }
        }
        for k in 0..self.n_tau {
            y[self.tau(k)] = d.tau[k];
        }
        y
    }

    pub fn unpack(&self, y: &DVector<f64>) -> Decision {
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                h[(i, j)] = y[self.h(i, j)];
            }
        }
        let l = DMatrix::from_fn(self.m, self.n, |i, j| y[self.l(i, j)]);
        let tau = DVector::from_fn(self.n_tau, |k, _| y[self.tau(k)]);
        Decision {
            gamma: y[self.gamma()],
            h,
            l,
            tau,
        }
    }
}

/// A point in decision space.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub gamma: f64,
    pub h: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub tau: DVector<f64>,
}

impl Decision {
    fn scaled(&self, s: f64) -> Self {
        Self {
            gamma: self.gamma * s,
            h: &self.h * s,
            l: &self.l * s,
            tau: &self.tau * s,
        }
    }
}

/// `[[1, x_tᵀ], [x_t, H]] ⪰ 0`.
pub fn build_lmi_initial(layout: &VarLayout, x_t: &DVector<f64>) -> AffineMatrix {
    let n = layout.n;
    let mut c = DMatrix::zeros(n + 1, n + 1);
    c[(0, 0)] = 1.0;
    for k in 0..n {
        c[(0, k + 1)] = x_t[k];
        c[(k + 1, 0)] = x_t[k];
    }
    let mut lmi = AffineMatrix::new(c);
    for (v, e) in layout.h_basis() {
        let mut coeff = DMatrix::zeros(n + 1, n + 1);
        put_block(&mut coeff, 1, 1, &e);
        lmi.add_term(v, coeff);
    }
    lmi
}

/// Linear map `(H, L, τ, γ) ↦` the block matrix
///
/// ```text
/// [ [-H 0; 0 0] + Π(τ)   [0; H; L]   0    ]
/// [ [0 H Lᵀ]             -H          Φᵀ   ]
/// [ 0                     Φ          -γ I ]
/// ```
///
/// with `Φ = [M_R L; M_Q H]`. The decrease condition requires it `≺ 0`.
pub fn decrease_matrix(
    layout: &VarLayout,
    blocks: &PiBlocks,
    weights: &CostWeights,
    mode: MultiplierMode,
) -> AffineMatrix {
    let n = layout.n;
    let m = layout.m;
    let top = 2 * n + m;
    let mid = top;
    let bot = top + n;
    let dim = top + n + n + m;
    let mut out = AffineMatrix::zeros(dim);

    let mut g = DMatrix::zeros(dim, dim);
    put_block(&mut g, bot, bot, &(-DMatrix::identity(n + m, n + m)));
    out.add_term(layout.gamma(), g);

    for (v, e) in layout.h_basis() {
        let mut c = DMatrix::zeros(dim, dim);
        put_block(&mut c, 0, 0, &(-&e));
        put_sym_block(&mut c, n, mid, &e);
        put_block(&mut c, mid, mid, &(-&e));
        put_sym_block(&mut c, bot + m, mid, &(weights.m_q() * &e));
        out.add_term(v, c);
    }
    for (v, e) in layout.l_basis() {
        let mut c = DMatrix::zeros(dim, dim);
        put_sym_block(&mut c, 2 * n, mid, &e);
        put_sym_block(&mut c, bot, mid, &(weights.m_r() * &e));
        out.add_term(v, c);
    }
    match mode {
        MultiplierMode::PerSample => {
            for (k, pi) in blocks.iter().enumerate() {
                let mut c = DMatrix::zeros(dim, dim);
                put_block(&mut c, 0, 0, pi);
                out.add_term(layout.tau(k), c);
            }
        }
        MultiplierMode::Common => {
            let mut c = DMatrix::zeros(dim, dim);
            for pi in blocks.iter() {
                let mut blk = c.view_mut((0, 0), (top, top));
                blk += pi;
            }
            out.add_term(layout.tau(0), c);
        }
    }
    out
}

/// Decrease LMI in `⪰ 0` form: `-M(H, L, τ, γ) - δ I ⪰ 0`.
pub fn build_lmi_decrease(
    layout: &VarLayout,
    blocks: &PiBlocks,
    weights: &CostWeights,
    mode: MultiplierMode,
    margin: f64,
) -> AffineMatrix {
    decrease_matrix(layout, blocks, weights, mode).negated().shifted(margin)
}

/// `[[H, Lᵀ], [L, S_u⁻¹]] ⪰ 0`.
pub fn build_lmi_input(layout: &VarLayout, s_u_inv: &DMatrix<f64>) -> AffineMatrix {
    let n = layout.n;
    let m = layout.m;
    let mut c = DMatrix::zeros(n + m, n + m);
    put_block(&mut c, n, n, s_u_inv);
    let mut lmi = AffineMatrix::new(c);
    for (v, e) in layout.h_basis() {
        let mut coeff = DMatrix::zeros(n + m, n + m);
        put_block(&mut coeff, 0, 0, &e);
        lmi.add_term(v, coeff);
    }
    for (v, e) in layout.l_basis() {
        let mut coeff = DMatrix::zeros(n + m, n + m);
        put_sym_block(&mut coeff, n, 0, &e);
        lmi.add_term(v, coeff);
    }
    lmi
}

/// State-constraint LMI of size `2n` in the chosen encoding.
pub fn build_lmi_state(layout: &VarLayout, s_x: &DMatrix<f64>, form: StateConstraintForm) -> AffineMatrix {
    let n = layout.n;
    let eye = DMatrix::<f64>::identity(n, n);
    match form {
        StateConstraintForm::Standard => {
            let mut c = DMatrix::zeros(2 * n, 2 * n);
            put_block(&mut c, 0, 0, s_x);
            put_sym_block(&mut c, 0, n, &eye);
            let mut lmi = AffineMatrix::new(c);
            for (v, e) in layout.h_basis() {
                let mut coeff = DMatrix::zeros(2 * n, 2 * n);
                put_block(&mut coeff, n, n, &e);
                lmi.add_term(v, coeff);
            }
            lmi
        }
        StateConstraintForm::Containment => {
            let root = psd_sqrt(s_x);
            let mut c = DMatrix::zeros(2 * n, 2 * n);
            put_block(&mut c, 0, 0, &eye);
            let mut lmi = AffineMatrix::new(c);
            for (v, e) in layout.h_basis() {
                let mut coeff = DMatrix::zeros(2 * n, 2 * n);
                put_sym_block(&mut coeff, 0, n, &(&root * &e));
                put_block(&mut coeff, n, n, &e);
                lmi.add_term(v, coeff);
            }
            lmi
        }
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose()))
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::NumericalFailure => "numerical-failure",
        })
    }
}

/// Optimal decision together with the derived gain and Lyapunov matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub gamma: f64,
    pub h: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub tau: DVector<f64>,
    pub multiplier_mode: MultiplierMode,
    pub f: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SolverStatus,
    pub certificate: Option<Certificate>,
    /// The state was within the origin threshold; nothing was solved.
    pub at_origin: bool,
    pub iterations: usize,
    pub solve_time: f64,
    pub diagnostics: String,
}

impl SynthesisResult {
    /// Certified cost bound; zero at the origin.
    pub fn gamma(&self) -> Option<f64> {
        if self.at_origin {
            Some(0.0)
        } else {
            self.certificate.as_ref().map(|c| c.gamma)
        }
    }

    pub fn gain(&self) -> Option<&DMatrix<f64>> {
        self.certificate.as_ref().map(|c| &c.f)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// Plain-text report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status      : {}", self.status);
        if self.at_origin {
            let _ = writeln!(s, "gamma       : 0 (state at origin, no solve)");
            return s;
        }
        let _ = writeln!(s, "iterations  : {}", self.iterations);
        let _ = writeln!(s, "solve time  : {:.3} s", self.solve_time);
        if let Some(c) = &self.certificate {
            let _ = writeln!(s, "gamma       : {:.10e}", c.gamma);
            let _ = writeln!(s, "F           : {}", fmt_matrix(&c.f));
            let _ = writeln!(s, "P           : {}", fmt_matrix(&c.p));
            let tau = &c.tau;
            let active = tau.iter().filter(|t| **t > 1e-8 * tau.amax().max(1e-300)).count();
            let _ = writeln!(
                s,
                "tau ({})     : len {}, min {:.3e}, max {:.3e}, mean {:.3e}, active {}",
                c.multiplier_mode,
                tau.len(),
                tau.min(),
                tau.max(),
                tau.mean(),
                active
            );
        }
        if !self.diagnostics.is_empty() {
            let _ = writeln!(s, "diagnostics : {}", self.diagnostics);
        }
        s
    }
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| format!("{:.8e}", m[(r, c)]))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

/// `F = L H⁻¹` and `P = γ H⁻¹` via Cholesky solves.
pub fn recover_certificate(gamma: f64, h: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let hs = symmetrize(h);
    let cond = spd_condition(&hs);
    if !(cond <= 1e12) {
        return Err(Error::Singular { what: "H" });
    }
    let chol = Cholesky::new(hs.clone()).ok_or(Error::Singular { what: "H" })?;
    let f = chol.solve(&l.transpose()).transpose();
    let p = symmetrize(&(chol.solve(&DMatrix::identity(hs.nrows(), hs.nrows())) * gamma));
    let pmin = min_eigenvalue(&p);
    if !(pmin > 0.0) {
        return Err(Error::NotPositiveDefinite {
            what: "P",
            min_eigenvalue: pmin,
        });
    }
    Ok((f, p))
}

/// Builds the full LMI problem for the given (possibly normalized) data.
#[allow(clippy::too_many_arguments)]
fn build_problem(
    layout: &VarLayout,
    x_t: &DVector<f64>,
    blocks: &PiBlocks,
    weights: &CostWeights,
    s_u_inv: &DMatrix<f64>,
    s_x: &DMatrix<f64>,
    state_constraint: bool,
    opts: &SynthesisOptions,
    margin: f64,
) -> LmiProblem {
    let mut objective = DVector::zeros(layout.len());
    objective[layout.gamma()] = 1.0;
    let mut prob = LmiProblem::new(objective);
    prob.add_lmi(build_lmi_initial(layout, x_t));
    prob.add_lmi(build_lmi_decrease(
        layout,
        blocks,
        weights,
        opts.multiplier_mode,
        margin,
    ));
    if opts.constraints {
        prob.add_lmi(build_lmi_input(layout, s_u_inv));
        if state_constraint {
            prob.add_lmi(build_lmi_state(layout, s_x, opts.state_form));
        }
    }
    for k in 0..layout.n_tau {
        prob.add_nonneg(AffineScalar::var(layout.tau(k)));
    }
    prob
}

/// Full LMI problem at `x_t` in the original (unnormalized) variables.
pub fn synthesis_problem(
    x_t: &DVector<f64>,
    blocks: &PiBlocks,
    weights: &CostWeights,
    cons: &ConstraintSets,
    opts: &SynthesisOptions,
) -> (VarLayout, LmiProblem) {
    let layout = VarLayout::for_blocks(blocks, opts.multiplier_mode);
    let prob = build_problem(
        &layout,
        x_t,
        blocks,
        weights,
        cons.s_u_inv(),
        cons.s_x(),
        cons.has_state_constraint(),
        opts,
        opts.margin(x_t),
    );
    (layout, prob)
}

fn validate(x_t: &DVector<f64>, blocks: &PiBlocks, weights: &CostWeights, cons: &ConstraintSets) -> Result<()> {
    let n = blocks.n();
    let m = blocks.m();
    check_len("state x_t", n, x_t.len())?;
    check_shape("Q", (n, n), weights.q().shape())?;
    check_shape("R", (m, m), weights.r().shape())?;
    check_shape("S_u", (m, m), cons.s_u().shape())?;
    check_shape("S_x", (n, n), cons.s_x().shape())
}

/// Minimizes `γ` over the LMIs at state `x_t`.
pub fn synthesize(
    x_t: &DVector<f64>,
    blocks: &PiBlocks,
    weights: &CostWeights,
    cons: &ConstraintSets,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    synthesize_warm(x_t, blocks, weights, cons, opts, None).map(|(r, _)| r)
}

/// [`synthesize`] with an optional solver warm start; also returns the
/// solver state for seeding the next call.
pub fn synthesize_warm(
    x_t: &DVector<f64>,
    blocks: &PiBlocks,
    weights: &CostWeights,
    cons: &ConstraintSets,
    opts: &SynthesisOptions,
    warm: Option<&WarmStart>,
) -> Result<(SynthesisResult, Option<WarmStart>)> {
    validate(x_t, blocks, weights, cons)?;
    let norm = x_t.norm();
    if norm <= opts.origin_threshold {
        return Ok((
            SynthesisResult {
                status: SolverStatus::Optimal,
                certificate: None,
                at_origin: true,
                iterations: 0,
                solve_time: 0.0,
                diagnostics: String::new(),
            },
            None,
        ));
    }

    let start = Instant::now();
    let scale = norm * norm;
    let layout = VarLayout::for_blocks(blocks, opts.multiplier_mode);
    let prob = build_problem(
        &layout,
        &(x_t / norm),
        blocks,
        weights,
        &(cons.s_u_inv() / scale),
        &(cons.s_x() * scale),
        cons.has_state_constraint(),
        opts,
        opts.margin(x_t) / scale,
    );
    let sol = sdp::solve(&prob, &opts.solver, warm);
    let solve_time = start.elapsed().as_secs_f64();
    let diagnostics = format!(
        "sdp status {:?}, iterations {}, gap {:.2e}, multiplier residual {:.2e}, lmi residual {:.2e}",
        sol.status, sol.iterations, sol.gap, sol.multiplier_residual, sol.lmi_residual
    );

    let status = match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => SolverStatus::Optimal,
        SdpStatus::Infeasible => SolverStatus::Infeasible,
        _ => SolverStatus::NumericalFailure,
    };
    let mut result = SynthesisResult {
        status,
        certificate: None,
        at_origin: false,
        iterations: sol.iterations,
        solve_time,
        diagnostics,
    };
    if status == SolverStatus::Optimal {
        let decision = layout.unpack(&sol.y).scaled(scale);
        match recover_certificate(decision.gamma, &decision.h, &decision.l) {
            Ok((f, p)) => {
                result.certificate = Some(Certificate {
                    gamma: decision.gamma,
                    h: symmetrize(&decision.h),
                    l: decision.l,
                    tau: decision.tau,
                    multiplier_mode: opts.multiplier_mode,
                    f,
                    p,
                });
            }
            Err(e) => {
                result.status = SolverStatus::NumericalFailure;
                let _ = write!(result.diagnostics, "; certificate recovery failed: {e}");
            }
        }
    }
    Ok((result, sol.warm))
}
