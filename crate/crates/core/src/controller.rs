//! Receding-horizon loop: re-solve the synthesis problem at every measured
//! state, apply `u_t = F_t x_t`, step the plant.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::consistency::{build_pi_blocks, PiBlocks};
use crate::error::{check_len, Error, Result};
use crate::lti::{DataSet, LtiSystem, NoiseModel};
use crate::synthesis::{synthesize_warm, ConstraintSets, CostWeights, SolverStatus, SynthesisOptions};

pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MpcConfig {
    pub weights: CostWeights,
    pub constraints: ConstraintSets,
    /// Offline data; never extended with closed-loop measurements.
    pub data: DataSet,
    pub steps: usize,
    /// Plant-side disturbance; the synthesis problem never models it.
    pub online_noise: NoiseModel,
    pub synthesis: SynthesisOptions,
    pub warm_start: bool,
    pub convergence_tol: f64,
    /// Stop once `‖x_t‖₂ ≤ convergence_tol` instead of running all steps.
    pub early_stop: bool,
}

impl MpcConfig {
    pub fn new(weights: CostWeights, constraints: ConstraintSets, data: DataSet, steps: usize) -> Self {
        Self {
            weights,
            constraints,
            data,
            steps,
            online_noise: NoiseModel::zero(),
            synthesis: SynthesisOptions::default(),
            warm_start: false,
            convergence_tol: CONVERGENCE_TOL,
            early_stop: false,
        }
    }
}

/// `uᵀRu + xᵀQx`.
pub fn stage_cost(u: &DVector<f64>, x: &DVector<f64>, weights: &CostWeights) -> f64 {
    u.dot(&(weights.r() * u)) + x.dot(&(weights.q() * x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub gamma: f64,
    pub stage_cost: f64,
    pub input_norm: f64,
    pub state_norm: f64,
    pub status: SolverStatus,
    pub solve_time: f64,
    pub iterations: usize,
    pub at_origin: bool,
}

impl StepRecord {
    pub fn feasible(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    pub fn input_ok(&self) -> bool {
        self.input_norm <= 1.0 + 1e-8
    }

    pub fn state_ok(&self) -> bool {
        self.state_norm <= 1.0 + 1e-8
    }
}

pub const STEP_LOG_HEADER: &str = "t,gamma,stage_cost,norm_u_Su,norm_x_Sx,solver_status,solve_time";

/// Per-step log CSV, header included.
pub fn step_log_csv(records: &[StepRecord]) -> String {
    let mut s = String::from(STEP_LOG_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.6}",
            r.t, r.gamma, r.stage_cost, r.input_norm, r.state_norm, r.status, r.solve_time
        );
    }
    s
}

/// Logged closed-loop trajectory. `states` has one more entry than `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub records: Vec<StepRecord>,
    pub gains: Vec<DMatrix<f64>>,
    /// `P_t`; `None` for origin short-circuit steps.
    pub lyapunov: Vec<Option<DMatrix<f64>>>,
    pub total_cost: f64,
    pub noisy: bool,
    pub convergence_tol: f64,
}

impl ClosedLoopRun {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    pub fn stage_costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.stage_cost).collect()
    }

    pub fn feasible_flags(&self) -> Vec<bool> {
        self.records.iter().map(StepRecord::feasible).collect()
    }

    /// `(input, state)` constraint checks per step.
    pub fn constraint_flags(&self) -> Vec<(bool, bool)> {
        self.records.iter().map(|r| (r.input_ok(), r.state_ok())).collect()
    }

    /// First `t` with `‖x_t‖₂ ≤ convergence_tol`.
    pub fn convergence_step(&self) -> Option<usize> {
        self.states.iter().position(|x| x.norm() <= self.convergence_tol)
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("a run holds at least the initial state")
    }

    pub fn step_log_csv(&self) -> String {
        step_log_csv(&self.records)
    }
}

/// Runs the receding-horizon loop from `x0`.
pub fn run_closed_loop<R: Rng + ?Sized>(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    cfg: &MpcConfig,
    rng: &mut R,
) -> Result<ClosedLoopRun> {
    check_len("initial state x0", sys.n(), x0.len())?;
    if cfg.data.n() != sys.n() || cfg.data.m() != sys.m() {
        return Err(Error::Dimension {
            operand: "offline data",
            expected: format!("n={}, m={}", sys.n(), sys.m()),
            actual: format!("n={}, m={}", cfg.data.n(), cfg.data.m()),
        });
    }
    let blocks = build_pi_blocks(&cfg.data);
    run_with_blocks(sys, x0, cfg, &blocks, rng)
}

/// [`run_closed_loop`] with precomputed data blocks.
pub fn run_with_blocks<R: Rng + ?Sized>(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    cfg: &MpcConfig,
    blocks: &PiBlocks,
    rng: &mut R,
) -> Result<ClosedLoopRun> {
    let n = sys.n();
    let m = sys.m();
    let mut run = ClosedLoopRun {
        states: vec![x0.clone()],
        inputs: Vec::with_capacity(cfg.steps),
        records: Vec::with_capacity(cfg.steps),
        gains: Vec::with_capacity(cfg.steps),
        lyapunov: Vec::with_capacity(cfg.steps),
        total_cost: 0.0,
        noisy: !cfg.online_noise.is_zero(),
        convergence_tol: cfg.convergence_tol,
    };
    let mut warm = None;
    let mut last_gain: Option<DMatrix<f64>> = None;

    for t in 0..cfg.steps {
        let x = run.states[t].clone();
        if cfg.early_stop && x.norm() <= cfg.convergence_tol {
            break;
        }
        let (res, next_warm) = synthesize_warm(
            &x,
            blocks,
            &cfg.weights,
            &cfg.constraints,
            &cfg.synthesis,
            if cfg.warm_start { warm.as_ref() } else { None },
        )?;
        match res.status {
            SolverStatus::Optimal => {}
            SolverStatus::Infeasible if t == 0 => {
                return Err(Error::InitialInfeasible {
                    detail: res.diagnostics,
                })
            }
            SolverStatus::Infeasible => {
                return Err(Error::RecursiveFeasibility {
                    step: t,
                    log: run.step_log_csv(),
                })
            }
            SolverStatus::NumericalFailure => {
                return Err(Error::NumericalFailure {
                    step: t,
                    detail: res.diagnostics,
                })
            }
        }
        if next_warm.is_some() {
            warm = next_warm;
        }

        let gain = match &res.certificate {
            Some(c) => c.f.clone(),
            None => last_gain.clone().unwrap_or_else(|| DMatrix::zeros(m, n)),
        };
        let u = &gain * &x;
        let cost = stage_cost(&u, &x, &cfg.weights);
        run.total_cost += cost;
        run.records.push(StepRecord {
            t,
            gamma: res.gamma().unwrap_or(0.0),
            stage_cost: cost,
            input_norm: cfg.constraints.input_norm(&u),
            state_norm: cfg.constraints.state_norm(&x),
            status: res.status,
            solve_time: res.solve_time,
            iterations: res.iterations,
            at_origin: res.at_origin,
        });
        run.lyapunov.push(res.certificate.as_ref().map(|c| c.p.clone()));

        let w = cfg.online_noise.sample(n, rng);
        let next = sys.step(&x, &u, &w)?;
        run.inputs.push(u);
        run.gains.push(gain.clone());
        run.states.push(next);
        last_gain = Some(gain);
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged {
        step: usize,
    },
    /// Every step feasible with finite `γ_t`, but the final state is
    /// outside the convergence threshold.
    BoundedNotConverged,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged { step } => write!(f, "converged (step {step})"),
            Self::BoundedNotConverged => f.write_str("bounded, not converged"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub total_cost: f64,
    pub max_input_norm: f64,
    pub max_state_norm: f64,
    pub gamma0: Option<f64>,
    pub gamma_monotone: bool,
    pub final_state_norm: f64,
    pub outcome: Outcome,
    pub noisy: bool,
}

pub fn summarize(run: &ClosedLoopRun) -> RunSummary {
    let gammas = run.gammas();
    let gamma_monotone = gammas.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    let final_norm = run.final_state().norm();
    let outcome = match run.convergence_step() {
        Some(step) if final_norm <= run.convergence_tol => Outcome::Converged { step },
        _ => Outcome::BoundedNotConverged,
    };
    RunSummary {
        steps: run.len(),
        total_cost: run.total_cost,
        max_input_norm: run.records.iter().map(|r| r.input_norm).fold(0.0, f64::max),
        max_state_norm: run.records.iter().map(|r| r.state_norm).fold(0.0, f64::max),
        gamma0: gammas.first().copied(),
        gamma_monotone,
        final_state_norm: final_norm,
        outcome,
        noisy: run.noisy,
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps            : {}", self.steps)?;
        writeln!(f, "online noise     : {}", if self.noisy { "yes" } else { "no" })?;
        writeln!(f, "total cost       : {:.6e}", self.total_cost)?;
        match self.gamma0 {
            Some(g) => writeln!(f, "gamma_0          : {g:.6e}")?,
            None => writeln!(f, "gamma_0          : n/a")?,
        }
        writeln!(
            f,
            "gamma monotone   : {}",
            if self.gamma_monotone { "yes" } else { "no" }
        )?;
        writeln!(f, "max |u|_Su       : {:.6}", self.max_input_norm)?;
        writeln!(f, "max |x|_Sx       : {:.6}", self.max_state_norm)?;
        writeln!(f, "final |x|_2      : {:.6e}", self.final_state_norm)?;
        writeln!(f, "outcome          : {}", self.outcome)
    }
}
