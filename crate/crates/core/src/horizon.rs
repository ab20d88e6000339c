//! Trajectory simulation, finite-horizon optimal values, Riccati composition
//! and receding-horizon control.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lifting::LiftedStage;
use crate::problem::LqProblem;
use crate::riccati::{backward_recursion, check_psd_arg, gain_from_parts, riccati_step, RiccatiTrace};
use crate::spd::SymMatrix;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// A simulated state/input sequence starting at time `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: usize,
    /// `x_start, ..., x_{start+N}`.
    pub states: Vec<DVector<f64>>,
    /// `u_start, ..., u_{start+N-1}`.
    pub inputs: Vec<DVector<f64>>,
    /// `sum x'Qx + u'Ru`, plus the terminal term when one was supplied.
    pub cost: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds at least x0")
    }

    /// Largest relative residual of `x_{k+1} = A_k x_k + B_k u_k`.
    pub fn dynamics_residual(&self, problem: &LqProblem) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, u) in self.inputs.iter().enumerate() {
            let k = self.start + i;
            let stage = problem.stage(k)?;
            let predicted = stage.a() * &self.states[i] + stage.b() * u;
            let next = &self.states[i + 1];
            let scale = predicted.norm().max(f64::MIN_POSITIVE);
            worst = worst.max((next - &predicted).norm() / scale);
        }
        Ok(worst)
    }
}

/// Where a receding-horizon controller gets its terminal penalty `P_{k+T}`.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalPenalty {
    /// `P_{k+T}` read from a precomputed backward recursion.
    ExactTrace(RiccatiTrace),
    Constant(SymMatrix),
    Zero,
}

impl TerminalPenalty {
    fn at(&self, k: usize, n: usize) -> Result<SymMatrix> {
        match self {
            TerminalPenalty::ExactTrace(trace) => trace.at(k).cloned().ok_or_else(|| {
                Error::Argument(format!(
                    "terminal trace covers [{}, {}], index {k} requested",
                    trace.k_lo(),
                    trace.boundary_index()
                ))
            }),
            TerminalPenalty::Constant(p) => Ok(p.clone()),
            TerminalPenalty::Zero => Ok(SymMatrix::zeros(n)),
        }
    }
}

/// How inputs are chosen during simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Fixed inputs, indexed from the simulation start.
    OpenLoop(Vec<DVector<f64>>),
    /// Time-varying feedback `u = -K x`, indexed from the simulation start.
    Gains(Vec<DMatrix<f64>>),
    /// Solve a `horizon`-step problem at every time and apply its first input.
    RecedingHorizon { horizon: usize, terminal: TerminalPenalty },
}

/// Gains `K_k = (R_k + B_k' P_{k+1} B_k)^{-1} B_k' P_{k+1} A_k` for every step covered by `trace`.
pub fn optimal_gain_policy(problem: &LqProblem, trace: &RiccatiTrace) -> Result<PolicySpec> {
    let gains = (trace.k_lo()..trace.boundary_index())
        .map(|k| {
            let stage = problem.stage(k)?;
            let p_next = trace.at(k + 1).expect("inside trace");
            gain_from_parts(stage.a(), stage.b(), stage.r(), p_next).map_err(|e| e.at_stage(k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicySpec::Gains(gains))
}

/// Simulates `N` steps from `x_0` at time 0 without terminal cost.
pub fn simulate(problem: &LqProblem, policy: &PolicySpec, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
    simulate_from(problem, policy, 0, x0, steps, None)
}

/// Simulates `steps` steps starting at time `k0`; adds `x_N' P x_N` when a
/// terminal weight is given.
pub fn simulate_from(
    problem: &LqProblem,
    policy: &PolicySpec,
    k0: usize,
    x0: &DVector<f64>,
    steps: usize,
    terminal: Option<&SymMatrix>,
) -> Result<Trajectory> {
    if let PolicySpec::RecedingHorizon {
        horizon,
        terminal: source,
    } = policy
    {
        let run = receding_from(problem, *horizon, source, k0, x0, steps, terminal)?;
        return Ok(run.trajectory);
    }
    let (n, m) = (problem.n(), problem.m());
    if x0.len() != n {
        return Err(Error::dim("simulate", format!("x0 of length {n}"), x0.len()));
    }
    match policy {
        PolicySpec::OpenLoop(inputs) => {
            if inputs.len() < steps {
                return Err(Error::Argument(format!(
                    "open-loop policy has {} inputs, {steps} needed",
                    inputs.len()
                )));
            }
            if let Some(bad) = inputs.iter().find(|u| u.len() != m) {
                return Err(Error::dim("simulate", format!("inputs of length {m}"), bad.len()));
            }
        }
        PolicySpec::Gains(gains) => {
            if gains.len() < steps {
                return Err(Error::Argument(format!(
                    "gain policy has {} gains, {steps} needed",
                    gains.len()
                )));
            }
            if let Some(bad) = gains.iter().find(|k| k.shape() != (m, n)) {
                return Err(Error::dim(
                    "simulate",
                    format!("{m}x{n} gains"),
                    format!("{}x{}", bad.nrows(), bad.ncols()),
                ));
            }
        }
        PolicySpec::RecedingHorizon { .. } => unreachable!(),
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut cost = CompensatedSum::default();
    states.push(x0.clone());
    for i in 0..steps {
        let k = k0 + i;
        let stage = problem.stage(k).map_err(|e| e.at_stage(k))?;
        let x = &states[i];
        let u = match policy {
            PolicySpec::OpenLoop(us) => us[i].clone(),
            PolicySpec::Gains(ks) => -(&ks[i] * x),
            PolicySpec::RecedingHorizon { .. } => unreachable!(),
        };
        cost.add(quad(stage.q(), x));
        cost.add(quad(stage.r(), &u));
        let next = stage.a() * x + stage.b() * &u;
        states.push(next);
        inputs.push(u);
    }
    if let Some(p) = terminal {
        if p.dim() != n {
            return Err(Error::dim("simulate terminal weight", format!("{n}x{n}"), p.dim()));
        }
        cost.add(quad(p, states.last().expect("non-empty")));
    }
    Ok(Trajectory {
        start: k0,
        states,
        inputs,
        cost: cost.value(),
    })
}

/// Optimal cost `x0' P_{k_lo} x0` of the problem on `[k_lo, k_hi]` with
/// terminal weight `P_terminal` at `k_hi`.
pub fn finite_horizon_value(
    problem: &LqProblem,
    k_lo: usize,
    k_hi: usize,
    p_terminal: &SymMatrix,
    x0: &DVector<f64>,
) -> Result<f64> {
    if x0.len() != problem.n() {
        return Err(Error::dim(
            "finite_horizon_value",
            format!("x0 of length {}", problem.n()),
            x0.len(),
        ));
    }
    let trace = backward_recursion(problem, k_hi, k_lo, p_terminal)?;
    Ok(quad(trace.at(k_lo).expect("trace starts at k_lo"), x0))
}

/// `R_{dt} o R_{dt+1} o ... o R_{d(t+1)-1}(P)`: the stage `d(t+1)-1` operator is applied first.
pub fn compose_riccati(problem: &LqProblem, t: usize, d: usize, p: &SymMatrix) -> Result<SymMatrix> {
    if d == 0 {
        return Err(Error::Argument("lift depth d must be at least 1".into()));
    }
    check_psd_arg(p, problem.n(), problem.tolerances(), "compose_riccati")?;
    let mut acc = p.clone();
    for k in (d * t..d * (t + 1)).rev() {
        let stage = problem.stage(k).map_err(|e| e.at_stage(k))?;
        acc = riccati_step(stage.a(), stage.b(), stage.q(), stage.r(), &acc).map_err(|e| e.at_stage(k))?;
    }
    Ok(acc)
}

/// Riccati operator of a lifted stage, `Q~ + A~'(P - PB~(R~ + B~'PB~)^{-1}B~'P)A~`.
pub fn lifted_riccati_apply(stage: &LiftedStage, p: &SymMatrix) -> Result<SymMatrix> {
    check_psd_arg(p, stage.n(), stage.tolerances(), "lifted_riccati_apply")?;
    let (a, b, q, r) = stage.parts();
    riccati_step(a, b, q, r, p)
}

/// Output of [`receding_horizon_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecedingRun {
    pub trajectory: Trajectory,
    /// Gain applied at each step, `u_k = -K_k x_k`.
    pub gains: Vec<DMatrix<f64>>,
}

/// Receding-horizon control from `x0` at time 0: at every `k` the
/// `horizon`-step problem ending in the terminal penalty at `k + horizon` is
/// solved by a fresh backward recursion and only its first input is applied.
pub fn receding_horizon_run(
    problem: &LqProblem,
    horizon: usize,
    terminal: &TerminalPenalty,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<RecedingRun> {
    receding_from(problem, horizon, terminal, 0, x0, steps, None)
}

fn receding_from(
    problem: &LqProblem,
    horizon: usize,
    terminal: &TerminalPenalty,
    k0: usize,
    x0: &DVector<f64>,
    steps: usize,
    final_weight: Option<&SymMatrix>,
) -> Result<RecedingRun> {
    if horizon == 0 {
        return Err(Error::Argument("prediction horizon must be at least 1".into()));
    }
    let n = problem.n();
    if x0.len() != n {
        return Err(Error::dim(
            "receding_horizon_run",
            format!("x0 of length {n}"),
            x0.len(),
        ));
    }
    let mut gains = Vec::with_capacity(steps);
    for k in k0..k0 + steps {
        let p_end = terminal.at(k + horizon, n)?;
        let trace = backward_recursion(problem, k + horizon, k, &p_end)?;
        let stage = problem.stage(k).map_err(|e| e.at_stage(k))?;
        let p_next = trace.at(k + 1).expect("horizon >= 1");
        gains.push(gain_from_parts(stage.a(), stage.b(), stage.r(), p_next).map_err(|e| e.at_stage(k))?);
    }
    let policy = PolicySpec::Gains(gains);
    let trajectory = simulate_from(problem, &policy, k0, x0, steps, final_weight)?;
    let PolicySpec::Gains(gains) = policy else {
        unreachable!()
    };
    Ok(RecedingRun { trajectory, gains })
}

/// `max_k |x_k - y_k| / max_k |y_k|` over two trajectories of equal length.
pub fn trajectory_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    let scale = b.states.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    if gap == 0.0 {
        0.0
    } else {
        gap / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::build_lifted_stage;
    use crate::problem::StageData;

    fn unit_problem(len: usize) -> LqProblem {
        LqProblem::stationary(StageData::scalar(1.0, 1.0, 1.0, 1.0).unwrap(), len).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn empty_simulation() {
        let p = unit_problem(3);
        let tr = simulate(&p, &PolicySpec::OpenLoop(vec![]), &v(&[2.0]), 0).unwrap();
        assert_eq!(tr.states, vec![v(&[2.0])]);
        assert!(tr.inputs.is_empty());
        assert_eq!(tr.cost, 0.0);
    }

    #[test]
    fn uncontrolled_identity_dynamics() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let stage = StageData::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            q.clone(),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let p = LqProblem::stationary(stage, 7).unwrap();
        let x0 = v(&[1.0, -1.0]);
        let tr = simulate(&p, &PolicySpec::OpenLoop(vec![v(&[0.0]); 7]), &x0, 7).unwrap();
        assert!(tr.states.iter().all(|x| x == &x0));
        assert!((tr.cost - 7.0 * x0.dot(&(&q * &x0))).abs() < 1e-12);
        assert_eq!(tr.dynamics_residual(&p).unwrap(), 0.0);
    }

    #[test]
    fn stationary_optimal_cost_tends_to_golden_ratio() {
        let p = unit_problem(200);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let gain = golden / (1.0 + golden);
        let policy = PolicySpec::Gains(vec![DMatrix::from_element(1, 1, gain); 200]);
        let tr = simulate(&p, &policy, &v(&[1.0]), 200).unwrap();
        assert!((tr.cost - golden).abs() < 1e-12);
    }

    #[test]
    fn value_trivial_cases() {
        let p = unit_problem(5);
        let pt = SymMatrix::from_diagonal(&[1.0]);
        assert_eq!(finite_horizon_value(&p, 0, 3, &pt, &v(&[0.0])).unwrap(), 0.0);
        assert_eq!(
            finite_horizon_value(&p, 2, 2, &SymMatrix::from_diagonal(&[3.0]), &v(&[2.0])).unwrap(),
            12.0
        );
        let one_step = finite_horizon_value(&p, 0, 1, &pt, &v(&[1.0])).unwrap();
        assert!((one_step - 1.5).abs() < 1e-15);
    }

    #[test]
    fn compose_scalar_two_steps() {
        let p = unit_problem(4);
        let out = compose_riccati(&p, 0, 2, &SymMatrix::zeros(1)).unwrap();
        assert!((out[(0, 0)] - 1.5).abs() < 1e-15);
        let single = compose_riccati(&p, 3, 1, &SymMatrix::zeros(1)).unwrap();
        assert_eq!(single[(0, 0)], 1.0);
    }

    #[test]
    fn lifted_without_control_is_lyapunov_step() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.9]);
        let stage = StageData::new(
            a,
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let p = LqProblem::stationary(stage, 4).unwrap();
        let lifted = build_lifted_stage(&p, 0, 2).unwrap();
        let pm = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0])).unwrap();
        let expected = lifted.q_tilde.as_matrix() + lifted.a_tilde.transpose() * pm.as_matrix() * &lifted.a_tilde;
        let got = lifted_riccati_apply(&lifted, &pm).unwrap();
        assert!(crate::linalg::relative_error(&got, &expected) < 1e-14);
    }

    #[test]
    fn receding_horizon_rejects_bad_arguments() {
        let p = unit_problem(10);
        assert!(receding_horizon_run(&p, 0, &TerminalPenalty::Zero, &v(&[1.0]), 3).is_err());
        assert!(receding_horizon_run(&p, 2, &TerminalPenalty::Zero, &v(&[1.0, 2.0]), 3).is_err());
        let short = backward_recursion(&p, 4, 0, &SymMatrix::zeros(1)).unwrap();
        assert!(receding_horizon_run(&p, 2, &TerminalPenalty::ExactTrace(short), &v(&[1.0]), 5).is_err());
    }

    #[test]
    fn gain_policy_shape_checked() {
        let p = unit_problem(3);
        let bad = PolicySpec::Gains(vec![DMatrix::zeros(2, 1); 3]);
        assert!(matches!(
            simulate(&p, &bad, &v(&[1.0]), 3),
            Err(Error::Dimension { .. })
        ));
        let short = PolicySpec::OpenLoop(vec![v(&[0.0])]);
        assert!(matches!(simulate(&p, &short, &v(&[1.0]), 3), Err(Error::Argument(_))));
    }
}
