//! Interference-constrained rate maximization for the secondary user.
//!
//! Both receivers are handled by one dual method. The per-subcarrier
//! objective is `sum_m ln(1 + alpha_k / l_{m,k})` with noise level
//! `l_{m,k} = (Q_n + C_{m,k}) / (R_T p_s)` for the matched filter (self
//! interference replaced by its bound `Q_n`) and `l_{m,k} = C_{m,k} / (R_T p_s)`
//! for zero forcing. Every constraint is linear and homogeneous in alpha:
//! total power, the two adjacent-channel limits and, for the matched filter,
//! one self-interference limit per received symbol.
//!
//! Constraints are normalized to `u_j(alpha) / b_j <= 1`, so the multipliers
//! share one scale. For fixed multipliers the Lagrangian separates per
//! subcarrier and is maximized where `sum_m 1 / (l_{m,k} + alpha_k) = w_k`,
//! clipped to `[0, alpha_max]`; the box is implied by the power budget and
//! keeps the dual function finite at zero multipliers. When the levels do not
//! depend on m, as for the circulant transceivers built here, this is the
//! water level `M / w_k - l_k`.

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};
use crate::link::{mean_log2_1p, sinr_mf, snr_zf, InterferenceKernel, NoiseBase};
use crate::num::dbm_to_watts;
use crate::spectrum::{aci_power, AciCoefficients};
use crate::waveform::{PowerAllocation, ReceiverKind};

/// Power budget and interference limits, all in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    pub alpha_max: f64,
    pub q_r: f64,
    pub q_l: f64,
    /// Self-interference bound of the matched filter. `None` drops the
    /// constraint and the bound from the objective.
    pub q_n: Option<f64>,
}

impl ConstraintSet {
    pub fn new(alpha_max: f64, q_r: f64, q_l: f64, q_n: Option<f64>) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha_max", alpha_max)?;
        if !alpha_max.is_finite() {
            return Err(Error::Config("alpha_max must be finite".into()));
        }
        positive("Q_r", q_r)?;
        positive("Q_l", q_l)?;
        if let Some(q) = q_n {
            positive("Q_n", q)?;
        }
        Ok(Self {
            alpha_max,
            q_r,
            q_l,
            q_n: q_n.filter(|q| q.is_finite()),
        })
    }

    /// Budget and ACI limits in dBm, `Q_n` in watts.
    pub fn from_dbm(alpha_max_dbm: f64, q_r_dbm: f64, q_l_dbm: f64, q_n: Option<f64>) -> Result<Self> {
        Self::new(
            dbm_to_watts(alpha_max_dbm),
            dbm_to_watts(q_r_dbm),
            dbm_to_watts(q_l_dbm),
            q_n,
        )
    }

    pub fn with_q_n(self, q_n: Option<f64>) -> Result<Self> {
        Self::new(self.alpha_max, self.q_r, self.q_l, q_n)
    }
}

/// Multiplier step rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Projected gradient with Barzilai-Borwein steps and a nonmonotone
    /// Armijo safeguard.
    Spectral,
    /// zeta_t = zeta_0 / sqrt(t); `None` picks zeta_0 = 0.1 / |initial gradient|.
    Diminishing(Option<f64>),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub step: StepRule,
    pub max_iterations: usize,
    /// Threshold on sum |alpha(t) - alpha(t-1)| relative to sum alpha(t).
    pub eps: f64,
    /// Relative duality gap required before stopping.
    pub gap_tol: f64,
    /// Starting value of every normalized multiplier.
    pub multiplier_init: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step: StepRule::Spectral,
            max_iterations: 50_000,
            eps: 1e-4,
            gap_tol: 1e-9,
            multiplier_init: 0.0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realized {
    pub sum_alpha: f64,
    pub p_r: f64,
    pub p_l: f64,
    /// Largest sum_k alpha_k f_{m',k'}(k) - p_s alpha_k' (matched filter).
    pub max_self_interference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Surrogate rate of the current water levels, bit/s/Hz.
    pub rate: f64,
    pub dual_value: f64,
    /// Largest relative constraint violation, max_j (u_j / b_j - 1).
    pub max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub alphas: PowerAllocation,
    /// gamma in watts^-1: power, right, left, then M*K self-interference
    /// multipliers (matched filter only), time-slot major.
    pub multipliers: Vec<f64>,
    /// True rate of the returned powers, bit/s/Hz.
    pub rate: f64,
    /// Rate with self-interference replaced by its bound.
    pub surrogate_rate: f64,
    pub realized: Realized,
    pub iterations: usize,
    pub converged: bool,
    pub duality_gap: f64,
    pub trace: Vec<TraceEntry>,
}

impl AllocationResult {
    /// Multiplier of the right adjacent-channel limit.
    pub fn gamma_right(&self) -> f64 {
        self.multipliers[1]
    }

    pub fn gamma_left(&self) -> f64 {
        self.multipliers[2]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,alpha")?;
        for (k, a) in self.alphas.alphas().iter().enumerate() {
            writeln!(w, "{k},{a:.12e}")?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rate,P_r,P_l,sum_alpha,iters,converged")?;
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
            self.rate, self.realized.p_r, self.realized.p_l, self.realized.sum_alpha, self.iterations, self.converged
        )
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,rate,dual_value,max_violation")?;
        for t in &self.trace {
            writeln!(w, "{},{:.12e},{:.12e},{:.12e}", t.iteration, t.rate, t.dual_value, t.max_violation)?;
        }
        Ok(())
    }
}

/// One allocation instance: receiver analytics, leakage and limits.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub kind: ReceiverKind,
    /// Required for the matched filter.
    pub kernel: Option<InterferenceKernel>,
    pub noise: NoiseBase,
    pub aci: AciCoefficients,
    pub constraints: ConstraintSet,
    pub mean_power: f64,
    pub rate_penalty: f64,
}

impl AllocationProblem {
    pub fn mf(
        kernel: InterferenceKernel,
        noise: NoiseBase,
        aci: AciCoefficients,
        constraints: ConstraintSet,
        rate_penalty: f64,
    ) -> Result<Self> {
        let p = Self {
            kind: ReceiverKind::MatchedFilter,
            mean_power: kernel.mean_power(),
            kernel: Some(kernel),
            noise,
            aci,
            constraints,
            rate_penalty,
        };
        p.check()?;
        Ok(p)
    }

    pub fn zf(
        noise: NoiseBase,
        aci: AciCoefficients,
        constraints: ConstraintSet,
        mean_power: f64,
        rate_penalty: f64,
    ) -> Result<Self> {
        let p = Self {
            kind: ReceiverKind::ZeroForcing,
            kernel: None,
            noise,
            aci,
            constraints,
            mean_power,
            rate_penalty,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let k = self.noise.subcarriers();
        if self.aci.t_right.len() != k || self.aci.t_left.len() != k {
            return Err(Error::Domain("leakage coefficients do not match the subcarrier count".into()));
        }
        if self.noise.values().iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Domain("noise terms must be finite and non-negative".into()));
        }
        if let Some(kern) = &self.kernel {
            if kern.subcarriers() != k || kern.subsymbols() != self.noise.subsymbols() {
                return Err(Error::Domain("kernel and noise table shapes differ".into()));
            }
        } else if self.kind == ReceiverKind::MatchedFilter {
            return Err(Error::Domain("matched-filter problem needs a kernel".into()));
        }
        if !(self.mean_power > 0.0 && self.rate_penalty > 0.0) {
            return Err(Error::Domain("mean power and rate penalty must be positive".into()));
        }
        Ok(())
    }

    pub fn with_constraints(&self, constraints: ConstraintSet) -> Self {
        Self {
            constraints,
            ..self.clone()
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.noise.subcarriers()
    }

    pub fn subsymbols(&self) -> usize {
        self.noise.subsymbols()
    }

    /// The bound that replaces self-interference in the objective.
    fn q_n_term(&self) -> f64 {
        match self.kind {
            ReceiverKind::MatchedFilter => self.constraints.q_n.unwrap_or(0.0),
            ReceiverKind::ZeroForcing => 0.0,
        }
    }

    /// Rate of `alloc` under the exact SINR of the receiver.
    pub fn true_rate(&self, alloc: &PowerAllocation) -> Result<f64> {
        let metrics = match (&self.kind, &self.kernel) {
            (ReceiverKind::MatchedFilter, Some(kern)) => sinr_mf(kern, alloc, &self.noise, self.rate_penalty)?,
            _ => snr_zf(alloc, &self.noise, self.mean_power, self.rate_penalty)?,
        };
        Ok(crate::link::sum_rate(&metrics))
    }

    /// Rate with the matched filter's self-interference replaced by `Q_n`.
    pub fn surrogate_rate(&self, alloc: &PowerAllocation) -> f64 {
        let q = self.q_n_term();
        let k = self.subcarriers();
        let a = alloc.alphas();
        let snr: Vec<f64> = self
            .noise
            .values()
            .iter()
            .enumerate()
            .map(|(i, c)| self.rate_penalty * self.mean_power * a[i % k] / (q + c))
            .collect();
        mean_log2_1p(&snr)
    }

    pub fn realized(&self, alloc: &PowerAllocation) -> Realized {
        let (p_r, p_l) = aci_power(&self.aci, alloc);
        let max_self_interference = self.kernel.as_ref().and_then(|kern| {
            (self.kind == ReceiverKind::MatchedFilter).then(|| {
                kern.self_interference(alloc.alphas())
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
        });
        Realized {
            sum_alpha: alloc.total(),
            p_r,
            p_l,
            max_self_interference,
        }
    }

    /// Whether `alloc` meets every constraint, each bound inflated by
    /// `1 + tol`.
    pub fn is_feasible(&self, alloc: &PowerAllocation, tol: f64) -> bool {
        let r = self.realized(alloc);
        let c = &self.constraints;
        let si_ok = match (self.kind, c.q_n, r.max_self_interference) {
            (ReceiverKind::MatchedFilter, Some(q), Some(si)) => si <= q * (1.0 + tol),
            _ => true,
        };
        r.sum_alpha <= c.alpha_max * (1.0 + tol) && r.p_r <= c.q_r * (1.0 + tol) && r.p_l <= c.q_l * (1.0 + tol) && si_ok
    }

    /// Largest constant allocation meeting every constraint.
    pub fn uniform(&self) -> Result<PowerAllocation> {
        let k = self.subcarriers();
        let c = &self.constraints;
        let sum_r: f64 = self.aci.t_right.iter().sum();
        let sum_l: f64 = self.aci.t_left.iter().sum();
        let ratio = |q: f64, s: f64| if s > 0.0 { q / s } else { f64::INFINITY };
        let mut level = (c.alpha_max / k as f64).min(ratio(c.q_r, sum_r)).min(ratio(c.q_l, sum_l));
        if let (ReceiverKind::MatchedFilter, Some(kern), Some(q_n)) = (self.kind, &self.kernel, c.q_n) {
            // The tightest symbol sets the bound.
            let worst = (0..kern.subsymbols())
                .map(|m| kern.row_sum(m) - self.mean_power)
                .fold(f64::NEG_INFINITY, f64::max);
            level = level.min(ratio(q_n, worst));
        }
        PowerAllocation::uniform(k, level)
    }

    /// Self-interference bound met with equality by the uniform allocation
    /// of the problem without a bound. Solving with this `Q_n` keeps that
    /// uniform point feasible, so the result cannot fall below it.
    pub fn uniform_q_n(&self) -> Result<Option<f64>> {
        let kern = match (self.kind, &self.kernel) {
            (ReceiverKind::MatchedFilter, Some(kern)) => kern,
            _ => return Ok(None),
        };
        let level = self.with_constraints(self.constraints.with_q_n(None)?).uniform()?.alphas()[0];
        let worst = (0..kern.subsymbols())
            .map(|m| kern.row_sum(m) - self.mean_power)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((worst > 0.0 && level > 0.0).then_some(level * worst))
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<AllocationResult> {
        Dual::new(self)?.solve(self, opts)
    }
}

/// Linear constraint c . alpha <= bound.
struct Row {
    coeffs: Vec<f64>,
    bound: f64,
    /// Index of the self-interference symbol (m', k') it stands for.
    symbol: Option<usize>,
}

struct Dual {
    weight: f64,
    alpha_max: f64,
    /// Levels of subcarrier k on every subsymbol, `levels[k][m]`.
    levels: Vec<Vec<f64>>,
    /// `level[k]` when the levels are the same on every subsymbol.
    flat: Option<Vec<f64>>,
    rows: Vec<Row>,
    /// Positions of the power, right and left rows, if present.
    fixed: [Option<usize>; 3],
}

struct Eval {
    alpha: Vec<f64>,
    objective: f64,
    value: f64,
    grad: Vec<f64>,
}

impl Dual {
    fn new(p: &AllocationProblem) -> Result<Self> {
        let k = p.subcarriers();
        let c = &p.constraints;
        let q = p.q_n_term();
        let scale = p.rate_penalty * p.mean_power;
        let levels: Vec<Vec<f64>> = (0..k)
            .map(|kk| (0..p.subsymbols()).map(|m| (q + p.noise.get(m, kk)) / scale).collect())
            .collect();
        let flat = levels
            .iter()
            .all(|l| l.iter().all(|v| (v - l[0]).abs() <= 1e-12 * l[0].abs()))
            .then(|| levels.iter().map(|l| l[0]).collect());
        if levels.iter().flatten().any(|l| !(*l > 0.0)) {
            return Err(Error::Degenerate(
                "a subcarrier sees neither noise nor an interference bound; the rate is unbounded".into(),
            ));
        }
        let mut rows = Vec::new();
        let mut fixed = [None; 3];
        let mut push = |slot: usize, coeffs: Vec<f64>, bound: f64, rows: &mut Vec<Row>| {
            if bound.is_finite() {
                fixed[slot] = Some(rows.len());
                rows.push(Row {
                    coeffs,
                    bound,
                    symbol: None,
                });
            }
        };
        push(0, vec![1.0; k], c.alpha_max, &mut rows);
        push(1, p.aci.t_right.clone(), c.q_r, &mut rows);
        push(2, p.aci.t_left.clone(), c.q_l, &mut rows);
        if let (ReceiverKind::MatchedFilter, Some(kern), Some(q_n)) = (p.kind, &p.kernel, c.q_n) {
            // Subsymbols with identical kernel rows give identical
            // constraints; keep one representative of each.
            let mut reps: Vec<usize> = Vec::new();
            for m in 0..kern.subsymbols() {
                let dup = reps.iter().any(|&r| {
                    kern.lags(r)
                        .iter()
                        .zip(kern.lags(m))
                        .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1e-300))
                });
                if !dup {
                    reps.push(m);
                }
            }
            for m in reps {
                for kp in 0..k {
                    let coeffs = (0..k)
                        .map(|kk| kern.get(m, kp, kk) - if kk == kp { p.mean_power } else { 0.0 })
                        .collect();
                    rows.push(Row {
                        coeffs,
                        bound: q_n,
                        symbol: Some(m * k + kp),
                    });
                }
            }
        }
        Ok(Self {
            weight: p.subsymbols() as f64,
            alpha_max: c.alpha_max,
            levels,
            flat,
            rows,
            fixed,
        })
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(&self.levels)
            .map(|(a, ls)| ls.iter().map(|l| (a / l).ln_1p()).sum::<f64>())
            .sum()
    }

    /// Maximizer of `sum_m ln(1 + a / l_m) - w a` on `[0, alpha_max]`.
    fn best_response(&self, k: usize, w: f64) -> f64 {
        if w <= 0.0 {
            return self.alpha_max;
        }
        if let Some(flat) = &self.flat {
            return (self.weight / w - flat[k]).clamp(0.0, self.alpha_max);
        }
        let ls = &self.levels[k];
        let marginal = |a: f64| ls.iter().map(|l| 1.0 / (l + a)).sum::<f64>();
        if marginal(0.0) <= w {
            return 0.0;
        }
        if marginal(self.alpha_max) >= w {
            return self.alpha_max;
        }
        // The marginal is convex and decreasing, so Newton steps from a
        // point left of the root stay left of it and increase monotonically.
        let l_max = ls.iter().cloned().fold(0.0, f64::max);
        let mut a = (self.weight / w - l_max).max(0.0);
        for _ in 0..200 {
            let (f, df) = ls.iter().fold((0.0, 0.0), |(f, df), l| {
                let r = 1.0 / (l + a);
                (f + r, df - r * r)
            });
            let next = a - (f - w) / df;
            if !(next > a) || next - a <= 1e-15 * next {
                break;
            }
            a = next;
        }
        a.min(self.alpha_max)
    }

    fn usage(&self, alpha: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().zip(alpha).map(|(c, a)| c * a).sum())
            .collect()
    }

    fn eval(&self, lam: &[f64]) -> Eval {
        let k = self.levels.len();
        let mut w = vec![0.0; k];
        for (row, l) in self.rows.iter().zip(lam) {
            if *l == 0.0 {
                continue;
            }
            let s = l / row.bound;
            for (wk, c) in w.iter_mut().zip(&row.coeffs) {
                *wk += s * c;
            }
        }
        let alpha: Vec<f64> = w.iter().enumerate().map(|(kk, &wk)| self.best_response(kk, wk)).collect();
        let objective = self.objective(&alpha);
        let u = self.usage(&alpha);
        let grad: Vec<f64> = u.iter().zip(&self.rows).map(|(u, r)| 1.0 - u / r.bound).collect();
        let value = objective + lam.iter().zip(&grad).map(|(l, g)| l * g).sum::<f64>();
        Eval {
            alpha,
            objective,
            value,
            grad,
        }
    }

    /// Largest common scale keeping every constraint satisfied.
    fn feasible_scale(&self, alpha: &[f64]) -> f64 {
        self.usage(alpha)
            .iter()
            .zip(&self.rows)
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, r)| r.bound / u)
            .fold(1.0, f64::min)
    }

    fn solve(&self, p: &AllocationProblem, opts: &SolverOptions) -> Result<AllocationResult> {
        if !(opts.eps > 0.0) || !(opts.gap_tol > 0.0) || !(opts.multiplier_init >= 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        let n = self.rows.len();
        let mut lam = vec![opts.multiplier_init; n];
        let mut cur = self.eval(&lam);
        let mut trace = Vec::new();
        let mut history: VecDeque<f64> = VecDeque::with_capacity(10);
        history.push_back(cur.value);
        let grad_norm = cur.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut spectral = if grad_norm > 0.0 { 1.0 / grad_norm } else { 1.0 };
        let zeta0 = match opts.step {
            StepRule::Diminishing(Some(z)) | StepRule::Constant(z) => z,
            _ => 0.1 / grad_norm.max(1e-300),
        };
        if !(zeta0 > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        let mut converged = false;
        let mut iterations = 0;
        let mut gap = f64::INFINITY;
        let mut best_primal: Option<(f64, Vec<f64>)> = None;

        for t in 1..=opts.max_iterations {
            iterations = t;
            let next = match opts.step {
                StepRule::Spectral => {
                    let d: Vec<f64> = lam
                        .iter()
                        .zip(&cur.grad)
                        .map(|(l, g)| (l - spectral * g).max(0.0) - l)
                        .collect();
                    let slope: f64 = d.iter().zip(&cur.grad).map(|(a, b)| a * b).sum();
                    let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut theta = 1.0;
                    let mut trial;
                    loop {
                        let cand: Vec<f64> = lam.iter().zip(&d).map(|(l, d)| l + theta * d).collect();
                        trial = (cand, None::<Eval>);
                        let ev = self.eval(&trial.0);
                        let accept = ev.value <= reference + 1e-4 * theta * slope || theta < 1e-10;
                        trial.1 = Some(ev);
                        if accept {
                            break;
                        }
                        theta *= 0.5;
                    }
                    let (cand, ev) = (trial.0, trial.1.expect("evaluated"));
                    let (mut ss, mut sy) = (0.0, 0.0);
                    for j in 0..n {
                        let s = cand[j] - lam[j];
                        ss += s * s;
                        sy += s * (ev.grad[j] - cur.grad[j]);
                    }
                    spectral = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1e12f64.min(spectral * 10.0) };
                    if history.len() == 10 {
                        history.pop_front();
                    }
                    history.push_back(ev.value);
                    (cand, ev)
                }
                StepRule::Diminishing(_) | StepRule::Constant(_) => {
                    let zeta = match opts.step {
                        StepRule::Constant(_) => zeta0,
                        _ => zeta0 / (t as f64).sqrt(),
                    };
                    let cand: Vec<f64> = lam.iter().zip(&cur.grad).map(|(l, g)| (l - zeta * g).max(0.0)).collect();
                    let ev = self.eval(&cand);
                    (cand, ev)
                }
            };
            let (cand, ev) = next;
            if !ev.value.is_finite() || cand.iter().any(|l| !l.is_finite() || *l > 1e15) {
                return Err(Error::Diverged(format!(
                    "multipliers left the finite range after {t} iterations"
                )));
            }
            let delta: f64 = ev.alpha.iter().zip(&cur.alpha).map(|(a, b)| (a - b).abs()).sum();
            let total: f64 = ev.alpha.iter().sum();
            lam = cand;
            cur = ev;

            let scale = self.feasible_scale(&cur.alpha);
            let primal_alpha: Vec<f64> = cur.alpha.iter().map(|a| a * scale).collect();
            let primal = self.objective(&primal_alpha);
            if best_primal.as_ref().is_none_or(|(v, _)| primal > *v) {
                best_primal = Some((primal, primal_alpha));
            }
            let best = best_primal.as_ref().map(|(v, _)| *v).unwrap_or(0.0);
            gap = (cur.value - best).max(0.0);
            if opts.record_trace {
                trace.push(TraceEntry {
                    iteration: t,
                    rate: cur.objective / (self.weight * self.levels.len() as f64 * std::f64::consts::LN_2),
                    dual_value: cur.value,
                    max_violation: cur.grad.iter().map(|g| -g).fold(f64::NEG_INFINITY, f64::max),
                });
            }
            let settled = delta <= opts.eps * total || (delta == 0.0 && total == 0.0);
            if settled && gap <= opts.gap_tol * best.abs() + 1e-15 {
                converged = true;
                break;
            }
        }

        let (_, alpha) = best_primal.unwrap_or_else(|| (0.0, vec![0.0; self.levels.len()]));
        let alphas = PowerAllocation::new(alpha)?;
        let k = self.levels.len();
        let mut multipliers = vec![0.0; 3];
        if p.kind == ReceiverKind::MatchedFilter {
            multipliers.resize(3 + k * p.subsymbols(), 0.0);
        }
        for (j, row) in self.rows.iter().enumerate() {
            let gamma = lam[j] / row.bound;
            match row.symbol {
                Some(i) => multipliers[3 + i] = gamma,
                None => {
                    let slot = self.fixed.iter().position(|f| *f == Some(j)).expect("fixed row");
                    multipliers[slot] = gamma;
                }
            }
        }
        Ok(AllocationResult {
            rate: p.true_rate(&alphas)?,
            surrogate_rate: p.surrogate_rate(&alphas),
            realized: p.realized(&alphas),
            alphas,
            multipliers,
            iterations,
            converged,
            duality_gap: gap,
            trace,
        })
    }
}

/// Matched-filter allocation with self-interference bounded by `Q_n`.
pub fn optimize_mf(
    kernel: &InterferenceKernel,
    c_mf: &NoiseBase,
    coeffs: &AciCoefficients,
    cons: &ConstraintSet,
    rate_penalty: f64,
    opts: &SolverOptions,
) -> Result<AllocationResult> {
    AllocationProblem::mf(kernel.clone(), c_mf.clone(), coeffs.clone(), *cons, rate_penalty)?.solve(opts)
}

/// Zero-forcing allocation.
pub fn optimize_zf(
    c_zf: &NoiseBase,
    coeffs: &AciCoefficients,
    cons: &ConstraintSet,
    mean_power: f64,
    rate_penalty: f64,
    opts: &SolverOptions,
) -> Result<AllocationResult> {
    AllocationProblem::zf(c_zf.clone(), coeffs.clone(), *cons, mean_power, rate_penalty)?.solve(opts)
}

/// Largest uniform matched-filter allocation meeting every constraint.
pub fn uniform_alloc_mf(kernel: &InterferenceKernel, coeffs: &AciCoefficients, cons: &ConstraintSet) -> Result<PowerAllocation> {
    let noise = NoiseBase::from_values(kernel.subcarriers(), vec![1.0; kernel.subcarriers() * kernel.subsymbols()])?;
    AllocationProblem::mf(kernel.clone(), noise, coeffs.clone(), *cons, 1.0)?.uniform()
}

/// Largest uniform allocation meeting the power and leakage limits.
pub fn uniform_alloc_zf(coeffs: &AciCoefficients, cons: &ConstraintSet) -> Result<PowerAllocation> {
    let k = coeffs.len();
    let noise = NoiseBase::from_values(k, vec![1.0; k])?;
    AllocationProblem::zf(noise, coeffs.clone(), *cons, 1.0, 1.0)?.uniform()
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub q_n: f64,
    pub result: std::result::Result<AllocationResult, String>,
}

impl SweepPoint {
    pub fn rate(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.rate)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best_q_n: f64,
    pub best: AllocationResult,
    pub curve: Vec<SweepPoint>,
}

/// Solves the matched-filter problem for every `Q_n` in `grid` and keeps the
/// one with the highest true rate.
pub fn sweep_qn(problem: &AllocationProblem, grid: &[f64], opts: &SolverOptions) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Domain("Q_n grid is empty".into()));
    }
    let curve: Vec<SweepPoint> = grid
        .iter()
        .map(|&q| {
            let result = problem
                .constraints
                .with_q_n(Some(q))
                .and_then(|c| problem.with_constraints(c).solve(opts))
                .map_err(|e| e.to_string());
            SweepPoint { q_n: q, result }
        })
        .collect();
    let best = curve
        .iter()
        .filter_map(|p| p.result.as_ref().ok().map(|r| (p.q_n, r)))
        .max_by(|a, b| a.1.rate.total_cmp(&b.1.rate))
        .ok_or_else(|| Error::Diverged("no Q_n in the grid produced a solution".into()))?;
    Ok(SweepResult {
        best_q_n: best.0,
        best: best.1.clone(),
        curve,
    })
}

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Exhaustive search over alpha in {0, d, 2d, ...}^K with sum alpha <=
/// alpha_max and d = alpha_max / `steps`, maximizing the true rate.
pub fn oracle_grid_search(problem: &AllocationProblem, steps: usize) -> Result<AllocationResult> {
    const MAX_POINTS: f64 = 5e7;
    let k = problem.subcarriers();
    if k > 6 {
        return Err(Error::TooLarge(format!("{k} subcarriers, the grid oracle handles at most 6")));
    }
    // Number of compositions: C(steps + K, K).
    let count = (1..=k).fold(1.0, |acc, i| acc * (steps + i) as f64 / i as f64);
    if count > MAX_POINTS {
        return Err(Error::TooLarge(format!("{count:.0} grid points")));
    }
    let d = problem.constraints.alpha_max / steps as f64;
    let mut idx = vec![0usize; k];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let alpha: Vec<f64> = idx.iter().map(|&i| i as f64 * d).collect();
        let alloc = PowerAllocation::new(alpha)?;
        if problem.is_feasible(&alloc, 1e-12) {
            let rate = if alloc.total() == 0.0 { 0.0 } else { problem.true_rate(&alloc)? };
            if best.as_ref().is_none_or(|(r, _)| rate > *r) {
                best = Some((rate, alloc.alphas().to_vec()));
            }
        }
        // Odometer over compositions with sum <= steps.
        let mut pos = 0;
        loop {
            if pos == k {
                break;
            }
            idx[pos] += 1;
            if idx.iter().sum::<usize>() <= steps {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == k {
            break;
        }
    }
    let (rate, alpha) = best.expect("the zero allocation is always feasible");
    let alphas = PowerAllocation::new(alpha)?;
    Ok(AllocationResult {
        rate,
        surrogate_rate: problem.surrogate_rate(&alphas),
        realized: problem.realized(&alphas),
        alphas,
        multipliers: vec![0.0; 3],
        iterations: count as usize,
        converged: true,
        duality_gap: 0.0,
        trace: Vec::new(),
    })
}
