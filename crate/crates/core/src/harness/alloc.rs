//! Allocation experiments: capacity against the interference limit, realized
//! interference, and the matched filter's self-interference bound.

use rayon::prelude::*;

use crate::allocator::{geometric_grid, sweep_qn, AllocationProblem, AllocationResult, ConstraintSet};
use crate::channel::exponential_pdp;
use crate::config::GfdmConfig;
use crate::error::{Error, Result};
use crate::link::{InterferenceKernel, NoiseBase, ReceiverSpectra};
use crate::num::watts_to_dbm;
use crate::seed::{self, stream};
use crate::spectrum::{draw_pu_gains, AciCoefficients, AciModel};
use crate::waveform::{ModulationMatrix, PowerAllocation, PrototypeFilter, ReceiverKind, ReceiverMatrix};

use super::config::table_qn;
use super::table::{mean_se, ResultTable, RunOutput};
use super::{draw_shared_channel, ExperimentConfig, QnMode, Scenario};

/// Realized interference may exceed its limit by this much before a run
/// fails.
pub const INTERFERENCE_SLACK_DB: f64 = 0.2;

/// Relative bound inflation accepted by the feasibility check.
const FEASIBILITY_TOL: f64 = 1e-6;

const SCHEMES: [&str; 3] = ["gfdm_mf", "gfdm_zf", "ofdm"];

/// Channel-independent pieces shared by every realization.
struct Setup {
    gfdm: GfdmConfig,
    ofdm: GfdmConfig,
    kernel: InterferenceKernel,
    mf: ReceiverSpectra,
    zf: ReceiverSpectra,
    ofdm_rx: ReceiverSpectra,
    aci_gfdm: AciModel,
    aci_ofdm: AciModel,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let gfdm = config.waveform.clone();
        let ofdm = config.ofdm();
        let spectra = |cfg: &GfdmConfig, kind: ReceiverKind| -> Result<ReceiverSpectra> {
            let f = PrototypeFilter::<f64>::build(cfg)?;
            let a = ModulationMatrix::build(cfg, &f)?;
            Ok(ReceiverSpectra::new(&ReceiverMatrix::build(&a, kind)?))
        };
        let filter = PrototypeFilter::<f64>::build(&gfdm)?;
        Ok(Self {
            kernel: InterferenceKernel::matched(&filter, gfdm.subcarriers, gfdm.subsymbols, gfdm.mean_symbol_power())?,
            mf: spectra(&gfdm, ReceiverKind::MatchedFilter)?,
            zf: spectra(&gfdm, ReceiverKind::ZeroForcing)?,
            ofdm_rx: spectra(&ofdm, ReceiverKind::ZeroForcing)?,
            aci_gfdm: AciModel::new(&gfdm)?,
            aci_ofdm: AciModel::new(&ofdm)?,
            gfdm,
            ofdm,
        })
    }
}

/// Everything random about one realization, reduced to what the solvers
/// need.
struct Scene {
    c_mf: NoiseBase,
    c_zf: NoiseBase,
    c_ofdm: NoiseBase,
    aci_gfdm: AciCoefficients,
    aci_ofdm: AciCoefficients,
}

fn scene(setup: &Setup, config: &ExperimentConfig, r: usize) -> Result<Scene> {
    let mut rng = seed::derive_rng(config.seed, stream::SU_CHANNEL, r as u64);
    let lens = [setup.gfdm.frame_len(), setup.ofdm.frame_len()];
    let (ch, _) = draw_shared_channel(config.channel_taps, &lens, &mut rng)?;
    let gains = draw_pu_gains(
        &exponential_pdp(config.channel_taps),
        setup.gfdm.subcarriers,
        seed::derive(config.seed, stream::PU_GAINS, r as u64),
    )?;
    Ok(Scene {
        c_mf: setup.mf.noise_base(&ch[0], config.n0)?,
        c_zf: setup.zf.noise_base(&ch[0], config.n0)?,
        c_ofdm: setup.ofdm_rx.noise_base(&ch[1], config.n0)?,
        aci_gfdm: setup.aci_gfdm.coefficients(&gains)?,
        aci_ofdm: setup.aci_ofdm.coefficients(&gains)?,
    })
}

/// One solved or closed-form allocation.
#[derive(Debug, Clone)]
struct Outcome {
    realization: usize,
    q_dbm: f64,
    scheme: &'static str,
    uniform: bool,
    rate: f64,
    sum_alpha: f64,
    p_r: f64,
    p_l: f64,
    gamma_r: f64,
    gamma_l: f64,
    q_n: f64,
    iterations: usize,
    converged: bool,
}

struct Checks {
    violations: Vec<String>,
}

impl Checks {
    fn solved(&mut self, p: &AllocationProblem, res: &AllocationResult, what: &str) {
        if !p.is_feasible(&res.alphas, FEASIBILITY_TOL) {
            self.violations.push(format!("{what}: allocation breaks a constraint"));
        }
        if p.kind == ReceiverKind::MatchedFilter && res.rate < res.surrogate_rate - 1e-9 {
            self.violations.push(format!(
                "{what}: true rate {} below the bounded-interference rate {}",
                res.rate, res.surrogate_rate
            ));
        }
    }
}

fn outcome_solved(r: usize, q: f64, scheme: &'static str, res: &AllocationResult, q_n: f64) -> Outcome {
    Outcome {
        realization: r,
        q_dbm: q,
        scheme,
        uniform: false,
        rate: res.rate,
        sum_alpha: res.realized.sum_alpha,
        p_r: res.realized.p_r,
        p_l: res.realized.p_l,
        gamma_r: res.gamma_right(),
        gamma_l: res.gamma_left(),
        q_n,
        iterations: res.iterations,
        converged: res.converged,
    }
}

fn outcome_uniform(r: usize, q: f64, scheme: &'static str, p: &AllocationProblem, q_n: f64) -> Result<Outcome> {
    let alloc: PowerAllocation = p.uniform()?;
    let real = p.realized(&alloc);
    Ok(Outcome {
        realization: r,
        q_dbm: q,
        scheme,
        uniform: true,
        rate: p.true_rate(&alloc)?,
        sum_alpha: real.sum_alpha,
        p_r: real.p_r,
        p_l: real.p_l,
        gamma_r: f64::NAN,
        gamma_l: f64::NAN,
        q_n,
        iterations: 0,
        converged: true,
    })
}

/// Solves every scheme at every constraint level of one realization.
fn solve_realization(setup: &Setup, config: &ExperimentConfig, r: usize) -> Result<(Vec<Outcome>, Vec<String>)> {
    let sc = scene(setup, config, r)?;
    let opts = &config.solver;
    let p_s = setup.gfdm.mean_symbol_power();
    let mut out = Vec::new();
    let mut checks = Checks { violations: Vec::new() };
    for &q in &config.q_grid_dbm {
        let cons = ConstraintSet::from_dbm(config.alpha_max_dbm, q, q, None)?;
        let tag = |s: &str| format!("realization {r}, {q} dBm, {s}");

        let mf = AllocationProblem::mf(setup.kernel.clone(), sc.c_mf.clone(), sc.aci_gfdm.clone(), cons, setup.gfdm.rate_penalty())?;
        let fixed_qn = match config.qn {
            QnMode::Sweep => None,
            QnMode::Table => Some(table_qn(setup.gfdm.subsymbols, q)?),
            QnMode::Fixed(v) => Some(v),
        };
        match fixed_qn {
            None => {
                let (lo, hi, n) = config.qn_search;
                let (res, q_n, problem) = match mf.uniform_q_n()? {
                    Some(qu) => {
                        // The search starts at the bound the uniform point
                        // meets with equality, so it cannot end below it.
                        let grid: Vec<f64> = geometric_grid(lo, hi, n).iter().map(|g| g * qu).collect();
                        let sw = sweep_qn(&mf, &grid, opts)?;
                        let p = mf.with_constraints(cons.with_q_n(Some(sw.best_q_n))?);
                        (sw.best, sw.best_q_n, p)
                    }
                    None => (mf.solve(opts)?, f64::INFINITY, mf.clone()),
                };
                checks.solved(&problem, &res, &tag("gfdm_mf"));
                out.push(outcome_solved(r, q, "gfdm_mf", &res, q_n));
                out.push(outcome_uniform(r, q, "gfdm_mf", &mf, f64::INFINITY)?);
            }
            Some(q_n) => {
                let p = mf.with_constraints(cons.with_q_n(Some(q_n))?);
                let res = p.solve(opts)?;
                checks.solved(&p, &res, &tag("gfdm_mf"));
                out.push(outcome_solved(r, q, "gfdm_mf", &res, q_n));
                out.push(outcome_uniform(r, q, "gfdm_mf", &p, q_n)?);
            }
        }

        let zf = AllocationProblem::zf(sc.c_zf.clone(), sc.aci_gfdm.clone(), cons, p_s, setup.gfdm.rate_penalty())?;
        let res = zf.solve(opts)?;
        checks.solved(&zf, &res, &tag("gfdm_zf"));
        out.push(outcome_solved(r, q, "gfdm_zf", &res, f64::NAN));
        out.push(outcome_uniform(r, q, "gfdm_zf", &zf, f64::NAN)?);

        let of = AllocationProblem::zf(
            sc.c_ofdm.clone(),
            sc.aci_ofdm.clone(),
            cons,
            setup.ofdm.mean_symbol_power(),
            setup.ofdm.rate_penalty(),
        )?;
        let res = of.solve(opts)?;
        checks.solved(&of, &res, &tag("ofdm"));
        out.push(outcome_solved(r, q, "ofdm", &res, f64::NAN));
        out.push(outcome_uniform(r, q, "ofdm", &of, f64::NAN)?);
    }
    Ok((out, checks.violations))
}

fn solve_all(config: &ExperimentConfig, out: &mut RunOutput) -> Result<Vec<Outcome>> {
    config.validate()?;
    let setup = Setup::new(config)?;
    let n = config.realization_count();
    out.seeds.push(("su_channel.first".into(), seed::derive(config.seed, stream::SU_CHANNEL, 0)));
    out.seeds.push(("pu_gains.first".into(), seed::derive(config.seed, stream::PU_GAINS, 0)));
    let per = (0..n)
        .into_par_iter()
        .map(|r| solve_realization(&setup, config, r))
        .collect::<Result<Vec<_>>>()?;
    let mut all = Vec::new();
    for (rows, violations) in per {
        out.violations.extend(violations);
        all.extend(rows);
    }
    out.nonconverged += all.iter().filter(|o| !o.converged).count();
    Ok(all)
}

fn allocation_label(uniform: bool) -> &'static str {
    if uniform {
        "uniform"
    } else {
        "optimized"
    }
}

fn realization_table(name: &str, rows: &[Outcome]) -> ResultTable {
    let mut t = ResultTable::new(
        name,
        &[
            "realization",
            "q_dbm",
            "scheme",
            "allocation",
            "rate",
            "sum_alpha_dbm",
            "p_r_dbm",
            "p_l_dbm",
            "gamma_r",
            "gamma_l",
            "q_n",
            "iterations",
            "converged",
        ],
    );
    for o in rows {
        t.push(vec![
            o.realization.into(),
            o.q_dbm.into(),
            o.scheme.into(),
            allocation_label(o.uniform).into(),
            o.rate.into(),
            watts_to_dbm(o.sum_alpha).into(),
            watts_to_dbm(o.p_r).into(),
            watts_to_dbm(o.p_l).into(),
            o.gamma_r.into(),
            o.gamma_l.into(),
            o.q_n.into(),
            o.iterations.into(),
            o.converged.into(),
        ]);
    }
    t
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Uniform and optimized allocations for GFDM with both receivers and for
/// OFDM at every `Q_r = Q_l` level, averaged over the realizations.
/// Powers are averaged in watts before conversion to dBm.
pub fn run_capacity(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(Scenario::Capacity, config.seed);
    let all = solve_all(config, &mut out)?;
    capacity_tables(config, &all, &mut out);
    Ok(out)
}

/// Realized right-side interference of the optimized allocations against
/// the limit. Any realization exceeding its limit by more than
/// [`INTERFERENCE_SLACK_DB`] is recorded as a violation.
pub fn run_interference(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(Scenario::Interference, config.seed);
    let all = solve_all(config, &mut out)?;
    interference_tables(config, &all, &mut out);
    Ok(out)
}

/// Both of the above from a single pass over the realizations, for callers
/// that want capacity and interference together. Each output equals what
/// its own scenario would produce.
pub fn run_capacity_and_interference(config: &ExperimentConfig) -> Result<(RunOutput, RunOutput)> {
    let mut cap = RunOutput::new(Scenario::Capacity, config.seed);
    let all = solve_all(config, &mut cap)?;
    let mut inter = RunOutput::new(Scenario::Interference, config.seed);
    inter.seeds = cap.seeds.clone();
    inter.violations = cap.violations.clone();
    inter.nonconverged = cap.nonconverged;
    capacity_tables(config, &all, &mut cap);
    interference_tables(config, &all, &mut inter);
    Ok((cap, inter))
}

fn capacity_tables(config: &ExperimentConfig, all: &[Outcome], out: &mut RunOutput) {
    let mut t = ResultTable::new(
        "capacity",
        &[
            "q_dbm",
            "scheme",
            "allocation",
            "rate_mean",
            "rate_std_err",
            "sum_alpha_dbm",
            "p_r_dbm",
            "p_l_dbm",
            "n",
            "nonconverged",
        ],
    );
    for &q in &config.q_grid_dbm {
        for scheme in SCHEMES {
            for uniform in [false, true] {
                let sel: Vec<&Outcome> = all
                    .iter()
                    .filter(|o| o.q_dbm == q && o.scheme == scheme && o.uniform == uniform)
                    .collect();
                let rates: Vec<f64> = sel.iter().map(|o| o.rate).collect();
                let (m, se) = mean_se(&rates);
                t.push(vec![
                    q.into(),
                    scheme.into(),
                    allocation_label(uniform).into(),
                    m.into(),
                    se.into(),
                    watts_to_dbm(mean(sel.iter().map(|o| o.sum_alpha))).into(),
                    watts_to_dbm(mean(sel.iter().map(|o| o.p_r))).into(),
                    watts_to_dbm(mean(sel.iter().map(|o| o.p_l))).into(),
                    sel.len().into(),
                    sel.iter().filter(|o| !o.converged).count().into(),
                ]);
            }
        }
    }
    out.tables.push(t);
    out.tables.push(realization_table("capacity_realizations", all));
}

fn interference_tables(config: &ExperimentConfig, all: &[Outcome], out: &mut RunOutput) {
    let all: Vec<&Outcome> = all.iter().filter(|o| !o.uniform).collect();
    let mut t = ResultTable::new(
        "interference",
        &[
            "q_dbm",
            "scheme",
            "p_r_dbm",
            "p_r_dbm_min",
            "p_r_dbm_max",
            "p_l_dbm",
            "max_excess_db",
            "binding",
            "n",
        ],
    );
    for &q in &config.q_grid_dbm {
        for scheme in SCHEMES {
            let sel: Vec<&Outcome> = all.iter().copied().filter(|o| o.q_dbm == q && o.scheme == scheme).collect();
            let dbm: Vec<f64> = sel.iter().map(|o| watts_to_dbm(o.p_r)).collect();
            let excess = dbm.iter().map(|d| d - q).fold(f64::NEG_INFINITY, f64::max);
            for (o, d) in sel.iter().zip(&dbm) {
                if d - q > INTERFERENCE_SLACK_DB {
                    out.violations.push(format!(
                        "realization {}, {scheme}: P_r = {d:.3} dBm exceeds Q_r = {q} dBm",
                        o.realization
                    ));
                }
            }
            t.push(vec![
                q.into(),
                scheme.into(),
                watts_to_dbm(mean(sel.iter().map(|o| o.p_r))).into(),
                dbm.iter().cloned().fold(f64::INFINITY, f64::min).into(),
                dbm.iter().cloned().fold(f64::NEG_INFINITY, f64::max).into(),
                watts_to_dbm(mean(sel.iter().map(|o| o.p_l))).into(),
                excess.into(),
                sel.iter().filter(|o| o.gamma_r > 0.0).count().into(),
                sel.len().into(),
            ]);
        }
    }
    out.tables.push(t);
    let rows: Vec<Outcome> = all.into_iter().cloned().collect();
    out.tables.push(realization_table("interference_realizations", &rows));
}

/// Matched-filter rate against the self-interference bound at
/// `Q_r = Q_l = sweep_q_dbm`, one curve per realization.
pub fn run_sweep_qn(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = RunOutput::new(Scenario::SweepQn, config.seed);
    let setup = Setup::new(config)?;
    out.seeds.push(("su_channel.first".into(), seed::derive(config.seed, stream::SU_CHANNEL, 0)));
    out.seeds.push(("pu_gains.first".into(), seed::derive(config.seed, stream::PU_GAINS, 0)));
    let grid = &config.qn_grid;
    let cons = ConstraintSet::from_dbm(config.alpha_max_dbm, config.sweep_q_dbm, config.sweep_q_dbm, None)?;
    let curves = (0..config.realization_count())
        .into_par_iter()
        .map(|r| {
            let sc = scene(&setup, config, r)?;
            let mf = AllocationProblem::mf(setup.kernel.clone(), sc.c_mf, sc.aci_gfdm, cons, setup.gfdm.rate_penalty())?;
            sweep_qn(&mf, grid, &config.solver)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = ResultTable::new("sweep_qn_realizations", &["realization", "q_n", "rate", "converged"]);
    let mut best = ResultTable::new(
        "sweep_qn_best",
        &["realization", "best_q_n", "best_rate", "first_rate", "last_rate", "interior"],
    );
    for (r, sw) in curves.iter().enumerate() {
        for p in &sw.curve {
            let conv = p.result.as_ref().map(|x| x.converged).unwrap_or(false);
            out.nonconverged += usize::from(!conv);
            points.push(vec![r.into(), p.q_n.into(), p.rate().unwrap_or(f64::NAN).into(), conv.into()]);
        }
        let first = sw.curve.first().and_then(|p| p.rate()).unwrap_or(f64::NAN);
        let last = sw.curve.last().and_then(|p| p.rate()).unwrap_or(f64::NAN);
        let interior = sw.best.rate > first && sw.best.rate > last;
        best.push(vec![
            r.into(),
            sw.best_q_n.into(),
            sw.best.rate.into(),
            first.into(),
            last.into(),
            interior.into(),
        ]);
    }
    let mut mean_curve = ResultTable::new("sweep_qn", &["q_n", "rate_mean", "rate_std_err", "n"]);
    for (i, &q) in grid.iter().enumerate() {
        let rates: Vec<f64> = curves.iter().filter_map(|sw| sw.curve[i].rate()).collect();
        if rates.is_empty() {
            return Err(Error::Diverged(format!("no realization solved Q_n = {q}")));
        }
        let (m, se) = mean_se(&rates);
        mean_curve.push(vec![q.into(), m.into(), se.into(), rates.len().into()]);
    }
    out.tables.push(mean_curve);
    out.tables.push(points);
    out.tables.push(best);
    Ok(out)
}
