//! Bounded Nelder-Mead search over a simulation-in-the-loop objective.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    Invalid(String),
    #[error("evaluator failed at {params:?}: {message}")]
    EvaluatorFailure { params: Vec<f64>, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

/// Residual is `(computed - value) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub value: f64,
    pub weight: f64,
    pub scale: f64,
}

impl Target {
    /// Scale defaults to |value|, or 1 for a zero target.
    pub fn new(name: &str, value: f64, weight: f64) -> Self {
        let scale = if value != 0.0 { value.abs() } else { 1.0 };
        Self { name: name.into(), value, weight, scale }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub params: Vec<FreeParameter>,
    pub targets: Vec<Target>,
    pub max_evals: usize,
    /// Objective spread at which a simplex counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl FitProblem {
    pub fn check(&self) -> Result<(), FitError> {
        if self.params.is_empty() {
            return Err(FitError::Invalid("no free parameters".into()));
        }
        for p in &self.params {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(FitError::Invalid(format!("bounds of `{}` must be finite with lower < upper", p.name)));
            }
            if !(p.lower..=p.upper).contains(&p.initial) {
                return Err(FitError::Invalid(format!("initial value of `{}` outside its bounds", p.name)));
            }
        }
        if self.targets.is_empty() {
            return Err(FitError::Invalid("no targets".into()));
        }
        for t in &self.targets {
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(FitError::Invalid(format!("weight of `{}` must be >= 0", t.name)));
            }
            if !(t.scale > 0.0 && t.scale.is_finite() && t.value.is_finite()) {
                return Err(FitError::Invalid(format!("target `{}` needs a finite value and positive scale", t.name)));
            }
        }
        if self.targets.iter().all(|t| t.weight == 0.0) {
            return Err(FitError::Invalid("all target weights are zero".into()));
        }
        if !(self.tol > 0.0) || self.max_evals == 0 {
            return Err(FitError::Invalid("need tol > 0 and max_evals > 0".into()));
        }
        Ok(())
    }

    pub fn residuals(&self, values: &[f64]) -> Vec<f64> {
        self.targets.iter().zip(values).map(|(t, v)| (v - t.value) / t.scale).collect()
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        let r = self.residuals(values);
        let s: f64 = self.targets.iter().zip(&r).map(|(t, r)| t.weight * r * r).sum();
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
    pub restarts: usize,
    pub log: Vec<EvalRecord>,
}

struct Search<'a, F> {
    problem: &'a FitProblem,
    evaluator: F,
    log: Vec<EvalRecord>,
}

enum Stop {
    Budget,
    Failed(FitError),
}

impl<F> Search<'_, F>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, String>,
{
    fn to_params(&self, z: &[f64]) -> Vec<f64> {
        self.problem
            .params
            .iter()
            .zip(z)
            .map(|(p, &zi)| p.lower + zi.clamp(0.0, 1.0) * (p.upper - p.lower))
            .collect()
    }

    fn eval(&mut self, z: &[f64]) -> Result<f64, Stop> {
        if self.log.len() >= self.problem.max_evals {
            return Err(Stop::Budget);
        }
        let params = self.to_params(z);
        let values = (self.evaluator)(&params)
            .map_err(|message| Stop::Failed(FitError::EvaluatorFailure { params: params.clone(), message }))?;
        if values.len() != self.problem.targets.len() {
            return Err(Stop::Failed(FitError::EvaluatorFailure {
                params,
                message: format!("expected {} values, got {}", self.problem.targets.len(), values.len()),
            }));
        }
        let objective = self.problem.objective(&values);
        self.log.push(EvalRecord { params, values, objective });
        Ok(objective)
    }

    /// One Nelder-Mead run in the unit box from the given simplex.
    fn run(&mut self, mut simplex: Vec<Vec<f64>>, mut fs: Vec<f64>, xtol: f64) -> Result<(), Stop> {
        let n = simplex[0].len();
        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]).then(a.cmp(&b)));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if fs[n] - fs[0] <= self.problem.tol && size <= xtol {
                return Ok(());
            }
            let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                (0..n).map(|j| (centroid[j] + t * (simplex[n][j] - centroid[j])).clamp(0.0, 1.0)).collect()
            };
            let xr = along(-1.0);
            let fr = self.eval(&xr)?;
            if fr < fs[0] {
                let xe = along(-2.0);
                let fe = self.eval(&xe)?;
                if fe < fr {
                    simplex[n] = xe;
                    fs[n] = fe;
                } else {
                    simplex[n] = xr;
                    fs[n] = fr;
                }
                continue;
            }
            if fr < fs[n - 1] {
                simplex[n] = xr;
                fs[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < fs[n] {
                let x = along(-0.5);
                let f = self.eval(&x)?;
                (x, f)
            } else {
                let x = along(0.5);
                let f = self.eval(&x)?;
                (x, f)
            };
            if fc < fs[n].min(fr) {
                simplex[n] = xc;
                fs[n] = fc;
                continue;
            }
            for i in 1..=n {
                let x: Vec<f64> = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                fs[i] = self.eval(&x)?;
                simplex[i] = x;
            }
        }
    }
}

fn best(log: &[EvalRecord]) -> Option<&EvalRecord> {
    log.iter().reduce(|a, b| if b.objective < a.objective { b } else { a })
}

/// Minimise the weighted squared residuals. The first evaluation is the
/// initial point, so the returned objective never exceeds it. Restarts
/// build a fresh simplex around the incumbent with seeded random step
/// signs until a restart stops improving.
pub fn fit_parameters<F>(problem: &FitProblem, evaluator: F) -> Result<FitReport, FitError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, String>,
{
    problem.check()?;
    let n = problem.params.len();
    let xtol = problem.tol.sqrt().max(1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut search = Search { problem, evaluator, log: Vec::new() };
    let z0: Vec<f64> = problem.params.iter().map(|p| (p.initial - p.lower) / (p.upper - p.lower)).collect();

    const MAX_RESTARTS: usize = 4;
    let mut restarts = 0;
    let mut step = 0.1;
    let mut outcome: Result<(), Stop> = Ok(());
    let mut start = z0.clone();
    let mut signs = vec![1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut prev_best = f64::INFINITY;
    loop {
        let mut simplex = vec![start.clone()];
        for (k, &j) in order.iter().enumerate() {
            let mut v = start.clone();
            let mut d = signs[k] * step;
            if !(0.0..=1.0).contains(&(v[j] + d)) {
                d = -d;
            }
            v[j] = (v[j] + d).clamp(0.0, 1.0);
            simplex.push(v);
        }
        let mut fs = Vec::with_capacity(n + 1);
        for v in &simplex {
            match search.eval(v) {
                Ok(f) => fs.push(f),
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        if outcome.is_ok() {
            outcome = search.run(simplex, fs, xtol);
        }
        if outcome.is_err() {
            break;
        }
        let b = best(&search.log).map(|r| r.objective).unwrap_or(f64::INFINITY);
        if restarts >= MAX_RESTARTS || prev_best - b <= problem.tol {
            break;
        }
        prev_best = b;
        restarts += 1;
        step *= 0.5;
        let incumbent = best(&search.log).map(|r| r.params.clone()).unwrap_or_default();
        start = problem
            .params
            .iter()
            .zip(&incumbent)
            .map(|(p, x)| (x - p.lower) / (p.upper - p.lower))
            .collect();
        signs = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        order.shuffle(&mut rng);
    }

    let converged = match outcome {
        Ok(()) => true,
        Err(Stop::Budget) => false,
        Err(Stop::Failed(e)) => return Err(e),
    };
    let initial_objective = search.log.first().map_or(f64::INFINITY, |r| r.objective);
    let b = best(&search.log).cloned().ok_or_else(|| FitError::Invalid("no evaluations performed".into()))?;
    Ok(FitReport {
        residuals: problem.residuals(&b.values),
        params: b.params,
        values: b.values,
        objective: b.objective,
        initial_objective,
        converged,
        restarts,
        log: search.log,
    })
}
