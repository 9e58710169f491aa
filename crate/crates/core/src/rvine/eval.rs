//! Log-mass evaluation of discrete vines by propagating (F, F⁻) pairs
//! through the trees, plus an incremental evaluator for single-coordinate
//! changes and the continuous-density path.

use crate::bicop::BicopModel;
use crate::marginals::PitPair;

use super::structure::{Input, RVineStructure};

/// Stand-in for log 0, strictly below every finite log-mass.
pub const LOG_ZERO_SENTINEL: f64 = -1e300;

/// Evaluation order and input wiring of a vine's edges.
#[derive(Debug, Clone)]
pub(crate) struct EvalPlan {
    pub(crate) m: usize,
    pub(crate) inputs: Vec<[Input; 2]>,
    pub(crate) models: Vec<BicopModel>,
    /// Flat indices of the edges whose inputs depend on each variable, in
    /// evaluation order.
    pub(crate) affected: Vec<Vec<usize>>,
}

impl EvalPlan {
    pub(crate) fn new(structure: &RVineStructure, pair_models: &[Vec<BicopModel>]) -> Self {
        let inputs = structure.inputs();
        let models: Vec<BicopModel> = pair_models.iter().flatten().copied().collect();
        debug_assert_eq!(inputs.len(), models.len());
        let mut affected = vec![Vec::new(); structure.m()];
        for (e, edge) in structure.trees().iter().flatten().enumerate() {
            for v in edge.union() {
                affected[v].push(e);
            }
        }
        Self {
            m: structure.m(),
            inputs,
            models,
            affected,
        }
    }

    fn n_edges(&self) -> usize {
        self.inputs.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgeState {
    /// Side 0: (F(a | D,b), F(a⁻ | D,b)); side 1: (F(b | D,a), F(b⁻ | D,a)).
    out: [(f64, f64); 2],
    /// log of mass / (fa · fb); `NEG_INFINITY` when the mass vanishes.
    contrib: f64,
}

const ZERO_STATE: EdgeState = EdgeState {
    out: [(0.0, 0.0); 2],
    contrib: 0.0,
};

fn eval_edge(model: &BicopModel, a: (f64, f64), b: (f64, f64)) -> EdgeState {
    let fa = a.0 - a.1;
    let fb = b.0 - b.1;
    if !(fa > 0.0 && fb > 0.0) {
        return EdgeState {
            out: [a, b],
            contrib: f64::NEG_INFINITY,
        };
    }
    if model.is_independence() {
        return EdgeState {
            out: [a, b],
            contrib: 0.0,
        };
    }
    let [c11, c01, c10, c00] = model.cdf_box(a.0, a.1, b.0, b.1);
    let mass = c11 - c01 - c10 + c00;
    let contrib = if mass > 0.0 {
        mass.ln() - fa.ln() - fb.ln()
    } else {
        f64::NEG_INFINITY
    };
    let q = |x: f64, d: f64| (x / d).clamp(0.0, 1.0);
    EdgeState {
        out: [(q(c11 - c10, fb), q(c01 - c00, fb)), (q(c11 - c01, fa), q(c10 - c00, fa))],
        contrib,
    }
}

fn log_mass(p: (f64, f64)) -> f64 {
    let d = p.0 - p.1;
    if d > 0.0 {
        d.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Finite part of a log-sum plus the number of −∞ terms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Delta {
    pub zeros: isize,
    pub sum: f64,
}

impl Delta {
    fn swap_term(&mut self, old: f64, new: f64) {
        if old.is_finite() {
            self.sum -= old;
        } else {
            self.zeros -= 1;
        }
        if new.is_finite() {
            self.sum += new;
        } else {
            self.zeros += 1;
        }
    }
}

/// Log-mass of one m-vector of PIT pairs with cheap re-evaluation after a
/// single coordinate changes.
pub struct VineEvaluator<'a> {
    plan: &'a EvalPlan,
    pits: Vec<(f64, f64)>,
    marg: Vec<f64>,
    state: Vec<EdgeState>,
    scratch: Vec<EdgeState>,
    stamp: Vec<u32>,
    epoch: u32,
    sum: f64,
    zeros: isize,
}

impl<'a> VineEvaluator<'a> {
    pub(crate) fn new(plan: &'a EvalPlan) -> Self {
        let e = plan.n_edges();
        Self {
            plan,
            pits: vec![(1.0, 0.0); plan.m],
            marg: vec![0.0; plan.m],
            state: vec![ZERO_STATE; e],
            scratch: vec![ZERO_STATE; e],
            stamp: vec![0; e],
            epoch: 0,
            sum: 0.0,
            zeros: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.plan.m
    }

    /// Full evaluation at `pits`.
    pub fn reset(&mut self, pits: &[PitPair]) {
        assert_eq!(pits.len(), self.plan.m, "evaluator dimension mismatch");
        let mut acc = Delta::default();
        for (i, p) in pits.iter().enumerate() {
            self.pits[i] = (p.u, p.u_minus);
            self.marg[i] = log_mass(self.pits[i]);
            acc.swap_term(0.0, self.marg[i]);
        }
        for e in 0..self.plan.n_edges() {
            let [ia, ib] = self.plan.inputs[e];
            let a = self.resolve(ia, None);
            let b = self.resolve(ib, None);
            self.state[e] = eval_edge(&self.plan.models[e], a, b);
            acc.swap_term(0.0, self.state[e].contrib);
        }
        self.sum = acc.sum;
        self.zeros = acc.zeros;
    }

    fn resolve(&self, input: Input, change: Option<(usize, (f64, f64))>) -> (f64, f64) {
        match input {
            Input::Var(v) => match change {
                Some((cv, p)) if cv == v => p,
                _ => self.pits[v],
            },
            Input::Edge(i, side) => {
                if change.is_some() && self.stamp[i] == self.epoch {
                    self.scratch[i].out[side]
                } else {
                    self.state[i].out[side]
                }
            }
        }
    }

    /// Log-mass, or [`LOG_ZERO_SENTINEL`] if any factor vanishes.
    pub fn value(&self) -> f64 {
        if self.zeros > 0 {
            LOG_ZERO_SENTINEL
        } else {
            self.sum
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zeros > 0
    }

    /// Finite running sum (ignoring vanished factors).
    pub fn finite_sum(&self) -> f64 {
        self.sum
    }

    /// Change in the log-mass if `var` took the value `pit`.
    pub fn delta(&mut self, var: usize, pit: PitPair) -> Delta {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        let new = (pit.u, pit.u_minus);
        let mut d = Delta::default();
        d.swap_term(self.marg[var], log_mass(new));
        for &e in &self.plan.affected[var] {
            let [ia, ib] = self.plan.inputs[e];
            let a = self.resolve(ia, Some((var, new)));
            let b = self.resolve(ib, Some((var, new)));
            let st = eval_edge(&self.plan.models[e], a, b);
            d.swap_term(self.state[e].contrib, st.contrib);
            self.scratch[e] = st;
            self.stamp[e] = self.epoch;
        }
        d
    }

    /// Applies the change evaluated by `delta` and returns it.
    pub fn commit(&mut self, var: usize, pit: PitPair) -> Delta {
        let d = self.delta(var, pit);
        for &e in &self.plan.affected[var] {
            self.state[e] = self.scratch[e];
        }
        self.pits[var] = (pit.u, pit.u_minus);
        self.marg[var] = log_mass(self.pits[var]);
        self.sum += d.sum;
        self.zeros += d.zeros;
        d
    }
}

/// One-shot discrete log-mass.
pub(crate) fn log_pmf_pits(plan: &EvalPlan, pits: &[PitPair]) -> f64 {
    let mut ev = VineEvaluator::new(plan);
    ev.reset(pits);
    ev.value()
}

/// Continuous copula log-density at `u` ∈ (0,1)^m.
pub(crate) fn log_density_continuous(plan: &EvalPlan, u: &[f64]) -> f64 {
    let mut out = vec![[0.0f64; 2]; plan.n_edges()];
    let mut total = 0.0;
    let get = |input: Input, out: &[[f64; 2]]| match input {
        Input::Var(v) => u[v],
        Input::Edge(i, s) => out[i][s],
    };
    for e in 0..plan.n_edges() {
        let [ia, ib] = plan.inputs[e];
        let (a, b) = (get(ia, &out), get(ib, &out));
        let m = &plan.models[e];
        total += m.log_pdf(a, b);
        out[e] = [m.h1(a, b), m.h2(a, b)];
    }
    total
}
