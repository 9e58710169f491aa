//! Inverse-Rosenblatt sampling. The stored trees are first completed to a
//! full vine with independence copulas; variables are then peeled off the
//! top tree to obtain an order in which each variable has exactly one
//! edge per tree linking it to previously sampled variables.

use rand::{Rng, RngExt};

use crate::bicop::BicopModel;
use crate::error::{Error, Result};

use super::structure::{Input, RVineStructure};

const EDGE: f64 = 1e-15;

/// Sampling order with, for each variable, its chain of (flat edge, side).
struct PeelPlan {
    order: Vec<(usize, Vec<(usize, usize)>)>,
}

fn peel(full: &RVineStructure) -> Result<PeelPlan> {
    let m = full.m();
    let mut offsets = Vec::with_capacity(full.trees().len());
    let mut acc = 0;
    for t in full.trees() {
        offsets.push(acc);
        acc += t.len();
    }
    let unions: Vec<Vec<Vec<usize>>> = full
        .trees()
        .iter()
        .map(|tree| tree.iter().map(|e| e.union()).collect())
        .collect();
    let mut alive: Vec<Vec<bool>> = full.trees().iter().map(|t| vec![true; t.len()]).collect();
    let mut remaining: Vec<bool> = vec![true; m];
    let mut n_remaining = m;
    let mut peeled = Vec::with_capacity(m);
    let fail = |msg: String| Error::InvalidInput(format!("vine cannot be peeled for sampling: {msg}"));
    while n_remaining > 1 {
        let top = n_remaining - 2;
        let top_edges: Vec<usize> = (0..alive[top].len()).filter(|&k| alive[top][k]).collect();
        if top_edges.len() != 1 {
            return Err(fail(format!("tree {} has {} live edges", top + 1, top_edges.len())));
        }
        let x = full.trees()[top][top_edges[0]].conditioned[0];
        let mut chain = Vec::with_capacity(top + 1);
        for t in 0..=top {
            let hits: Vec<usize> = (0..alive[t].len())
                .filter(|&k| alive[t][k] && unions[t][k].contains(&x))
                .collect();
            if hits.len() != 1 {
                return Err(fail(format!("variable {x} lies in {} live edges of tree {}", hits.len(), t + 1)));
            }
            let k = hits[0];
            let e = &full.trees()[t][k];
            let side = e
                .conditioned
                .iter()
                .position(|&c| c == x)
                .ok_or_else(|| fail(format!("variable {x} is conditioning in tree {}", t + 1)))?;
            alive[t][k] = false;
            chain.push((offsets[t] + k, side));
        }
        remaining[x] = false;
        n_remaining -= 1;
        peeled.push((x, chain));
    }
    let last = remaining.iter().position(|&r| r).expect("one variable remains");
    peeled.push((last, Vec::new()));
    peeled.reverse();
    Ok(PeelPlan { order: peeled })
}

pub(crate) fn sample<R: Rng + ?Sized>(
    structure: &RVineStructure,
    pair_models: &[Vec<BicopModel>],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let m = structure.m();
    let full = structure.complete();
    let mut models: Vec<BicopModel> = pair_models.iter().flatten().copied().collect();
    models.resize(full.n_edges(), BicopModel::independence());
    let inputs = full.inputs();
    let plan = peel(&full)?;

    let mut out = Vec::with_capacity(n);
    let mut vals = vec![[0.0f64; 2]; full.n_edges()];
    let mut u = vec![0.0f64; m];
    let mut xin: Vec<f64> = Vec::with_capacity(m);
    for _ in 0..n {
        for (x, chain) in &plan.order {
            let w: f64 = rng.random::<f64>().clamp(EDGE, 1.0 - EDGE);
            xin.clear();
            xin.resize(chain.len(), 0.0);
            let mut v = w;
            for (t, &(e, side)) in chain.iter().enumerate().rev() {
                let partner = resolve(inputs[e][1 - side], &u, &vals);
                let model = &models[e];
                v = if side == 0 {
                    model.hinv1(v, partner)
                } else {
                    model.hinv2(v, partner)
                }
                .clamp(EDGE, 1.0 - EDGE);
                xin[t] = v;
            }
            u[*x] = if chain.is_empty() { w } else { xin[0] };
            for &(e, _) in chain {
                let a = resolve(inputs[e][0], &u, &vals);
                let b = resolve(inputs[e][1], &u, &vals);
                let model = &models[e];
                vals[e] = [model.h1(a, b), model.h2(a, b)];
            }
        }
        out.push(u.clone());
    }
    Ok(out)
}

fn resolve(input: Input, u: &[f64], vals: &[[f64; 2]]) -> f64 {
    match input {
        Input::Var(v) => u[v],
        Input::Edge(i, s) => vals[i][s],
    }
}
