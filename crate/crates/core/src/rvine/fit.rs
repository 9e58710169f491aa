//! Tree-by-tree structure selection and pair-copula fitting on discrete
//! data: each tree is the maximum spanning tree under |τ̂| of jittered
//! pseudo-observations, and (F, F⁻) pairs are propagated to the next tree.

use std::collections::HashMap;

use crate::bicop::{fit_pseudo_observations, jitter, BicopFitOptions, BicopModel};
use crate::error::{Error, Result};
use crate::marginals::PitPair;
use crate::rng::substream;
use crate::stats::kendall_tau;

use super::structure::{join_edges, maximum_spanning_tree, RVineStructure, VineEdge};

pub use crate::bicop::fit::MIN_FIT_ROWS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaFitOptions {
    /// Trees above this level are independence.
    pub truncation: usize,
    pub seed: u64,
    pub bicop: BicopFitOptions,
}

impl Default for CopulaFitOptions {
    fn default() -> Self {
        Self {
            truncation: 5,
            seed: 0,
            bicop: BicopFitOptions::default(),
        }
    }
}

type Column = Vec<(f64, f64)>;

/// Conditional (F, F⁻) columns of one edge: side 0 for the first
/// conditioned variable, side 1 for the second.
struct EdgeData {
    out: [Column; 2],
}

fn propagate(model: &BicopModel, a: &[(f64, f64)], b: &[(f64, f64)]) -> EdgeData {
    if model.is_independence() {
        return EdgeData {
            out: [a.to_vec(), b.to_vec()],
        };
    }
    let n = a.len();
    let mut o0 = Vec::with_capacity(n);
    let mut o1 = Vec::with_capacity(n);
    for (&(au, am), &(bu, bm)) in a.iter().zip(b) {
        let (fa, fb) = (au - am, bu - bm);
        if !(fa > 0.0 && fb > 0.0) {
            o0.push((au, am));
            o1.push((bu, bm));
            continue;
        }
        let [c11, c01, c10, c00] = model.cdf_box(au, am, bu, bm);
        let q = |x: f64, d: f64| (x / d).clamp(0.0, 1.0);
        o0.push((q(c11 - c10, fb), q(c01 - c00, fb)));
        o1.push((q(c11 - c01, fa), q(c10 - c00, fa)));
    }
    EdgeData { out: [o0, o1] }
}

/// Selects the structure and fits every pair copula. `rows[r][i]` is the
/// PIT pair of variable `i` in observation `r`.
pub fn fit_copula(rows: &[Vec<PitPair>], opts: &CopulaFitOptions) -> Result<(RVineStructure, Vec<Vec<BicopModel>>)> {
    if rows.len() < MIN_FIT_ROWS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_ROWS,
            got: rows.len(),
        });
    }
    let m = rows[0].len();
    if m == 0 {
        return Err(Error::InvalidInput("observation vectors are empty".into()));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: rows[r].len(),
        });
    }
    let n_trees = opts.truncation.min(m - 1);
    let cols: Vec<Column> = (0..m).map(|i| rows.iter().map(|r| (r[i].u, r[i].u_minus)).collect()).collect();

    let mut trees: Vec<Vec<VineEdge>> = Vec::new();
    let mut models: Vec<Vec<BicopModel>> = Vec::new();
    let mut data: Vec<EdgeData> = Vec::new();

    for t in 1..=n_trees {
        // Candidate edges with their argument columns.
        struct Cand {
            edge: VineEdge,
            a: (usize, usize),
            b: (usize, usize),
        }
        let mut cands: Vec<Cand> = Vec::new();
        if t == 1 {
            for i in 0..m {
                for j in i + 1..m {
                    cands.push(Cand {
                        edge: VineEdge {
                            conditioned: [i, j],
                            conditioning: Vec::new(),
                            endpoints: [i, j],
                        },
                        a: (i, 0),
                        b: (j, 0),
                    });
                }
            }
        } else {
            let prev = &trees[t - 2];
            for p in 0..prev.len() {
                for q in p + 1..prev.len() {
                    if let Some(edge) = join_edges(prev, p, q, t - 1) {
                        let sa = usize::from(prev[p].conditioned[0] != edge.conditioned[0]);
                        let sb = usize::from(prev[q].conditioned[0] != edge.conditioned[1]);
                        cands.push(Cand {
                            edge,
                            a: (p, sa),
                            b: (q, sb),
                        });
                    }
                }
            }
        }
        let column = |(node, side): (usize, usize)| -> &Column {
            if t == 1 {
                &cols[node]
            } else {
                &data[node].out[side]
            }
        };

        // Pseudo-observations per (node, side), drawn once per tree and
        // shared by the weights and the pair-copula fits.
        let mut weighted = Vec::with_capacity(cands.len());
        let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        for c in &cands {
            for key in [c.a, c.b] {
                cache.entry(key).or_insert_with(|| {
                    let mut rng = substream(opts.seed, "vine-jitter", &[t as i64, key.0 as i64, key.1 as i64]);
                    jitter(column(key), &mut rng)
                });
            }
            let w = kendall_tau(&cache[&c.a], &cache[&c.b]).abs();
            let [p, q] = c.edge.endpoints;
            weighted.push((p, q, if w.is_finite() { w } else { 0.0 }));
        }
        let n_nodes = if t == 1 { m } else { trees[t - 2].len() };
        let mut chosen = maximum_spanning_tree(n_nodes, &weighted);
        chosen.sort_unstable();

        let mut tree = Vec::with_capacity(chosen.len());
        let mut tree_models = Vec::with_capacity(chosen.len());
        let mut tree_data = Vec::with_capacity(chosen.len());
        for (p, q) in chosen {
            let c = cands
                .iter()
                .find(|c| c.edge.endpoints == [p, q])
                .expect("chosen edge is a candidate");
            let model = fit_pseudo_observations(&cache[&c.a], &cache[&c.b], &opts.bicop);
            tree_data.push(propagate(&model, column(c.a), column(c.b)));
            tree.push(c.edge.clone());
            tree_models.push(model);
        }
        trees.push(tree);
        models.push(tree_models);
        data = tree_data;
    }
    let structure = RVineStructure::new(m, trees)?;
    Ok((structure, models))
}

/// Structure selection alone (pair copulas are still fitted internally,
/// since higher trees need conditional data).
pub fn select_structure(rows: &[Vec<PitPair>], truncation: usize, seed: u64) -> Result<RVineStructure> {
    let opts = CopulaFitOptions {
        truncation,
        seed,
        ..Default::default()
    };
    Ok(fit_copula(rows, &opts)?.0)
}
