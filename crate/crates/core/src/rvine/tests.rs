use super::*;
use crate::bicop::{BicopFamily, FamilyKind, Rotation};
use crate::grid::GridSpec;
use crate::rng::seeded;
use crate::stats::{kendall_tau, norm_quantile};
use proptest::prelude::*;
use rand::RngExt;
use std::f64::consts::PI;

fn edge1(a: usize, b: usize) -> VineEdge {
    VineEdge {
        conditioned: [a, b],
        conditioning: vec![],
        endpoints: [a, b],
    }
}

fn gauss(rho: f64) -> BicopModel {
    BicopModel::new(BicopFamily::GAUSSIAN, rho).unwrap()
}

/// Path 0-1-2 with Gaussian ρ01, ρ12 and optional C02|1.
fn path3(r01: f64, r12: f64, r02_1: Option<f64>) -> RVineCopula {
    let t1 = vec![edge1(0, 1), edge1(1, 2)];
    match r02_1 {
        None => RVineCopula::new(RVineStructure::new(3, vec![t1]).unwrap(), vec![vec![gauss(r01), gauss(r12)]]).unwrap(),
        Some(r) => {
            let t2 = vec![VineEdge {
                conditioned: [0, 2],
                conditioning: vec![1],
                endpoints: [0, 1],
            }];
            RVineCopula::new(
                RVineStructure::new(3, vec![t1, t2]).unwrap(),
                vec![vec![gauss(r01), gauss(r12)], vec![gauss(r)]],
            )
            .unwrap()
        }
    }
}

fn atom(u: f64, k: usize) -> PitPair {
    let i = ((u * k as f64) as usize).min(k - 1);
    PitPair::new((i + 1) as f64 / k as f64, i as f64 / k as f64).unwrap()
}

#[test]
fn independence_vine_is_sum_of_marginal_masses() {
    let c = RVineCopula::independence(4);
    let pits = [
        PitPair::new(0.5, 0.0).unwrap(),
        PitPair::new(0.9, 0.7).unwrap(),
        PitPair::new(0.3, 0.1).unwrap(),
        PitPair::new(1.0, 0.6).unwrap(),
    ];
    let expect: f64 = pits.iter().map(|p| p.mass().ln()).sum();
    assert_eq!(c.log_pmf_pits(&pits).unwrap(), expect);
}

#[test]
fn truncation_zero_equals_marginal_sum_exactly() {
    let full = path3(0.6, -0.4, Some(0.3));
    let pits = [
        PitPair::new(0.25, 0.1).unwrap(),
        PitPair::new(0.8, 0.5).unwrap(),
        PitPair::new(0.4, 0.35).unwrap(),
    ];
    let t0 = full.truncated(0).log_pmf_pits(&pits).unwrap();
    assert_eq!(t0, pits.iter().map(|p| p.mass().ln()).sum::<f64>());
}

#[test]
fn bivariate_vine_reduces_to_sieve() {
    let m = gauss(0.65);
    let c = RVineCopula::new(RVineStructure::new(2, vec![vec![edge1(0, 1)]]).unwrap(), vec![vec![m]]).unwrap();
    let a = PitPair::new(0.7, 0.45).unwrap();
    let b = PitPair::new(0.2, 0.05).unwrap();
    let lp = c.log_pmf_pits(&[a, b]).unwrap();
    assert!((lp - m.pmf_sieve(a, b).ln()).abs() < 1e-12);
}

#[test]
fn zero_mass_gives_sentinel() {
    // Strong lower-tail Clayton: C(0.1, 0.9) rounds to 0.1, so the corner
    // box has exactly zero mass.
    let clay = BicopModel::new(BicopFamily::new(FamilyKind::Clayton, Rotation::R0).unwrap(), 28.0).unwrap();
    let c = RVineCopula::new(RVineStructure::new(2, vec![vec![edge1(0, 1)]]).unwrap(), vec![vec![clay]]).unwrap();
    let lp = c.log_pmf_pits(&[PitPair::new(0.1, 0.0).unwrap(), PitPair::new(1.0, 0.9).unwrap()]).unwrap();
    assert_eq!(lp, LOG_ZERO_SENTINEL);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let c = RVineCopula::independence(3);
    assert!(matches!(
        c.log_pmf_pits(&[PitPair::new(0.5, 0.0).unwrap()]),
        Err(Error::DimensionMismatch { expected: 3, got: 1 })
    ));
}

/// Gaussian copula log-density with correlation matrix `r` (3×3).
fn gaussian_copula_logpdf(r: [[f64; 3]; 3], u: [f64; 3]) -> f64 {
    let z: Vec<f64> = u.iter().map(|&x| norm_quantile(x)).collect();
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, d) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (r[a][c] * r[b][d] - r[a][d] * r[b][c]) / det;
        }
    }
    let mut q = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            q += z[i] * (inv[i][j] - id) * z[j];
        }
    }
    -0.5 * det.ln() - 0.5 * q
}

#[test]
fn continuous_gaussian_vine_matches_gaussian_copula() {
    let (a, b, c) = (0.6, -0.3, 0.45);
    let vine = path3(a, b, Some(c));
    let r02 = c * ((1.0 - a * a) * (1.0 - b * b)).sqrt() + a * b;
    let r = [[1.0, a, r02], [a, 1.0, b], [r02, b, 1.0]];
    for u in [[0.2, 0.5, 0.7], [0.9, 0.1, 0.4], [0.33, 0.66, 0.99]] {
        let got = vine.log_density(&u).unwrap();
        let want = gaussian_copula_logpdf(r, u);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn sample_single_edge_recovers_tau() {
    let c = RVineCopula::new(RVineStructure::new(2, vec![vec![edge1(0, 1)]]).unwrap(), vec![vec![gauss(0.7)]]).unwrap();
    let s = c.sample(100_000, &mut seeded(5)).unwrap();
    let x: Vec<f64> = s.iter().map(|r| r[0]).collect();
    let y: Vec<f64> = s.iter().map(|r| r[1]).collect();
    let tau = kendall_tau(&x, &y);
    assert!((tau - 2.0 / PI * 0.7f64.asin()).abs() < 0.01, "{tau}");
}

#[test]
fn sample_independence_vine() {
    let s = RVineCopula::independence(3).sample(100_000, &mut seeded(6)).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let x: Vec<f64> = s.iter().map(|r| r[i]).collect();
        let y: Vec<f64> = s.iter().map(|r| r[j]).collect();
        assert!(kendall_tau(&x, &y).abs() < 0.01);
    }
    let one = RVineCopula::independence(3).sample(1, &mut seeded(1)).unwrap();
    assert_eq!(one.len(), 1);
    assert!(one[0].iter().all(|&u| u > 0.0 && u < 1.0));
}

#[test]
fn sample_respects_conditional_structure() {
    // Gaussian D-vine: implied τ(0,2) = (2/π) asin(r02).
    let (a, b, c) = (0.7, 0.5, -0.4);
    let vine = path3(a, b, Some(c));
    let s = vine.sample(50_000, &mut seeded(9)).unwrap();
    let x: Vec<f64> = s.iter().map(|r| r[0]).collect();
    let z: Vec<f64> = s.iter().map(|r| r[2]).collect();
    let r02 = c * ((1.0 - a * a) * (1.0f64 - b * b)).sqrt() + a * b;
    let tau = kendall_tau(&x, &z);
    assert!((tau - 2.0 / PI * r02.asin()).abs() < 0.015, "{tau}");
}

#[test]
fn sample_five_dimensional_truncated_vine() {
    // A star tree; completion adds independence trees above it.
    let t1 = vec![edge1(0, 1), edge1(0, 2), edge1(0, 3), edge1(0, 4)];
    let models = vec![vec![gauss(0.8), gauss(0.6), gauss(-0.5), gauss(0.3)]];
    let vine = RVineCopula::new(RVineStructure::new(5, vec![t1]).unwrap(), models).unwrap();
    let s = vine.sample(40_000, &mut seeded(10)).unwrap();
    for (j, rho) in [(1usize, 0.8f64), (2, 0.6), (3, -0.5), (4, 0.3)] {
        let x: Vec<f64> = s.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = s.iter().map(|r| r[j]).collect();
        assert!((kendall_tau(&x, &y) - 2.0 / PI * rho.asin()).abs() < 0.015);
    }
}

fn discrete_rows(vine: &RVineCopula, n: usize, k: usize, seed: u64) -> Vec<Vec<PitPair>> {
    vine.sample(n, &mut seeded(seed))
        .unwrap()
        .into_iter()
        .map(|r| r.into_iter().map(|u| atom(u, k)).collect())
        .collect()
}

#[test]
fn fit_independence_data_selects_independence() {
    let mut all_indep = 0;
    for run in 0..100 {
        let rows = discrete_rows(&RVineCopula::independence(3), 10_000, 20, 500 + run);
        let c = RVineCopula::fit(&rows, &CopulaFitOptions { seed: run, ..Default::default() }).unwrap();
        if c.pair_models().iter().flatten().all(BicopModel::is_independence) {
            all_indep += 1;
        }
    }
    assert!(all_indep >= 95, "{all_indep}/100");
}

#[test]
fn fit_recovers_gaussian_path_vine() {
    let truth = path3(0.7, 0.7, None);
    let rows = discrete_rows(&truth, 5000, 20, 77);
    let c = RVineCopula::fit(&rows, &CopulaFitOptions::default()).unwrap();
    let mut t1: Vec<_> = c.structure().trees()[0].iter().map(|e| e.conditioned).collect();
    t1.sort();
    assert_eq!(t1, vec![[0, 1], [1, 2]]);
    let tau = 2.0 / PI * 0.7f64.asin();
    for m in &c.pair_models()[0] {
        assert!((m.tau() - tau).abs() < 0.05, "{:?} {}", m.family(), m.tau());
    }
    // Round trip: sample the fitted vine and refit.
    let again = discrete_rows(&c, 5000, 20, 78);
    let c2 = RVineCopula::fit(&again, &CopulaFitOptions::default()).unwrap();
    for m in &c2.pair_models()[0] {
        assert!((m.tau() - tau).abs() < 0.05);
    }
}

#[test]
fn truncation_one_fits_only_tree_one() {
    let rows = discrete_rows(&path3(0.7, 0.5, Some(0.6)), 2000, 10, 3);
    let c = RVineCopula::fit(&rows, &CopulaFitOptions { truncation: 1, ..Default::default() }).unwrap();
    assert_eq!(c.truncation(), 1);
    let full = RVineCopula::fit(&rows, &CopulaFitOptions::default()).unwrap();
    assert_eq!(full.truncation(), 2);
}

#[test]
fn two_dimensional_data_gives_one_edge() {
    let rows: Vec<Vec<PitPair>> = discrete_rows(&path3(0.7, 0.5, None), 100, 10, 4)
        .into_iter()
        .map(|r| r[..2].to_vec())
        .collect();
    let s = select_structure(&rows, 5, 0).unwrap();
    assert_eq!(s.truncation(), 1);
    assert_eq!(s.trees()[0], vec![edge1(0, 1)]);
}

#[test]
fn fit_needs_thirty_rows() {
    let rows = vec![vec![PitPair::new(0.5, 0.0).unwrap(); 3]; 29];
    assert!(matches!(select_structure(&rows, 5, 0), Err(Error::InsufficientData { .. })));
}

#[test]
fn fitted_structures_are_valid() {
    for seed in 0..5 {
        let rows = discrete_rows(&RVineCopula::independence(7), 200, 5, seed);
        let s = select_structure(&rows, 6, seed).unwrap();
        s.validate().unwrap();
        assert_eq!(s.truncation(), 6);
        for (t, tree) in s.trees().iter().enumerate() {
            assert_eq!(tree.len(), 7 - t - 1);
        }
    }
}

proptest! {
    #[test]
    fn incremental_matches_full_evaluation(seed in 0u64..200) {
        let mut rng = seeded(seed);
        let rows = discrete_rows(&path3(0.7, 0.6, Some(0.3)), 300, 6, seed);
        let fit_rows: Vec<Vec<PitPair>> = rows.iter().map(|r| {
            let mut v = r.clone();
            v.extend_from_slice(r);
            v
        }).collect();
        let c = RVineCopula::fit(&fit_rows, &CopulaFitOptions { seed, ..Default::default() }).unwrap();
        let mut pits = fit_rows[0].clone();
        let mut ev = c.evaluator();
        ev.reset(&pits);
        for _ in 0..20 {
            let var = rng.random_range(0..6usize);
            let new = fit_rows[rng.random_range(0..fit_rows.len())][var];
            let before = ev.value();
            let d = ev.delta(var, new);
            ev.commit(var, new);
            pits[var] = new;
            let full = c.log_pmf_pits(&pits).unwrap();
            if full == LOG_ZERO_SENTINEL {
                prop_assert!(ev.is_zero());
            } else {
                prop_assert!((ev.value() - full).abs() < 1e-9, "{} vs {}", ev.value(), full);
                if d.zeros == 0 && before != LOG_ZERO_SENTINEL {
                    prop_assert!((before + d.sum - full).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn assemble_counts_rows() {
    let spec = GridSpec::new(9, 18).unwrap();
    let mut f1 = GridField::zeros(spec, 1);
    let f2 = GridField::zeros(spec, 2);
    let vals = Array2::from_shape_fn((9, 18), |(i, j)| (i * 18 + j) as f64);
    f1 = GridField::new(spec, vals, f1.timestamp, 0).unwrap();
    let a = Area { row0: 0, col0: 0, side: 9 };
    let b = Area { row0: 0, col0: 9, side: 9 };
    let ts = assemble_training_set(&[&f1], &[vec![a, b]]).unwrap();
    assert_eq!((ts.n_rows(), ts.m()), (2, 81));
    assert_eq!(ts.values[[1, 0]], 9.0);
    assert_eq!(ts.values[[0, 80]], (8 * 18 + 8) as f64);
    let ts = assemble_training_set(&[&f1, &f2, &f1], &[vec![a, b], vec![a], vec![b]]).unwrap();
    assert_eq!(ts.n_rows(), 4);
    assert_eq!(ts.timestamps, vec![1, 1, 2, 1]);
    assert!(assemble_training_set(&[], &[]).is_err());
}

#[test]
fn model_file_round_trip() {
    let truth = path3(0.6, 0.4, Some(0.2));
    let mut rng = seeded(12);
    let u = truth.sample(400, &mut rng).unwrap();
    let values = Array2::from_shape_fn((400, 3), |(r, c)| (u[r][c] * 5.0).floor());
    let ts = TrainingSet {
        values,
        timestamps: (0..400).map(|i| i / 2).collect(),
    };
    let fitted = FittedRVine::fit(&ts, &VineFitOptions::default(), "w0").unwrap();
    assert_eq!(fitted.meta().timestamps.len(), 200);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("model.json");
    fitted.save(&p).unwrap();
    let back = FittedRVine::load(&p).unwrap();
    assert_eq!(back, fitted);
    let y = [1.0, 2.0, 0.0];
    assert_eq!(back.log_pmf(&y).unwrap(), fitted.log_pmf(&y).unwrap());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.contains(MODEL_SCHEMA));
}
