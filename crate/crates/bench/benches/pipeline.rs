use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vineshuffle::bicop::{BicopFamily, BicopModel, FamilyKind, Rotation};
use vineshuffle::dataset::{Dataset, HOUR};
use vineshuffle::grid::Area;
use vineshuffle::marginals::PitPair;
use vineshuffle::rng::seeded;
use vineshuffle::shuffle::{hill_climb, HillClimbOptions, SampleMatrix};
use vineshuffle::synth::{SynthConfig, SyntheticDataset};
use vineshuffle::verify::{fit_window, spatial_metrics, RollingConfig};

fn setup() -> (SyntheticDataset, RollingConfig, i64) {
    let ds = SyntheticDataset::generate(&SynthConfig::default(), 1).unwrap();
    let t_c = ds.timestamp(14 * 24);
    (ds, RollingConfig::default(), t_c)
}

/// Wettest 9×9 area of the next hour's forecast, the slow case for climbing.
fn wet_sample(ds: &SyntheticDataset, t_c: i64) -> SampleMatrix {
    let fc = (1..48)
        .map(|h| ds.forecast(t_c + h * HOUR, 1).unwrap().unwrap())
        .max_by(|a, b| a.gridpoint(0, 0)[90].total_cmp(&b.gridpoint(0, 0)[90]))
        .unwrap();
    let area = Area { row0: 0, col0: 0, side: 9 };
    SampleMatrix::from_forecast(&fc, &area, 20, &mut seeded(3)).unwrap()
}

fn benches(c: &mut Criterion) {
    let (ds, cfg, t_c) = setup();
    let fit = fit_window(&ds, &cfg, t_c).unwrap();
    let x = wet_sample(&ds, t_c);
    let opts = HillClimbOptions {
        record_swaps: false,
        ..HillClimbOptions::default()
    };

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("fit_window_m81_t5", |b| b.iter(|| fit_window(&ds, &cfg, black_box(t_c)).unwrap()));
    g.bench_function("hill_climb_m81_n20_t5", |b| {
        b.iter(|| hill_climb(black_box(&x), &fit.model, &opts, &mut seeded(5)).unwrap())
    });
    g.finish();

    let member: Vec<f64> = x.member(0);
    c.bench_function("log_pmf_m81", |b| b.iter(|| fit.model.log_pmf(black_box(&member)).unwrap()));

    let field = ndarray::Array2::from_shape_vec((9, 9), member.clone()).unwrap();
    c.bench_function("spatial_metrics_9x9", |b| b.iter(|| spatial_metrics(black_box(field.view()))));

    let gumbel = BicopModel::new(BicopFamily::new(FamilyKind::Gumbel, Rotation::R0).unwrap(), 2.0).unwrap();
    let (pu, pv) = (PitPair::new(0.6, 0.4).unwrap(), PitPair::new(0.7, 0.65).unwrap());
    c.bench_function("pmf_sieve_gumbel", |b| b.iter(|| gumbel.pmf_sieve(black_box(pu), black_box(pv))));
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
