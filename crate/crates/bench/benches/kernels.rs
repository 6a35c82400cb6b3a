use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tensorclass::dists::{sample_gig_half, sample_polya_gamma_1, standard_normal};
use tensorclass::sampler::{GibbsCore, SvmChainState};
use tensorclass::tensor::{mode_design_row, parafac_compose, ParafacFactors};
use tensorclass::{simulate_dataset, DenseTensor, FitConfig, Loss, ModelKind, RngState, ScenarioSpec, SimulationSpec};

fn random_factors(dims: &[usize], rank: usize, rng: &mut RngState) -> ParafacFactors {
    let margins = (0..rank)
        .map(|_| {
            dims.iter()
                .map(|&d| (0..d).map(|_| standard_normal(rng)).collect())
                .collect()
        })
        .collect();
    ParafacFactors::new(dims.to_vec(), margins).unwrap()
}

fn tensor_kernels(c: &mut Criterion) {
    let mut rng = RngState::new(1, 0);
    let dims = [48, 48];
    let f = random_factors(&dims, 3, &mut rng);
    let x = DenseTensor::from_fn(&dims, |_| standard_normal(&mut rng)).unwrap();
    c.bench_function("compose 48x48 rank 3", |b| b.iter(|| parafac_compose(black_box(&f))));
    c.bench_function("design row 48x48 mode 0", |b| {
        b.iter(|| mode_design_row(black_box(&x), black_box(&f), 0, 1).unwrap())
    });

    let dims3 = [16, 16, 16];
    let f3 = random_factors(&dims3, 3, &mut rng);
    let x3 = DenseTensor::from_fn(&dims3, |_| standard_normal(&mut rng)).unwrap();
    c.bench_function("design row 16x16x16 mode 1", |b| {
        b.iter(|| mode_design_row(black_box(&x3), black_box(&f3), 1, 2).unwrap())
    });
}

fn samplers(c: &mut Criterion) {
    let mut rng = RngState::new(2, 0);
    c.bench_function("polya-gamma(1, 1.5)", |b| {
        b.iter(|| sample_polya_gamma_1(black_box(1.5), &mut rng).unwrap())
    });
    c.bench_function("polya-gamma(1, 12)", |b| {
        b.iter(|| sample_polya_gamma_1(black_box(12.0), &mut rng).unwrap())
    });
    c.bench_function("gig(1/2, 1/6, 0.3)", |b| {
        b.iter(|| sample_gig_half(black_box(1.0 / 6.0), black_box(0.3), &mut rng).unwrap())
    });
}

fn gibbs_sweep(c: &mut Criterion) {
    let spec = SimulationSpec::new(ScenarioSpec::new(2, 3), Loss::Svm);
    let (data, split) = simulate_dataset(&spec).unwrap();
    let train = data.subset(&split.train).with_convention(ModelKind::BtSvm.convention());
    let config = FitConfig {
        rank: 3,
        ..FitConfig::default()
    };
    let hyper = config.resolved_hyper(2);
    let mut rng = RngState::new(3, 0);
    let dims = train.dims().unwrap().to_vec();
    let core = GibbsCore::initialize(&train, &dims, train.scalars[0].len(), &config, &mut rng).unwrap();
    let state = SvmChainState::new(core, config.sigma2);
    c.bench_function("BT-SVM sweep 48x48 n=280 rank 3", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| s.sweep(&train, &hyper, &config, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, tensor_kernels, samplers, gibbs_sweep);
criterion_main!(benches);
