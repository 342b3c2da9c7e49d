//! Measures the two data-parallel hot paths — frame rendering and the
//! network forward pass — under a single-worker rayon pool and a multi-worker
//! pool, confirming the parallel dispatch actually pays for itself. Built
//! with `--no-default-features` the same workloads run on the plain
//! sequential loops instead.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use depthsynth::nnet::{init_params, model_forward, ModelDims, Tensor4};
use depthsynth::render::render_frame;
use depthsynth::scenegen::{
    generate_scene, sun_state, weather_state, Camera, SceneConfig, WeatherKind,
};

/// Runs `work` under each worker configuration as a named benchmark.
fn bench_configs(c: &mut Criterion, group_name: &str, work: impl Fn() + Sync + Send) {
    let mut group = c.benchmark_group(group_name);
    group.sample_size(20);
    #[cfg(feature = "parallel")]
    {
        // On a single-core host the "many" pool still schedules across
        // threads, so the comparison stays meaningful for determinism even
        // when it cannot show a speedup.
        let many = rayon::current_num_threads().max(2);
        for threads in [1usize, many] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            group.bench_function(format!("{threads}_workers"), |b| {
                pool.install(|| b.iter(&work));
            });
        }
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&work));
    group.finish();
}

fn render(c: &mut Criterion) {
    let scene = generate_scene(2718, &SceneConfig::default()).unwrap();
    let camera = Camera::standard(96, 64).unwrap();
    let light = sun_state(10.0).unwrap();
    let weather = weather_state(WeatherKind::Sunny);
    bench_configs(c, "render_frame_96x64", move || {
        criterion::black_box(render_frame(&scene, &camera, &light, &weather).unwrap());
    });
}

fn forward(c: &mut Criterion) {
    let dims = ModelDims {
        channels: 8,
        blocks: 2,
        upscale: 4,
    };
    let params = init_params(dims, 31).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let data: Vec<f64> = (0..4 * 3 * 32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = Tensor4::from_vec(4, 3, 32, 32, data).unwrap();
    bench_configs(c, "model_forward_batch4_32x32", move || {
        criterion::black_box(model_forward(&params, &x).unwrap());
    });
}

criterion_group!(benches, render, forward);
criterion_main!(benches);
