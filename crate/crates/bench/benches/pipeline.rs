use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use prescale_core::anomaly::{build_baseline, detect};
use prescale_core::planner::{select_offers, ProviderOffer, ResourceRequirement};
use prescale_core::simcore::{run, static_baseline, DataCenterSpec, ProvisioningSchedule, SimPolicy};
use prescale_core::trace::{disaggregate, synth_diurnal, DisaggregationParams, HourlyCount, SynthParams};
use prescale_core::tsmodel::fit;
use prescale_core::ArimaOrder;

fn day() -> prescale_core::TimeSeries {
    synth_diurnal(&SynthParams::new(1, 100.0, 50.0, 10.0, 1).with_interval(5)).unwrap()
}

fn trace(c: &mut Criterion) {
    let hours: Vec<HourlyCount> =
        (0..24).map(|h| HourlyCount { hour_index: h, count: 300_000 + 10_000 * h }).collect();
    c.bench_function("disaggregate 24h", |b| {
        b.iter(|| disaggregate(black_box(&hours), &DisaggregationParams::default()).unwrap())
    });
}

fn tsmodel(c: &mut Criterion) {
    let series = day();
    let mut g = c.benchmark_group("fit one day");
    g.sample_size(10);
    for order in [ArimaOrder::new(1, 1, 1), ArimaOrder::new(2, 2, 2)] {
        g.bench_function(order.to_string(), |b| b.iter(|| fit(black_box(&series.values), order).unwrap()));
    }
    g.finish();
}

fn anomaly(c: &mut Criterion) {
    let history = synth_diurnal(&SynthParams::new(3, 100.0, 50.0, 10.0, 2).with_interval(5)).unwrap();
    let profile = build_baseline(&history, 300).unwrap();
    let stream = day();
    c.bench_function("detect one day", |b| b.iter(|| detect(black_box(&stream), &profile, 3.0, 2).unwrap()));
}

fn planner(c: &mut Criterion) {
    let catalog: Vec<ProviderOffer> = (0..5)
        .map(|i| ProviderOffer {
            id: format!("o{i}"),
            cores: 1 << (i % 4),
            ram_gb: f64::from(2u32 << (i % 4)),
            price_per_hour: 0.05 * f64::from(1 << (i % 4)) * (1.0 + 0.1 * f64::from(i)),
            boot_delay: 60.0 + 30.0 * f64::from(i),
            available_count: 20,
        })
        .collect();
    let req = ResourceRequirement { vm_count: 40, cores_per_vm: 1, ram_per_vm: 2.0, valid_from: 600, valid_until: 900 };
    c.bench_function("select offers", |b| b.iter(|| select_offers(black_box(&req), &catalog, 300.0).unwrap()));
}

fn simcore(c: &mut Criterion) {
    let workload = day();
    let (dc, policy) = (DataCenterSpec::default(), SimPolicy::default());
    let mut g = c.benchmark_group("simulate one day");
    g.sample_size(10);
    g.bench_function("16 VMs", |b| {
        b.iter(|| run(black_box(&workload), &ProvisioningSchedule::constant(0, 16), &dc, &policy).unwrap())
    });
    g.bench_function("static baseline", |b| b.iter(|| static_baseline(black_box(&workload), &dc, &policy).unwrap()));
    g.finish();
}

criterion_group!(benches, trace, tsmodel, anomaly, planner, simcore);
criterion_main!(benches);
