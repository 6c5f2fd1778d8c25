use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qmeas::observables::{coexistence_check, CoexistenceOptions, DiscretePOVM, Outcome};
use qmeas::sampling::{batch_audit, Ensemble, EnsembleMember, Family, PointerKind};
use qmeas::scheme::AuditConfig;
use qmeas::tensor::ComplexMatrix;
use qmeas::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn batch(c: &mut Criterion) {
    let ensemble = Ensemble {
        seed: 11,
        members: vec![
            EnsembleMember {
                d_s: 2,
                d_a: 3,
                n_outcomes: 3,
                pointer_kind: PointerKind::Sharp,
                family: Family::HaarGeneric,
                count: 150,
            },
            EnsembleMember {
                d_s: 3,
                d_a: 4,
                n_outcomes: 2,
                pointer_kind: PointerKind::Unsharp(0.3),
                family: Family::HaarGeneric,
                count: 50,
            },
        ],
    };
    let specs = ensemble.specs();
    let config = AuditConfig::default();
    let mut group = c.benchmark_group("batch_audit");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_audit(black_box(&specs), &config, exec).unwrap())
        });
    }
    group.finish();
}

fn coexistence(c: &mut Criterion) {
    let pair = |p: ComplexMatrix| {
        let q = &ComplexMatrix::identity(2) - &p;
        DiscretePOVM::new(vec![Outcome::new("+", p), Outcome::new("-", q)]).unwrap()
    };
    let z = pair(ComplexMatrix::diagonal(&[1.0, 0.0]));
    let x = pair(ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap());
    let mut group = c.benchmark_group("coexistence_check");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = CoexistenceOptions { execution, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| coexistence_check(black_box(&z), black_box(&x), opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch, coexistence);
criterion_main!(benches);
