use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wach_forge::family::{assign_types, Case, FamilySpec, TypedMatrixFamily};
use wach_forge::padic::{OElement, Ring};
use wach_forge::par;
use wach_forge::series::SeriesRing;
use wach_forge::wach::{build_pi, choose_z, WachProblem};

struct Setup {
    sr: SeriesRing,
    fam: TypedMatrixFamily,
    z: Vec<Vec<OElement>>,
}

fn setup() -> Setup {
    let ring = Ring::new(3, 2, 32).unwrap();
    let sr = SeriesRing::new(ring.clone(), 14);
    let spec = FamilySpec::new(3, Case::Induced, &[5, 3], &[0, 3, 5, 0], vec![], vec![]).unwrap();
    let fam = assign_types(&spec, 3);
    let probe = vec![ring.from_int(3), ring.from_int(6)];
    let (z, _) = choose_z(&sr, &fam, 2, &[probe], 4).unwrap();
    Setup { sr, fam, z }
}

fn solve_one(s: &Setup, a: &[OElement]) -> u32 {
    let data = build_pi(&s.sr, &s.fam, a, &s.z);
    WachProblem::new(&s.sr, &data.pi, &[5, 3], 2)
        .solve()
        .expect("base solve")
        .residual_valuation
}

fn params(s: &Setup, n: usize) -> Vec<Vec<OElement>> {
    let r = s.sr.ring();
    (0..n as i128)
        .map(|i| vec![r.from_int(3 * (7 * i + 1)), r.from_int(3 * (11 * i + 2))])
        .collect()
}

fn sweep(c: &mut Criterion) {
    let s = setup();
    let mut group = c.benchmark_group("base-solve-sweep");
    group.sample_size(10);
    for n in [4usize, 16] {
        let jobs = params(&s, n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &jobs, |b, jobs| {
            b.iter(|| par::map(jobs, |a| solve_one(&s, a)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &jobs, |b, jobs| {
            b.iter(|| par::sequential_map(jobs, |a| solve_one(&s, a)))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
