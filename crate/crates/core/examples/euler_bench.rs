use solidify_core::brownian::{hit_before, FenceSpec};
use solidify_core::geometry::CompactSetSpec;
use solidify_core::point::Point;
use solidify_core::rng::Stream;

fn main() {
    let target = CompactSetSpec::from_balls(vec![(Point::zero(3), 0.5)]);
    let x = Point::from_slice(&[2.0, 0.0, 0.0]);
    for (dt, r, n) in [(1e-3, 10.0, 100usize), (5e-4, 25.0, 100)] {
        let t0 = std::time::Instant::now();
        let est =
            hit_before(&x, dt, &target, FenceSpec::KillSphere(r), n, Stream::new(19)).unwrap();
        println!(
            "dt={dt} r={r} n={n}: p={:.4} in {:?}",
            est.probability,
            t0.elapsed()
        );
    }
}
