use solidify_core::brownian::hit_probability_wos;
use solidify_core::geometry::CompactSetSpec;
use solidify_core::point::Point;
use solidify_core::rng::Stream;

fn main() {
    let target = CompactSetSpec::from_balls(vec![(Point::zero(3), 0.5)]);
    let x = Point::from_slice(&[2.0, 0.0, 0.0]);
    for n in [1000usize, 10000] {
        let t0 = std::time::Instant::now();
        let est = hit_probability_wos(&x, &target, 600.0, n, Stream::new(17)).unwrap();
        println!(
            "n={n}: p={:.4} se={:.4} rem={:.4} in {:?}",
            est.probability,
            est.se,
            est.remainder,
            t0.elapsed()
        );
    }
}
