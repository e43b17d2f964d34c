use solidify_core::potential::LatticeGreenTable;
fn main() {
    let t0 = std::time::Instant::now();
    let table = LatticeGreenTable::shared(3);
    println!("build: {:?}, G(0) = {:.9}, G(64,64,64) = {:.6e}", t0.elapsed(), table.at_origin(), table.at_offset(&[64,64,64]));
}
