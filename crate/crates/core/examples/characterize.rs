use nanofiber_trap::trap::{characterize, SearchOptions, TrapConfiguration, TrapModel};

fn main() {
    let model = TrapModel::new(TrapConfiguration::reference()).unwrap();
    let t = std::time::Instant::now();
    let c = characterize(&model, &SearchOptions::default()).unwrap();
    println!("{:#?}\n{:?}", c, t.elapsed());
    println!("U/kB = {} uK", c.minimum.potential / 1.380649e-23 * 1e6);
    println!("depth = {} uK", c.depth.depth_kelvin() * 1e6);
}
