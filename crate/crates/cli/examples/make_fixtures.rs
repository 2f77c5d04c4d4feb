//! Regenerates the synthetic data files in `fixtures/`.
//!
//! cargo run -p nanofiber-trap-cli --example make_fixtures

use std::fmt::Write as _;
use std::path::Path;

use nanofiber_trap::spectroscopy::{single_line_transmission, SaturationModel};
use nanofiber_trap::trap::{find_minimum, TrapModel};
use nanofiber_trap_cli::commands::probe_area;
use nanofiber_trap_cli::load;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 20_080_917;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut text = String::from("detuning_MHz,transmission,sigma\n");
    for i in 0..141 {
        let d = -57.0 + i as f64;
        let t = single_line_transmission(d * 1e6, 13.0, 13e6, 20e6);
        let _ = writeln!(text, "{d},{:.9e},{:.9e}", t * (1.0 + noise.sample(&mut rng)), 0.01 * t);
    }
    std::fs::write(dir.join("spectrum_synthetic.csv"), text).unwrap();

    let loaded = load(None, true).unwrap();
    let model = TrapModel::new(loaded.config.trap_configuration().unwrap()).unwrap();
    let m = find_minimum(&model, &loaded.config.search_options()).unwrap();
    let area = probe_area(&loaded.config, &m).unwrap();
    let sat = SaturationModel::new(&loaded.config.atom(), area).unwrap();
    let noise = Normal::new(0.0, 0.03).unwrap();
    let mut text = String::from("p_in_W,p_abs_W\n");
    for i in 0..41 {
        let p = 10f64.powf(-11.0 + 5.0 * i as f64 / 40.0);
        let a = sat.absorbed(p, 2000.0) * (1.0 + noise.sample(&mut rng));
        let _ = writeln!(text, "{p:.9e},{:.9e}", a.min(p));
    }
    std::fs::write(dir.join("saturation_synthetic.csv"), text).unwrap();
    println!("probe A_eff = {:.6} um^2", area * 1e12);
}
