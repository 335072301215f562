use beltrami_core::{bie::*, quadrature::compute_moments, surface::make_sphere_grid, geo::V3};
use num_complex::Complex64 as C;
fn main() {
    // pin down which call overflows the 2MB test stack by running each stage
    // in a small thread
    let stage = std::env::args().nth(1).unwrap_or_default();
    let h = std::thread::Builder::new().stack_size(2 * 1024 * 1024).spawn(move || {
        let g = make_sphere_grid(V3::ZERO, 1.0, 16, 32).unwrap();
        let m = compute_moments(&g, 16, 16);
        let op = assemble_t(1.0, &g, &m).unwrap();
        eprintln!("assembled");
        if stage == "factorize" || stage == "solve" {
            let solver = op.factorize().unwrap();
            eprintln!("factorized");
            if stage == "solve" {
                let gd: Vec<C> = g.nodes.iter().map(|p| C::new(p.z(), 0.0)).collect();
                let mu = assemble_mu(1.0, &g, &m, &beltrami_core::potentials::VolumeDensity::empty(), &gd, true).unwrap();
                let xi = solver.solve(&g, &mu).unwrap();
                eprintln!("solved, |xi| = {:.3e}", xi.norm_inf());
            }
        }
    }).unwrap();
    h.join().unwrap();
}
