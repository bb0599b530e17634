//! Ergodic covariance forms `∫₀^∞ E[φ(Z_0) ψ(Z_t)] dt` for gradient
//! diffusions, computed on a grid and cross-checked by Monte Carlo.

use fastosc::forms::{form_ergodic_1d, semigroup_mc_form, SchrodingerGrid1D, SemigroupMcConfig};
use fastosc::rng::PathRng;
use fastosc::systems::{validate_potential, DiffusionSpec, Potential};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args().nth(1).map_or(Ok(2000), |s| s.parse())?;
    for pot in [Potential::Quadratic { c: 1.0 }, Potential::Quartic { a: 1.0, b: -1.0 }] {
        let u = pot.field();
        let report = validate_potential(&u, 6.0, 2000);
        println!("{pot:?}: potential checks pass = {}", report.passes());

        let grid = SchrodingerGrid1D::auto(&u, 4000)?;
        let f = form_ergodic_1d(|z| z, |z| z, &grid)?;
        println!("  grid  ⟨z, z⟩ = {:.10}", f.value);
        let g = form_ergodic_1d(|z| z, |z| z * z * z, &grid)?;
        println!("  grid  ⟨z, z³⟩ = {:.10}", g.value);

        let cfg = SemigroupMcConfig::new(15.0, 2e-3, n_paths, 9);
        let sampler = |r: &mut PathRng| vec![grid.sample_invariant(r)];
        let z = |x: &[f64]| x[0];
        let mc = semigroup_mc_form(&z, &z, &DiffusionSpec::gradient(&u), &sampler, &cfg)?;
        println!("  MC    ⟨z, z⟩ = {:.4} ± {:.4}", mc.value, mc.stderr);
    }
    Ok(())
}
