//! Covariance forms for drivers `e^{ikM}` with `M = ∫Z`, `Z` an OU process:
//! the series, its closed form at `k = 1`, and the grid solve for `ḡ_k`.

use std::f64::consts::TAU;

use fastosc::forms::{
    form_integrated, ou_closed_form_k1, ou_form_matrix, ou_integrated_form, GkTable,
    SchrodingerGrid1D, OU_SERIES_MAX_TERMS,
};
use fastosc::periodic::TrigPoly;
use fastosc::systems::Potential;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("k   series ⟨e^ikm, e^ikm⟩");
    for k in 1..=6 {
        let v = ou_integrated_form(k, k, OU_SERIES_MAX_TERMS);
        println!("{k}   {:.15}", v.re);
    }
    println!("closed form at k = 1: {:.15}", ou_closed_form_k1());

    let grid = SchrodingerGrid1D::new(&Potential::Quadratic { c: 1.0 }.field(), -8.0, 8.0, 4000)?;
    let drivers = [TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU), TrigPoly::cos(2, TAU)];
    let table = GkTable::for_drivers(&grid, |z| z, &drivers)?;
    for k in table.frequencies().filter(|k| *k > 0) {
        println!("ḡ_{k} = {:.10}", table.gbar(k).unwrap());
    }

    println!("\n             grid            series");
    let series = ou_form_matrix(&drivers);
    for (i, a) in drivers.iter().enumerate() {
        for (j, b) in drivers.iter().enumerate().skip(i) {
            let f = form_integrated(a, b, &table)?.re;
            println!("({i},{j})  {f:>16.10}  {:>16.10}", series[(i, j)]);
        }
    }
    Ok(())
}
