//! Gram matrices of trigonometric drivers and the limit covariance of an
//! amplitude-scaled system driven by a Wiener process.

use std::f64::consts::TAU;

use fastosc::forms::amplitude_wiener_special_case;
use fastosc::periodic::{gram_matrix, psd_sqrt, TrigPoly};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drivers = vec![
        TrigPoly::cos(1, TAU),
        TrigPoly::sin(1, TAU),
        TrigPoly::cos(2, TAU).add(&TrigPoly::sin(1, TAU).scale(0.5))?,
    ];

    let g = gram_matrix(&drivers)?;
    println!("Gram matrix of [cos θ, sin θ, cos 2θ + ½ sin θ]:{}", g.matrix());
    println!("PSD square root:{}", g.sqrt());
    let s = psd_sqrt(g.matrix())?;
    println!("max |S·S − G| = {:.2e}", (&s * &s - g.matrix()).amax());

    // Θ = W/ε: the limit noise covariance is the Gram matrix of the
    // mean-zero antiderivatives
    let c = amplitude_wiener_special_case(&drivers)?;
    println!("limit covariance (antiderivatives):{}", c.matrix());
    Ok(())
}
