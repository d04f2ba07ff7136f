//! Mutual information of a single noisy range beam.
//!
//! Shows how the closed form tracks the enumeration oracle, and how sensor
//! noise and occlusion change what a beam can teach about the map.

use gradmap::sensor::{noise_kernel, BeamModel, NoiseKernel};
use gradmap::smi::{beam_smi, brute_force_smi, hit_distribution, BeamBelief};

fn main() -> gradmap::Result<()> {
    let beliefs = [
        ("unknown corridor", vec![0.5; 10]),
        ("known free, then unknown", [vec![0.01; 5], vec![0.5; 5]].concat()),
        (
            "unknown behind a likely wall",
            [vec![0.01; 3], vec![0.9], vec![0.5; 6]].concat(),
        ),
        ("fully known", [vec![0.0; 6], vec![1.0], vec![0.5; 3]].concat()),
    ];
    for sigma in [0.0, 0.1, 0.3] {
        let model = BeamModel::new(1, 0.1, 2.5, sigma)?;
        let kernel = if sigma == 0.0 {
            NoiseKernel::point_mass()
        } else {
            noise_kernel(&model, 0.25)
        };
        println!("noise sigma {sigma} m, kernel halfwidth {} cells", kernel.halfwidth());
        for (name, probs) in &beliefs {
            let b = BeamBelief::new(probs.clone())?;
            let smi = beam_smi(&b, &kernel);
            let oracle = brute_force_smi(&b, &kernel)?;
            let event = hit_distribution(&b).entropy();
            println!("  {name:<30} SMI {smi:.4} bits (enumeration {oracle:.4}, hit entropy {event:.4})");
        }
    }
    Ok(())
}
