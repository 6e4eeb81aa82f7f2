use duomag::crosstalk::*;
use duomag::magnetics::CylMagnet;
use duomag::optimizer::{ConstraintSet, SolverSettings};
use std::time::Instant;

fn main() {
    let reference = CylMagnet::new(0.1, 0.1, 1.45);
    let ctx = StudyContext {
        ipm_magnet: CylMagnet::new(0.005, 0.005, 1.45),
        epm_total_volume: 2.0 * reference.volume(),
        epm_remanence: 1.45,
        constraints: ConstraintSet::default(),
        solver: SolverSettings { rng_seed: 42, ..Default::default() },
        targets: ActivationTargets::default(),
        include_interagent: true,
        leak_weight: 20.0,
    };
    // Paper-headline cells: (d, theta_deg, n)
    let cases = [
        (0.15, 90.0, 2, "paper 3.9%"),
        (0.15, 0.0, 2, "paper 15.0%"),
        (0.15, 0.0, 3, "paper 1.6%"),
        (0.05, 0.0, 2, "paper: torque crosstalk reaching 100%"),
        (0.05, 90.0, 2, ""),
        (0.10, 90.0, 2, ""),
        (0.15, 45.0, 2, ""),
    ];
    for (d, theta_deg, n, note) in cases {
        let t0 = Instant::now();
        let config = IpmConfiguration { separation: d, relative_angle: (theta_deg as f64).to_radians() };
        let (_, report) = independence_study(&config, n, &ctx).unwrap();
        print!(
            "d={d:.2} th={theta_deg:>4} n={n}: mean={:>7.3}% excl={} [{}] ({:.1}s)  per-dof: ",
            report.mean_crosstalk.map(|c| 100.0 * c).unwrap_or(f64::NAN),
            report.excluded, note, t0.elapsed().as_secs_f64()
        );
        for rec in &report.per_dof {
            print!("{}:{:.1} ", rec.dof, rec.crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN));
        }
        println!();
    }
}
