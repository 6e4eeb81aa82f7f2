use duomag::magnetics::{moment_from_cylinder, CylMagnet, Dipole, Wrench5};
use duomag::math::Vec3;
use duomag::optimizer::*;
use std::time::Instant;

fn main() {
    let ipm_m = moment_from_cylinder(&CylMagnet::new(0.005, 0.005, 1.45));
    let epm_m = moment_from_cylinder(&CylMagnet::new(0.1, 0.1, 1.45));
    for r_min in [0.03, 0.05, 0.15] {
        println!("--- r_min = {r_min} ---");
        let problem = ActuationProblem {
            ipms: vec![Dipole::new(Vec3::zeros(), ipm_m * Vec3::x())],
            epm_moments: vec![epm_m],
            constraints: ConstraintSet { r_min, r_max: 0.5, ..Default::default() },
            include_interagent: true,
        };
        for dof in 0..5 {
            let mut t = [0.0; 5];
            t[dof] = if dof < 2 { 0.05 } else { 0.5 };
            let target = vec![Wrench5::from_array(t)];
            let settings = SolverSettings { rng_seed: 42, ..Default::default() };
            let start = Instant::now();
            let r = solve(&target, &problem, &settings).unwrap();
            println!(
                "dof {dof}: residual {:.3e} converged {} achieved {:?} ({:.2}s)",
                r.residual, r.converged,
                r.achieved[0].as_array().map(|v| (v * 1e4).round() / 1e4),
                start.elapsed().as_secs_f64()
            );
        }
    }
}
