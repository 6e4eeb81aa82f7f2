use duomag::magnetics::{moment_from_cylinder, CylMagnet, Dipole, Wrench5};
use duomag::math::Vec3;
use duomag::optimizer::*;

fn main() {
    let ipm_m = moment_from_cylinder(&CylMagnet::new(0.005, 0.005, 1.45));
    let epm_m = moment_from_cylinder(&CylMagnet::new(0.1, 0.1, 1.45));
    let problem = ActuationProblem {
        ipms: vec![
            Dipole::new(Vec3::new(-0.075, 0.0, 0.0), ipm_m * Vec3::x()),
            Dipole::new(Vec3::new(0.075, 0.0, 0.0), ipm_m * Vec3::y()),
        ],
        epm_moments: vec![epm_m, epm_m],
        constraints: ConstraintSet::default(),
        include_interagent: false,
    };
    let target = vec![Wrench5::zero(), Wrench5::zero()];
    for k in 0..10u64 {
        let settings = SolverSettings { rng_seed: 17, max_restarts: 1, ..Default::default() };
        // emulate per-restart by shifting the base seed the same way solve does
        let s2 = SolverSettings { rng_seed: settings.rng_seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)), max_restarts: 1, ..settings };
        let r = solve(&target, &problem, &s2).unwrap();
        let cons = attraction_constraints(&r.x_best, &problem);
        println!("restart~{k}: residual {:.3e} gap_con {:+.3e} force_con {:+.3e}", r.residual, cons[1], cons[0]);
    }
}
