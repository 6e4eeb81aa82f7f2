use duomag::magnetics::{moment_from_cylinder, CylMagnet, Dipole, Wrench5};
use duomag::math::Vec3;
use duomag::nlp;
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
    let settings = SolverSettings { rng_seed: 17, ..Default::default() };
    let target = vec![Wrench5::zero(), Wrench5::zero()];
    let r = solve(&target, &problem, &settings).unwrap();
    println!("residual {:.6e} converged {}", r.residual, r.converged);
    for (i, p) in r.x_best.poses.iter().enumerate() {
        println!("epm{}: az {:.4} el {:.4} r {:.4} maz {:.4} mel {:.4}", i, p.azimuth, p.elevation, p.radius, p.moment_azimuth, p.moment_elevation);
    }
    println!("achieved: {:?}", r.achieved.iter().map(|w| w.as_array()).collect::<Vec<_>>());
    println!("constraints: {:?}", attraction_constraints(&r.x_best, &problem));

    // gradient at solution
    let g = objective_gradient(&r.x_best, &target, &problem, &settings).unwrap();
    println!("grad: {:?}", g);

    // manual polish from here with prints
    let resid_fn = |v: &[f64]| {
        achieved_wrenches(&EpmPoseVector::from_flat(v), &problem).ok().map(|a| {
            a.iter().zip(&target).flat_map(|(aw, tw)| {
                let wa = aw.as_array(); let ta = tw.as_array();
                (0..5).map(move |i| {
                    let w = if i < 2 { 20.0 } else { 2.0 };
                    w * (wa[i] - ta[i])
                })
            }).collect::<Vec<f64>>()
        })
    };
    use std::f64::consts::{FRAC_PI_2, PI};
    let c = &problem.constraints;
    let bounds = nlp::BoxBounds::new(
        vec![-PI, -FRAC_PI_2, c.r_min, -PI, -FRAC_PI_2, -PI, -FRAC_PI_2, c.r_min, -PI, -FRAC_PI_2],
        vec![PI, FRAC_PI_2, c.r_max, PI, FRAC_PI_2, PI, FRAC_PI_2, c.r_max, PI, FRAC_PI_2],
    );
    let (xp, fp) = nlp::polish_least_squares(resid_fn, |_| true, &r.x_best.to_flat(), &bounds, 500, 1e-14);
    println!("after forced polish: {:.6e}", fp);
    let _ = xp;
}
