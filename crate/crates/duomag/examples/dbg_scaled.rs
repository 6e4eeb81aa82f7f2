use duomag::crosstalk::*;
use duomag::magnetics::{moment_from_cylinder, CylMagnet, Wrench5, WrenchStack};
use duomag::optimizer::*;

fn main() {
    let reference = CylMagnet::new(0.1, 0.1, 1.45);
    let ipm_m = moment_from_cylinder(&CylMagnet::new(0.005, 0.005, 1.45));
    let epm_m = moment_from_cylinder(&reference);
    let targets = ActivationTargets::default();
    let (ipm1, ipm2) = build_ipm_pair(0.15, 90.0_f64.to_radians(), ipm_m);
    let problem = ActuationProblem {
        ipms: vec![ipm1, ipm2],
        epm_moments: vec![epm_m, epm_m],
        constraints: ConstraintSet::default(),
        include_interagent: true,
    };
    let settings = SolverSettings { rng_seed: 42, max_restarts: 10, ..Default::default() };
    for dof in [1usize, 4, 7, 10] {
        for scale in [0.05, 0.2, 0.5, 1.0] {
            let t = unit_target(dof, &targets).unwrap();
            let arr = t.as_array().map(|v| v * scale);
            let scaled = WrenchStack::from_array(arr);
            let tv = vec![scaled.w1, scaled.w2];
            let r = solve(&tv, &problem, &settings).unwrap();
            let ach = WrenchStack::new(r.achieved[0], r.achieved[1]);
            let ct = crosstalk(&ach, dof, &targets).map(|c| 100.0 * c).unwrap_or(f64::NAN);
            let norm = targets.normalize(&ach);
            println!(
                "dof {dof} scale {scale:>4}: res {:.2e} xtalk {:>6.2}% achieved_i {:+.4}",
                r.residual, ct, norm[dof - 1]
            );
        }
        println!();
    }
}
