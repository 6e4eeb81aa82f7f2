use duomag::crosstalk::*;
use duomag::magnetics::CylMagnet;
use duomag::optimizer::{ConstraintSet, SolverSettings};
use std::time::Instant;

fn main() {
    let reference = CylMagnet::new(0.1, 0.1, 1.45);
    let mut ctx = StudyContext {
        ipm_magnet: CylMagnet::new(0.005, 0.005, 1.45),
        epm_total_volume: 2.0 * reference.volume(),
        epm_remanence: 1.45,
        constraints: ConstraintSet::default(),
        solver: SolverSettings { rng_seed: 42, ..Default::default() },
        targets: ActivationTargets::default(),
        include_interagent: true,
    };
    for (d, th, n) in [(0.15, 90.0_f64, 2usize), (0.15, 0.0, 3)] {
        for m in [10usize, 20, 40, 80] {
            ctx.solver.max_restarts = m;
            let config = IpmConfiguration { separation: d, relative_angle: th.to_radians() };
            let t0 = Instant::now();
            let (_, report) = independence_study(&config, n, &ctx).unwrap();
            print!(
                "d={d} th={th} n={n} M={m:>3}: mean={:>7.3}% ({:>5.1}s) per-dof: ",
                report.mean_crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN),
                t0.elapsed().as_secs_f64()
            );
            for rec in &report.per_dof {
                print!("{:.1} ", rec.crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN));
            }
            println!();
        }
    }
}
