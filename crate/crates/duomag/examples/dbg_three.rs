use duomag::crosstalk::*;
use duomag::magnetics::CylMagnet;
use duomag::optimizer::{ConstraintSet, SolverSettings};
use std::time::Instant;

fn main() {
    let reference = CylMagnet::new(0.1, 0.1, 1.45);
    for (leak, m) in [(10.0, 20usize), (10.0, 40), (20.0, 10), (20.0, 20), (30.0, 20)] {
        let ctx = StudyContext {
            ipm_magnet: CylMagnet::new(0.005, 0.005, 1.45),
            epm_total_volume: 2.0 * reference.volume(),
            epm_remanence: 1.45,
            constraints: ConstraintSet::default(),
            solver: SolverSettings { rng_seed: 42, max_restarts: m, ..Default::default() },
            targets: ActivationTargets::default(),
            include_interagent: true,
            leak_weight: leak,
        };
        let config = IpmConfiguration { separation: 0.15, relative_angle: 0.0 };
        let t0 = Instant::now();
        let (_, report) = independence_study(&config, 3, &ctx).unwrap();
        print!(
            "leak={leak:>4} M={m:>3}: mean={:>6.3}% ({:>5.1}s) per-dof: ",
            report.mean_crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN),
            t0.elapsed().as_secs_f64()
        );
        for rec in &report.per_dof {
            print!("{:.1} ", rec.crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN));
        }
        println!();
    }
}
