use duomag::crosstalk::*;
use duomag::magnetics::CylMagnet;
use duomag::optimizer::{ConstraintSet, SolverSettings};

fn main() {
    let reference = CylMagnet::new(0.1, 0.1, 1.45);
    let ctx = StudyContext {
        ipm_magnet: CylMagnet::new(0.005, 0.005, 1.45),
        epm_total_volume: 2.0 * reference.volume(),
        epm_remanence: 1.45,
        constraints: ConstraintSet::default(),
        solver: SolverSettings { rng_seed: 42, max_restarts: 20, ..Default::default() },
        targets: ActivationTargets::default(),
        include_interagent: true,
    };
    let labels = ["t1y","t1z","f1x","f1y","f1z","t2y","t2z","f2x","f2y","f2z"];
    for (d, th, n) in [(0.15_f64, 90.0_f64, 2_usize), (0.15, 0.0, 3)] {
        println!("=== d={d} theta={th} n={n} ===");
        let config = IpmConfiguration { separation: d, relative_angle: th.to_radians() };
        let (matrix, report) = independence_study(&config, n, &ctx).unwrap();
        for (i, row) in matrix.rows.iter().enumerate() {
            let rec = &report.per_dof[i];
            print!("dof {:>3} ({:>3}): res={:.2e} xt={:>5.1}%  norm-ach: ", i + 1, labels[i], rec.residual, rec.crosstalk.map(|c| 100.0*c).unwrap_or(f64::NAN));
            for (j, v) in row.iter().enumerate() {
                if i == j { print!("[{:+.3}] ", v); } else { print!("{:+.3} ", v); }
            }
            println!();
        }
    }
}
