use duomag::nlp::{minimize_box, BoxBounds, InnerSettings};

fn main() {
    let mut evals = std::cell::Cell::new(0u64);
    let f = |x: &[f64]| {
        evals.set(evals.get() + 1);
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    };
    let bounds = BoxBounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]);
    let s = InnerSettings { max_iters: 500, grad_tol: 1e-8, step_tol: 1e-10 };
    let r = minimize_box(&f, &[-1.2, 1.0], &bounds, &s);
    println!("x = {:?}", r.x);
    println!("value = {:.3e}, converged = {}, iters = {}, evals = {}", r.value, r.converged, r.iterations, evals.get_mut());
}
