// scratch stress harness (deleted before finalizing)
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stlcode::lasso::*;

fn solve_active_min_norm(b: &DMatrix<f64>, w: &DVector<f64>, z: &DVector<f64>, beta: f64, active: &[usize], theta: &[f64]) -> Option<DVector<f64>> {
    let k = b.nrows();
    let m = active.len();
    let ba = b.select_columns(active.iter());
    let wba = DMatrix::from_fn(k, m, |i, c| w[i] * ba[(i, c)]);
    let gram = ba.transpose() * &wba;
    let wz = w.component_mul(z);
    let mut rhs = ba.transpose() * wz;
    for idx in 0..m { rhs[idx] -= 0.5 * beta * theta[idx]; }
    let svd = gram.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    svd.solve(&rhs, eps).ok()
}

fn oracle(p: &LassoProblem) -> f64 {
    let n = p.basis.ncols();
    let mut best = lasso_objective(p, &DVector::zeros(n)).unwrap();
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let mut active = Vec::new();
        let mut theta = Vec::new();
        for j in 0..n {
            match c % 3 {
                1 => { active.push(j); theta.push(1.0); }
                2 => { active.push(j); theta.push(-1.0); }
                _ => {}
            }
            c /= 3;
        }
        if active.is_empty() { continue; }
        if let Some(sub) = solve_active_min_norm(&p.basis, &p.weights, &p.target, p.beta, &active, &theta) {
            let mut s = DVector::zeros(n);
            for (idx, &j) in active.iter().enumerate() { s[j] = sub[idx]; }
            let o = lasso_objective(p, &s).unwrap();
            if o < best { best = o; }
        }
    }
    best
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let mut worst: f64 = 0.0;
    let mut max_steps_seen = 0;
    let t0 = std::time::Instant::now();
    for trial in 0..5000 {
        let k = 2 + (rng.random::<u32>() % 7) as usize;
        let n = 1 + (rng.random::<u32>() % 6) as usize;
        let beta = 0.02 + rng.random::<f64>() * 3.0;
        let basis = DMatrix::from_fn(k, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let target = DVector::from_fn(k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let weights = DVector::from_fn(k, |_, _| 0.5 + 1.5 * rng.random::<f64>());
        let p = LassoProblem::new(basis, target, weights, beta).unwrap();
        let sol = solve_weighted_lasso_default(&p).unwrap();
        let orc = oracle(&p);
        let gap = sol.objective - orc;
        if gap > worst { worst = gap; }
        max_steps_seen = max_steps_seen.max(sol.steps);
        if gap > 1e-8 || !sol.converged {
            println!("trial {trial}: k={k} n={n} beta={beta} gap={gap:e} converged={} kkt={:e}", sol.converged, sol.kkt_residual);
        }
    }
    println!("worst gap over 5000 trials: {worst:e}; max steps: {max_steps_seen}; elapsed {:?}", t0.elapsed());
}
