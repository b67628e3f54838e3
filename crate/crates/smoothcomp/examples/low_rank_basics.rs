//! Tour of the linear-algebra kernels: SVD, truncation, and the
//! Eckart-Young optimality that model compression relies on.
//!
//! ```text
//! cargo run --release --example low_rank_basics
//! ```

use smoothcomp::tensor::Tensor;

fn main() {
    // A 6x4 matrix built from two rank-1 terms plus a little noise.
    let mut data = Vec::new();
    for i in 0..6 {
        for j in 0..4 {
            let smooth = (i as f64 * 0.4).sin() * (j as f64 * 0.7).cos();
            let ramp = 0.3 * i as f64 * (j as f64 - 1.5);
            let noise = 0.01 * ((i * 4 + j) as f64 * 2.39).sin();
            data.push(smooth + ramp + noise);
        }
    }
    let a = Tensor::new([6, 4], data).unwrap();

    let f = a.svd().unwrap();
    println!("singular values: {:?}", f.sigma());
    println!(
        "reconstruction error at full rank: {:.2e}",
        f.reconstruct().sub(&a).unwrap().frobenius_norm()
    );

    println!("\nrank | storage (vs 24) | frobenius error | tail-energy bound");
    for r in 1..=4 {
        let (w1, w2) = f.truncate(r).unwrap();
        let approx = w2.matmul(&w1).unwrap();
        let err = a.sub(&approx).unwrap().frobenius_norm();
        let tail: f64 = f.sigma()[r..].iter().map(|s| s * s).sum();
        let stored = w1.numel() + w2.numel();
        println!(
            "  {r}  |    {stored:2}         |    {err:.6}     |    {:.6}",
            tail.sqrt().max(0.0)
        );
    }

    // Eckart-Young in action: no random rank-1 matrix does better than the
    // truncated SVD.
    let (w1, w2) = f.truncate(1).unwrap();
    let best = a.sub(&w2.matmul(&w1).unwrap()).unwrap().frobenius_norm();
    let mut state = 1u64;
    let mut rand = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut closest = f64::INFINITY;
    for _ in 0..10_000 {
        let u = Tensor::new([6, 1], (0..6).map(|_| rand()).collect()).unwrap();
        let v = Tensor::new([1, 4], (0..4).map(|_| rand()).collect()).unwrap();
        let cand = u.matmul(&v).unwrap();
        let scale = a
            .data()
            .iter()
            .zip(cand.data())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / cand.frobenius_norm().powi(2);
        let err = a.sub(&cand.scale(scale)).unwrap().frobenius_norm();
        closest = closest.min(err);
    }
    println!("\ntruncated-SVD rank-1 error: {best:.6}");
    println!("best of 10,000 random rank-1 candidates: {closest:.6}");
}
