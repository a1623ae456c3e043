//! Temporary tuning probe (deleted before release).

use distgp::sim::{self, SimConfig};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}

#[test]
#[ignore]
fn probe_sigma_omega_sweep() {
    for seed in [1u64, 2] {
        for sigma_omega in [1e-3, 3e-3, 1e-2, 3e-2] {
            let mut config = SimConfig::default();
            config.seed = seed;
            config.sigma_omega = sigma_omega;
            let distkp = sim::run_distkp(&config).unwrap();
            let mut lambdas = Vec::new();
            for lam in [0.9, 0.99, 0.999] {
                let base = sim::run_forgetting_baseline(&config, lam).unwrap();
                lambdas.push(base.final_rmse());
            }
            let best = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "seed={seed} sw={sigma_omega:.0e}: distkp={:.4} baselines={:.4}/{:.4}/{:.4} best={:.4} margin={:+.1}%",
                distkp.final_rmse(),
                lambdas[0], lambdas[1], lambdas[2],
                best,
                100.0 * (best - distkp.final_rmse()) / best
            );
        }
    }
}

#[test]
#[ignore]
fn probe_oracle_vs_isolated() {
    for (n, e, t, sw) in [
        (9usize, 36usize, 120u64, 1e-2),
        (9, 36, 400, 1e-2),
        (16, 100, 300, 1e-2),
        (9, 36, 120, 1e-3),
    ] {
        let mut oracle_mean = 0.0;
        let mut worst_agent = vec![0.0f64; n];
        let seeds = [1u64, 2, 3];
        for seed in seeds {
            let mut config = SimConfig::default();
            config.n_agents = n;
            config.feature_count = e;
            config.horizon = t;
            config.sigma_omega = sw;
            config.checkpoints = vec![t];
            config.eval_grid = 25;
            config.seed = seed;
            let oracle = sim::run_centralized_oracle(&config).unwrap();
            oracle_mean += oracle.final_rmse() / seeds.len() as f64;
            config.consensus_enabled = false;
            let iso = sim::run_distkp(&config).unwrap();
            let cp = iso.checkpoint_at(t).unwrap();
            for (i, r) in cp.rmse_per_agent.iter().enumerate() {
                worst_agent[i] += r / seeds.len() as f64;
            }
        }
        let min = worst_agent.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = worst_agent.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "n={n} E={e} T={t} sw={sw:.0e}: oracle={oracle_mean:.4} agents=[{min:.4},{max:.4}] ok={}",
            oracle_mean < min
        );
    }
}

#[test]
#[ignore]
fn probe_default_scenario() {
    let mut config = SimConfig::default();
    config.seed = 1;
    let t0 = std::time::Instant::now();
    let distkp = sim::run_distkp(&config).unwrap();
    println!("distkp run took {:.2?}", t0.elapsed());

    for lam in [0.9, 0.99, 0.999] {
        let t1 = std::time::Instant::now();
        let base = sim::run_forgetting_baseline(&config, lam).unwrap();
        println!(
            "baseline lambda={lam}: final_rmse={:.4} (took {:.2?})",
            base.final_rmse(),
            t1.elapsed()
        );
    }
    let t2 = std::time::Instant::now();
    let oracle = sim::run_centralized_oracle(&config).unwrap();
    println!("oracle: final_rmse={:.4} (took {:.2?})", oracle.final_rmse(), t2.elapsed());

    println!("distkp final_rmse={:.4}", distkp.final_rmse());
    for cp in &distkp.checkpoints {
        let truth = distkp.truth_at_step(cp.step);
        let mut rs = Vec::new();
        for est in &cp.estimates {
            let (means, _) =
                sim::field_estimate(est, &distkp.basis, &distkp.eval_grid).unwrap();
            rs.push(pearson(means.as_slice(), truth.as_slice()));
        }
        let min_r = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean_r = rs.iter().sum::<f64>() / rs.len() as f64;
        println!(
            "checkpoint {}: rmse(mean)={:.4} pearson min={:.3} mean={:.3}",
            cp.step,
            cp.rmse_per_agent.iter().sum::<f64>() / cp.rmse_per_agent.len() as f64,
            min_r,
            mean_r
        );
    }
    println!(
        "mean step time [0,100)={:.1}us [500,600)={:.1}us",
        distkp.mean_step_micros(0..100),
        distkp.mean_step_micros(500..600)
    );
    println!("disconnected steps: {}", distkp.disconnected_steps.len());
    let truth_norm: f64 = {
        let t = distkp.truth_at_step(600);
        (t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64).sqrt()
    };
    println!("truth RMS at t=600: {truth_norm:.4}");
}
