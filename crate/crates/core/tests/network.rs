use pilotsim::network::{generate_drop, AssociationMap, NetworkConfig, PathLoss};

fn small(num_aps: usize, num_ues: usize) -> NetworkConfig {
    NetworkConfig {
        num_aps,
        num_ues,
        ..NetworkConfig::default()
    }
}

#[test]
fn lsfc_positive_and_finite_over_many_drops() {
    let cfg = small(10, 10);
    for seed in 0..10_000u64 {
        let real = generate_drop(&cfg, seed).unwrap();
        assert!(real.beta.iter().all(|b| b.is_finite() && *b > 0.0), "seed {seed}");
        let assoc = AssociationMap::build(&real, cfg.assoc_threshold);
        assert!(assoc.serving_aps.iter().all(|s| !s.is_empty()), "seed {seed}");
    }
}

#[test]
fn path_loss_at_500_m() {
    // 140.7 + 35 log10(0.5)
    let loss = PathLoss::default().loss_db(500.0);
    assert!((loss - 130.164).abs() < 1e-3, "{loss}");
}

#[test]
fn shadowing_residual_is_zero_median_with_configured_spread() {
    let cfg = NetworkConfig::desk_scale();
    let mut far = Vec::new();
    let mut near_residual = 0.0f64;
    for seed in 0..40u64 {
        let real = generate_drop(&cfg, seed).unwrap();
        for (m, ap) in real.ap_positions.iter().enumerate() {
            for (t, ue) in real.ue_positions.iter().enumerate() {
                let d = (ap[0] - ue[0]).hypot(ap[1] - ue[1]);
                let residual = 10.0 * real.beta[[m, t]].log10() + cfg.pathloss.loss_db(d);
                if d > cfg.pathloss.d1_m {
                    far.push(residual);
                } else {
                    near_residual = near_residual.max(residual.abs());
                }
            }
        }
    }
    assert!(near_residual < 1e-9, "no shadowing inside d1: {near_residual}");

    far.sort_by(f64::total_cmp);
    let n = far.len() as f64;
    let median = far[far.len() / 2];
    let mean = far.iter().sum::<f64>() / n;
    let sd = (far.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // n is about 6e4, so the sampling error of each statistic is well below 0.2 dB
    assert!(median.abs() < 0.2, "median {median}");
    assert!((sd - cfg.shadow_sigma_db).abs() < 0.2, "sd {sd}");
}

#[test]
fn wrap_around_never_increases_path_loss() {
    let plain = NetworkConfig::desk_scale();
    let wrapped = NetworkConfig {
        wrap_around: true,
        shadow_sigma_db: 0.0,
        ..plain.clone()
    };
    let plain = NetworkConfig {
        shadow_sigma_db: 0.0,
        ..plain
    };
    for seed in 0..5u64 {
        let a = generate_drop(&plain, seed).unwrap();
        let b = generate_drop(&wrapped, seed).unwrap();
        assert_eq!(a.ap_positions, b.ap_positions);
        assert!(a.beta.iter().zip(b.beta.iter()).all(|(x, y)| y >= x));
    }
}
