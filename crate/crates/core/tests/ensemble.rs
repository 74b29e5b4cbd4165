use sparse_ssk::ensemble::*;
use sparse_ssk::error::LabError;
use sparse_ssk::numeric::sample_variance;
use sparse_ssk::spectra::eigenvalues;

#[test]
fn z_variance_matches_two_sigma_squared() {
    let cfg = EnsembleConfig::new(2000, 0.3, 3);
    let zs: Vec<f64> = (0..500)
        .map(|t| scalar_statistics(&cfg, &sample_matrix(&cfg, t).unwrap()).z_statistic)
        .collect();
    let ratio = sample_variance(&zs).unwrap() / (2.0 * cfg.sigma().powi(2));
    assert!((0.8..=1.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn moment_audit_pins_low_moments() {
    let cfg = EnsembleConfig::new(400, 0.3, 5);
    let audit = moment_audit(&cfg, 100, 6).unwrap();
    let k2 = &audit.rows[0];
    assert_eq!(k2.k, 2);
    // binomial error on the nonzero count, a few percent here
    assert!((k2.empirical * 400.0 - 1.0).abs() < 0.05, "{}", k2.empirical);
    let k4 = &audit.rows[1];
    let exact = 400f64.powf(-1.0 - 2.0 * 0.3);
    assert!((k4.exact - exact).abs() < 1e-15 * exact.max(1.0));
    assert!((k4.ratio - 1.0).abs() < 0.05);
    assert!(matches!(moment_audit(&cfg, 0, 4), Err(LabError::InsufficientTrials { got: 0, need: 100 })));
}

#[test]
fn moment_scaling_across_sizes() {
    for n in [500, 1000, 2000] {
        for phi in [0.2, 0.35, 0.45] {
            let audit = moment_audit(&EnsembleConfig::new(n, phi, 9), 100, 6).unwrap();
            assert!(!audit.any_flagged(), "n={n} phi={phi}: {:?}", audit.rows);
        }
    }
}

#[test]
fn gaussian_variant_has_unit_variance_profile() {
    let cfg = EnsembleConfig::new(1000, 0.3, 2).with_law(EntryLaw::DilutedGaussian);
    let audit = moment_audit(&cfg, 100, 4).unwrap();
    assert!((audit.rows[0].ratio - 1.0).abs() < 0.05);
    // E g^4 = 3
    assert!((cfg.entry_abs_moment(4) / EnsembleConfig::new(1000, 0.3, 2).entry_abs_moment(4) - 3.0).abs() < 1e-12);
}

#[test]
fn sampling_is_reproducible_across_threads() {
    let cfg = EnsembleConfig::new(300, 0.35, 77);
    let serial: Vec<MatrixSample> = (0..4).map(|t| sample_matrix(&cfg, t).unwrap()).collect();
    let threaded: Vec<MatrixSample> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).rev().map(|t| s.spawn({
            let cfg = cfg.clone();
            move || sample_matrix(&cfg, t).unwrap()
        })).collect();
        let mut v: Vec<MatrixSample> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        v.reverse();
        v
    });
    for (a, b) in serial.iter().zip(&threaded) {
        assert!(a.entries.iter().zip(&b.entries).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.config_hash, b.config_hash);
    }
    assert_ne!(serial[0].entries, serial[1].entries);
}

#[test]
fn z_from_entries_matches_spectrum() {
    let cfg = EnsembleConfig::new(300, 0.25, 4);
    for t in 0..5 {
        let m = sample_matrix(&cfg, t).unwrap();
        let z_entries = scalar_statistics(&cfg, &m).z_statistic;
        let s = eigenvalues(&m).unwrap();
        let z_eig = s.eigenvalues.iter().map(|x| x * x).sum::<f64>() / 300.0 - 1.0;
        assert!((z_entries - z_eig).abs() <= 1e-10 * (1.0 + z_entries.abs()), "{z_entries} vs {z_eig}");
        assert_eq!(s.z_statistic, z_entries);
    }
}

#[test]
fn matrices_are_exactly_symmetric() {
    for phi in [0.1, 0.3, 0.45] {
        let m = sample_matrix(&EnsembleConfig::new(200, phi, 1).with_law(EntryLaw::DilutedGaussian), 3).unwrap();
        assert_eq!(m.max_asymmetry(), 0.0);
    }
}
