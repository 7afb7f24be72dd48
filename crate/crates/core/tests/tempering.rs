mod common;

use common::*;
use proptest::prelude::*;
use spectemp::spectral::{eigendecompose, fit_spectrum};
use spectemp::tempering::{detect_knee, derive_gamma, noise_floor, snr_profile, SnrProfile};
use spectemp::{FitConfig, SpectralModel};

#[test]
fn eigenvalues_agree_with_jacobi() {
    let mut r = rng(3);
    for d in [1usize, 2, 3, 7, 16, 33] {
        let m = random_psd(d, &mut r);
        let ours = eigendecompose(&m).unwrap().values;
        let oracle = jacobi_eigenvalues(&m);
        let scale = oracle[0].max(1.0);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * scale, "d={d}: {a} vs {b}");
        }
    }
}

#[test]
fn fit_recovers_a_diagonal_population() {
    let x = gaussian_corpus(50_000, &[4.0, 1.0], None, &mut rng(11));
    let s = fit_spectrum(&x, 1_000_000, 1999).unwrap();
    assert!((s.eigenvalues[0] / 4.0 - 1.0).abs() < 0.05, "{:?}", s.eigenvalues);
    assert!((s.eigenvalues[1] / 1.0 - 1.0).abs() < 0.05, "{:?}", s.eigenvalues);
    assert!(s.eigenvector(0)[0].abs() > 0.999);
    assert!(s.eigenvector(1)[1].abs() > 0.999);
}

#[test]
fn fit_is_rotation_equivariant() {
    let mut r = rng(12);
    let d = 6;
    let variances = [9.0, 5.0, 3.0, 2.0, 1.0, 0.5];
    let x = gaussian_corpus(3000, &variances, None, &mut r);
    let rot = orthogonal(d, &mut r);
    let rotated: Vec<f32> = x
        .iter_rows()
        .flat_map(|row| {
            (0..d)
                .map(|i| (0..d).map(|j| rot[i * d + j] * f64::from(row[j])).sum::<f64>() as f32)
                .collect::<Vec<_>>()
        })
        .collect();
    let xr = spectemp::EmbeddingMatrix::new(3000, d, rotated).unwrap();
    let a = fit_spectrum(&x, usize::MAX, 1).unwrap();
    let b = fit_spectrum(&xr, usize::MAX, 1).unwrap();
    for (p, q) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert!((p - q).abs() <= 1e-5 * p, "{p} vs {q}");
    }
    for i in 0..d {
        let u = a.eigenvector(i);
        let ru: Vec<f64> = (0..d).map(|r| (0..d).map(|c| rot[r * d + c] * u[c]).sum()).collect();
        let cos: f64 = ru.iter().zip(b.eigenvector(i)).map(|(p, q)| p * q).sum();
        assert!(cos.abs() > 1.0 - 1e-4, "vector {i}: {cos}");
    }
}

#[test]
fn noise_floor_tracks_the_marchenko_pastur_tail() {
    // Eq. 3 averages the smallest eigenvalues, which sit in the lower edge
    // of the noise bulk; at n = 100 d that is about 0.86 sigma^2
    let (d, r, n) = (64usize, 8usize, 6400usize);
    let mut variances = vec![1.0; d];
    for (i, v) in variances.iter_mut().take(r).enumerate() {
        *v = 50.0 - 5.0 * i as f64;
    }
    let tail = 7.0; // ceil(0.1 * 64)
    let expected = mp_lower_tail_mean((d - r) as f64 / n as f64, tail / (d - r) as f64);
    for seed in 0..3 {
        let mut g = rng(100 + seed);
        let rot = orthogonal(d, &mut g);
        let x = gaussian_corpus(n, &variances, Some(&rot), &mut g);
        let model = SpectralModel::fit(&x, &FitConfig::default()).unwrap();
        let floor = model.profile.noise_floor;
        assert!((floor / expected - 1.0).abs() < 0.03, "{floor} vs {expected}");
    }
}

#[test]
fn knee_matches_chord_oracle_on_reciprocal_curves() {
    for m in [20usize, 50, 128, 400] {
        for shift in [0.5, 1.0, 3.0, 10.0] {
            for power in [0.5, 1.0, 2.0] {
                let y: Vec<f64> = (0..m).map(|i| 1.0 / (i as f64 + shift).powf(power)).collect();
                let ours = detect_knee(&y).unwrap();
                let oracle = chord_knee(&y);
                assert!(ours.abs_diff(oracle) <= 2, "m={m} shift={shift} p={power}: {ours} vs {oracle}");
            }
        }
    }
}

#[test]
fn knee_matches_piecewise_breakpoint() {
    for m in [20usize, 64, 200] {
        for b in [3usize, m / 4, m / 2] {
            let y: Vec<f64> = (1..=m)
                .map(|i| {
                    if i <= b {
                        100.0 - 90.0 * (i - 1) as f64 / (b - 1) as f64
                    } else {
                        10.0 - 9.0 * (i - b) as f64 / (m - b) as f64
                    }
                })
                .collect();
            let ours = detect_knee(&y).unwrap();
            assert!(ours.abs_diff(b) <= 1, "m={m} b={b}: {ours}");
        }
    }
}

fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec((1usize..6, 1.5f64..200.0), 0..4),
        8usize..80,
        0.2f64..3.0,
        prop::collection::vec(0.9f64..1.1, 80),
    )
        .prop_map(|(tiers, noise_dims, sigma2, jitter)| {
            let mut ev: Vec<f64> = tiers
                .iter()
                .flat_map(|&(c, v)| std::iter::repeat(v * sigma2).take(c))
                .collect();
            ev.extend((0..noise_dims).map(|i| sigma2 * jitter[i]));
            ev.sort_by(|a, b| b.total_cmp(a));
            ev
        })
}

proptest! {
    #[test]
    fn gamma_is_monotone_with_plateau(ev in spectrum_strategy(), tail in 0.05f64..0.3) {
        let p = SnrProfile::from_eigenvalues(&ev, tail).unwrap();
        let gammas: Vec<f64> = (1..=ev.len()).map(|k| p.gamma(k).unwrap()).collect();
        for w in gammas.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for (k, &g) in gammas.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&g));
            if p.snr[k] == 0.0 {
                prop_assert_eq!(g, 0.0);
            }
        }
        if let Some(knee) = p.knee_index {
            prop_assert!(gammas[..knee].iter().all(|&g| g == 1.0));
            prop_assert_eq!(p.reference_snr, p.snr[knee - 1]);
            let k = ev.len();
            prop_assert_eq!(derive_gamma(&p.snr, knee, k).unwrap(), gammas[k - 1]);
        } else {
            prop_assert!(gammas.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn snr_matches_eq4(ev in spectrum_strategy(), tail in 0.05f64..0.3) {
        let floor = noise_floor(&ev, tail).unwrap();
        let snr = snr_profile(&ev, floor);
        for (l, s) in ev.iter().zip(&snr) {
            prop_assert_eq!(*s, ((l - floor) / floor).max(0.0));
        }
        for w in snr.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}
