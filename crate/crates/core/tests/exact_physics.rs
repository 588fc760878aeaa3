use rydberg_nqs::exact::{solve_spectrum, staggered_magnetization, StateVector};
use rydberg_nqs::lattice::{connected_configs, diagonal_energy};
use rydberg_nqs::{Configuration, LatticeGeometry, RydbergModel};

fn model(lx: usize, ly: usize, delta: f64) -> RydbergModel {
    RydbergModel::new(LatticeGeometry::new(lx, ly).unwrap(), 1.0, delta, 3.0, 3).unwrap()
}

/// `(Hψ)(σ) / ψ(σ)` assembled from the sparse matrix elements.
fn local_value(state: &StateVector, sigma: &Configuration, m: &RydbergModel) -> f64 {
    let psi = state.amplitude(sigma.to_index());
    let off: num_complex::Complex64 = connected_configs(sigma, m)
        .into_iter()
        .map(|(c, v)| state.amplitude(c.to_index()) * v)
        .sum();
    diagonal_energy(sigma, m).unwrap() + (off / psi).re
}

#[test]
fn ground_state_has_constant_local_energy() {
    for (lx, ly, delta) in [(2, 2, 0.5), (3, 3, 1.5), (3, 2, -1.0)] {
        let m = model(lx, ly, delta);
        let spec = solve_spectrum(&m, 1).unwrap();
        let n = m.n_sites();
        let mut checked = 0;
        for s in 0..1u64 << n {
            if spec.ground.amplitude(s).norm() < 1e-4 {
                continue;
            }
            let e = local_value(&spec.ground, &Configuration::from_index(s, n), &m);
            assert!(
                (e - spec.e0).abs() < 1e-7,
                "{lx}x{ly} delta {delta}: {e} vs {}",
                spec.e0
            );
            checked += 1;
        }
        assert!(checked > 0);
    }
}

#[test]
fn ground_energy_decreases_with_detuning() {
    // dE0/dδ = −⟨Σ n⟩ ≤ 0.
    let mut last = f64::INFINITY;
    for i in 0..=20 {
        let delta = -5.0 + 0.5 * i as f64;
        let e0 = solve_spectrum(&model(3, 3, delta), 1).unwrap().e0;
        assert!(e0 <= last + 1e-10, "delta {delta}");
        last = e0;
    }
}

#[test]
fn deep_detuning_limits() {
    // Large negative detuning: every atom unexcited, E0/N ≈ −Ω²/(4|δ|).
    let spec = solve_spectrum(&model(3, 3, -40.0), 1).unwrap();
    assert!((spec.e0 / 9.0 + 1.0 / 160.0).abs() < 1e-3);
    // The empty 3×3 array still reads |5 − 4| / (2·9) from the odd site count.
    let m = staggered_magnetization(&spec.ground, &LatticeGeometry::square(3).unwrap()).unwrap();
    assert!((m - 1.0 / 18.0).abs() < 1e-3, "{m}");
    // Ordered side on 3×3: the five-atom checkerboard is the most likely
    // configuration.
    let spec = solve_spectrum(&model(3, 3, 4.0), 1).unwrap();
    let checkerboard: u64 = [0, 2, 4, 6, 8].iter().map(|j| 1u64 << j).sum();
    let probs = spec.ground.probabilities();
    let best = (0..probs.len())
        .max_by(|a, b| probs[*a].total_cmp(&probs[*b]))
        .unwrap();
    assert_eq!(best as u64, checkerboard);
}
