use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use rydberg_nqs::exact::solve_spectrum;
use rydberg_nqs::lattice::{LatticeGeometry, RydbergModel};
use rydberg_nqs_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rnqs_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn model(lx: usize, ly: usize, delta: f64) -> *mut RnqsModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { rnqs_model_new(lx, ly, 1.0, delta, 3.0, 3, &mut m) },
        RnqsStatus::Ok
    );
    assert!(!m.is_null());
    m
}

#[test]
fn spectrum_matches_core() {
    let m = model(3, 3, 1.0);
    unsafe {
        let mut n = 0;
        assert_eq!(rnqs_model_n_sites(m, &mut n), RnqsStatus::Ok);
        assert_eq!(n, 9);
        let mut spec = ptr::null_mut();
        assert_eq!(rnqs_solve_spectrum(m, 3, &mut spec), RnqsStatus::Ok);
        let (mut e0, mut gap, mut levels) = (0.0, 0.0, 0);
        rnqs_spectrum_e0(spec, &mut e0);
        rnqs_spectrum_gap(spec, &mut gap);
        rnqs_spectrum_n_levels(spec, &mut levels);
        let want = solve_spectrum(
            &RydbergModel::new(LatticeGeometry::square(3).unwrap(), 1.0, 1.0, 3.0, 3).unwrap(),
            3,
        )
        .unwrap();
        assert_eq!(e0, want.e0);
        assert_eq!(gap, want.gap.unwrap());
        assert_eq!(levels, 3);
        let mut buf = [0.0; 3];
        assert_eq!(
            rnqs_spectrum_energies(spec, buf.as_mut_ptr(), 3),
            RnqsStatus::Ok
        );
        assert_eq!(buf.to_vec(), want.energies);
        assert_eq!(
            rnqs_spectrum_energies(spec, buf.as_mut_ptr(), 2),
            RnqsStatus::BufferTooSmall
        );
        assert!(last_error().contains("3 needed"));

        let mut state = ptr::null_mut();
        assert_eq!(rnqs_spectrum_ground_state(spec, &mut state), RnqsStatus::Ok);
        let mut dim = 0;
        rnqs_state_dim(state, &mut dim);
        assert_eq!(dim, 512);
        let mut probs = vec![0.0; dim];
        assert_eq!(
            rnqs_state_probabilities(state, probs.as_mut_ptr(), dim),
            RnqsStatus::Ok
        );
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut f = 0.0;
        rnqs_state_fidelity(state, state, &mut f);
        assert!((f - 1.0).abs() < 1e-12);
        let mut stag = 0.0;
        assert_eq!(
            rnqs_state_staggered_magnetization(state, m, &mut stag),
            RnqsStatus::Ok
        );
        assert!(stag > 0.0 && stag <= 0.5);
        let mut draws = vec![0u64; 100];
        assert_eq!(
            rnqs_state_sample(state, 100, 7, draws.as_mut_ptr()),
            RnqsStatus::Ok
        );
        assert!(draws.iter().all(|&i| probs[i as usize] > 0.0));

        rnqs_state_free(state);
        rnqs_spectrum_free(spec);
        rnqs_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            rnqs_model_new(0, 3, 1.0, 0.0, 3.0, 3, &mut m),
            RnqsStatus::InvalidArgument
        );
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            rnqs_model_new(2, 2, 1.0, 0.0, 3.0, 3, ptr::null_mut()),
            RnqsStatus::NullPointer
        );
        let mut n = 0;
        assert_eq!(
            rnqs_model_n_sites(ptr::null(), &mut n),
            RnqsStatus::NullPointer
        );
        assert!(last_error().contains("model"));

        let big = model(5, 5, 0.0);
        let mut spec = ptr::null_mut();
        assert_eq!(rnqs_solve_spectrum(big, 1, &mut spec), RnqsStatus::TooLarge);
        rnqs_model_free(big);

        let small = model(2, 2, 0.0);
        let bits = [1u8, 0, 2, 0];
        let mut e = 0.0;
        assert_eq!(
            rnqs_model_diagonal_energy(small, bits.as_ptr(), 4, &mut e),
            RnqsStatus::InvalidArgument
        );
        let ok = [1u8, 0, 0, 1];
        assert_eq!(
            rnqs_model_diagonal_energy(small, ok.as_ptr(), 3, &mut e),
            RnqsStatus::LengthMismatch
        );
        assert_eq!(
            rnqs_model_diagonal_energy(small, ok.as_ptr(), 4, &mut e),
            RnqsStatus::Ok
        );
        assert!(last_error().is_empty());
        // one diagonal pair at r² = 2, so V₀ / 8
        assert!((e - 3.0 / 8.0).abs() < 1e-12);
        rnqs_model_free(small);
        rnqs_model_free(ptr::null_mut());
    }
}

#[test]
fn rnn_trains_through_handles() {
    let m = model(2, 2, 1.0);
    unsafe {
        let mut wf = ptr::null_mut();
        assert_eq!(rnqs_rnn_new(m, 6, 3, &mut wf), RnqsStatus::Ok);
        let bits = [0u8, 1, 1, 0];
        let mut lp = 0.0;
        assert_eq!(
            rnqs_rnn_log_psi(wf, bits.as_ptr(), 4, &mut lp),
            RnqsStatus::Ok
        );
        assert!(lp < 0.0);
        let mut before = 0.0;
        rnqs_rnn_exact_energy(wf, m, &mut before);
        let mut curve = vec![0.0; 150];
        assert_eq!(
            rnqs_rnn_train(wf, m, 200, 150, 0.01, 5, curve.as_mut_ptr()),
            RnqsStatus::Ok
        );
        let mut after = 0.0;
        rnqs_rnn_exact_energy(wf, m, &mut after);
        assert!(after < before);
        assert!(curve.iter().all(|e| e.is_finite()));
        rnqs_rnn_free(wf);
        rnqs_model_free(m);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(rnqs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/rydberg_nqs.h")).unwrap();
    for name in [
        "rnqs_model_new",
        "rnqs_solve_spectrum",
        "rnqs_state_sample",
        "rnqs_rnn_train",
        "rnqs_last_error",
        "RNQS_STATUS_BUFFER_TOO_SMALL",
        "typedef struct RnqsModel RnqsModel",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    let Ok(out) = Command::new("cc")
        .args([
            "-fsyntax-only",
            "-Wall",
            "-Werror",
            "-x",
            "c",
            "-include",
            "stddef.h",
        ])
        .arg(format!("{dir}/include/rydberg_nqs.h"))
        .output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
