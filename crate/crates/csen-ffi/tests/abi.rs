//! Exercises every exported C-ABI function through the declared calling
//! conventions: handle lifecycles, out-pointer writes, status codes and
//! the thread-local error message.

use std::ffi::{CStr, CString};

use csen_ffi::*;

fn ok(status: CsenStatus) {
    assert_eq!(status, CsenStatus::Ok, "unexpected failure: {}", last_error());
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(csen_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(csen_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn matrix_lifecycle_and_csm1_roundtrip() {
    unsafe {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut m: *mut CsenMatrix = std::ptr::null_mut();
        ok(csen_matrix_create(2, 3, data.as_ptr(), &mut m));
        assert_eq!(csen_matrix_rows(m), 2);
        assert_eq!(csen_matrix_cols(m), 3);
        let back = std::slice::from_raw_parts(csen_matrix_data(m), 6);
        assert_eq!(back, &data);

        let dir = std::env::temp_dir().join("csen_ffi_csm1");
        std::fs::create_dir_all(&dir).unwrap();
        let path = CString::new(dir.join("m.csm1").to_str().unwrap()).unwrap();
        ok(csen_matrix_save_csm1(m, path.as_ptr()));
        let mut loaded: *mut CsenMatrix = std::ptr::null_mut();
        ok(csen_matrix_load_csm1(path.as_ptr(), &mut loaded));
        let back = std::slice::from_raw_parts(csen_matrix_data(loaded), 6);
        assert_eq!(back, &data);
        csen_matrix_free(m);
        csen_matrix_free(loaded);
        std::fs::remove_dir_all(&dir).ok();
    }
}

#[test]
fn null_pointers_are_reported_not_crashed() {
    unsafe {
        let mut m: *mut CsenMatrix = std::ptr::null_mut();
        let st = csen_matrix_create(2, 2, std::ptr::null(), &mut m);
        assert_eq!(st, CsenStatus::NullPointer);
        assert!(!last_error().is_empty());

        let st = csen_matrix_load_csm1(std::ptr::null(), &mut m);
        assert_eq!(st, CsenStatus::NullPointer);
    }
}

#[test]
fn missing_file_maps_to_io_error() {
    unsafe {
        let mut m: *mut CsenMatrix = std::ptr::null_mut();
        let path = CString::new("/definitely/not/here.csm1").unwrap();
        let st = csen_matrix_load_csm1(path.as_ptr(), &mut m);
        assert_eq!(st, CsenStatus::IoError);
    }
}

#[test]
fn gaussian_proxy_solver_pipeline() {
    unsafe {
        let (m_rows, n) = (8usize, 16usize);
        let mut d: *mut CsenMatrix = std::ptr::null_mut();
        ok(csen_matrix_gaussian(m_rows, n, 42, &mut d));

        // Two-sparse ground truth.
        let mut x = vec![0.0f64; n];
        x[3] = 1.25;
        x[11] = -0.75;
        let dd = std::slice::from_raw_parts(csen_matrix_data(d), m_rows * n);
        let mut y = vec![0.0f64; m_rows];
        for r in 0..m_rows {
            for c in 0..n {
                y[r] += dd[r * n + c] * x[c];
            }
        }

        // Proxy: build and apply.
        let mut proxy: *mut CsenProxy = std::ptr::null_mut();
        ok(csen_proxy_build(d, 1, 1e-2, 4, 4, &mut proxy));
        let mut plane = vec![0.0f64; n];
        ok(csen_proxy_apply(proxy, y.as_ptr(), m_rows, plane.as_mut_ptr()));

        // OMP recovers the exact support.
        let mut x_hat = vec![0.0f64; n];
        let mut info = CsenSolverInfo {
            iterations: 0,
            converged: 0,
            objective: f64::NAN,
        };
        ok(csen_solve_omp(d, y.as_ptr(), m_rows, 2, 1e-9, x_hat.as_mut_ptr(), &mut info));
        assert_eq!(info.converged, 1);
        assert!((x_hat[3] - 1.25).abs() < 1e-8);
        assert!((x_hat[11] + 0.75).abs() < 1e-8);

        // Lasso with uniform explicit weights equals plain lasso.
        let mut xa = vec![0.0f64; n];
        let mut xb = vec![0.0f64; n];
        ok(csen_solve_lasso(d, y.as_ptr(), m_rows, 0.05, 2000, 1e-10, xa.as_mut_ptr(), &mut info));
        let w = vec![1.0f64; n];
        ok(csen_solve_weighted_lasso(
            d,
            y.as_ptr(),
            m_rows,
            0.05,
            w.as_ptr(),
            2000,
            1e-10,
            xb.as_mut_ptr(),
            &mut info,
        ));
        assert_eq!(xa, xb);

        // CRC runs and fills info.
        let mut xc = vec![0.0f64; n];
        ok(csen_solve_crc(d, y.as_ptr(), m_rows, 1e-2, xc.as_mut_ptr(), &mut info));
        assert_eq!(info.converged, 1);

        // Weights from a probability map.
        let p = vec![0.0f64, 0.5, 1.0, 2.0];
        let mut wout = vec![0.0f64; 4];
        ok(csen_weights_from_probability(p.as_ptr(), 4, 1e-2, wout.as_mut_ptr()));
        assert!((wout[0] - 100.0).abs() < 1e-9);
        assert!(wout[3] >= 1.0 / 1.01 - 1e-12); // clamped to p = 1

        csen_proxy_free(proxy);
        csen_matrix_free(d);
    }
}

#[test]
fn metrics_through_the_abi() {
    unsafe {
        let predicted = [1usize, 2];
        let truth = [2usize, 3];
        let mut out = [0.0f64; 4];
        ok(csen_support_metrics(
            predicted.as_ptr(),
            2,
            truth.as_ptr(),
            2,
            10,
            out.as_mut_ptr(),
        ));
        assert_eq!(out, [0.5, 0.5, 0.5, 0.2]);

        let x = [5.0f64];
        let xh = [4.5f64];
        let mut success = -1;
        ok(csen_recovery_success(xh.as_ptr(), x.as_ptr(), 1, 0.1, &mut success));
        assert_eq!(success, 1);

        let mut db = f64::NAN;
        ok(csen_nmse_db(xh.as_ptr(), x.as_ptr(), 1, &mut db));
        assert!((db - 20.0 * 0.1f64.log10()).abs() < 1e-9);

        // Out-of-range support index is a reported error.
        let bad = [10usize];
        let st = csen_support_metrics(bad.as_ptr(), 1, truth.as_ptr(), 2, 10, out.as_mut_ptr());
        assert_eq!(st, CsenStatus::InvalidArgument);
    }
}

#[test]
fn model_roundtrip_and_inference() {
    unsafe {
        let mut model: *mut CsenModelHandle = std::ptr::null_mut();
        ok(csen_model_init(2, 8, 8, 7, &mut model));
        assert_eq!(csen_model_parameter_count(model), {
            // csen2 parameter count at any grid
            480 + 10392 + (9 * 24 * 24 + 24) + 217
        });
        let (mut h, mut w) = (0usize, 0usize);
        ok(csen_model_grid(model, &mut h, &mut w));
        assert_eq!((h, w), (8, 8));

        let plane: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut p = vec![0.0f64; 64];
        ok(csen_model_forward(model, plane.as_ptr(), 64, p.as_mut_ptr()));
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));

        // Save, load, identical inference.
        let dir = std::env::temp_dir().join("csen_ffi_model");
        std::fs::create_dir_all(&dir).unwrap();
        let path = CString::new(dir.join("m.ckpt").to_str().unwrap()).unwrap();
        ok(csen_model_save(model, path.as_ptr()));
        let mut loaded: *mut CsenModelHandle = std::ptr::null_mut();
        ok(csen_model_load(path.as_ptr(), &mut loaded));
        let mut p2 = vec![0.0f64; 64];
        ok(csen_model_forward(loaded, plane.as_ptr(), 64, p2.as_mut_ptr()));
        assert_eq!(p, p2);

        // Threshold with a capped output buffer.
        let mut idx = vec![0usize; 8];
        let mut count = 0usize;
        ok(csen_threshold_support(p.as_ptr(), 64, 0.0, idx.as_mut_ptr(), 8, &mut count));
        assert!(count <= 64);

        // Wrong plane size is an argument error.
        let st = csen_model_forward(model, plane.as_ptr(), 63, p.as_mut_ptr());
        assert_eq!(st, CsenStatus::InvalidArgument);

        csen_model_free(model);
        csen_model_free(loaded);
        std::fs::remove_dir_all(&dir).ok();
    }
}
