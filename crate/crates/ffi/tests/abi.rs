use std::ffi::{CStr, CString};
use std::ptr;

use netar_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(netar_last_error())
            .to_string_lossy()
            .into_owned()
    }
}

fn scenario(json: &str) -> *mut NetarScenario {
    let mut s = ptr::null_mut();
    let j = CString::new(json).unwrap();
    assert_eq!(
        unsafe { netar_scenario_from_json(j.as_ptr(), &mut s) },
        NetarStatus::Ok
    );
    s
}

fn simulate(s: *const NetarScenario, n: usize, seed: u64) -> (usize, Vec<f64>, Vec<f64>) {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(
            netar_scenario_simulate(s, n, 100, seed, 0, &mut p),
            NetarStatus::Ok
        );
        let (mut d, mut len) = (0, 0);
        assert_eq!(netar_path_shape(p, &mut d, &mut len), NetarStatus::Ok);
        assert_eq!(len, n);
        let mut x = vec![0.0; d * n];
        assert_eq!(
            netar_path_series(p, x.as_mut_ptr(), x.len()),
            NetarStatus::Ok
        );
        let mut ads = vec![0.0; d * d * n];
        assert_eq!(
            netar_path_networks(p, ads.as_mut_ptr(), ads.len()),
            NetarStatus::Ok
        );
        netar_path_free(p);
        (d, x, ads)
    }
}

#[test]
fn simulate_fit_forecast_through_the_abi() {
    let s = scenario(r#"{"kind": "example1"}"#);
    assert_eq!(unsafe { netar_scenario_dim(s) }, 4);
    let (d, x, ads) = simulate(s, 400, 3);
    assert_eq!(simulate(s, 400, 3).1, x);
    unsafe { netar_scenario_free(s) };

    let method = CString::new(r#"{"family": "nar", "G": [{"kind": "transpose"}]}"#).unwrap();
    let mut fit = ptr::null_mut();
    let st = unsafe {
        netar_fit(
            x.as_ptr(),
            d,
            399,
            ads.as_ptr(),
            398,
            method.as_ptr(),
            3,
            &mut fit,
        )
    };
    assert_eq!(st, NetarStatus::Ok, "{}", last_error());
    assert!(unsafe { netar_fit_order(fit) } >= 1);

    // forecasts of column 399 from the first 399 columns; the known network
    // for the step is snapshot 398
    let known = CString::new(r#"{"kind": "known"}"#).unwrap();
    let mut out = vec![0.0; d];
    let st = unsafe {
        netar_forecast(
            fit,
            x.as_ptr(),
            d,
            399,
            ads.as_ptr(),
            399,
            known.as_ptr(),
            1,
            out.as_mut_ptr(),
            d,
        )
    };
    assert_eq!(st, NetarStatus::Ok, "{}", last_error());
    let err: f64 = (0..d)
        .map(|r| (x[398 * d + r] - out[r]).powi(2))
        .sum::<f64>()
        / d as f64;
    assert!(err < 25.0, "{err}");

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { netar_fit_to_json(fit, &mut json) },
        NetarStatus::Ok
    );
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { netar_fit_from_json(json, &mut back) },
        NetarStatus::Ok
    );
    let mut again = vec![0.0; d];
    unsafe {
        netar_forecast(
            back,
            x.as_ptr(),
            d,
            399,
            ads.as_ptr(),
            399,
            known.as_ptr(),
            1,
            again.as_mut_ptr(),
            d,
        );
    }
    assert_eq!(again, out);
    unsafe {
        netar_string_free(json);
        netar_fit_free(fit);
        netar_fit_free(back);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { netar_scenario_from_json(ptr::null(), &mut s) },
        NetarStatus::NullPointer
    );
    assert!(last_error().contains("null"));

    let bad = CString::new(r#"{"kind": "nope"}"#).unwrap();
    assert_eq!(
        unsafe { netar_scenario_from_json(bad.as_ptr(), &mut s) },
        NetarStatus::Parse
    );
    assert!(s.is_null());

    let s = scenario(r#"{"kind": "flip", "persist": 0.9, "mu": [0, 0, 0]}"#);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { netar_scenario_simulate(s, 10, 5, 1, 0, &mut p) },
        NetarStatus::Ok
    );
    let mut small = [0.0; 4];
    assert_eq!(
        unsafe { netar_path_series(p, small.as_mut_ptr(), small.len()) },
        NetarStatus::BufferTooSmall
    );
    assert!(last_error().contains("30"));
    unsafe {
        netar_path_free(p);
        netar_scenario_free(s);
    }

    // a network entry outside [-1, 1]
    let x = [0.0; 3 * 20];
    let ads = [2.0; 9 * 19];
    let method = CString::new(r#"{"family": "nar", "G": [{"kind": "transpose"}]}"#).unwrap();
    let mut fit = ptr::null_mut();
    let st = unsafe {
        netar_fit(
            x.as_ptr(),
            3,
            20,
            ads.as_ptr(),
            19,
            method.as_ptr(),
            1,
            &mut fit,
        )
    };
    assert_eq!(st, NetarStatus::Domain, "{}", last_error());

    assert_eq!(unsafe { netar_scenario_dim(ptr::null()) }, 0);
    assert!(!unsafe { CStr::from_ptr(netar_version()) }
        .to_bytes()
        .is_empty());
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        r#"{"id": "ffi", "scenario": {"kind": "example1"}, "sample_sizes": [50], "horizons": 1,
            "replicates": 3, "seed": 2, "methods": [{"family": "var"}]}"#,
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { netar_run_experiment(cfg.as_ptr(), out.as_ptr()) },
        NetarStatus::Ok,
        "{}",
        last_error()
    );
    assert!(dir.path().join("mse_table.csv").exists());
}
