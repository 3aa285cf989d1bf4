use std::ffi::{c_char, CStr};
use std::process::Command;
use std::ptr;

use kdc_ffi::*;

fn problem() -> *mut KdcProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { kdc_problem_new(100, 1.0, 0.5, 1.0, 0.3, &mut p) }, KdcStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let mut n = 0usize;
    assert_eq!(unsafe { kdc_last_error_message(buf.as_mut_ptr(), buf.len(), &mut n) }, KdcStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn problem_accessors_match_the_core() {
    let p = problem();
    let core = kdc::SpectralProblem::build(100, 1.0, 0.5, 1.0, 0.3).unwrap();
    let mut v = 0.0;
    unsafe {
        assert_eq!(kdc_problem_regression_value(p, 0.3, &mut v), KdcStatus::Ok);
        assert_eq!(v, core.regression_value(0.3).unwrap());
        assert_eq!(kdc_problem_effective_dimension(p, 1e-2, &mut v), KdcStatus::Ok);
        assert_eq!(v, core.effective_dimension(1e-2).unwrap());
        assert_eq!(kdc_problem_kappa_sq(p, &mut v), KdcStatus::Ok);
        assert_eq!(v, core.kappa_sq);
        kdc_problem_free(p);
    }
}

#[test]
fn json_export_reports_needed_size() {
    let p = problem();
    let mut need = 0usize;
    let mut small = [0 as c_char; 4];
    unsafe {
        assert_eq!(kdc_problem_to_json(p, small.as_mut_ptr(), small.len(), &mut need), KdcStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; need];
        assert_eq!(kdc_problem_to_json(p, buf.as_mut_ptr(), buf.len(), &mut need), KdcStatus::Ok);
        let text = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(text.len() + 1, need);
        assert_eq!(kdc::SpectralProblem::from_json(text).unwrap().dim, 100);
        kdc_problem_free(p);
    }
}

#[test]
fn sgm_through_the_abi_equals_the_core() {
    let p = problem();
    let mut d = ptr::null_mut();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(kdc_dataset_sample(p, 64, 11, &mut d), KdcStatus::Ok);
        assert_eq!(kdc_dataset_len(d), 64);
        let (mut x, mut y) = (vec![0.0; 64], vec![0.0; 64]);
        assert_eq!(kdc_dataset_copy(d, x.as_mut_ptr(), y.as_mut_ptr(), 64), KdcStatus::Ok);
        assert_eq!(kdc_train_sgm(p, d, 4, 2, 50, 0.05, 3, 9, &mut m), KdcStatus::Ok);
        assert_eq!(kdc_model_partitions(m), 4);
        let mut risk = 0.0;
        assert_eq!(kdc_model_excess_risk(m, &mut risk), KdcStatus::Ok);

        let core = std::sync::Arc::new(kdc::SpectralProblem::build(100, 1.0, 0.5, 1.0, 0.3).unwrap());
        let ds = core.sample(64, 11).unwrap();
        assert_eq!((x, y), (ds.inputs.clone(), ds.labels.clone()));
        let k = kdc::KernelSpec::spectral(&core);
        let cfg = kdc::SgmConfig {
            partitions: 4,
            batch_size: 2,
            iterations: 50,
            step_schedule: kdc::StepSchedule::Constant(0.05),
            base_seed: 3,
        };
        let model = kdc::train::train_sgm(&ds, &cfg, &k, 9).unwrap();
        let expect = kdc::eval::excess_risk_exact(&model, &k, &core).unwrap().excess_risk;
        assert_eq!(risk, expect);
        let mut f = 0.0;
        assert_eq!(kdc_model_predict(m, 0.4, &mut f), KdcStatus::Ok);
        assert_eq!(f, model.predict(&k, 0.4).unwrap());

        kdc_model_free(m);
        kdc_dataset_free(d);
        kdc_problem_free(p);
    }
}

#[test]
fn spectral_training_for_every_filter() {
    let p = problem();
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(kdc_dataset_sample(p, 128, 5, &mut d), KdcStatus::Ok);
        for f in [KdcFilter::Tikhonov, KdcFilter::Landweber, KdcFilter::Cutoff, KdcFilter::TikhonovBiasCorrected] {
            let mut m = ptr::null_mut();
            assert_eq!(kdc_train_sa(p, d, 2, f, 1e-2, 1, &mut m), KdcStatus::Ok, "{f:?}: {}", last_error());
            let mut risk = 0.0;
            assert_eq!(kdc_model_excess_risk(m, &mut risk), KdcStatus::Ok);
            assert!(risk.is_finite() && risk > 0.0 && risk < 1.0, "{f:?}: {risk}");
            kdc_model_free(m);
        }
        kdc_dataset_free(d);
        kdc_problem_free(p);
    }
}

#[test]
fn tikhonov_filter_value_is_the_resolvent() {
    let mut g = 0.0;
    unsafe {
        assert_eq!(kdc_filter_value(KdcFilter::Tikhonov, 0.1, 0.4, 1.0, &mut g), KdcStatus::Ok);
    }
    assert!((g - 1.0 / 0.5).abs() < 1e-15);
}

#[test]
fn errors_map_to_status_codes() {
    let p = problem();
    let mut d = ptr::null_mut();
    let mut m = ptr::null_mut();
    let mut v = 0.0;
    unsafe {
        assert_eq!(kdc_problem_regression_value(ptr::null(), 0.5, &mut v), KdcStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(kdc_problem_regression_value(p, 0.5, ptr::null_mut()), KdcStatus::NullPointer);
        assert_eq!(kdc_problem_regression_value(p, 1.5, &mut v), KdcStatus::Domain);
        let mut q = ptr::null_mut();
        assert_eq!(kdc_problem_new(10, -1.0, 0.5, 1.0, 0.3, &mut q), KdcStatus::InvalidArgument);
        assert!(q.is_null());

        assert_eq!(kdc_dataset_sample(p, 30, 1, &mut d), KdcStatus::Ok);
        assert_eq!(kdc_train_sgm(p, d, 4, 1, 10, 0.05, 0, 0, &mut m), KdcStatus::Indivisible);
        assert!(last_error().contains("divisible"));
        assert_eq!(kdc_train_sgm(p, d, 1, 1, 10, 50.0, 0, 0, &mut m), KdcStatus::InvalidArgument);
        assert!(m.is_null());
        assert_eq!(kdc_train_sa(p, d, 1, KdcFilter::Landweber, 1e-12, 0, &mut m), KdcStatus::InvalidArgument);
        assert_eq!(kdc_filter_value(KdcFilter::Cutoff, 0.0, 0.5, 1.0, &mut v), KdcStatus::Domain);
        let mut small = [0 as c_char; 2];
        assert_eq!(kdc_last_error_message(small.as_mut_ptr(), 2, ptr::null_mut()), KdcStatus::BufferTooSmall);

        kdc_dataset_free(d);
        kdc_problem_free(p);
        // freeing null is a no-op
        kdc_problem_free(ptr::null_mut());
        kdc_dataset_free(ptr::null_mut());
        kdc_model_free(ptr::null_mut());
        assert_eq!(kdc_dataset_len(ptr::null()), 0);
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(kdc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/kdc.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    for name in src.lines().filter_map(|l| l.split("extern \"C\" fn ").nth(1)).map(|r| r.split('(').next().unwrap()) {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct KdcProblem KdcProblem;"));
    // syntax check with the system C compiler when one is installed
    let Ok(o) = Command::new("cc")
        .args(["-fsyntax-only", "-xc", "-std=c99", "-Wall", "-Werror"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include/kdc.h"))
        .output()
    else {
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
