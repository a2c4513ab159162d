use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cavity_reservoir_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = cr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_scenario() -> *mut CrScenario {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(cr_scenario_preset(cstr("cat2").as_ptr(), &mut sc), CrStatus::Ok);
        for (k, v) in [("hilbert.n_max", "20"), ("reservoir.n_samples", "5"), ("analysis.wigner_grid", "none")] {
            assert_eq!(cr_scenario_set(sc, cstr(k).as_ptr(), cstr(v).as_ptr()), CrStatus::Ok);
        }
    }
    sc
}

#[test]
fn run_through_handles() {
    let sc = small_scenario();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(cr_run_execute(sc, &mut run), CrStatus::Ok);
        assert_eq!(cr_run_num_samples(run), 5);
        let d = cr_run_dim(run);
        assert_eq!(d, 21);
        let mut re = vec![0.0; d * d];
        let mut im = vec![0.0; d * d];
        assert_eq!(cr_run_density_matrix(run, re.as_mut_ptr(), im.as_mut_ptr(), d * d), CrStatus::Ok);
        let trace: f64 = (0..d).map(|i| re[i * d + i]).sum();
        assert!((trace - 1.0).abs() < 1e-10);
        let n_bar: f64 = (0..d).map(|i| i as f64 * re[i * d + i]).sum();
        assert!((n_bar - cr_run_mean_photon(run)).abs() < 1e-12);
        assert!(cr_run_purity(run) > 0.0 && cr_run_purity(run) <= 1.0 + 1e-12);
        assert!(cr_run_fidelity(run).is_finite());

        let mut hist = vec![0.0; 6];
        assert_eq!(cr_run_history(run, hist.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 6), CrStatus::Ok);
        assert_eq!(hist[0], 0.0);
        assert_eq!(hist[5], cr_run_mean_photon(run));
        assert_eq!(cr_run_history(run, hist.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 4), CrStatus::InvalidArgument);

        let mut w = 0.0;
        assert_eq!(cr_run_wigner_at(run, 0.0, 0.0, &mut w), CrStatus::Ok);
        assert!(w.is_finite());

        let summary = cr_run_summary(run);
        assert!(CStr::from_ptr(summary).to_str().unwrap().contains("scenario = cat2"));
        cr_string_free(summary);

        let dir = tempfile::tempdir().unwrap();
        let path = cstr(dir.path().to_str().unwrap());
        assert_eq!(cr_run_write(run, path.as_ptr()), CrStatus::Ok);
        assert!(dir.path().join("metrics.csv").exists());

        cr_run_free(run);
        cr_scenario_free(sc);
    }
}

#[test]
fn scenario_text_round_trip() {
    let sc = small_scenario();
    unsafe {
        let text = cr_scenario_to_string(sc);
        let mut back = ptr::null_mut();
        assert_eq!(cr_scenario_parse(text, &mut back), CrStatus::Ok);
        let again = cr_scenario_to_string(back);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(again));
        cr_string_free(text);
        cr_string_free(again);
        cr_scenario_free(back);
        cr_scenario_free(sc);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(cr_scenario_preset(cstr("nope").as_ptr(), &mut sc), CrStatus::Config);
        assert!(sc.is_null());
        assert!(last_error().contains("nope"));

        assert_eq!(cr_scenario_preset(ptr::null(), &mut sc), CrStatus::InvalidArgument);
        assert_eq!(cr_scenario_preset(cstr("cat2").as_ptr(), ptr::null_mut()), CrStatus::InvalidArgument);

        let sc = small_scenario();
        assert_eq!(cr_scenario_set(sc, cstr("bogus.key").as_ptr(), cstr("1").as_ptr()), CrStatus::Config);
        assert_eq!(cr_scenario_set(sc, cstr("reservoir.p_at").as_ptr(), cstr("2").as_ptr()), CrStatus::Config);
        // a failed set leaves the scenario untouched
        let mut run = ptr::null_mut();
        assert_eq!(cr_run_execute(sc, &mut run), CrStatus::Ok);
        cr_run_free(run);

        // a field that outgrows a tiny space trips the truncation guard
        for (k, v) in [("hilbert.n_max", "6"), ("reservoir.n_samples", "400"), ("cavity.loss", "off")] {
            assert_eq!(cr_scenario_set(sc, cstr(k).as_ptr(), cstr(v).as_ptr()), CrStatus::Ok);
        }
        assert_eq!(cr_run_execute(sc, &mut run), CrStatus::Numerical);
        assert!(run.is_null());
        assert!(last_error().contains("sample"));
        cr_scenario_free(sc);

        assert!(cr_run_mean_photon(ptr::null()).is_nan());
        assert_eq!(cr_run_dim(ptr::null()), 0);
        cr_run_free(ptr::null_mut());
        cr_scenario_free(ptr::null_mut());
        cr_string_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(cr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cavity_reservoir.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["cr_scenario_preset", "cr_run_execute", "cr_run_density_matrix", "cr_last_error", "CR_STATUS_NUMERICAL"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"cavity_reservoir.h\"\nint main(void) { CrScenario *s = 0; return cr_scenario_preset(\"cat2\", &s) == CR_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(header.parent().unwrap()).arg(&src).output()
    else {
        eprintln!("no C compiler found, skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
