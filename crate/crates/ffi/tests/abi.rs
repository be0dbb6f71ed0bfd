use std::ffi::{CStr, CString};
use std::ptr;

use herzkit_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn function(json: &str) -> *mut HkFunction {
    let mut f = ptr::null_mut();
    let s = cstr(json);
    assert_eq!(unsafe { hk_function_from_json(s.as_ptr(), &mut f) }, HkStatus::Ok);
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hk_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn gaussian_value_and_norm() {
    let f = function(r#"{"variant":"Gaussian","center":[0.0],"scale":1.0}"#);
    unsafe {
        assert_eq!(hk_function_dim(f), 1);
        let mut v = 0.0;
        assert_eq!(hk_function_eval(f, [0.5].as_ptr(), 1, &mut v), HkStatus::Ok);
        assert!((v - (-0.25f64).exp()).abs() < 1e-15);

        // alpha = 0, p = q = 2 is plain L^2: ∫ e^{-2x^2} dx = sqrt(pi/2)
        let mut r = ptr::null_mut();
        assert_eq!(hk_herz_norm(f, 0.0, 2.0, 2.0, &mut r), HkStatus::Ok);
        let exact = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((hk_norm_result_value(r) - exact).abs() < 1e-9 * exact);
        assert!(hk_norm_result_converged(r));
        let count = hk_norm_result_term_count(r);
        assert!(count > 0);
        let (mut k, mut mass, mut term) = (0, 0.0, 0.0);
        assert_eq!(hk_norm_result_term(r, 0, &mut k, &mut mass, &mut term), HkStatus::Ok);
        assert_eq!(hk_norm_result_term(r, count, &mut k, &mut mass, &mut term), HkStatus::InvalidArgument);
        hk_norm_result_free(r);
        hk_function_free(f);
    }
}

#[test]
fn divergence_keeps_partial() {
    let f = function(r#"{"variant":"RadialPowerLog","n":2,"a":-2.0,"b":0.0,"r_lo":0.0,"r_hi":1.0}"#);
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(hk_herz_norm(f, 0.0, 1.0, 1.0, &mut r), HkStatus::Divergence);
        assert!(!r.is_null());
        assert!(hk_norm_result_value(r) > 0.0);
        assert!(!hk_norm_result_converged(r));
        assert!(last_error().contains("diverges"));
        hk_norm_result_free(r);
        hk_function_free(f);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(hk_function_from_json(ptr::null(), &mut f), HkStatus::NullPointer);
        let bad = cstr("{not json");
        assert_eq!(hk_function_from_json(bad.as_ptr(), &mut f), HkStatus::InvalidJson);
        assert!(f.is_null());
        let neg = cstr(r#"{"variant":"Gaussian","center":[0.0],"scale":-1.0}"#);
        assert_eq!(hk_function_from_json(neg.as_ptr(), &mut f), HkStatus::InvalidArgument);

        let g = function(r#"{"variant":"Gaussian","center":[0.0,0.0],"scale":1.0}"#);
        let mut v = 0.0;
        assert_eq!(hk_function_eval(g, [0.0].as_ptr(), 1, &mut v), HkStatus::DimensionMismatch);
        let mut r = ptr::null_mut();
        assert_eq!(hk_herz_norm(g, 0.0, 0.0, 2.0, &mut r), HkStatus::InvalidArgument);
        assert!(r.is_null());
        hk_function_free(g);
        hk_function_free(ptr::null_mut());
        hk_string_free(ptr::null_mut());
    }
}

#[test]
fn infinite_exponent() {
    let f = function(r#"{"variant":"SmoothBump","center":[0.0],"radius":1.0,"amplitude":1.0}"#);
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(hk_herz_norm(f, 0.0, f64::INFINITY, f64::INFINITY, &mut r), HkStatus::Ok);
        assert!((hk_norm_result_value(r) - 1.0).abs() < 1e-12);
        hk_norm_result_free(r);
        hk_function_free(f);
    }
}

#[test]
fn sobolev_operator_and_dilation() {
    let f = function(r#"{"variant":"Gaussian","center":[0.0],"scale":1.0}"#);
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(hk_herz_sobolev_norm(f, 0.0, 2.0, 2.0, 1, true, &mut r), HkStatus::Ok);
        // ∫ (2x e^{-x^2})^2 dx = sqrt(pi/2)
        let exact = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((hk_norm_result_value(r) - exact).abs() < 1e-8 * exact);
        hk_norm_result_free(r);

        let op = cstr(r#"{"kind":"maximal"}"#);
        let mut v = 0.0;
        assert_eq!(hk_operator_apply(f, op.as_ptr(), [0.0].as_ptr(), 1, &mut v), HkStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        let bad = cstr(r#"{"kind":"riesz","lambda":3.0}"#);
        assert_ne!(hk_operator_apply(f, bad.as_ptr(), [0.0].as_ptr(), 1, &mut v), HkStatus::Ok);

        let mut g = ptr::null_mut();
        assert_eq!(hk_function_dilate(f, 1, &mut g), HkStatus::Ok);
        // x -> f(2x)
        assert_eq!(hk_function_eval(g, [1.0].as_ptr(), 1, &mut v), HkStatus::Ok);
        assert!((v - (-4.0f64).exp()).abs() < 1e-15);
        hk_function_free(g);
        hk_function_free(f);
    }
}

#[test]
fn hypotheses_and_embedding() {
    unsafe {
        let thm = cstr("Embeddings1");
        let params = cstr(r#"{"n":2,"q":2,"alpha1":0.1,"alpha2":0.0,"r":2}"#);
        let (mut ok, mut json) = (true, ptr::null_mut());
        assert_eq!(hk_check_hypotheses(thm.as_ptr(), params.as_ptr(), &mut ok, &mut json), HkStatus::Ok);
        assert!(!ok);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"ok\":false"));
        hk_string_free(json);

        let unknown = cstr("NoSuchTheorem");
        assert_eq!(
            hk_check_hypotheses(unknown.as_ptr(), params.as_ptr(), &mut ok, &mut json),
            HkStatus::InvalidJson
        );

        let exp = cstr(r#"{"theorem":"Embeddings1","dilation_levels":[0,1]}"#);
        let mut pass = false;
        assert_eq!(hk_embed_run(exp.as_ptr(), &mut pass, &mut json), HkStatus::Ok);
        assert!(pass, "{}", CStr::from_ptr(json).to_str().unwrap());
        hk_string_free(json);
        assert!(!CStr::from_ptr(hk_version()).to_bytes().is_empty());
    }
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/herzkit.h")).unwrap();
    for name in [
        "hk_last_error",
        "hk_version",
        "hk_string_free",
        "hk_function_from_json",
        "hk_function_free",
        "hk_function_dim",
        "hk_function_eval",
        "hk_function_dilate",
        "hk_herz_norm",
        "hk_herz_sobolev_norm",
        "hk_norm_result_free",
        "hk_norm_result_value",
        "hk_norm_result_converged",
        "hk_norm_result_term_count",
        "hk_norm_result_term",
        "hk_operator_apply",
        "hk_check_hypotheses",
        "hk_embed_run",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("HK_STATUS_DIVERGENCE = 8"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which("cc") else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"herzkit.h\"\nint main(void) { HkFunction *f = 0; return (int)hk_function_from_json(\"{}\", &f); }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<std::path::PathBuf, ()> {
    std::env::var_os("PATH")
        .and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|p| p.join(name))
                .find(|p| p.is_file())
        })
        .ok_or(())
}
