use std::ffi::CString;
use std::ptr;

use onquench_ffi::*;

fn small_config() -> CString {
    let mut cfg = onquench::config::ModelConfig::desk().with_delta(-1.0);
    cfg.n_k = 400;
    cfg.n_tot = 256;
    cfg.n_s = 8;
    cfg.n_par = 4;
    cfg.t_end = 2.0;
    cfg.checkpoint_times.clear();
    CString::new(cfg.to_json()).unwrap()
}

fn last_error() -> String {
    let n = unsafe { onq_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n];
    unsafe { onq_last_error(buf.as_mut_ptr().cast(), n) };
    String::from_utf8_lossy(&buf[..n - 1]).into_owned()
}

#[test]
fn model_lifecycle() {
    let json = small_config();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { onq_model_new_json(json.as_ptr(), &mut m) }, OnqStatus::Ok);
    assert!(!m.is_null());

    let (mut r_c, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { onq_model_masses(m, &mut r_c, &mut r) }, OnqStatus::Ok);
    assert!(r_c < 0.0 && (r - 2.0 * r_c).abs() < 1e-12);

    assert_eq!(unsafe { onq_model_evolve_to(m, 1.0) }, OnqStatus::Ok);
    let (mut t, mut r_eff) = (0.0, 0.0);
    assert_eq!(unsafe { onq_model_state(m, &mut t, &mut r_eff) }, OnqStatus::Ok);
    assert!((t - 1.0).abs() < 1e-3 && r_eff.is_finite());
    assert_eq!(unsafe { onq_model_evolve_to(m, 0.5) }, OnqStatus::InvalidArgument);
    assert!(last_error().contains("back to"));

    let mut lambdas = [0.0; 8];
    let mut len = 0;
    let s = unsafe { onq_model_spectrum(m, 0.0, 8, lambdas.as_mut_ptr(), 4, &mut len) };
    assert_eq!((s, len), (OnqStatus::BufferTooSmall, 8));
    let s = unsafe { onq_model_spectrum(m, 0.0, 8, lambdas.as_mut_ptr(), 8, &mut len) };
    assert_eq!(s, OnqStatus::Ok);
    assert!(lambdas.windows(2).all(|w| w[0] >= w[1]));
    assert!(lambdas.iter().all(|&l| l >= 0.5));

    let (mut sa, mut s0) = (0.0, 0.0);
    assert_eq!(unsafe { onq_model_entropy(m, &mut sa, &mut s0) }, OnqStatus::Ok);
    assert!(sa > 0.0 && s0 > 0.0);
    unsafe { onq_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    let bad = CString::new(r#"{"bogus": 1}"#).unwrap();
    assert_eq!(unsafe { onq_model_new_json(bad.as_ptr(), &mut m) }, OnqStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("bogus"));
    assert_eq!(unsafe { onq_model_new_json(ptr::null(), &mut m) }, OnqStatus::NullPointer);
    let mut out = 0.0;
    assert_eq!(unsafe { onq_mode_entropy(-1.0, &mut out) }, OnqStatus::InvalidArgument);
    assert_eq!(unsafe { onq_mode_entropy(0.0, &mut out) }, OnqStatus::Ok);
    assert_eq!(out, 0.0);
    unsafe { onq_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/onquench.h")).unwrap();
    for name in [
        "onq_model_new_desk",
        "onq_model_new_json",
        "onq_model_free",
        "onq_model_evolve_to",
        "onq_model_spectrum",
        "onq_model_entropy",
        "onq_last_error",
        "typedef struct OnqModel OnqModel",
        "ONQ_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"onquench.h\"\nint main(void) { OnqModel *m = 0; OnqStatus s = onq_model_new_desk(-1.0, &m); onq_model_free(m); return (int)s; }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}/include", env!("CARGO_MANIFEST_DIR")))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
