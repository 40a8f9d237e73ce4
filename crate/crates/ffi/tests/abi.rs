use std::ffi::CStr;
use std::ptr;

use qform_tails::bounds::{
    conjugate_g, gaussian_hw_bound, quadform_tail_bound, CorollaryVariant, MgfEnvelope, UniversalConstants,
};
use qform_tails::calibration::Calibration;
use qform_tails::matrix::{matrix_norms, SquareMatrix};
use qform_tails_ffi::*;

fn last_error() -> String {
    let p = qt_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_matrix(n: usize, data: &[f64]) -> *mut QtMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { qt_matrix_new(n, data.as_ptr(), &mut m) }, QtStatus::Ok);
    assert!(!m.is_null());
    m
}

const DATA: [f64; 9] = [2.0, -1.0, 0.5, 0.3, 1.0, 0.0, -0.7, 0.2, -3.0];

#[test]
fn matrix_handle_lifecycle_and_norms() {
    let m = new_matrix(3, &DATA);
    assert_eq!(unsafe { qt_matrix_dim(m) }, 3);
    let mut nb = QtNormBundle {
        operator_norm: 0.0,
        hilbert_schmidt: 0.0,
        trace_norm: 0.0,
    };
    assert_eq!(unsafe { qt_matrix_norms(m, &mut nb) }, QtStatus::Ok);
    let want = matrix_norms(&SquareMatrix::new(3, DATA.to_vec()).unwrap()).unwrap();
    assert_eq!(nb.operator_norm, want.operator_norm);
    assert_eq!(nb.hilbert_schmidt, want.hilbert_schmidt);
    assert_eq!(nb.trace_norm, want.trace_norm);
    unsafe { qt_matrix_free(m) };
    unsafe { qt_matrix_free(ptr::null_mut()) };
    assert_eq!(unsafe { qt_matrix_dim(ptr::null()) }, 0);
}

#[test]
fn null_and_bad_arguments_report_status() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { qt_matrix_new(2, ptr::null(), &mut m) }, QtStatus::NullPointer);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let nan = [f64::NAN, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { qt_matrix_new(2, nan.as_ptr(), &mut m) }, QtStatus::NonFinite);

    let mut out = 0.0;
    assert_eq!(unsafe { qt_conjugate_g(-1.0, 1.0, 1.0, &mut out) }, QtStatus::InvalidArgument);
    assert_eq!(unsafe { qt_conjugate_g(1.0, 1.0, 1.0, ptr::null_mut()) }, QtStatus::NullPointer);

    let mut c = QtConstants {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        c_rv: 0.0,
    };
    assert_ne!(unsafe { qt_constants_new(0.0, 1.0, 0.1, &mut c) }, QtStatus::Ok);

    // rank-deficient design
    let design = [1.0, 2.0, 2.0, 4.0];
    let mut eb = QtExcessLossBound {
        threshold: 0.0,
        prob_bound: 0.0,
    };
    assert_eq!(unsafe { qt_constants_default(&mut c) }, QtStatus::Ok);
    let st = unsafe { qt_excess_loss_tail_bound(design.as_ptr(), 2, 2, 1.0, &c, 1.0, &mut eb) };
    assert_eq!(st, QtStatus::SingularDesign);
    assert!(last_error().contains("not full rank"));
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(qt_status_name(QtStatus::Domain)) };
    assert_eq!(name.to_str().unwrap(), "domain");
    let v = unsafe { CStr::from_ptr(qt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn constants_match_core() {
    let mut c = QtConstants {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        c_rv: 0.0,
    };
    assert_eq!(unsafe { qt_constants_new(1.0, 2f64.sqrt(), 0.125, &mut c) }, QtStatus::Ok);
    assert!((c.c3 - 4.0).abs() < 1e-12);
    assert!((c.c4 - 8.0).abs() < 1e-12);
    assert_eq!(unsafe { qt_constants_default(&mut c) }, QtStatus::Ok);
    let d = Calibration::shipped().constants().unwrap();
    assert_eq!((c.c1, c.c2, c.c3, c.c4, c.c_rv), (d.c1, d.c2, d.c3, d.c4, d.c_rv));
}

#[test]
fn bounds_agree_with_core() {
    let m = new_matrix(3, &DATA);
    let core_m = SquareMatrix::new(3, DATA.to_vec()).unwrap();
    let nb = matrix_norms(&core_m).unwrap();
    let consts = UniversalConstants::new(0.9, 1.1, 0.2).unwrap();
    let mut c = QtConstants {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        c_rv: 0.0,
    };
    assert_eq!(unsafe { qt_constants_new(0.9, 1.1, 0.2, &mut c) }, QtStatus::Ok);
    for t in [0.0, 1.0, 10.0, 100.0] {
        let mut out = -1.0;
        let st = unsafe { qt_quadform_tail_bound(m, 1.3, &c, t, QtCorollary::Trace, &mut out) };
        assert_eq!(st, QtStatus::Ok);
        assert_eq!(out, quadform_tail_bound(&nb, 1.3, &consts, t, CorollaryVariant::Trace).unwrap());
        let st = unsafe { qt_quadform_tail_bound(m, 1.3, &c, t, QtCorollary::HilbertSchmidt, &mut out) };
        assert_eq!(st, QtStatus::Ok);
        assert_eq!(out, quadform_tail_bound(&nb, 1.3, &consts, t, CorollaryVariant::Hs).unwrap());
        assert_eq!(unsafe { qt_gaussian_hw_bound(m, &c, t, &mut out) }, QtStatus::Ok);
        assert_eq!(out, gaussian_hw_bound(&nb, &consts, t).unwrap());
    }
    let mut g = 0.0;
    assert_eq!(unsafe { qt_conjugate_g(1.5, 0.5, 3.0, &mut g) }, QtStatus::Ok);
    assert_eq!(g, conjugate_g(&MgfEnvelope::new(1.5, 0.5).unwrap(), 3.0).unwrap());
    let mut exact = 0.0;
    let mut minf = 0.0;
    assert_eq!(unsafe { qt_tail_bound_from_envelope(1.5, 0.5, 3.0, true, &mut exact) }, QtStatus::Ok);
    assert_eq!(unsafe { qt_tail_bound_from_envelope(1.5, 0.5, 3.0, false, &mut minf) }, QtStatus::Ok);
    assert!((exact - 2.0 * (-g).exp()).abs() < 1e-15);
    assert!(exact <= minf);
    let mut psi = 0.0;
    let st = unsafe { qt_psi1_quadform_bound(m, 1.0, &c, QtPsi1Variant::HsPsd, true, false, &mut psi) };
    assert_ne!(st, QtStatus::Ok, "HS-PSD variant needs a PSD matrix flag");
    let st = unsafe { qt_psi1_quadform_bound(m, 1.0, &c, QtPsi1Variant::Trace, false, false, &mut psi) };
    assert_eq!(st, QtStatus::Ok);
    assert!((psi - nb.trace_norm).abs() < 1e-12);
    unsafe { qt_matrix_free(m) };
}

#[test]
fn empirical_norm_of_constant_samples() {
    // ψ2 norm of the constant 1 is 1/√ln2
    let xs = [1.0; 50];
    let mut out = 0.0;
    assert_eq!(unsafe { qt_empirical_luxemburg_norm(xs.as_ptr(), xs.len(), 2, 1e-12, &mut out) }, QtStatus::Ok);
    assert!((out - 1.0 / 2f64.ln().sqrt()).abs() < 1e-10);
    assert_eq!(unsafe { qt_empirical_luxemburg_norm(xs.as_ptr(), xs.len(), 3, 1e-12, &mut out) }, QtStatus::InvalidArgument);
}

#[test]
fn excess_loss_matches_projection_example() {
    // d = 1, n = 4, all ones: Σ = 1 and A = 11ᵀ/16, so ||A||_HS = 1/4
    let design = [1.0, 1.0, 1.0, 1.0];
    let mut c = QtConstants {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        c4: 0.0,
        c_rv: 0.0,
    };
    assert_eq!(unsafe { qt_constants_new(1.0, 2f64.sqrt(), 0.125, &mut c) }, QtStatus::Ok);
    let mut eb = QtExcessLossBound {
        threshold: 0.0,
        prob_bound: 0.0,
    };
    let st = unsafe { qt_excess_loss_tail_bound(design.as_ptr(), 1, 4, 1.0, &c, 1.0, &mut eb) };
    assert_eq!(st, QtStatus::Ok, "{}", last_error());
    assert!((eb.threshold - 0.25).abs() < 1e-12);
    assert!((eb.prob_bound - 2.0 * (-0.125f64).exp()).abs() < 1e-12);
}

#[test]
fn generated_header_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/qform_tails.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "qt_matrix_new",
        "qt_matrix_free",
        "qt_quadform_tail_bound",
        "qt_excess_loss_tail_bound",
        "QT_STATUS_SINGULAR_DESIGN = 8",
        "typedef struct QtMatrix QtMatrix;",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(cc) = which_cc() else { return };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(&src, "#include \"qform_tails.h\"\nint main(void) { return (int)QT_STATUS_OK + (int)qt_matrix_dim(NULL); }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
