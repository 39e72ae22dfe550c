use std::ffi::{CStr, CString};
use std::ptr;

use vcrb_ffi::*;
use vcrb_lab::gbdt::{GbdtModel, Node, Tree};

fn stump_model() -> GbdtModel {
    let tree = Tree {
        nodes: vec![
            Node::Split {
                feature: 1,
                threshold: 0.5,
                missing_left: false,
                left: 1,
                right: 2,
                gain: 1.0,
                cover: 4.0,
                count: 8,
            },
            Node::Leaf {
                value: 2.0,
                cover: 2.0,
                count: 4,
            },
            Node::Leaf {
                value: -2.0,
                cover: 2.0,
                count: 4,
            },
        ],
    };
    GbdtModel::new(vec!["a".into(), "b".into()], 8, 0.25, 0.5, vec![tree]).unwrap()
}

fn last_error() -> String {
    let p = vcrb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn model_round_trip_and_predict() {
    let json = CString::new(stump_model().to_json().unwrap()).unwrap();
    let mut model: *mut VcrbModel = ptr::null_mut();
    unsafe {
        assert_eq!(vcrb_model_from_json(json.as_ptr(), &mut model), VcrbStatus::Ok);
        let mut n = 0usize;
        assert_eq!(vcrb_model_n_features(model, &mut n), VcrbStatus::Ok);
        assert_eq!(n, 2);

        let rows = [0.0, 0.1, 9.0, 0.9, 1.0, f64::NAN];
        let mut out = [0.0; 3];
        assert_eq!(vcrb_model_predict(model, rows.as_ptr(), 3, 2, out.as_mut_ptr()), VcrbStatus::Ok);
        let left = sigmoid(0.25 + 0.5 * 2.0);
        let right = sigmoid(0.25 - 0.5 * 2.0);
        assert!((out[0] - left).abs() < 1e-15);
        assert!((out[1] - right).abs() < 1e-15);
        // missing goes right for this split
        assert!((out[2] - right).abs() < 1e-15);

        assert_eq!(
            vcrb_model_predict(model, rows.as_ptr(), 2, 3, out.as_mut_ptr()),
            VcrbStatus::InvalidArgument
        );
        assert!(last_error().contains("2 features"));
        vcrb_model_free(model);
    }
}

#[test]
fn model_load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    stump_model().save(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut model: *mut VcrbModel = ptr::null_mut();
    unsafe {
        assert_eq!(vcrb_model_load(c.as_ptr(), &mut model), VcrbStatus::Ok);
        assert!(!model.is_null());
        vcrb_model_free(model);
    }
    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    let mut m2: *mut VcrbModel = ptr::null_mut();
    unsafe {
        assert_eq!(vcrb_model_load(missing.as_ptr(), &mut m2), VcrbStatus::Io);
    }
    assert!(m2.is_null());
    assert!(last_error().contains("nope.json"));
}

#[test]
fn bad_json_is_a_parse_error() {
    let json = CString::new("{\"format\": 3}").unwrap();
    let mut model: *mut VcrbModel = ptr::null_mut();
    unsafe {
        assert_eq!(vcrb_model_from_json(json.as_ptr(), &mut model), VcrbStatus::Parse);
    }
    assert!(model.is_null());
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0.0;
    let mut n = 0usize;
    let mut model: *mut VcrbModel = ptr::null_mut();
    unsafe {
        assert_eq!(vcrb_model_from_json(ptr::null(), &mut model), VcrbStatus::NullPointer);
        assert_eq!(vcrb_model_n_features(ptr::null(), &mut n), VcrbStatus::NullPointer);
        assert_eq!(vcrb_profitability_threshold(15.0, 3.0, 0.5, 0.0, ptr::null_mut()), VcrbStatus::NullPointer);
        assert_eq!(vcrb_bonferroni(0.05, 4, ptr::null_mut()), VcrbStatus::NullPointer);
        assert_eq!(
            vcrb_wilcoxon_greater(ptr::null(), ptr::null(), 3, &mut out, &mut out),
            VcrbStatus::NullPointer
        );
        vcrb_model_free(ptr::null_mut());
    }
    assert!(last_error().contains("is null"));
}

#[test]
fn scalar_functions() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(vcrb_profitability_threshold(15.0, 3.0, 0.5, 0.0, &mut out), VcrbStatus::Ok);
        assert!((out - 3.5 / 14.5).abs() < 1e-15);
        assert_eq!(vcrb_profitability_threshold(3.0, 15.0, 0.5, 0.0, &mut out), VcrbStatus::InvalidArgument);

        assert_eq!(vcrb_bonferroni(0.05, 8, &mut out), VcrbStatus::Ok);
        assert_eq!(out, 0.05 / 8.0);
        assert_eq!(vcrb_bonferroni(0.05, 0, &mut out), VcrbStatus::InvalidArgument);
    }
}

#[test]
fn wilcoxon_through_the_abi() {
    let t: Vec<f64> = (1..=5).map(f64::from).collect();
    let c = vec![0.0; 5];
    let (mut w, mut p) = (0.0, 0.0);
    unsafe {
        assert_eq!(vcrb_wilcoxon_greater(t.as_ptr(), c.as_ptr(), 5, &mut w, &mut p), VcrbStatus::Ok);
    }
    assert_eq!(w, 15.0);
    assert_eq!(p, 1.0 / 32.0);
    unsafe {
        assert_eq!(vcrb_wilcoxon_greater(c.as_ptr(), c.as_ptr(), 5, &mut w, &mut p), VcrbStatus::Degenerate);
    }
}

#[test]
fn footrule_through_the_abi() {
    let a = [1usize, 2, 3];
    let b = [3usize, 2, 1];
    let mut d = 0u64;
    unsafe {
        assert_eq!(vcrb_footrule(a.as_ptr(), b.as_ptr(), 3, &mut d), VcrbStatus::Ok);
        assert_eq!(d, 4);
        assert_eq!(vcrb_footrule(a.as_ptr(), a.as_ptr(), 3, &mut d), VcrbStatus::Ok);
        assert_eq!(d, 0);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(vcrb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/vcrb.h")).unwrap();
    for f in [
        "vcrb_last_error",
        "vcrb_version",
        "vcrb_model_from_json",
        "vcrb_model_load",
        "vcrb_model_n_features",
        "vcrb_model_predict",
        "vcrb_model_free",
        "vcrb_profitability_threshold",
        "vcrb_wilcoxon_greater",
        "vcrb_footrule",
        "vcrb_bonferroni",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct VcrbModel VcrbModel;"));
    assert!(header.contains("VCRB_STATUS_NULL_POINTER = 1"));
}
