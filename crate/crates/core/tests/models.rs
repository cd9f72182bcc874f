use approx::assert_abs_diff_eq;

use pkmdyn::models::delta::{build_delta, delta_pkm, DeltaParams};
use pkmdyn::models::fourbar::{build_fourbar, FourbarParams};
use pkmdyn::models::{load_pkm, ModelFile, Units};

fn shipped(name: &str) -> String {
    format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn json_round_trip_is_exact() {
    for file in [build_delta(&DeltaParams::default()).unwrap(), build_fourbar(&FourbarParams::default()).unwrap()] {
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), file.to_json());
    }
}

#[test]
fn shipped_files_match_builders() {
    assert_eq!(ModelFile::load(shipped("delta_mpp3h.json")).unwrap(), build_delta(&DeltaParams::default()).unwrap());
    assert_eq!(ModelFile::load(shipped("fourbar.json")).unwrap(), build_fourbar(&FourbarParams::default()).unwrap());
    let a = load_pkm(shipped("delta_mpp3h.json")).unwrap();
    let b = delta_pkm(&DeltaParams::default()).unwrap();
    assert_eq!(a.limbs.len(), b.limbs.len());
    for (x, y) in a.limbs.iter().zip(&b.limbs) {
        assert_eq!(x.name, y.name);
        for (s, t) in x.tree.screws.iter().zip(&y.tree.screws) {
            assert_eq!(s.coords, t.coords);
        }
    }
}

#[test]
fn instance_names() {
    let pkm = delta_pkm(&DeltaParams::default()).unwrap();
    let names: Vec<_> = pkm.limbs.iter().map(|l| l.name.clone()).collect();
    let base = pkm.limbs[0].name.trim_end_matches('1').to_string();
    assert_eq!(names, vec![format!("{base}1"), format!("{base}2"), format!("{base}3")]);
}

#[test]
fn rod_shorter_than_offset_is_rejected() {
    let p = DeltaParams { c: 300.0, ..DeltaParams::default() };
    let e = build_delta(&p).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("does not exceed"), "{e}");
}

#[test]
fn zero_lengths_are_rejected() {
    assert!(build_delta(&DeltaParams { a: 0.0, ..DeltaParams::default() }).is_err());
    let mut p = FourbarParams::default();
    p.lengths[2] = 0.0;
    assert!(build_fourbar(&p).is_err());
}

#[test]
fn non_unit_axis_names_the_joint() {
    let mut file = build_delta(&DeltaParams::default()).unwrap();
    let k = file.joints.iter().position(|j| j.name == "J3").unwrap();
    file.joints[k].axis = file.joints[k].axis.map(|v| 2.0 * v);
    let e = file.compile().err().expect("non-unit axis accepted");
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("J3"), "{e}");
}

#[test]
fn malformed_json_is_a_validation_error() {
    let e = ModelFile::from_json("{\"name\": 3}").unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn millimeters_convert_to_meters() {
    let file = build_delta(&DeltaParams::default()).unwrap();
    assert_eq!(file.units, Units::Mm);
    let m = file.normalized();
    assert_eq!(m.units, Units::M);
    for (a, b) in file.joints.iter().zip(&m.joints) {
        for i in 0..3 {
            assert_abs_diff_eq!(b.point[i], a.point[i] / 1000.0, epsilon = 1e-15);
        }
        assert_eq!(a.axis, b.axis);
    }
    let pkm = file.compile().unwrap();
    assert_abs_diff_eq!(pkm.gravity.z, file.gravity[2] / 1000.0, epsilon = 1e-15);
    assert_abs_diff_eq!(pkm.gravity.z, -9.81, epsilon = 1e-12);
    let h = DeltaParams::default().h().unwrap() / 1000.0;
    assert_abs_diff_eq!(pkm.reference_x()[2], -h, epsilon = 1e-14);
}
