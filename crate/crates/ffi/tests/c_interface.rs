//! Integration checks of the C surface: the generated header carries the
//! whole symbol set, and datasets survive a CSV round trip through the ABI.

use std::ffi::CString;
use std::path::PathBuf;
use std::ptr;

use thor_ffi::*;

#[test]
fn generated_header_exports_the_full_api() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("thor.h");
    let text = std::fs::read_to_string(&header)
        .unwrap_or_else(|e| panic!("missing generated header {}: {e}", header.display()));
    for symbol in [
        "typedef struct thor_dataset thor_dataset;",
        "typedef struct thor_model thor_model;",
        "thor_status thor_dataset_synthetic",
        "thor_status thor_dataset_load_csv",
        "thor_status thor_dataset_save_csv",
        "thor_status thor_dataset_split",
        "void thor_dataset_free",
        "struct thor_train_config thor_train_config_default",
        "thor_status thor_train",
        "thor_status thor_model_save",
        "thor_status thor_model_load",
        "thor_status thor_model_predict",
        "thor_status thor_model_evaluate",
        "void thor_model_free",
        "const char *thor_last_error_message",
        "const char *thor_version",
        "THOR_OK",
        "THOR_NUMERIC_FAULT",
        "THOR_HEAD_REGRESSION",
        "THOR_METHOD_CNNPOR",
    ] {
        assert!(text.contains(symbol), "header is missing `{symbol}`");
    }
}

#[test]
fn csv_round_trip_through_the_abi() {
    unsafe {
        let mut ds: *mut thor_dataset = ptr::null_mut();
        assert_eq!(
            thor_dataset_synthetic(4, 25, 3, 0.4, 0.0, 11, 5, &mut ds),
            thor_status::THOR_OK
        );
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("round.csv").to_str().unwrap()).unwrap();
        assert_eq!(
            thor_dataset_save_csv(ds, path.as_ptr(), true),
            thor_status::THOR_OK
        );

        let mut back: *mut thor_dataset = ptr::null_mut();
        assert_eq!(
            thor_dataset_load_csv(path.as_ptr(), 4, true, &mut back),
            thor_status::THOR_OK
        );
        assert_eq!(thor_dataset_len(back), thor_dataset_len(ds));
        assert_eq!(thor_dataset_dim(back), thor_dataset_dim(ds));
        assert_eq!(thor_dataset_classes(back), thor_dataset_classes(ds));
        thor_dataset_free(ds);
        thor_dataset_free(back);
    }
}

#[test]
fn csv_parse_failures_map_to_parse_status() {
    unsafe {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.csv");
        std::fs::write(&file, "0.5,abc,2\n").unwrap();
        let path = CString::new(file.to_str().unwrap()).unwrap();
        let mut ds: *mut thor_dataset = ptr::null_mut();
        assert_eq!(
            thor_dataset_load_csv(path.as_ptr(), 3, false, &mut ds),
            thor_status::THOR_PARSE_ERROR
        );
        assert!(ds.is_null());

        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        assert_eq!(
            thor_dataset_load_csv(missing.as_ptr(), 3, false, &mut ds),
            thor_status::THOR_IO_ERROR
        );
    }
}
