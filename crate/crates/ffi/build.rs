fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let output = std::path::PathBuf::from(&crate_dir)
        .join("include")
        .join("thor.h");
    std::fs::create_dir_all(output.parent().unwrap()).ok();

    let result = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cbindgen::Config {
            language: cbindgen::Language::C,
            cpp_compat: true,
            include_guard: Some("THOR_H".into()),
            include_version: false,
            documentation: true,
            sys_includes: vec!["stdbool.h".into(), "stddef.h".into(), "stdint.h".into()],
            no_includes: true,
            ..cbindgen::Config::default()
        })
        .generate();

    match result {
        Ok(bindings) => {
            bindings.write_to_file(&output);
        }
        Err(e) => {
            // Keep the Rust build usable even if header generation breaks.
            println!("cargo:warning=cbindgen failed: {e}");
        }
    }

    println!("cargo:rerun-if-changed=src/lib.rs");
}
