use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let out_dir = PathBuf::from(env::var("OUT_DIR").expect("OUT_DIR"));

    let header = out_dir.join("ktup.h");
    cbindgen::generate(&crate_dir)
        .expect("cbindgen failed")
        .write_to_file(&header);

    // Refresh the committed header on demand (KTUP_FFI_WRITE_HEADER=1); a
    // test compares it against the freshly generated one.
    if env::var("KTUP_FFI_WRITE_HEADER").as_deref() == Ok("1") {
        let committed = PathBuf::from(&crate_dir).join("include").join("ktup.h");
        std::fs::create_dir_all(committed.parent().unwrap()).expect("create include dir");
        std::fs::copy(&header, &committed).expect("copy header");
    }

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    println!("cargo:rerun-if-env-changed=KTUP_FFI_WRITE_HEADER");
}
