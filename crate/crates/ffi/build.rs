fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("LEADELECT_H")
        .with_cpp_compat(true)
        .generate()
        .expect("unable to generate bindings")
        .write_to_file(format!("{crate_dir}/include/leadelect.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
