fn main() {
    // lapack-sys only declares the FFI symbols; the actual BLAS/LAPACK
    // implementation must be linked explicitly. We use the system OpenBLAS,
    // which bundles LAPACK.
    let candidates = [
        "/usr/lib/x86_64-linux-gnu/openblas-pthread",
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib64",
        "/usr/lib",
    ];
    for dir in candidates {
        if std::path::Path::new(dir).join("libopenblas.so").exists()
            || std::path::Path::new(dir).join("libopenblas.so.0").exists()
        {
            println!("cargo:rustc-link-search=native={dir}");
            break;
        }
    }
    println!("cargo:rustc-link-lib=dylib=openblas");
}
