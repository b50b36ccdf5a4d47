fn main() {
    // Dense nonsymmetric eigensolves in `oracle` go through the system LAPACK.
    println!("cargo:rustc-link-lib=lapack");
    println!("cargo:rustc-link-lib=blas");
}
