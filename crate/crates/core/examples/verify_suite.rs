//! Run a subset of the identity suite (pass check ids as arguments, e.g.
//! `cargo run --example verify_suite -- 4 7 9`).

use asd_landscape::verify::{run, VerifyConfig};

fn main() {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let cfg = VerifyConfig { only: Some(if only.is_empty() { vec![4, 7, 9, 12] } else { only }), ..Default::default() };
    let report = run(&cfg, |_| {});
    print!("{}", report.to_text());
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
