//! Runs every verification suite and prints one line per property.
//!
//! Usage: `cargo run --example verify_suites -- [seed] [samples]`

use std::time::Instant;

use ksreg::verify::{Suite, VerifyOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let opts = VerifyOptions::new(seed, samples);
    let mut ok = true;
    for suite in Suite::ALL {
        let start = Instant::now();
        let report = suite.run(&opts);
        for p in &report.properties {
            println!("{}", p.summary_line(&report.suite));
        }
        println!("-- {} in {:.2} s\n", suite, start.elapsed().as_secs_f64());
        ok &= report.passed();
    }
    println!(
        "{}",
        if ok {
            "all asserted properties pass"
        } else {
            "some properties fail"
        }
    );
}
