use permclt::verify::{run_suite, SuiteOptions};
use std::time::Instant;

fn main() {
    let names: Vec<String> = std::env::args().skip(1).collect();
    for name in &names {
        let t0 = Instant::now();
        match run_suite(name, &SuiteOptions::default()) {
            Ok(report) => {
                print!("{}", report.table());
                println!("  elapsed: {:.2?}", t0.elapsed());
            }
            Err(e) => println!("{name}: ERROR {e}"),
        }
    }
}
