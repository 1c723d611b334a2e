//! Writes the bundled benchmark sample to stdout:
//! `cargo run -p issuebert-testkit --example sample_issues > data/sample_issues.csv`

use issuebert::corpus::write_csv;
use issuebert_testkit::synth::{self, SAMPLE};

fn main() {
    let records = synth::issues(SAMPLE.size, SAMPLE.weights, SAMPLE.noise, SAMPLE.seed);
    write_csv(&records, std::io::stdout().lock()).expect("write sample");
}
