use std::collections::BTreeMap;

use issuebert_testkit::fd::Checked;
use issuebert_testkit::gradcheck::{self, Report};

fn summarize<T: Checked>(reports: &[Report]) {
    let mut by_suite: BTreeMap<&str, &Report> = BTreeMap::new();
    for r in reports {
        let e = by_suite.entry(r.suite).or_insert(r);
        if r.worst.rel > e.worst.rel {
            *e = r;
        }
    }
    for (suite, r) in &by_suite {
        println!(
            "{suite:>14} {}: worst rel {:.3e}, {:.1} noise units (instance {}, coord {}/{}, analytic {:.6e}, numeric {:.6e})",
            std::any::type_name::<T>(),
            r.worst.rel,
            r.worst.noise_multiple,
            r.instance,
            r.worst.coord,
            r.coords,
            r.worst.analytic,
            r.worst.numeric
        );
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed::<T>()).collect();
    let worst_noise = failed.iter().map(|r| r.worst.noise_multiple).fold(0.0, f64::max);
    assert!(failed.is_empty(), "{} instances above tolerance, up to {worst_noise:.1} noise units", failed.len());
    assert_eq!(by_suite.len(), 10);
}

#[test]
fn every_layer_f32() {
    summarize::<f32>(&gradcheck::all::<f32>(11));
}

#[test]
fn every_layer_f64() {
    summarize::<f64>(&gradcheck::all::<f64>(11));
}
