// SPDX-License-Identifier: Apache-2.0

//! Peak throughput and efficiency arithmetic for the 4096-PE array.

use snnaccel::harness::efficiency_metrics;

fn main() {
    let m = efficiency_metrics(4096, 500, Some(0.844), Some(416.1));
    println!("peak {} GSOPS", m.peak_gsops);
    println!("area efficiency {:.3} TSOPS/mm2", m.tsops_per_mm2.unwrap());
    println!("energy efficiency {:.3} TSOPS/W", m.tsops_per_w.unwrap());
    for clock in [200, 500, 800] {
        println!(
            "at {clock} MHz: {} GSOPS",
            efficiency_metrics(4096, clock, None, None).peak_gsops
        );
    }
}
