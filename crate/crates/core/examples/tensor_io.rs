// SPDX-License-Identifier: Apache-2.0

//! Packs spikes, writes them to a tensor file and reads them back.
//!
//! ```text
//! cargo run --example tensor_io
//! ```

use snnaccel::io::TensorFile;
use snnaccel::tensor::{pack_spikes, spike_density};

fn main() -> snnaccel::Result<()> {
    let bits: Vec<u8> = (0..4 * 3 * 5).map(|i| (i % 3 == 0) as u8).collect();
    let spikes = pack_spikes(&bits, &[4, 3, 5])?;
    println!(
        "shape {:?}, {} spikes, density {:.3}",
        spikes.shape(),
        spikes.popcount(),
        spike_density(&spikes)
    );

    let path = std::env::temp_dir().join("snnaccel-example.vst");
    TensorFile::Spike(spikes.clone()).save(&path)?;
    let TensorFile::Spike(back) = TensorFile::load(&path)? else {
        unreachable!("saved a spike tensor");
    };
    assert_eq!(back, spikes);
    println!("round trip through {} ok", path.display());
    std::fs::remove_file(path)?;
    Ok(())
}
