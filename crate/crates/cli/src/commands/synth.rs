use std::path::Path;

use stainscope::synth::gen_dataset;

use crate::config::RunConfig;
use crate::error::CliResult;

pub fn run(out_dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    let spec = cfg.synth_spec();
    let m = gen_dataset(&spec, out_dir)?;
    let patches: usize = m.slides.iter().map(|s| s.patches.len()).sum();
    println!(
        "wrote {} slides and {patches} patches to {}",
        m.slides.len(),
        out_dir.display()
    );
    Ok(())
}
