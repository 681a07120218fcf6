use std::time::{Duration, Instant};

use super::{render, RenderOutput, SoftZConfig, TargetCamera};
use crate::error::Result;
use crate::mdp::Mdp;

#[derive(Clone, Debug)]
pub struct SequenceFrame {
    pub output: RenderOutput,
    pub elapsed: Duration,
}

/// Renders a pose trajectory frame by frame, timing each frame.
pub fn render_sequence(mdp: &Mdp, targets: &[TargetCamera], zcfg: &SoftZConfig) -> Result<Vec<SequenceFrame>> {
    mdp.validate()?;
    targets
        .iter()
        .map(|t| {
            let start = Instant::now();
            let output = render(mdp, t, zcfg)?;
            Ok(SequenceFrame {
                output,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}
