use mifs_core::synth_bench::{generate, SynthSpec};
use mifs_core::Result;

use super::Context;
use crate::args::SynthArgs;

/// The spec a synth invocation resolves to; the run seed replaces the spec's.
pub fn resolve_spec(a: &SynthArgs, seed: u64) -> Result<SynthSpec> {
    let mut spec = match &a.spec {
        Some(p) => SynthSpec::read(p)?,
        None => SynthSpec::default(),
    };
    if let Some(f) = a.noise_fraction {
        spec = spec.with_noise_fraction(f);
    }
    if let Some(n) = a.samples {
        spec.samples = n;
    }
    spec.seed = seed;
    spec.validate()?;
    Ok(spec)
}

pub fn synth(a: &SynthArgs, ctx: &Context) -> Result<()> {
    let spec = resolve_spec(a, ctx.seed)?;
    generate(&spec, &ctx.out)?;
    Ok(())
}
