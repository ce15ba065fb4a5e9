mod analysis;
mod gaussian;
mod rank;
pub mod repro;
mod select;
mod synth;

use std::path::{Path, PathBuf};

use mifs_core::importance::MiConfig;
use mifs_core::mi_core::SymbolMode;
use mifs_core::{Dataset, DatasetManifest, PatchConfig, Result};

use crate::args::{Command, Format, MiArgs};
use crate::output::absolute;

/// Settings shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: PathBuf,
    pub format: Format,
    pub seed: u64,
}

pub fn execute(command: &Command, ctx: &Context) -> Result<()> {
    match command {
        Command::ValidateGaussian(a) => gaussian::validate(a, ctx),
        Command::EstimateMi(a) => rank::estimate(a, ctx),
        Command::Rank(a) => rank::rank(a, ctx),
        Command::SelectHard(a) => select::hard(a, ctx),
        Command::SelectSoft(a) => select::soft(a, ctx),
        Command::Reconstruct(a) => select::reconstruct(a, ctx),
        Command::Distortion(a) => analysis::distortion(a, ctx),
        Command::SweepSimplex(a) => analysis::sweep(a, ctx),
        Command::Synth(a) => synth::synth(a, ctx),
        Command::Repro(a) => repro::repro(a, ctx),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn abs(p: &mut PathBuf) -> Result<()> {
    *p = absolute(p)?;
    Ok(())
}

/// The command with every input path made absolute, so a recorded run does
/// not depend on the working directory it is replayed from.
pub fn absolutize(command: &Command) -> Result<Command> {
    let mut c = command.clone();
    match &mut c {
        Command::EstimateMi(a) => abs(&mut a.manifest)?,
        Command::Rank(a) => abs(&mut a.manifest)?,
        Command::SelectHard(a) => {
            abs(&mut a.input)?;
            abs(&mut a.ranking)?;
        }
        Command::SelectSoft(a) => {
            abs(&mut a.input)?;
            abs(&mut a.ranking)?;
            if let Some(p) = a.codec.codec_config.as_mut() {
                abs(p)?;
            }
        }
        Command::Reconstruct(a) => {
            abs(&mut a.input)?;
            if let Some(p) = a.codec.codec_config.as_mut() {
                abs(p)?;
            }
        }
        Command::Distortion(a) => abs(&mut a.table.accuracy)?,
        Command::SweepSimplex(a) => abs(&mut a.table.accuracy)?,
        Command::Synth(a) => {
            if let Some(p) = a.spec.as_mut() {
                abs(p)?;
            }
        }
        Command::Replay(a) => abs(&mut a.run)?,
        Command::ValidateGaussian(_) | Command::Repro(_) => {}
    }
    Ok(c)
}

pub(crate) fn mi_config(a: &MiArgs, seed: u64) -> MiConfig {
    MiConfig {
        k: a.k,
        bins: a.bins,
        seed,
        max_iters: a.max_iters,
        tol: a.tol,
        symbols: SymbolMode::Auto,
    }
}

/// Opens a manifest, optionally replacing its patch sides before validation.
pub(crate) fn open_dataset(path: &Path, a: &MiArgs) -> Result<Dataset> {
    let mut manifest = DatasetManifest::read(path)?;
    manifest.patch = PatchConfig {
        n: a.n.unwrap_or(manifest.patch.n),
        m: a.m.unwrap_or(manifest.patch.m),
    };
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Dataset::load(manifest, root)
}

pub(crate) fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
