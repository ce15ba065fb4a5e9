use crate::error::{Error, Result};
use crate::tensor_store::{FeatureTensor, TaskOutput};

/// Where a patch came from: sample index and grid position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchOrigin {
    pub sample: u32,
    pub row: u32,
    pub col: u32,
}

/// Flattened, equally sized patches pooled over one or more samples.
///
/// Each patch holds `side * side * channels` values: channel-major, then
/// row-major inside the patch.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub source_id: u32,
    pub side: usize,
    dim: usize,
    data: Vec<f64>,
    origins: Vec<PatchOrigin>,
}

impl PatchSet {
    pub fn empty(source_id: u32, side: usize, dim: usize) -> Self {
        Self {
            source_id,
            side,
            dim,
            data: Vec::new(),
            origins: Vec::new(),
        }
    }

    /// Patches given directly as rows of `dim` values, origins numbered 0..n.
    pub fn from_rows(source_id: u32, side: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        let origins = (0..(data.len() / dim) as u32)
            .map(|i| PatchOrigin {
                sample: i,
                row: 0,
                col: 0,
            })
            .collect();
        Ok(Self {
            source_id,
            side,
            dim,
            data,
            origins,
        })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn origins(&self) -> &[PatchOrigin] {
        &self.origins
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Appends all patches of `other`; both must share side and dimension.
    pub fn extend(&mut self, other: PatchSet) -> Result<()> {
        if other.dim != self.dim || other.side != self.side {
            return Err(Error::domain("cannot pool patch sets of different shapes"));
        }
        self.data.extend(other.data);
        self.origins.extend(other.origins);
        Ok(())
    }
}

fn check_grid(height: usize, width: usize, side: usize) -> Result<(usize, usize)> {
    if side == 0 {
        return Err(Error::domain("patch side must be positive"));
    }
    if !height.is_multiple_of(side) {
        return Err(Error::Dimension {
            axis: "height",
            message: format!("{height} is not divisible by patch side {side}"),
        });
    }
    if !width.is_multiple_of(side) {
        return Err(Error::Dimension {
            axis: "width",
            message: format!("{width} is not divisible by patch side {side}"),
        });
    }
    Ok((height / side, width / side))
}

fn cut(
    planes: &[&[f32]],
    height: usize,
    width: usize,
    side: usize,
    sample: u32,
    out: &mut PatchSet,
) -> Result<()> {
    let (rows, cols) = check_grid(height, width, side)?;
    out.data.reserve(rows * cols * out.dim);
    for gr in 0..rows {
        for gc in 0..cols {
            for plane in planes {
                for y in 0..side {
                    let start = (gr * side + y) * width + gc * side;
                    out.data
                        .extend(plane[start..start + side].iter().map(|&v| v as f64));
                }
            }
            out.origins.push(PatchOrigin {
                sample,
                row: gr as u32,
                col: gc as u32,
            });
        }
    }
    Ok(())
}

/// Cuts one feature channel into `side`×`side` patches in row-major grid order.
pub fn patchify_channel(
    t: &FeatureTensor,
    channel: usize,
    side: usize,
    sample: u32,
) -> Result<PatchSet> {
    let mut set = PatchSet::empty(t.channel_ids()[channel], side, side * side);
    cut(&[t.channel(channel)], t.height(), t.width(), side, sample, &mut set)?;
    Ok(set)
}

/// Cuts a task output into joint patches spanning all of its channels.
pub fn patchify_output(o: &TaskOutput, side: usize, sample: u32) -> Result<PatchSet> {
    let plane = o.height() * o.width();
    let planes: Vec<&[f32]> = o.values().chunks_exact(plane).collect();
    let mut set = PatchSet::empty(o.task_id, side, side * side * o.channels());
    cut(&planes, o.height(), o.width(), side, sample, &mut set)?;
    Ok(set)
}

/// Reassembles the patches of one sample into `channels` planes of height×width.
pub fn unpatchify(
    set: &PatchSet,
    sample: u32,
    channels: usize,
    height: usize,
    width: usize,
) -> Result<Vec<f32>> {
    let side = set.side;
    check_grid(height, width, side)?;
    if set.dim != side * side * channels {
        return Err(Error::domain("patch dimension does not match channel count"));
    }
    let mut out = vec![0f32; channels * height * width];
    let mut filled = 0usize;
    for (i, o) in set.origins.iter().enumerate() {
        if o.sample != sample {
            continue;
        }
        let p = set.patch(i);
        for c in 0..channels {
            for y in 0..side {
                for x in 0..side {
                    let row = o.row as usize * side + y;
                    let col = o.col as usize * side + x;
                    out[c * height * width + row * width + col] =
                        p[c * side * side + y * side + x] as f32;
                }
            }
        }
        filled += 1;
    }
    if filled * side * side != height * width {
        return Err(Error::domain(format!(
            "sample {sample}: {filled} patches do not tile {height}x{width}"
        )));
    }
    Ok(out)
}
