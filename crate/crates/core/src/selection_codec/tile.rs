//! Laying channels out on a grid to form one monochrome image.
//!
//! The grid has `rows = floor(sqrt(count))` and `cols = ceil(count / rows)`.
//! Channels fill it row-major in the order given (descending importance);
//! leftover cells are zero padding.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingDescriptor {
    pub rows: usize,
    pub cols: usize,
    pub tile_height: usize,
    pub tile_width: usize,
    /// Channel ids in tile order; its length is the number of real tiles.
    pub channel_order: Vec<u32>,
}

impl TilingDescriptor {
    pub fn new(channel_order: Vec<u32>, tile_height: usize, tile_width: usize) -> Result<Self> {
        let count = channel_order.len();
        if count == 0 {
            return Err(Error::domain("nothing to tile"));
        }
        let rows = (count as f64).sqrt().floor() as usize;
        let rows = rows.max(1);
        let cols = count.div_ceil(rows);
        Ok(Self {
            rows,
            cols,
            tile_height,
            tile_width,
            channel_order,
        })
    }

    pub fn count(&self) -> usize {
        self.channel_order.len()
    }

    pub fn padding(&self) -> usize {
        self.rows * self.cols - self.count()
    }

    pub fn image_height(&self) -> usize {
        self.rows * self.tile_height
    }

    pub fn image_width(&self) -> usize {
        self.cols * self.tile_width
    }
}

/// Tiles `planes` (one per entry of the descriptor's order) into an image.
pub fn tile<T: Copy + Default>(planes: &[&[T]], desc: &TilingDescriptor) -> Result<Vec<T>> {
    if planes.len() != desc.count() {
        return Err(Error::domain(format!(
            "{} planes for {} tiles",
            planes.len(),
            desc.count()
        )));
    }
    let (th, tw) = (desc.tile_height, desc.tile_width);
    let width = desc.image_width();
    let mut image = vec![T::default(); desc.image_height() * width];
    for (i, plane) in planes.iter().enumerate() {
        if plane.len() != th * tw {
            return Err(Error::domain(format!("plane {i} is not {th}x{tw}")));
        }
        let (gr, gc) = (i / desc.cols, i % desc.cols);
        for y in 0..th {
            let dst = (gr * th + y) * width + gc * tw;
            image[dst..dst + tw].copy_from_slice(&plane[y * tw..(y + 1) * tw]);
        }
    }
    Ok(image)
}

/// Cuts the real tiles back out, dropping padding.
pub fn untile<T: Copy>(image: &[T], desc: &TilingDescriptor) -> Result<Vec<Vec<T>>> {
    if image.len() != desc.image_height() * desc.image_width() {
        return Err(Error::domain(format!(
            "image has {} pixels, descriptor expects {}x{}",
            image.len(),
            desc.image_height(),
            desc.image_width()
        )));
    }
    let (th, tw) = (desc.tile_height, desc.tile_width);
    let width = desc.image_width();
    Ok((0..desc.count())
        .map(|i| {
            let (gr, gc) = (i / desc.cols, i % desc.cols);
            (0..th)
                .flat_map(|y| {
                    let src = (gr * th + y) * width + gc * tw;
                    image[src..src + tw].iter().copied()
                })
                .collect()
        })
        .collect())
}
