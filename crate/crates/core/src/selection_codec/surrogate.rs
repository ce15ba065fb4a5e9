//! Block-DCT surrogate for the enhancement-layer video codec.
//!
//! Stream layout (all integers little-endian):
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `MSDC` |
//! | 4 | 1 | version (1) |
//! | 5 | 1 | mode: 0 = transform, 1 = lossless |
//! | 6 | 1 | qp |
//! | 7 | 1 | reserved, 0 |
//! | 8 | 4 | width |
//! | 12 | 4 | height |
//! | 16 | .. | block data, MSB-first bits, zero padded to a byte |
//!
//! The image is padded to a multiple of 8 by edge replication and split into
//! 8x8 blocks visited in raster order. In transform mode each block is
//! level-shifted by -128, transformed with an orthonormal DCT-II and
//! quantized with step `2^((qp-4)/6)` and a dead-zone rounding offset of 1/3.
//! A block is coded as `se(dc - previous dc)`, `ue(n)` for its number of
//! nonzero AC levels, then `n` pairs of `ue(zero run)` and a level mapped by
//! `ue(2(|l|-1) + [l<0])`, walking the zigzag scan. When the step would fall
//! below 1 (qp < 4) the stream switches to lossless mode: each pixel is
//! predicted from its left neighbour (the one above in column 0, 128 at the
//! origin) and the 64 residuals of a block are coded like AC levels,
//! `ue(n)` then `n` run/level pairs in raster order.

use rayon::prelude::*;

use super::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MSDC";
pub const VERSION: u8 = 1;
pub const MAX_QP: u8 = 51;
pub const HEADER_LEN: usize = 16;

const DEAD_ZONE_OFFSET: f64 = 1.0 / 3.0;

/// A single-plane 8-bit image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image8 {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn mse(&self, other: &Image8) -> Result<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::domain("image sizes differ"));
        }
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        Ok(sum / self.pixels.len() as f64)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 || len != width * height {
        return Err(Error::domain(format!(
            "{len} pixels cannot form a {width}x{height} image"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Transform = 0,
    Lossless = 1,
}

pub fn check_qp(qp: u8) -> Result<()> {
    if qp > MAX_QP {
        return Err(Error::domain(format!("qp {qp} is outside 0..={MAX_QP}")));
    }
    Ok(())
}

pub fn quant_step(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

fn mode_for(qp: u8) -> Mode {
    if quant_step(qp) < 1.0 {
        Mode::Lossless
    } else {
        Mode::Transform
    }
}

const ZIGZAG: [usize; 64] = {
    let mut order = [0usize; 64];
    let mut i = 0;
    let mut s: usize = 0;
    while s < 15 {
        let lo = s.saturating_sub(7);
        let hi = if s < 7 { s } else { 7 };
        let mut k = 0;
        while k <= hi - lo {
            // Odd diagonals walk down-left, even ones up-right.
            let r = if s % 2 == 1 { lo + k } else { hi - k };
            order[i] = r * 8 + (s - r);
            i += 1;
            k += 1;
        }
        s += 1;
    }
    order
};

fn basis() -> [[f64; 8]; 8] {
    let mut b = [[0.0; 8]; 8];
    for (u, row) in b.iter_mut().enumerate() {
        let a = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
        }
    }
    b
}

fn fdct(block: &[f64; 64], b: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64], b: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

struct Grid {
    width: usize,
    height: usize,
    bw: usize,
    bh: usize,
}

impl Grid {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bw: width.div_ceil(8),
            bh: height.div_ceil(8),
        }
    }

    fn blocks(&self) -> usize {
        self.bw * self.bh
    }

    fn padded_width(&self) -> usize {
        self.bw * 8
    }

    fn pad(&self, pixels: &[u8]) -> Vec<u8> {
        let pw = self.padded_width();
        let mut out = Vec::with_capacity(pw * self.bh * 8);
        for y in 0..self.bh * 8 {
            let row = &pixels[y.min(self.height - 1) * self.width..][..self.width];
            out.extend((0..pw).map(|x| row[x.min(self.width - 1)]));
        }
        out
    }

    fn block_origin(&self, b: usize) -> (usize, usize) {
        ((b / self.bw) * 8, (b % self.bw) * 8)
    }

    fn crop(&self, padded: &[u8]) -> Vec<u8> {
        let pw = self.padded_width();
        (0..self.height)
            .flat_map(|y| padded[y * pw..y * pw + self.width].iter().copied())
            .collect()
    }
}

fn predict(img: &[u8], pw: usize, y: usize, x: usize) -> i32 {
    if x > 0 {
        img[y * pw + x - 1] as i32
    } else if y > 0 {
        img[(y - 1) * pw] as i32
    } else {
        128
    }
}

fn map_level(l: i32) -> u64 {
    2 * (l.unsigned_abs() as u64 - 1) + (l < 0) as u64
}

fn unmap_level(m: u64) -> i64 {
    let mag = (m / 2) as i64 + 1;
    if m % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// Writes `ue(n)` then the run/level pairs of the nonzero entries.
fn put_sparse(w: &mut BitWriter, values: &[i32]) {
    w.put_ue(values.iter().filter(|&&v| v != 0).count() as u64);
    let mut run = 0u64;
    for &v in values {
        if v == 0 {
            run += 1;
        } else {
            w.put_ue(run);
            w.put_ue(map_level(v));
            run = 0;
        }
    }
}

fn get_sparse(r: &mut BitReader, out: &mut [i32]) -> Result<()> {
    out.fill(0);
    let n = r.get_ue()?;
    if n > out.len() as u64 {
        return Err(r.error(format!("{n} nonzero values in a {}-entry block", out.len())));
    }
    let mut pos = 0u64;
    for _ in 0..n {
        let run = r.get_ue()?;
        let level = unmap_level(r.get_ue()?);
        let at = pos + run;
        if at >= out.len() as u64 {
            return Err(r.error("zero run passes the end of the block"));
        }
        out[at as usize] = i32::try_from(level).map_err(|_| r.error("level out of range"))?;
        pos = at + 1;
    }
    Ok(())
}

/// Encodes an 8-bit image at the given qp.
pub fn encode_enhancement(image: &Image8, qp: u8) -> Result<Vec<u8>> {
    check_qp(qp)?;
    check_dims(image.width, image.height, image.pixels.len())?;
    let w32 = u32::try_from(image.width).map_err(|_| Error::domain("image too wide"))?;
    let h32 = u32::try_from(image.height).map_err(|_| Error::domain("image too tall"))?;
    let mode = mode_for(qp);
    let grid = Grid::new(image.width, image.height);
    let padded = grid.pad(&image.pixels);
    let pw = grid.padded_width();

    let blocks: Vec<[i32; 64]> = match mode {
        Mode::Transform => {
            let b = basis();
            let step = quant_step(qp);
            (0..grid.blocks())
                .into_par_iter()
                .map(|i| {
                    let (y0, x0) = grid.block_origin(i);
                    let mut px = [0.0; 64];
                    for (k, v) in px.iter_mut().enumerate() {
                        *v = padded[(y0 + k / 8) * pw + x0 + k % 8] as f64 - 128.0;
                    }
                    let c = fdct(&px, &b);
                    let mut scan = [0i32; 64];
                    for (l, &z) in scan.iter_mut().zip(&ZIGZAG) {
                        let mag = (c[z].abs() / step + DEAD_ZONE_OFFSET).floor() as i32;
                        *l = if c[z] < 0.0 { -mag } else { mag };
                    }
                    scan
                })
                .collect()
        }
        Mode::Lossless => (0..grid.blocks())
            .into_par_iter()
            .map(|i| {
                let (y0, x0) = grid.block_origin(i);
                let mut res = [0i32; 64];
                for (k, r) in res.iter_mut().enumerate() {
                    let (y, x) = (y0 + k / 8, x0 + k % 8);
                    *r = padded[y * pw + x] as i32 - predict(&padded, pw, y, x);
                }
                res
            })
            .collect(),
    };

    let mut w = BitWriter::new();
    let mut prev_dc = 0i64;
    for block in &blocks {
        match mode {
            Mode::Transform => {
                w.put_se(block[0] as i64 - prev_dc);
                prev_dc = block[0] as i64;
                put_sparse(&mut w, &block[1..]);
            }
            Mode::Lossless => put_sparse(&mut w, block),
        }
    }

    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, mode as u8, qp, 0]);
    out.extend_from_slice(&w32.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend(w.finish());
    Ok(out)
}

/// Reads the declared `(width, height)` without decoding.
pub fn peek_dims(bytes: &[u8]) -> Result<(usize, usize)> {
    parse_header(bytes).map(|h| (h.width, h.height))
}

struct Header {
    mode: Mode,
    qp: u8,
    width: usize,
    height: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            "stream shorter than its header",
        ));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(4, format!("unsupported version {}", bytes[4])));
    }
    let mode = match bytes[5] {
        0 => Mode::Transform,
        1 => Mode::Lossless,
        m => return Err(Error::format(5, format!("unknown mode {m}"))),
    };
    let qp = bytes[6];
    if qp > MAX_QP {
        return Err(Error::format(6, format!("qp {qp} out of range")));
    }
    if mode != mode_for(qp) {
        return Err(Error::format(5, format!("mode does not match qp {qp}")));
    }
    if bytes[7] != 0 {
        return Err(Error::format(7, "reserved byte is not zero"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if width == 0 {
        return Err(Error::format(8, "zero width"));
    }
    if height == 0 {
        return Err(Error::format(12, "zero height"));
    }
    Ok(Header {
        mode,
        qp,
        width,
        height,
    })
}

/// Decodes a stream written by [`encode_enhancement`].
pub fn decode_enhancement(bytes: &[u8]) -> Result<Image8> {
    let Header {
        mode,
        qp,
        width,
        height,
    } = parse_header(bytes)?;
    let grid = Grid::new(width, height);
    // Every block costs at least one bit (two in transform mode), which
    // bounds allocation on junk input.
    let body = &bytes[HEADER_LEN..];
    let min_bits = if mode == Mode::Transform { 2 } else { 1 };
    if grid.blocks().saturating_mul(min_bits) > body.len().saturating_mul(8) {
        return Err(Error::format(
            bytes.len() as u64,
            format!("{width}x{height} image cannot fit in {} bytes", body.len()),
        ));
    }
    let pw = grid.padded_width();
    let mut padded = vec![0u8; pw * grid.bh * 8];
    let mut r = BitReader::new(body, HEADER_LEN as u64);

    match mode {
        Mode::Transform => {
            let mut scans = vec![[0i32; 64]; grid.blocks()];
            let mut prev_dc = 0i64;
            for scan in scans.iter_mut() {
                let dc = prev_dc
                    .checked_add(r.get_se()?)
                    .ok_or_else(|| r.error("DC level overflow"))?;
                scan[0] = i32::try_from(dc).map_err(|_| r.error("DC level out of range"))?;
                prev_dc = dc;
                get_sparse(&mut r, &mut scan[1..])?;
            }
            r.expect_end()?;
            let b = basis();
            let step = quant_step(qp);
            let recon: Vec<[u8; 64]> = scans
                .par_iter()
                .map(|scan| {
                    let mut c = [0.0; 64];
                    for (&l, &z) in scan.iter().zip(&ZIGZAG) {
                        c[z] = l as f64 * step;
                    }
                    let px = idct(&c, &b);
                    let mut out = [0u8; 64];
                    for (o, p) in out.iter_mut().zip(&px) {
                        *o = (p + 128.0).round().clamp(0.0, 255.0) as u8;
                    }
                    out
                })
                .collect();
            for (i, block) in recon.iter().enumerate() {
                let (y0, x0) = grid.block_origin(i);
                for y in 0..8 {
                    padded[(y0 + y) * pw + x0..][..8].copy_from_slice(&block[y * 8..y * 8 + 8]);
                }
            }
        }
        Mode::Lossless => {
            let mut res = [0i32; 64];
            for i in 0..grid.blocks() {
                get_sparse(&mut r, &mut res)?;
                let (y0, x0) = grid.block_origin(i);
                for (k, &d) in res.iter().enumerate() {
                    let (y, x) = (y0 + k / 8, x0 + k % 8);
                    let v = predict(&padded, pw, y, x) as i64 + d as i64;
                    padded[y * pw + x] = u8::try_from(v)
                        .map_err(|_| r.error(format!("residual gives pixel value {v}")))?;
                }
            }
            r.expect_end()?;
        }
    }
    Image8::new(width, height, grid.crop(&padded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use proptest::prelude::*;

    fn smooth_image(w: usize, h: usize, seed: u64) -> Image8 {
        let mut s = Stream::new(seed);
        let (a, b, c) = (s.uniform() * 0.3, s.uniform() * 0.2, s.uniform() * 6.0);
        let pixels = (0..w * h)
            .map(|i| {
                let (y, x) = ((i / w) as f64, (i % w) as f64);
                let v = 128.0 + 60.0 * (a * x + c).sin() + 50.0 * (b * y).cos() + 8.0 * s.normal();
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Image8::new(w, h, pixels).unwrap()
    }

    #[test]
    fn zigzag_is_a_permutation_starting_like_jpeg() {
        assert_eq!(&ZIGZAG[..10], &[0, 1, 8, 16, 9, 2, 3, 10, 17, 24]);
        assert_eq!(&ZIGZAG[58..], &[61, 54, 47, 55, 62, 63]);
        let mut seen = ZIGZAG.to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn dct_is_orthonormal() {
        let b = basis();
        let mut s = Stream::new(3);
        let mut px = [0.0; 64];
        px.iter_mut().for_each(|v| *v = s.normal() * 40.0);
        let c = fdct(&px, &b);
        let energy = |v: &[f64; 64]| v.iter().map(|x| x * x).sum::<f64>();
        assert!((energy(&px) - energy(&c)).abs() < 1e-9 * energy(&px));
        let back = idct(&c, &b);
        for (a, b) in px.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn step_law() {
        assert_eq!(quant_step(4), 1.0);
        assert!((quant_step(10) - 2.0).abs() < 1e-12);
        assert!((quant_step(40) - 64.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_image_at_unit_step() {
        let img = Image8::new(64, 32, vec![0; 64 * 32]).unwrap();
        let bytes = encode_enhancement(&img, 4).unwrap();
        assert_eq!(bytes[5], 0);
        assert_eq!(decode_enhancement(&bytes).unwrap(), img);
        let blocks = 32;
        assert!(bytes.len() - HEADER_LEN <= 3 * blocks, "{}", bytes.len());
    }

    #[test]
    fn low_qp_is_lossless() {
        let img = smooth_image(37, 21, 1);
        for qp in 0..4 {
            let bytes = encode_enhancement(&img, qp).unwrap();
            assert_eq!(bytes[5], 1);
            assert_eq!(decode_enhancement(&bytes).unwrap(), img);
        }
    }

    #[test]
    fn rate_and_distortion_move_with_qp() {
        let img = smooth_image(64, 64, 2);
        let stats: Vec<(usize, f64)> = [10u8, 20, 30, 40]
            .iter()
            .map(|&qp| {
                let bytes = encode_enhancement(&img, qp).unwrap();
                let mse = decode_enhancement(&bytes).unwrap().mse(&img).unwrap();
                (bytes.len(), mse)
            })
            .collect();
        for pair in stats.windows(2) {
            assert!(pair[0].0 > pair[1].0, "{stats:?}");
            assert!(pair[0].1 < pair[1].1, "{stats:?}");
        }
    }

    #[test]
    fn encode_and_decode_are_deterministic() {
        let img = smooth_image(40, 24, 4);
        let bytes = encode_enhancement(&img, 22).unwrap();
        assert_eq!(encode_enhancement(&img, 22).unwrap(), bytes);
        assert_eq!(
            decode_enhancement(&bytes).unwrap(),
            decode_enhancement(&bytes).unwrap()
        );
    }

    #[test]
    fn qp_out_of_range() {
        let img = Image8::new(8, 8, vec![0; 64]).unwrap();
        assert!(matches!(encode_enhancement(&img, 52), Err(Error::Domain(_))));
    }

    #[test]
    fn corrupt_streams_report_offsets() {
        let img = smooth_image(16, 16, 5);
        let good = encode_enhancement(&img, 20).unwrap();
        let offset = |bytes: &[u8]| match decode_enhancement(bytes) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected a format error, got {other:?}"),
        };
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(offset(&bad), 0);
        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(offset(&bad), 4);
        let mut bad = good.clone();
        bad[6] = 60;
        assert_eq!(offset(&bad), 6);
        assert!(offset(&good[..good.len() - 1]) >= HEADER_LEN as u64);
        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(offset(&bad), good.len() as u64);
        assert_eq!(offset(&good[..10]), 10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn lossy_error_is_bounded_by_step(
            w in 1usize..30, h in 1usize..30, qp in 4u8..=51, seed in any::<u64>()
        ) {
            let img = smooth_image(w, h, seed);
            let out = decode_enhancement(&encode_enhancement(&img, qp).unwrap()).unwrap();
            prop_assert_eq!((out.width, out.height), (w, h));
            // Each coefficient is off by at most 2/3 of a step; the inverse
            // transform sums 64 of them with weights of magnitude at most 1/8.
            let bound = 64.0 / 8.0 * (2.0 / 3.0) * quant_step(qp) + 0.5;
            for (a, b) in img.pixels.iter().zip(&out.pixels) {
                prop_assert!((*a as f64 - *b as f64).abs() <= bound);
            }
        }

        #[test]
        fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let mut data = MAGIC.to_vec();
            data.extend_from_slice(&bytes);
            let _ = decode_enhancement(&data);
        }
    }
}
