//! Running a user-supplied encoder and decoder as subprocesses.
//!
//! Templates are run with `sh -c` after substituting `{input}`, `{output}`,
//! `{qp}`, `{width}` and `{height}`. The encoder reads a raw 8-bit
//! monochrome frame (`width * height` bytes, row-major, no header) from
//! `{input}` and writes its bitstream to `{output}`. The decoder reads that
//! bitstream from `{input}` and writes a raw frame to `{output}`; when it
//! emits 4:2:0 output, only the leading `width * height` luma bytes are used.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::surrogate::{check_qp, Image8};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCodec {
    pub encode: String,
    pub decode: String,
}

fn render(template: &str, input: &Path, output: &Path, qp: u8, w: usize, h: usize) -> String {
    template
        .replace("{input}", &quote(input))
        .replace("{output}", &quote(output))
        .replace("{qp}", &qp.to_string())
        .replace("{width}", &w.to_string())
        .replace("{height}", &h.to_string())
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn run(cmd: &str) -> Result<()> {
    let out = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .output()
        .map_err(|e| Error::ExternalCodec(format!("cannot start `{cmd}`: {e}")))?;
    if !out.status.success() {
        return Err(Error::ExternalCodec(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(())
}

fn read_output(path: &Path, cmd: &str) -> Result<Vec<u8>> {
    std::fs::read(path)
        .map_err(|e| Error::ExternalCodec(format!("`{cmd}` left no readable output: {e}")))
}

impl ExternalCodec {
    pub fn encode(&self, image: &Image8, qp: u8) -> Result<Vec<u8>> {
        check_qp(qp)?;
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("input.yuv");
        let output = dir.path().join("output.bin");
        std::fs::write(&input, &image.pixels).map_err(|e| Error::io(&input, e))?;
        run(&render(
            &self.encode,
            &input,
            &output,
            qp,
            image.width,
            image.height,
        ))?;
        read_output(&output, &self.encode)
    }

    pub fn decode(&self, bitstream: &[u8], qp: u8, width: usize, height: usize) -> Result<Image8> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("input.bin");
        let output = dir.path().join("output.yuv");
        std::fs::write(&input, bitstream).map_err(|e| Error::io(&input, e))?;
        run(&render(&self.decode, &input, &output, qp, width, height))?;
        let mut frame = read_output(&output, &self.decode)?;
        if frame.len() < width * height {
            return Err(Error::ExternalCodec(format!(
                "decoder wrote {} bytes, expected at least {}",
                frame.len(),
                width * height
            )));
        }
        frame.truncate(width * height);
        Image8::new(width, height, frame)
    }
}
