//! Raster types and the threshold rule separating beans from the white
//! background: a pixel belongs to the background iff all three channel
//! values exceed the threshold (163 by default).

mod ppm;
mod regions;

pub use ppm::{decode_ppm, encode_ppm, load_image, save_ppm};
pub use regions::{crop_bean, find_bean_regions};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three primary color channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Red, Channel::Green, Channel::Blue];

    pub fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Red => "red",
            Channel::Green => "green",
            Channel::Blue => "blue",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "red" | "r" => Ok(Channel::Red),
            "green" | "g" => Ok(Channel::Green),
            "blue" | "b" => Ok(Channel::Blue),
            other => Err(Error::InvalidInput(format!("unknown channel `{other}`"))),
        }
    }
}

/// An 8-bit RGB pixel value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Pixel {
    pub fn new(r: u8, g: u8, b: u8) -> Self {
        Pixel { r, g, b }
    }

    pub fn channel(self, channel: Channel) -> u8 {
        match channel {
            Channel::Red => self.r,
            Channel::Green => self.g,
            Channel::Blue => self.b,
        }
    }
}

/// A row-major RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<Pixel>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Pixel>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be nonzero".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    /// Image of uniform color.
    pub fn filled(width: usize, height: usize, fill: Pixel) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> Pixel {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, p: Pixel) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x] = p;
    }

    /// Copy out the axis-aligned sub-image at (x0, y0) with the given size.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<RgbImage> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::RegionOutOfBounds(format!(
                "crop ({x0},{y0}) {width}x{height} exceeds image {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let row = &self.pixels[y * self.width + x0..y * self.width + x0 + width];
            pixels.extend_from_slice(row);
        }
        Ok(RgbImage { width, height, pixels })
    }
}

/// Single-channel raster produced by projecting one primary channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayscaleImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
    pub channel: Channel,
}

impl GrayscaleImage {
    pub fn value(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }
}

/// Keep one channel of an RGB image, dropping the other two.
pub fn extract_channel(img: &RgbImage, channel: Channel) -> GrayscaleImage {
    GrayscaleImage {
        width: img.width,
        height: img.height,
        values: img.pixels.iter().map(|p| p.channel(channel)).collect(),
        channel,
    }
}

/// Background test: true iff every channel value strictly exceeds the
/// threshold. (163,163,163) at threshold 163 is therefore a bean pixel.
pub fn is_background(p: Pixel, threshold: u8) -> bool {
    p.r > threshold && p.g > threshold && p.b > threshold
}

/// Neighborhood used by connected-component labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Segmentation parameters. The threshold is the published working value;
/// the size filter brackets a ~35x45 px bean (1575 px) with wide slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub threshold: u8,
    pub min_region_pixels: usize,
    pub max_region_pixels: usize,
    pub connectivity: Connectivity,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            threshold: 163,
            min_region_pixels: 200,
            max_region_pixels: 20_000,
            connectivity: Connectivity::Eight,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_region_pixels == 0 || self.min_region_pixels >= self.max_region_pixels {
            return Err(Error::InvalidInput(format!(
                "region size filter requires 0 < min < max, got [{}, {}]",
                self.min_region_pixels, self.max_region_pixels
            )));
        }
        Ok(())
    }
}

/// Row-major boolean grid; `true` marks a bean pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new_false(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    pub fn new_true(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            cells: vec![true; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask cell count {} does not match {width}x{height}",
                cells.len()
            )));
        }
        Ok(Mask { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.cells[y * self.width + x] = v;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count_true(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Mark every non-background pixel of the image as bean.
pub fn segment_mask(img: &RgbImage, cfg: &SegmentationConfig) -> Mask {
    let cells = img
        .pixels
        .iter()
        .map(|&p| !is_background(p, cfg.threshold))
        .collect();
    Mask {
        width: img.width,
        height: img.height,
        cells,
    }
}

/// Axis-aligned bounding box in source-image pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl BoundingBox {
    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }
}

/// One connected bean region found in a snapshot.
#[derive(Clone, Debug)]
pub struct BeanRegion {
    pub bounding_box: BoundingBox,
    /// Region mask local to the bounding box.
    pub mask: Mask,
    pub pixel_count: usize,
    pub source_image_id: String,
}

/// A cropped bean raster paired with its pixel mask. Downstream statistics
/// count only masked pixels.
#[derive(Clone, Debug)]
pub struct MaskedBean {
    pub id: String,
    pub image: RgbImage,
    pub mask: Mask,
}

impl MaskedBean {
    /// Bean with every pixel masked (useful for whole-image fixtures).
    pub fn full(id: impl Into<String>, image: RgbImage) -> Self {
        let mask = Mask::new_true(image.width(), image.height());
        MaskedBean {
            id: id.into(),
            image,
            mask,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.mask.count_true()
    }

    pub fn masked_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.image
            .pixels()
            .iter()
            .zip(self.mask.cells())
            .filter(|(_, &m)| m)
            .map(|(&p, _)| p)
    }
}
