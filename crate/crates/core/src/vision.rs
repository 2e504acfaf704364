//! Colour-blob detection: HSV threshold, morphological opening, Gaussian
//! blur, re-binarisation and a Hough circle transform over boundary pixels.
//! The strongest circle becomes a [`Detection`] whose horizontal centre is
//! the `x_angle` steering cue.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const FRAME_WIDTH: usize = 320;
pub const FRAME_HEIGHT: usize = 240;

pub type Rgb = [u8; 3];

pub const RED: Rgb = [255, 0, 0];
pub const GREEN: Rgb = [0, 255, 0];

/// Row-major RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    /// A camera-sized frame filled with one colour.
    pub fn blank(color: Rgb) -> Self {
        Self::filled(FRAME_WIDTH, FRAME_HEIGHT, color)
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Format {
                what: "frame",
                detail: format!("{} pixels for {width}x{height}", pixels.len()),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: i64, y: i64, color: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = color;
        }
    }

    /// Paints every pixel whose centre lies within `r` of `(cx, cy)`.
    pub fn fill_disc(&mut self, cx: f64, cy: f64, r: f64, color: Rgb) {
        if !(r > 0.0) {
            return;
        }
        let x0 = (cx - r).floor().max(0.0) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as i64).min(self.width as i64 - 1);
        let y1 = ((cy + r).ceil() as i64).min(self.height as i64 - 1);
        if x1 < 0 || y1 < 0 {
            return;
        }
        let r2 = r * r;
        for y in y0..=y1 as usize {
            let dy = y as f64 - cy;
            for x in x0..=x1 as usize {
                let dx = x as f64 - cx;
                if dx * dx + dy * dy <= r2 {
                    self.pixels[y * self.width + x] = color;
                }
            }
        }
    }

    /// Midpoint circle outline.
    pub fn draw_circle(&mut self, cx: i64, cy: i64, r: i64, color: Rgb) {
        let (mut x, mut y, mut err) = (r, 0i64, 1 - r);
        while x >= y {
            for (dx, dy) in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)] {
                self.set(cx + dx, cy + dy, color);
            }
            y += 1;
            if err < 0 {
                err += 2 * y + 1;
            } else {
                x -= 1;
                err += 2 * (y - x) + 1;
            }
        }
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        out.write_all(&raw)?;
        Ok(())
    }

    /// Reads a binary (P6) PPM with maxval 255.
    pub fn read_ppm<R: Read>(input: R) -> Result<Self> {
        let bad = |detail: &str| Error::Format { what: "PPM", detail: detail.to_string() };
        let mut reader = BufReader::new(input);
        let mut header = Vec::new();
        // magic, width, height, maxval; '#' comments allowed between tokens
        while header.len() < 4 {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Err(bad("truncated header"));
            }
            let content = line.split('#').next().unwrap_or("");
            header.extend(content.split_whitespace().map(str::to_owned));
        }
        if header.len() > 4 {
            return Err(bad("pixel data must start after the maxval line"));
        }
        if header[0] != "P6" {
            return Err(bad("only binary P6 is supported"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
        let (width, height, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        let mut raw = vec![0u8; width * height * 3];
        reader.read_exact(&mut raw).map_err(|_| bad("truncated pixel data"))?;
        let pixels = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Frame::from_pixels(width, height, pixels)
    }
}

/// Hexcone RGB to HSV. Hue in degrees [0, 360), saturation and value in
/// [0, 1]; hue is 0 for achromatic pixels.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (f64::from(r) / 255.0, f64::from(g) / 255.0, f64::from(b) / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, v);
    }
    let h = if max == rf {
        60.0 * ((gf - bf) / delta)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    let h = h.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    (if h >= 360.0 { 0.0 } else { h }, s, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub h_lo: f64,
    pub h_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Default for HsvRange {
    /// Yellow, centred on h = 60 with slack for shading.
    fn default() -> Self {
        Self { h_lo: 45.0, h_hi: 75.0, s_lo: 0.4, s_hi: 1.0, v_lo: 0.3, v_hi: 1.0 }
    }
}

impl HsvRange {
    /// `h_lo > h_hi` denotes a hue interval wrapping through 0.
    pub fn contains(&self, h: f64, s: f64, v: f64) -> bool {
        let hue_ok = if self.h_lo <= self.h_hi {
            h >= self.h_lo && h <= self.h_hi
        } else {
            h >= self.h_lo || h <= self.h_hi
        };
        hue_ok && s >= self.s_lo && s <= self.s_hi && v >= self.v_lo && v <= self.v_hi
    }

    pub fn validate(&self) -> Result<()> {
        let hue = |h: f64| (0.0..360.0).contains(&h);
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !hue(self.h_lo) || !hue(self.h_hi) {
            return Err(Error::Config("hue limits must lie in [0, 360)".into()));
        }
        if !(unit(self.s_lo) && unit(self.s_hi) && unit(self.v_lo) && unit(self.v_hi))
            || self.s_lo > self.s_hi
            || self.v_lo > self.v_hi
        {
            return Err(Error::Config("saturation/value limits must satisfy 0 <= lo <= hi <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Inclusive `(x0, y0, x1, y1)` of the set pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i % self.width, i / self.width);
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bbox
    }

    fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> BinaryMask {
        let mut out = BinaryMask::new(width, height);
        for y in 0..height {
            let src = (y0 + y) * self.width + x0;
            out.bits[y * width..(y + 1) * width].copy_from_slice(&self.bits[src..src + width]);
        }
        out
    }

    fn paste(&mut self, part: &BinaryMask, x0: usize, y0: usize) {
        for y in 0..part.height {
            let dst = (y0 + y) * self.width + x0;
            self.bits[dst..dst + part.width].copy_from_slice(&part.bits[y * part.width..(y + 1) * part.width]);
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixels at or above `level` become set.
    pub fn binarize(&self, level: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.data.iter().map(|&v| v >= level).collect(),
        }
    }
}

pub fn threshold_mask(frame: &Frame, range: &HsvRange) -> BinaryMask {
    BinaryMask {
        width: frame.width,
        height: frame.height,
        bits: frame
            .pixels
            .iter()
            .map(|&[r, g, b]| {
                let (h, s, v) = rgb_to_hsv(r, g, b);
                range.contains(h, s, v)
            })
            .collect(),
    }
}

/// One pass of a 1-D sliding min (erode) or max (dilate) with a window of
/// `2 * half + 1`. Out-of-image samples read as clear.
fn sliding_pass(src: &[bool], width: usize, height: usize, half: usize, horizontal: bool, erode: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    let (lines, len) = if horizontal { (height, width) } else { (width, height) };
    let index = |line: usize, i: usize| if horizontal { line * width + i } else { i * width + line };
    let window = 2 * half + 1;
    for line in 0..lines {
        // count of set samples inside the window centred at i
        let mut set = 0usize;
        for i in 0..=half.min(len.saturating_sub(1)) {
            set += usize::from(src[index(line, i)]);
        }
        for i in 0..len {
            out[index(line, i)] = if erode { set == window } else { set > 0 };
            let enter = i + half + 1;
            if enter < len {
                set += usize::from(src[index(line, enter)]);
            }
            if i >= half {
                set -= usize::from(src[index(line, i - half)]);
            }
        }
    }
    out
}

fn square_filter(mask: &BinaryMask, kernel_px: usize, erode: bool) -> BinaryMask {
    let half = kernel_px / 2;
    let rows = sliding_pass(&mask.bits, mask.width, mask.height, half, true, erode);
    let bits = sliding_pass(&rows, mask.width, mask.height, half, false, erode);
    BinaryMask { width: mask.width, height: mask.height, bits }
}

pub fn erode(mask: &BinaryMask, kernel_px: usize) -> BinaryMask {
    square_filter(mask, kernel_px, true)
}

pub fn dilate(mask: &BinaryMask, kernel_px: usize) -> BinaryMask {
    square_filter(mask, kernel_px, false)
}

/// Erosion followed by dilation with a `kernel_px` square.
pub fn morphological_open(mask: &BinaryMask, kernel_px: usize) -> BinaryMask {
    assert!(kernel_px % 2 == 1, "kernel must be odd");
    dilate(&erode(mask, kernel_px), kernel_px)
}

/// Normalised 1-D Gaussian taps, length `kernel_px`.
pub fn gaussian_kernel(kernel_px: usize, sigma: f64) -> Vec<f64> {
    assert!(kernel_px % 2 == 1 && sigma > 0.0);
    let half = (kernel_px / 2) as i64;
    let taps: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur, edge-clamped.
pub fn gaussian_blur(gray: &GrayImage, kernel_px: usize, sigma: f64) -> GrayImage {
    let taps = gaussian_kernel(kernel_px, sigma);
    let half = (kernel_px / 2) as i64;
    let (w, h) = (gray.width as i64, gray.height as i64);
    let mut tmp = vec![0.0; gray.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sx = (x + k as i64 - half).clamp(0, w - 1);
                acc += t * gray.data[(y * w + sx) as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut data = vec![0.0; gray.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sy = (y + k as i64 - half).clamp(0, h - 1);
                acc += t * tmp[(sy * w + x) as usize];
            }
            data[(y * w + x) as usize] = acc;
        }
    }
    GrayImage { width: gray.width, height: gray.height, data }
}

/// Minimum Hough support for a circle of radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteThreshold {
    Absolute(u32),
    /// Fraction of the circumference `2πr`.
    CircumferenceFraction(f64),
}

impl VoteThreshold {
    pub fn at_radius(&self, r: usize) -> f64 {
        match *self {
            VoteThreshold::Absolute(n) => f64::from(n),
            VoteThreshold::CircumferenceFraction(f) => f * 2.0 * std::f64::consts::PI * r as f64,
        }
    }
}

impl Default for VoteThreshold {
    fn default() -> Self {
        VoteThreshold::CircumferenceFraction(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleCandidate {
    pub cx: usize,
    pub cy: usize,
    pub r: usize,
    pub votes: u32,
}

/// Set pixels with at least one clear 4-neighbour. Neighbours outside the
/// image count as set, so a blob cut by the frame edge has no boundary there.
pub fn boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width, mask.height);
    let clear = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && !mask.get(x as usize, y as usize)
    };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            if clear(xi - 1, yi) || clear(xi + 1, yi) || clear(xi, yi - 1) || clear(xi, yi + 1) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Integer offsets whose length rounds to `r`: `r - 0.5 <= |d| < r + 0.5`.
fn ring_offsets(r: usize) -> Vec<(i32, i32)> {
    let (lo, hi) = ((r as f64 - 0.5).max(0.0).powi(2), (r as f64 + 0.5).powi(2));
    let ri = r as i32 + 1;
    let mut out = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            let d2 = f64::from(dx * dx + dy * dy);
            if d2 >= lo && d2 < hi {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Accumulator window: every centre that can receive a vote for radii up to
/// `r_hi` lies within `r_hi + 1` of an edge pixel, so only the edge bounding
/// box grown by that much (and clipped to the image) is stored.
struct HoughGrid<'a> {
    edges: &'a [(usize, usize)],
    /// Bounding box of the edge pixels, window coordinates.
    bbox: (usize, usize, usize, usize),
    origin: (usize, usize),
    width: usize,
    height: usize,
}

impl<'a> HoughGrid<'a> {
    fn new(mask: &BinaryMask, edges: &'a [(usize, usize)], r_hi: usize) -> Self {
        let (bx0, by0, bx1, by1) = edges.iter().fold((usize::MAX, usize::MAX, 0, 0), |(x0, y0, x1, y1), &(x, y)| {
            (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
        });
        let reach = r_hi + 1;
        let (ox, oy) = (bx0.saturating_sub(reach), by0.saturating_sub(reach));
        let x1 = (bx1 + reach).min(mask.width - 1);
        let y1 = (by1 + reach).min(mask.height - 1);
        HoughGrid {
            edges,
            bbox: (bx0 - ox, by0 - oy, bx1 - ox, by1 - oy),
            origin: (ox, oy),
            width: x1 - ox + 1,
            height: y1 - oy + 1,
        }
    }

    fn vote_ring(&self, r: usize, acc: &mut [u16]) {
        acc.fill(0);
        let (w, h) = (self.width as i32, self.height as i32);
        let (ox, oy) = (self.origin.0 as i32, self.origin.1 as i32);
        let offsets = ring_offsets(r);
        for &(ex, ey) in self.edges {
            let (ex, ey) = (ex as i32 - ox, ey as i32 - oy);
            for &(dx, dy) in &offsets {
                let (cx, cy) = (ex + dx, ey + dy);
                if cx >= 0 && cy >= 0 && cx < w && cy < h {
                    acc[(cy * w + cx) as usize] += 1;
                }
            }
        }
    }

    /// Local maxima (3x3, non-strict) of `score` that reach `min_votes`.
    /// Cells outside the window never hold votes, so clipping the
    /// neighbourhood at the window edge changes nothing.
    fn maxima(&self, r: usize, score: &[u32], min_votes: f64, out: &mut Vec<CircleCandidate>) {
        let (w, h) = (self.width, self.height);
        let (bx0, by0, bx1, by1) = self.bbox;
        let x0 = bx0.saturating_sub(r + 1);
        let y0 = by0.saturating_sub(r + 1);
        let x1 = (bx1 + r + 1).min(w - 1);
        let y1 = (by1 + r + 1).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let s = score[y * w + x];
                if f64::from(s) < min_votes || s == 0 {
                    continue;
                }
                let mut is_max = true;
                'nb: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if score[ny * w + nx] > s {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push(CircleCandidate { cx: x + self.origin.0, cy: y + self.origin.1, r, votes: s });
                }
            }
        }
    }

    /// Candidates for radii `r_lo..=r_hi`. A boundary pixel lies up to one
    /// pixel inside the true edge, so radius `r` collects the two thin rings
    /// `r - 1` and `r`.
    fn scan(&self, r_lo: usize, r_hi: usize, threshold: &VoteThreshold) -> Vec<CircleCandidate> {
        let n = self.width * self.height;
        let mut prev = vec![0u16; n];
        let mut cur = vec![0u16; n];
        let mut score = vec![0u32; n];
        let mut out = Vec::new();
        self.vote_ring(r_lo - 1, &mut prev);
        for r in r_lo..=r_hi {
            self.vote_ring(r, &mut cur);
            for ((s, &a), &b) in score.iter_mut().zip(&prev).zip(&cur) {
                *s = u32::from(a) + u32::from(b);
            }
            self.maxima(r, &score, threshold.at_radius(r), &mut out);
            std::mem::swap(&mut prev, &mut cur);
        }
        out
    }
}

/// Radii handled per parallel work item.
const RADII_PER_CHUNK: usize = 8;

/// Circle transform over the boundary pixels of `mask`.
///
/// Votes are accumulated over (cx, cy, r) at 1 px resolution, centres
/// restricted to the image. Returns local maxima with at least
/// `threshold.at_radius(r)` votes, strongest first, after suppressing any
/// candidate whose centre lies within `r_min` of a stronger one.
pub fn hough_circles(
    mask: &BinaryMask,
    r_min: usize,
    r_max: usize,
    threshold: VoteThreshold,
    exec: Exec,
) -> Vec<CircleCandidate> {
    assert!(r_min > 0 && r_min < r_max, "need 0 < r_min < r_max");
    let edges = boundary_pixels(mask);
    if edges.is_empty() {
        return Vec::new();
    }
    // a circle can collect at most one vote per edge pixel
    let budget = edges.len() as f64;
    let r_hi = (r_min..=r_max)
        .take_while(|&r| threshold.at_radius(r) <= budget)
        .last();
    let Some(r_hi) = r_hi else {
        return Vec::new();
    };
    let grid = HoughGrid::new(mask, &edges, r_hi);

    let n_chunks = (r_hi - r_min) / RADII_PER_CHUNK + 1;
    let mut candidates: Vec<CircleCandidate> = exec
        .map_range(n_chunks, |c| {
            let lo = r_min + c * RADII_PER_CHUNK;
            let hi = (lo + RADII_PER_CHUNK - 1).min(r_hi);
            grid.scan(lo, hi, &threshold)
        })
        .into_iter()
        .flatten()
        .collect();

    candidates.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.r.cmp(&b.r))
            .then(a.cy.cmp(&b.cy))
            .then(a.cx.cmp(&b.cx))
    });
    let suppress2 = (r_min * r_min) as i64;
    let mut kept: Vec<CircleCandidate> = Vec::new();
    for c in candidates {
        let near = kept.iter().any(|k| {
            let dx = k.cx as i64 - c.cx as i64;
            let dy = k.cy as i64 - c.cy as i64;
            dx * dx + dy * dy < suppress2
        });
        if !near {
            kept.push(c);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proximity {
    /// Drawn green.
    Far,
    /// Drawn red; the robot must come to rest.
    Close,
}

impl Proximity {
    pub fn as_feature(self) -> f64 {
        match self {
            Proximity::Far => 0.0,
            Proximity::Close => 1.0,
        }
    }

    pub fn color(self) -> Rgb {
        match self {
            Proximity::Far => GREEN,
            Proximity::Close => RED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Horizontal pixel coordinate of the circle centre.
    pub x_angle: f64,
    /// Vertical pixel coordinate; reported but unused by the planner.
    pub y_px: f64,
    pub radius_px: f64,
    pub votes: u32,
    pub proximity: Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisionConfig {
    pub hsv_range: HsvRange,
    /// Circles strictly larger than this are `Close`.
    pub threshold_radius_px: f64,
    pub open_kernel: usize,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub hough_r_min: usize,
    pub hough_r_max: usize,
    pub hough_min_votes: VoteThreshold,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            hsv_range: HsvRange::default(),
            threshold_radius_px: 40.0,
            open_kernel: 5,
            blur_kernel: 9,
            blur_sigma: 2.0,
            hough_r_min: 5,
            hough_r_max: 110,
            hough_min_votes: VoteThreshold::default(),
        }
    }
}

impl VisionConfig {
    pub fn validate(&self) -> Result<()> {
        self.hsv_range.validate()?;
        for (name, k) in [("open_kernel", self.open_kernel), ("blur_kernel", self.blur_kernel)] {
            if k == 0 || k % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd and >= 1, got {k}")));
            }
        }
        if !(self.blur_sigma > 0.0) {
            return Err(Error::Config("blur_sigma must be positive".into()));
        }
        if !(0 < self.hough_r_min && self.hough_r_min < self.hough_r_max && self.hough_r_max < 120) {
            return Err(Error::Config("need 0 < hough_r_min < hough_r_max < 120".into()));
        }
        Ok(())
    }

    pub fn proximity_for(&self, radius_px: f64) -> Proximity {
        if radius_px > self.threshold_radius_px {
            Proximity::Close
        } else {
            Proximity::Far
        }
    }
}

/// Mask after threshold, opening, blur and re-binarisation.
pub fn segment(frame: &Frame, cfg: &VisionConfig) -> BinaryMask {
    let mask = threshold_mask(frame, &cfg.hsv_range);
    let Some((x0, y0, x1, y1)) = mask.bounding_box() else {
        return mask;
    };
    // Nothing outside the box grown by both filter reaches can become set,
    // and inside it the window sees exactly the zeros the full frame has.
    let pad = cfg.open_kernel + cfg.blur_kernel;
    let (cx0, cy0) = (x0.saturating_sub(pad), y0.saturating_sub(pad));
    let (cx1, cy1) = ((x1 + pad).min(mask.width - 1), (y1 + pad).min(mask.height - 1));
    let window = mask.crop(cx0, cy0, cx1 - cx0 + 1, cy1 - cy0 + 1);
    let mut out = BinaryMask::new(mask.width, mask.height);
    out.paste(&clean_mask(&window, cfg), cx0, cy0);
    out
}

fn clean_mask(mask: &BinaryMask, cfg: &VisionConfig) -> BinaryMask {
    let opened = morphological_open(mask, cfg.open_kernel);
    gaussian_blur(&opened.to_gray(), cfg.blur_kernel, cfg.blur_sigma).binarize(128.0)
}

/// Full pipeline on one frame. `None` means the object is lost.
pub fn detect_object(frame: &Frame, cfg: &VisionConfig) -> Option<Detection> {
    detect_object_with(frame, cfg, Exec::Sequential)
}

pub fn detect_object_with(frame: &Frame, cfg: &VisionConfig, exec: Exec) -> Option<Detection> {
    let mask = segment(frame, cfg);
    let top = hough_circles(&mask, cfg.hough_r_min, cfg.hough_r_max, cfg.hough_min_votes, exec)
        .into_iter()
        .next()?;
    let radius_px = top.r as f64;
    Some(Detection {
        x_angle: top.cx as f64,
        y_px: top.cy as f64,
        radius_px,
        votes: top.votes,
        proximity: cfg.proximity_for(radius_px),
    })
}

/// Runs [`detect_object`] over many frames, one work item per frame.
pub fn detect_batch(frames: &[Frame], cfg: &VisionConfig, exec: Exec) -> Vec<Option<Detection>> {
    exec.map_slice(frames, |f| detect_object(f, cfg))
}

/// Copy of `frame` with the detection circle burned in (red when close,
/// green when far).
pub fn annotate(frame: &Frame, detection: Option<&Detection>) -> Frame {
    let mut out = frame.clone();
    if let Some(d) = detection {
        out.draw_circle(
            d.x_angle.round() as i64,
            d.y_px.round() as i64,
            d.radius_px.round() as i64,
            d.proximity.color(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const YELLOW: Rgb = [240, 220, 30];
    const BACKGROUND: Rgb = [60, 60, 60];

    fn disc_frame(discs: &[(f64, f64, f64)]) -> Frame {
        let mut f = Frame::blank(BACKGROUND);
        for &(cx, cy, r) in discs {
            f.fill_disc(cx, cy, r, YELLOW);
        }
        f
    }

    fn disc_mask(cx: f64, cy: f64, r: f64) -> BinaryMask {
        threshold_mask(&disc_frame(&[(cx, cy, r)]), &HsvRange::default())
    }

    #[test]
    fn hsv_examples() {
        let (h, s, v) = rgb_to_hsv(128, 128, 128);
        assert_eq!((h, s), (0.0, 0.0));
        assert_abs_diff_eq!(v, 128.0 / 255.0);
        assert_eq!(rgb_to_hsv(0, 0, 0).2, 0.0);
        assert_eq!(rgb_to_hsv(255, 255, 0), (60.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(0, 0, 255).0, 240.0);
        assert_eq!(rgb_to_hsv(255, 0, 128).0.round(), 330.0);
    }

    #[test]
    fn hue_wrap() {
        let reds = HsvRange { h_lo: 340.0, h_hi: 20.0, ..HsvRange::default() };
        assert!(reds.contains(350.0, 1.0, 1.0));
        assert!(reds.contains(10.0, 1.0, 1.0));
        assert!(!reds.contains(60.0, 1.0, 1.0));
    }

    #[test]
    fn threshold_uniform_frames() {
        let yellow = threshold_mask(&Frame::blank([255, 255, 0]), &HsvRange::default());
        assert_eq!(yellow.count(), FRAME_WIDTH * FRAME_HEIGHT);
        let blue = threshold_mask(&Frame::blank([0, 0, 255]), &HsvRange::default());
        assert_eq!(blue.count(), 0);
    }

    #[test]
    fn threshold_disc_area() {
        let r = 25.3;
        let m = disc_mask(150.4, 110.7, r);
        let area = std::f64::consts::PI * r * r;
        assert!((m.count() as f64 - area).abs() <= 0.1 * area);
    }

    #[test]
    fn opening_examples() {
        let empty = BinaryMask::new(40, 40);
        assert_eq!(morphological_open(&empty, 3), empty);

        let mut speck = BinaryMask::new(40, 40);
        speck.set(20, 20, true);
        assert_eq!(morphological_open(&speck, 3).count(), 0);

        let mut square = BinaryMask::new(40, 40);
        for y in 10..30 {
            for x in 10..30 {
                square.set(x, y, true);
            }
        }
        assert_eq!(morphological_open(&square, 3), square);
    }

    #[test]
    fn erosion_clears_image_border() {
        let full = BinaryMask { width: 10, height: 10, bits: vec![true; 100] };
        let e = erode(&full, 3);
        assert!(!e.get(0, 5) && !e.get(9, 9) && e.get(1, 1));
    }

    #[test]
    fn blur_examples() {
        let c = GrayImage::filled(30, 20, 7.5);
        let b = gaussian_blur(&c, 9, 2.0);
        for v in &b.data {
            assert_abs_diff_eq!(*v, 7.5, epsilon = 1e-12);
        }

        let mut imp = GrayImage::filled(11, 11, 0.0);
        imp.data[5 * 11 + 5] = 1.0;
        let b = gaussian_blur(&imp, 3, 1.0);
        let w0 = 1.0 / (1.0 + 2.0 * (-0.5f64).exp());
        assert_abs_diff_eq!(b.get(5, 5), w0 * w0, epsilon = 1e-15);
        let total: f64 = b.data.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn kernel_taps_sum_to_one() {
        for (k, s) in [(1, 0.5), (3, 1.0), (9, 2.0), (15, 4.5)] {
            let sum: f64 = gaussian_kernel(k, s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hough_empty() {
        let m = BinaryMask::new(FRAME_WIDTH, FRAME_HEIGHT);
        assert!(hough_circles(&m, 5, 110, VoteThreshold::default(), Exec::Sequential).is_empty());
    }

    #[test]
    fn hough_single_disc() {
        let m = disc_mask(160.0, 120.0, 30.0);
        let c = hough_circles(&m, 5, 110, VoteThreshold::default(), Exec::Sequential);
        let top = c[0];
        assert!((top.cx as i64 - 160).abs() <= 2 && (top.cy as i64 - 120).abs() <= 2, "{top:?}");
        assert!((top.r as i64 - 30).abs() <= 2, "{top:?}");
    }

    #[test]
    fn hough_two_discs() {
        let m = threshold_mask(
            &disc_frame(&[(80.0, 120.0, 20.0), (240.0, 120.0, 20.0)]),
            &HsvRange::default(),
        );
        let c = hough_circles(&m, 5, 110, VoteThreshold::default(), Exec::Sequential);
        assert!(c.len() >= 2);
        let mut top2 = [c[0], c[1]];
        top2.sort_by_key(|c| c.cx);
        for (cand, x) in top2.iter().zip([80i64, 240]) {
            assert!((cand.cx as i64 - x).abs() <= 2 && (cand.cy as i64 - 120).abs() <= 2);
            assert!((cand.r as i64 - 20).abs() <= 2);
        }
    }

    #[test]
    fn hough_parallel_matches_sequential() {
        let m = threshold_mask(
            &disc_frame(&[(70.3, 100.2, 17.5), (230.0, 150.6, 44.2)]),
            &HsvRange::default(),
        );
        let a = hough_circles(&m, 5, 110, VoteThreshold::default(), Exec::Sequential);
        let b = hough_circles(&m, 5, 110, VoteThreshold::default(), Exec::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn detect_examples() {
        let cfg = VisionConfig::default();
        let far = detect_object(&disc_frame(&[(90.0, 120.0, 18.0)]), &cfg).unwrap();
        assert!((far.x_angle - 90.0).abs() <= 2.0);
        assert_eq!(far.proximity, Proximity::Far);

        let close = detect_object(&disc_frame(&[(165.0, 120.0, 55.0)]), &cfg).unwrap();
        assert!((close.x_angle - 165.0).abs() <= 2.0);
        assert_eq!(close.proximity, Proximity::Close);

        assert!(detect_object(&Frame::blank(BACKGROUND), &cfg).is_none());
    }

    #[test]
    fn speckle_noise_is_ignored() {
        let mut f = disc_frame(&[(200.0, 100.0, 22.0)]);
        for i in 0..40 {
            f.set((i * 37 % 300) as i64, (i * 53 % 230) as i64, YELLOW);
        }
        let d = detect_object(&f, &VisionConfig::default()).unwrap();
        assert!((d.x_angle - 200.0).abs() <= 2.0 && (d.radius_px - 22.0).abs() <= 2.0);
    }

    #[test]
    fn ppm_round_trip_and_annotation() {
        let f = disc_frame(&[(100.0, 80.0, 12.0)]);
        let det = detect_object(&f, &VisionConfig::default()).unwrap();
        let annotated = annotate(&f, Some(&det));
        assert!(annotated.pixels().contains(&GREEN));
        let mut buf = Vec::new();
        annotated.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n320 240\n255\n"));
        assert_eq!(Frame::read_ppm(buf.as_slice()).unwrap(), annotated);
        assert!(Frame::read_ppm(&b"P3\n1 1\n255\n0 0 0"[..]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(VisionConfig::default().validate().is_ok());
        let bad = VisionConfig { open_kernel: 4, ..VisionConfig::default() };
        assert!(bad.validate().is_err());
        let bad = VisionConfig { hough_r_max: 130, ..VisionConfig::default() };
        assert!(bad.validate().is_err());
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        proptest::collection::vec(any::<bool>(), 24 * 18)
            .prop_map(|bits| BinaryMask { width: 24, height: 18, bits })
    }

    proptest! {
        #[test]
        fn opening_anti_extensive_and_idempotent(m in arb_mask(), k in prop::sample::select(vec![1usize, 3, 5])) {
            let once = morphological_open(&m, k);
            prop_assert!(once.is_subset_of(&m));
            prop_assert_eq!(morphological_open(&once, k), once);
        }

        #[test]
        fn windowed_segment_matches_full_frame(
            discs in proptest::collection::vec((-20.0f64..340.0, -20.0f64..260.0, 1.0f64..60.0), 0..3),
            speckle in proptest::collection::vec((0usize..320, 0usize..240), 0..4),
        ) {
            let mut f = disc_frame(&discs);
            for (x, y) in speckle {
                f.set(x as i64, y as i64, YELLOW);
            }
            let cfg = VisionConfig::default();
            let full = clean_mask(&threshold_mask(&f, &cfg.hsv_range), &cfg);
            prop_assert_eq!(segment(&f, &cfg), full);
        }
    }
}
