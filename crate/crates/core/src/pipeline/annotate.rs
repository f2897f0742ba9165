//! Box outlines and labels drawn with an embedded 5x7 bitmap font.

use crate::classifier::MaskLabel;
use crate::record::Detection;

use super::frame::Frame;

pub const MASK_COLOR: [u8; 3] = [0, 255, 0];
pub const NO_MASK_COLOR: [u8; 3] = [255, 0, 0];
pub const OUTLINE_WIDTH: u32 = 2;
pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;

/// Rows top to bottom, bit 4 is the leftmost column.
fn glyph(c: char) -> [u8; GLYPH_HEIGHT] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        _ => [0; GLYPH_HEIGHT],
    }
}

pub fn label_text(d: &Detection) -> String {
    let name = match d.label {
        MaskLabel::Mask => "MASK",
        MaskLabel::NoMask => "NO MASK",
    };
    format!("{name} {:.2}", d.confidence)
}

pub fn label_color(label: MaskLabel) -> [u8; 3] {
    match label {
        MaskLabel::Mask => MASK_COLOR,
        MaskLabel::NoMask => NO_MASK_COLOR,
    }
}

/// Pixels of the outline, all inside the box.
pub fn outline_pixels(d: &Detection) -> Vec<(usize, usize)> {
    let (x1, y1, x2, y2) = (d.x1, d.y1, d.x2, d.y2);
    let inner_x = x1 + OUTLINE_WIDTH..x2.saturating_sub(OUTLINE_WIDTH);
    let inner_y = y1 + OUTLINE_WIDTH..y2.saturating_sub(OUTLINE_WIDTH);
    let mut px = Vec::new();
    for y in y1..y2 {
        for x in x1..x2 {
            if !(inner_x.contains(&x) && inner_y.contains(&y)) {
                px.push((x as usize, y as usize));
            }
        }
    }
    px
}

/// Pixels of the label text, clipped to the frame. The text sits one pixel
/// above the box, or one pixel below it when there is no room above.
pub fn text_pixels(d: &Detection, width: usize, height: usize) -> Vec<(usize, usize)> {
    let text = label_text(d);
    let text_w = text.chars().count() * (GLYPH_WIDTH + 1) - 1;
    let left = (d.x1 as usize).min(width.saturating_sub(text_w));
    let top = if d.y1 as usize > GLYPH_HEIGHT {
        d.y1 as usize - GLYPH_HEIGHT - 1
    } else {
        d.y2 as usize + 1
    };
    let mut px = Vec::new();
    for (i, c) in text.chars().enumerate() {
        let gx = left + i * (GLYPH_WIDTH + 1);
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..GLYPH_WIDTH {
                if bits & (0x10 >> col) == 0 {
                    continue;
                }
                let (x, y) = (gx + col, top + row);
                if x < width && y < height {
                    px.push((x, y));
                }
            }
        }
    }
    px
}

/// Returns a copy of `frame` with every detection drawn in order.
pub fn annotate(frame: &Frame, detections: &[Detection]) -> Frame {
    let mut out = frame.clone();
    for d in detections {
        let color = label_color(d.label);
        for (x, y) in outline_pixels(d) {
            if x < out.width && y < out.height {
                out.set_pixel(x, y, color);
            }
        }
        for (x, y) in text_pixels(d, out.width, out.height) {
            out.set_pixel(x, y, color);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn det(b: [u32; 4], label: MaskLabel) -> Detection {
        Detection {
            frame: 0,
            x1: b[0],
            y1: b[1],
            x2: b[2],
            y2: b[3],
            label,
            confidence: 0.87,
            face_score: 0.9,
        }
    }

    fn changed(a: &Frame, b: &Frame) -> HashSet<(usize, usize)> {
        let mut s = HashSet::new();
        for y in 0..a.height {
            for x in 0..a.width {
                if a.pixel(x, y) != b.pixel(x, y) {
                    s.insert((x, y));
                }
            }
        }
        s
    }

    #[test]
    fn no_detections_is_identity() {
        let f = Frame::filled(0, 20, 10, [9, 8, 7]);
        assert_eq!(annotate(&f, &[]), f);
    }

    #[test]
    fn mask_detection_paints_outline_and_text_only() {
        let f = Frame::filled(0, 80, 60, [100, 100, 100]);
        let d = det([10, 20, 40, 50], MaskLabel::Mask);
        let out = annotate(&f, std::slice::from_ref(&d));
        let diff = changed(&f, &out);

        // the outline: two-pixel frame of the 30x30 box
        let mut ring = HashSet::new();
        for y in 20..50 {
            for x in 10..40 {
                if !(12..38).contains(&x) || !(22..48).contains(&y) {
                    ring.insert((x, y));
                }
            }
        }
        assert_eq!(ring.len(), 30 * 30 - 26 * 26);
        assert!(ring.is_subset(&diff));
        for &(x, y) in &ring {
            assert_eq!(out.pixel(x, y), MASK_COLOR);
        }
        let text: HashSet<_> = diff.difference(&ring).copied().collect();
        assert!(!text.is_empty());
        // text is above the box, in the label color
        assert!(text.iter().all(|&(_, y)| (12..19).contains(&y)));
        assert!(text.iter().all(|&(x, y)| out.pixel(x, y) == MASK_COLOR));
        assert_eq!(f.pixel(10, 20), [100, 100, 100]);
    }

    #[test]
    fn label_moves_below_at_top_edge() {
        let f = Frame::filled(0, 80, 60, [0, 0, 0]);
        let d = det([5, 2, 30, 20], MaskLabel::NoMask);
        let out = annotate(&f, &[d]);
        let below: Vec<_> = changed(&f, &out).into_iter().filter(|&(_, y)| y >= 20).collect();
        assert!(!below.is_empty());
        assert!(below.iter().all(|&(x, y)| (21..28).contains(&y) && out.pixel(x, y) == NO_MASK_COLOR));
        assert_eq!(label_text(&det([0, 0, 1, 1], MaskLabel::NoMask)), "NO MASK 0.87");
    }

    #[test]
    fn annotation_is_idempotent_and_in_bounds() {
        let f = Frame::filled(0, 50, 30, [1, 2, 3]);
        let dets = [
            det([0, 0, 50, 30], MaskLabel::Mask),
            det([40, 25, 50, 30], MaskLabel::NoMask),
            det([3, 10, 9, 14], MaskLabel::Mask),
        ];
        let once = annotate(&f, &dets);
        let twice = annotate(&once, &dets);
        assert_eq!(once, twice);
        assert_eq!(once.pixels.len(), f.pixels.len());
    }

    #[test]
    fn every_label_glyph_is_defined() {
        for c in "MASK NO0123456789.".chars().filter(|c| *c != ' ') {
            assert!(glyph(c).iter().any(|r| *r != 0), "{c}");
        }
    }
}
