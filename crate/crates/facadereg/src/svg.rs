//! SVG overlay rendering: detected boxes in black, regularized boxes in red
//! on top, canvas sized to the image. Output bytes are deterministic for
//! identical input.

use std::fmt::Write as _;

use crate::types::DetectionSet;

const STROKE_WIDTH: f64 = 1.5;

/// Renders both box sets into a standalone SVG document.
pub fn render_svg(detections: &DetectionSet, regularized: &DetectionSet, width: u32, height: u32) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    // Black detected frames first so the red regularized frames draw on top.
    rect_group(&mut out, detections, "black");
    rect_group(&mut out, regularized, "red");
    out.push_str("</svg>\n");
    out.into_bytes()
}

fn rect_group(out: &mut String, set: &DetectionSet, stroke: &str) {
    let _ = writeln!(
        out,
        "  <g fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{STROKE_WIDTH}\">"
    );
    for b in &set.boxes {
        let _ = writeln!(
            out,
            "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            b.x, b.y, b.w, b.h
        );
    }
    out.push_str("  </g>\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BoundingBox, PrimitiveClass};

    fn set(boxes: Vec<BoundingBox>) -> DetectionSet {
        DetectionSet::new(200, 100, "svg-test", boxes).unwrap()
    }

    fn count_rects(svg: &[u8]) -> usize {
        String::from_utf8_lossy(svg).matches("<rect").count()
    }

    #[test]
    fn empty_canvas_is_valid() {
        let empty = set(vec![]);
        let svg = render_svg(&empty, &empty, 200, 100);
        let text = String::from_utf8(svg).unwrap();
        assert!(text.starts_with("<?xml"));
        assert!(text.contains("<svg "));
        assert!(text.ends_with("</svg>\n"));
        assert_eq!(count_rects(text.as_bytes()), 0);
    }

    #[test]
    fn unchanged_box_renders_two_coincident_rects() {
        let one = set(vec![BoundingBox::new(
            PrimitiveClass::Window,
            1.0,
            10.0,
            20.0,
            30.0,
            40.0,
        )
        .unwrap()]);
        let svg = render_svg(&one, &one, 200, 100);
        let text = String::from_utf8(svg).unwrap();
        assert_eq!(count_rects(text.as_bytes()), 2);
        assert_eq!(
            text.matches("<rect x=\"10\" y=\"20\" width=\"30\" height=\"40\"/>")
                .count(),
            2
        );
        let black = text.find("stroke=\"black\"").unwrap();
        let red = text.find("stroke=\"red\"").unwrap();
        assert!(black < red);
    }

    #[test]
    fn rect_count_is_twice_box_count() {
        let boxes: Vec<BoundingBox> = (0..7)
            .map(|i| {
                BoundingBox::new(PrimitiveClass::Window, 1.0, 5.0 * i as f64, 5.0, 4.0, 4.0)
                    .unwrap()
            })
            .collect();
        let s = set(boxes);
        let svg = render_svg(&s, &s, 200, 100);
        assert_eq!(count_rects(&svg), 14);
    }

    #[test]
    fn rendering_is_pure() {
        let one = set(vec![BoundingBox::new(
            PrimitiveClass::Door,
            0.7,
            1.25,
            2.5,
            3.75,
            4.125,
        )
        .unwrap()]);
        assert_eq!(
            render_svg(&one, &one, 200, 100),
            render_svg(&one, &one, 200, 100)
        );
    }
}
