//! Static SVG map of an aggregation.

use std::fmt::Write;

use crate::aggregation::AggregationResult;
use crate::error::Result;
use crate::geometry::{Point, Rect, VoronoiDiagram};
use crate::model::Dataset;

const WIDTH: f64 = 800.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapOptions {
    pub voronoi_edges: bool,
}

/// Fill colour for an aggregated region: hues stepped by the golden angle so
/// neighbouring ids stay distinguishable.
pub fn region_color(aggregated_id: usize) -> String {
    let hue = (aggregated_id as f64 * 0.618_033_988_749_895).fract() * 360.0;
    format!("hsl({hue:.1},70%,45%)")
}

struct Frame {
    bounds: Rect,
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(bounds: Rect) -> Self {
        let w = if bounds.width() > 0.0 {
            bounds.width()
        } else {
            1.0
        };
        let scale = WIDTH / w;
        let height = (bounds.height() * scale).max(1.0);
        Self {
            bounds,
            scale,
            height,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.bounds.min.x) * self.scale,
            (self.bounds.max.y - p.y) * self.scale,
        )
    }
}

pub fn render_svg(
    dataset: &Dataset,
    result: &AggregationResult,
    options: MapOptions,
) -> Result<String> {
    let points = dataset.region_points();
    let extent = Rect::bounding(&points)
        .or_else(|| Rect::bounding(&result.sites))
        .unwrap_or(Rect::new(Point::new(0.0, 0.0), Point::new(0.0, 0.0)));
    let diagram = VoronoiDiagram::build(&result.sites, extent)?;
    let frame = Frame::new(diagram.bounds());
    let radius = 3.0;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{h:.0}" viewBox="0 0 {WIDTH:.3} {h:.3}">"#,
        h = frame.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    if options.voronoi_edges {
        let _ = writeln!(
            svg,
            r#"<g id="edges" fill="none" stroke="gray" stroke-width="0.75">"#
        );
        for cell in diagram.cells() {
            if cell.len() < 3 {
                continue;
            }
            let pts: Vec<String> = cell
                .iter()
                .map(|&p| {
                    let (x, y) = frame.map(p);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(svg, r#"<polygon points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g id="regions" stroke="none">"#);
    for (region, &agg) in dataset.regions().iter().zip(&result.region_mapping) {
        let (x, y) = frame.map(region.location);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{radius}" fill="{}"><title>{} → {agg}</title></circle>"#,
            region_color(agg),
            xml_escape(&region.region_id),
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="sites" stroke="black" stroke-width="1.5">"#);
    let arm = 2.0 * radius;
    for (id, &site) in result.sites.iter().enumerate() {
        let (x, y) = frame.map(site);
        let _ = writeln!(
            svg,
            r#"<path d="M{:.3},{y:.3}H{:.3}M{x:.3},{:.3}V{:.3}" stroke="{}"><title>site {id}</title></path>"#,
            x - arm,
            x + arm,
            y - arm,
            y + arm,
            region_color(id),
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::aggregate;
    use crate::model::{QuasiIdentifierSchema, Record, RegionSpec};

    fn dataset(points: &[(f64, f64)]) -> Dataset {
        let schema =
            QuasiIdentifierSchema::new(vec![("a".into(), vec!["x".into()])], "geo").unwrap();
        let specs = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| RegionSpec {
                region_id: format!("<r&{i}>"),
                location: Point::new(x, y),
                stratum: "s".into(),
                population: None,
            })
            .collect();
        let records = (0..points.len())
            .map(|i| Record {
                record_id: i.to_string(),
                region_id: format!("<r&{i}>"),
                values: vec!["x".into()],
            })
            .collect();
        Dataset::assemble(schema, specs, records).unwrap()
    }

    fn count(doc: &roxmltree::Document, tag: &str) -> usize {
        doc.descendants().filter(|n| n.has_tag_name(tag)).count()
    }

    #[test]
    fn one_region_one_site() {
        let d = dataset(&[(3.0, 4.0)]);
        let r = aggregate(&d, &[Point::new(3.0, 4.0)], 2).unwrap();
        let svg = render_svg(&d, &r, MapOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count(&doc, "circle"), 1);
        assert_eq!(count(&doc, "path"), 1);
        assert_eq!(count(&doc, "polygon"), 0);
    }

    #[test]
    fn well_formed_and_deterministic_with_edges() {
        let d = dataset(&[(0.0, 0.0), (1.0, 2.0), (5.0, 1.0), (4.0, 4.0)]);
        let sites = [Point::new(0.5, 1.0), Point::new(4.5, 2.5)];
        let r = aggregate(&d, &sites, 2).unwrap();
        let opts = MapOptions {
            voronoi_edges: true,
        };
        let a = render_svg(&d, &r, opts).unwrap();
        let b = render_svg(&d, &r, opts).unwrap();
        assert_eq!(a, b);
        let doc = roxmltree::Document::parse(&a).unwrap();
        assert_eq!(count(&doc, "circle"), 4);
        assert_eq!(count(&doc, "polygon"), 2);
        assert!(a.contains("&lt;r&amp;0&gt;"));
    }

    #[test]
    fn colors_are_stable_and_distinct_for_neighbours() {
        assert_eq!(region_color(0), "hsl(0.0,70%,45%)");
        assert_eq!(region_color(3), region_color(3));
        assert_ne!(region_color(1), region_color(2));
    }
}
