//! SVG 1.1 rendering of planar attractor approximations.
//!
//! Output is plain generated markup with fixed number formatting, so equal
//! inputs produce byte-identical files.

use simbound_core::attractor::AttractorApprox;
use simbound_core::boundary::BoundaryApprox;
use simbound_core::{Backend, Error, Result};

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 0.05;

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Attractor representatives as dots sized by their error radius, boundary
/// witnesses as highlighted overlays. The highlight layer is omitted when
/// there is no witness to draw.
pub fn render_svg(approx: &AttractorApprox, boundary: Option<&BoundaryApprox>) -> Result<String> {
    let points = approx.points();
    if points.backend() != Backend::Euclidean || points.dim() != Some(2) {
        return Err(Error::Invalid(
            "render unavailable: requires a euclidean system with dim 2".into(),
        ));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    let mut extend = |c: &[f64]| {
        for a in 0..2 {
            min[a] = min[a].min(c[a]);
            max[a] = max[a].max(c[a]);
        }
    };
    for rank in 0..approx.len() {
        extend(points.euclidean_coords(rank).expect("euclidean backend"));
    }
    if let Some(b) = boundary {
        for m in 0..b.len() {
            extend(b.points().euclidean_coords(m).expect("euclidean backend"));
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-12);
    let pad = span * MARGIN;
    let origin = [min[0] - pad, min[1] - pad];
    let scale = CANVAS / (span + 2.0 * pad);
    let width = ((max[0] - min[0] + 2.0 * pad) * scale).ceil();
    let height = ((max[1] - min[1] + 2.0 * pad) * scale).ceil();
    // SVG y grows downward; data y is flipped against the canvas height.
    let place = |c: &[f64]| -> (f64, f64) {
        ((c[0] - origin[0]) * scale, height - (c[1] - origin[1]) * scale)
    };

    let mut out = String::with_capacity(64 * approx.len() + 1024);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        fmt(width),
        fmt(height)
    ));
    out.push_str("<g fill=\"#1f3d7a\" fill-opacity=\"0.85\">\n");
    for rank in 0..approx.len() {
        let (x, y) = place(points.euclidean_coords(rank).expect("euclidean backend"));
        let r = (approx.error_radius(rank) * scale).max(0.4);
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\"/>\n",
            fmt(x),
            fmt(y),
            fmt(r)
        ));
    }
    out.push_str("</g>\n");
    if let Some(b) = boundary {
        if !b.is_empty() {
            out.push_str("<g fill=\"none\" stroke=\"#d33\" stroke-width=\"1.2\">\n");
            for m in 0..b.len() {
                let (x, y) = place(b.points().euclidean_coords(m).expect("euclidean backend"));
                let r = (b.witness(m).radius * scale).max(2.0);
                out.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"{}\"/>\n",
                    fmt(x),
                    fmt(y),
                    fmt(r)
                ));
            }
            out.push_str("</g>\n");
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use simbound_core::codespace::DEFAULT_BUDGET;
    use simbound_core::fixtures;

    #[test]
    fn koch_render_is_deterministic_with_highlights() {
        let ifs = fixtures::by_name("koch").unwrap();
        let approx = AttractorApprox::compute(&ifs, 4, DEFAULT_BUDGET).unwrap();
        let tau = simbound_core::boundary::default_tau(&ifs, &approx);
        let scan = simbound_core::boundary::overlap_pairs(&approx, tau).unwrap();
        let boundary = simbound_core::boundary::similarity_boundary(&ifs, &approx, &scan).unwrap();
        let a = render_svg(&approx, Some(&boundary)).unwrap();
        let b = render_svg(&approx, Some(&boundary)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<circle").count(), approx.len() + boundary.len());
        assert!(a.contains("stroke=\"#d33\""));
        assert!(a.starts_with("<?xml"));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_boundary_has_no_highlight_layer() {
        use simbound_core::spaces::{IfsSpec, Similitude};
        let ifs = IfsSpec::new(
            "planar-pair",
            vec![
                Similitude::homothety(0.3, &[0.0, 0.0]).unwrap(),
                Similitude::homothety(0.3, &[1.0, 0.0]).unwrap(),
            ],
        )
        .unwrap();
        let approx = AttractorApprox::compute(&ifs, 5, DEFAULT_BUDGET).unwrap();
        let tau = simbound_core::boundary::default_tau(&ifs, &approx);
        let scan = simbound_core::boundary::overlap_pairs(&approx, tau).unwrap();
        let boundary = simbound_core::boundary::similarity_boundary(&ifs, &approx, &scan).unwrap();
        assert!(boundary.is_empty());
        let svg = render_svg(&approx, Some(&boundary)).unwrap();
        assert!(!svg.contains("stroke"));
    }

    #[test]
    fn sequence_backend_reports_render_unavailable() {
        let ifs = fixtures::by_name("l1-schief").unwrap();
        let approx = AttractorApprox::compute(&ifs, 4, DEFAULT_BUDGET).unwrap();
        let e = render_svg(&approx, None).unwrap_err();
        assert!(e.to_string().contains("render unavailable"), "{e}");
    }
}
