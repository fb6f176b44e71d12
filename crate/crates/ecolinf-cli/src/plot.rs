//! Minimal SVG interval plot: one dot-and-whisker row per summarized
//! quantity. Self-contained output, no drawing dependencies.

use ecolinf::io::SummaryRecord;
use std::fmt::Write;

const ROW_H: f64 = 22.0;
const LABEL_W: f64 = 220.0;
const PLOT_W: f64 = 460.0;
const MARGIN: f64 = 16.0;

pub fn interval_plot_svg(records: &[SummaryRecord]) -> String {
    let defined: Vec<&SummaryRecord> = records
        .iter()
        .filter(|r| r.point.is_some() && r.lo.is_some() && r.hi.is_some())
        .collect();
    let height = MARGIN * 2.0 + ROW_H * defined.len().max(1) as f64 + 20.0;
    let width = MARGIN * 2.0 + LABEL_W + PLOT_W;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    if defined.is_empty() {
        let _ = write!(
            svg,
            "<text x=\"{MARGIN}\" y=\"{}\">no defined summaries</text>\n</svg>\n",
            MARGIN + 14.0
        );
        return svg;
    }
    let lo = defined.iter().map(|r| r.lo.unwrap()).fold(f64::INFINITY, f64::min);
    let hi = defined.iter().map(|r| r.hi.unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| MARGIN + LABEL_W + (v - lo) / span * PLOT_W;

    // Axis line with end labels.
    let y_axis = MARGIN + ROW_H * defined.len() as f64 + 8.0;
    let _ = write!(
        svg,
        "<line x1=\"{:.1}\" y1=\"{y_axis:.1}\" x2=\"{:.1}\" y2=\"{y_axis:.1}\" \
         stroke=\"#888\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{lo:.3}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{hi:.3}</text>\n",
        x(lo),
        x(hi),
        x(lo),
        y_axis + 14.0,
        x(hi),
        y_axis + 14.0,
    );
    for (i, r) in defined.iter().enumerate() {
        let y = MARGIN + ROW_H * (i as f64 + 0.5);
        let (p, l, h) = (r.point.unwrap(), r.lo.unwrap(), r.hi.unwrap());
        let _ = write!(
            svg,
            "<text x=\"{MARGIN}\" y=\"{:.1}\">{}</text>\n\
             <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#336\" stroke-width=\"2\"/>\n\
             <circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"#336\"/>\n",
            y + 4.0,
            xml_escape(&r.estimand),
            x(l),
            x(h),
            x(p),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, p: f64, lo: f64, hi: f64) -> SummaryRecord {
        SummaryRecord {
            estimand: name.into(),
            point: Some(p),
            lo: Some(lo),
            hi: Some(hi),
            level: 0.95,
            n_draws: 10,
            n_missing: 0,
        }
    }

    #[test]
    fn plot_contains_a_row_per_defined_record() {
        let records = vec![
            rec("lambda_a_x", 0.5, 0.4, 0.6),
            rec("gamma_a", 0.3, 0.2, 0.4),
            SummaryRecord::undefined("turnout_b".into(), 0.95, 10),
        ];
        let svg = interval_plot_svg(&records);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("lambda_a_x"));
        assert!(!svg.contains("turnout_b"));
    }

    #[test]
    fn empty_input_still_renders() {
        let svg = interval_plot_svg(&[]);
        assert!(svg.contains("no defined summaries"));
    }
}
