//! Minimal self-contained SVG plotting for the ROC curve.

const SIZE: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn x_px(fpr: f64) -> f64 {
    MARGIN + fpr * (SIZE - 2.0 * MARGIN)
}

fn y_px(tpr: f64) -> f64 {
    SIZE - MARGIN - tpr * (SIZE - 2.0 * MARGIN)
}

/// Render `(fpr, tpr)` points as a ROC plot with axes, unit diagonal, and an
/// optional AUC annotation.
pub fn roc_svg(points: &[(f64, f64)], auc: Option<f64>) -> String {
    let mut path = String::new();
    for (i, &(fpr, tpr)) in points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        path.push_str(&format!("{cmd}{:.1},{:.1} ", x_px(fpr), y_px(tpr)));
    }

    let mut ticks = String::new();
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        ticks.push_str(&format!(
            "<line x1='{x:.1}' y1='{y0:.1}' x2='{x:.1}' y2='{y1:.1}' stroke='#999'/>\
             <text x='{x:.1}' y='{ty:.1}' text-anchor='middle' font-size='12'>{t}</text>",
            x = x_px(t),
            y0 = y_px(0.0),
            y1 = y_px(0.0) + 5.0,
            ty = y_px(0.0) + 20.0,
        ));
        ticks.push_str(&format!(
            "<line x1='{x0:.1}' y1='{y:.1}' x2='{x1:.1}' y2='{y:.1}' stroke='#999'/>\
             <text x='{tx:.1}' y='{ty:.1}' text-anchor='end' font-size='12'>{t}</text>",
            x0 = x_px(0.0) - 5.0,
            x1 = x_px(0.0),
            y = y_px(t),
            tx = x_px(0.0) - 8.0,
            ty = y_px(t) + 4.0,
        ));
    }

    let auc_label = auc.map_or(String::new(), |a| {
        format!(
            "<text x='{:.1}' y='{:.1}' font-size='14'>AUC = {a:.4}</text>",
            x_px(0.55),
            y_px(0.08),
        )
    });

    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 {SIZE} {SIZE}' \
         width='{SIZE}' height='{SIZE}'>\n\
         <rect width='{SIZE}' height='{SIZE}' fill='white'/>\n\
         <line x1='{ox:.1}' y1='{oy:.1}' x2='{cx:.1}' y2='{cy:.1}' \
         stroke='#bbb' stroke-dasharray='4,4'/>\n\
         <rect x='{ox:.1}' y='{ty:.1}' width='{w:.1}' height='{w:.1}' \
         fill='none' stroke='#333'/>\n\
         {ticks}\n\
         <path d='{path}' fill='none' stroke='#1f6fb2' stroke-width='2'/>\n\
         <text x='{mx:.1}' y='{bx:.1}' text-anchor='middle' font-size='13'>\
         false positive rate</text>\n\
         <text x='16' y='{my:.1}' text-anchor='middle' font-size='13' \
         transform='rotate(-90 16 {my:.1})'>true positive rate</text>\n\
         {auc_label}\n\
         </svg>\n",
        ox = x_px(0.0),
        oy = y_px(0.0),
        cx = x_px(1.0),
        cy = y_px(1.0),
        ty = y_px(1.0),
        w = SIZE - 2.0 * MARGIN,
        mx = x_px(0.5),
        bx = SIZE - 16.0,
        my = y_px(0.5),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_map_to_plot_corners() {
        assert_eq!(x_px(0.0), MARGIN);
        assert_eq!(x_px(1.0), SIZE - MARGIN);
        assert_eq!(y_px(0.0), SIZE - MARGIN);
        assert_eq!(y_px(1.0), MARGIN);
    }

    #[test]
    fn svg_contains_curve_and_annotation() {
        let svg = roc_svg(&[(0.0, 0.0), (0.2, 0.9), (1.0, 1.0)], Some(0.93));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("AUC = 0.9300"));
        assert!(svg.contains("M56.0,424.0"));
        let no_auc = roc_svg(&[(0.0, 0.0), (1.0, 1.0)], None);
        assert!(!no_auc.contains("AUC"));
    }
}
