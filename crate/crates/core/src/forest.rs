//! Forest plots as fixed-width text and standalone SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::effect::{ConfidenceInterval, EffectMeasure, StudyEffect};
use crate::error::{Error, Result};
use crate::pooling::{ci_of, to_display_scale, HeterogeneityStats, PooledResult};

pub const MIN_TEXT_WIDTH: usize = 60;
pub const MIN_SVG_WIDTH: u32 = 480;

const LABEL_W: usize = 14;
const EFFECT_W: usize = 26;
const WEIGHT_W: usize = 5;
const GAP: &str = "  ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub label: String,
    pub display_estimate: f64,
    pub display_ci: ConfidenceInterval,
    pub weight_percent: f64,
    pub is_pooled: bool,
    pub model_tag: String,
    pub measure: EffectMeasure,
    /// Present on pooled rows.
    pub het: Option<HeterogeneityStats>,
}

/// Study rows followed by one pooled row. Study intervals use the pooled
/// result's confidence level.
pub fn forest_rows(studies: &[StudyEffect], pooled: &PooledResult) -> Result<Vec<ForestRow>> {
    if studies.len() != pooled.weights.len() {
        return Err(Error::Render(format!(
            "{} studies but {} pooled weights",
            studies.len(),
            pooled.weights.len()
        )));
    }
    let measure = pooled.measure;
    let tag = pooled.model.short().to_string();
    let mut rows = studies
        .iter()
        .zip(&pooled.weights)
        .map(|(s, w)| {
            let ci = ci_of(s.y, s.se(), pooled.level)?;
            Ok(ForestRow {
                label: s.label.clone(),
                display_estimate: measure.to_display(s.y),
                display_ci: ConfidenceInterval {
                    lo: measure.to_display(ci.lo),
                    hi: measure.to_display(ci.hi),
                    level: ci.level,
                },
                weight_percent: w * 100.0,
                is_pooled: false,
                model_tag: tag.clone(),
                measure,
                het: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let display = to_display_scale(pooled, measure);
    rows.push(ForestRow {
        label: format!("{tag} model"),
        display_estimate: display.estimate,
        display_ci: display.ci,
        weight_percent: 100.0,
        is_pooled: true,
        model_tag: tag,
        measure,
        het: Some(pooled.het),
    });
    Ok(rows)
}

fn label_of(row: &ForestRow) -> &str {
    if row.label.trim().is_empty() {
        "(unnamed)"
    } else {
        &row.label
    }
}

fn common_measure(rows: &[ForestRow]) -> Result<EffectMeasure> {
    let first = rows.first().ok_or_else(|| Error::Render("no rows to plot".into()))?;
    if rows.iter().any(|r| r.measure != first.measure) {
        return Err(Error::Render("rows mix effect measures".into()));
    }
    for r in rows {
        let ok = [r.display_estimate, r.display_ci.lo, r.display_ci.hi]
            .iter()
            .all(|x| x.is_finite() && (r.measure != EffectMeasure::OddsRatio || *x > 0.0));
        if !ok {
            return Err(Error::Render(format!("row {:?} has an unplottable interval", label_of(r))));
        }
    }
    Ok(first.measure)
}

/// Maps display values onto `[0, 1]`, log-scaled for odds ratios. The null
/// is always inside the range.
struct Axis {
    measure: EffectMeasure,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(rows: &[ForestRow], measure: EffectMeasure) -> Self {
        let t = |x: f64| Self::transform(measure, x);
        let null = t(measure.display_null());
        let (mut lo, mut hi) = rows.iter().fold((null, null), |(lo, hi), r| {
            (lo.min(t(r.display_ci.lo)), hi.max(t(r.display_ci.hi)))
        });
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        Axis { measure, lo, hi }
    }

    fn transform(measure: EffectMeasure, x: f64) -> f64 {
        if measure.is_log_scale() {
            x.ln()
        } else {
            x
        }
    }

    fn unit(&self, x: f64) -> f64 {
        (Self::transform(self.measure, x) - self.lo) / (self.hi - self.lo)
    }

    fn column(&self, x: f64, cols: usize) -> usize {
        let c = (self.unit(x) * (cols - 1) as f64).round();
        (c.max(0.0) as usize).min(cols - 1)
    }

    fn display_min(&self) -> f64 {
        self.inverse(self.lo)
    }

    fn display_max(&self) -> f64 {
        self.inverse(self.hi)
    }

    fn inverse(&self, t: f64) -> f64 {
        if self.measure.is_log_scale() {
            t.exp()
        } else {
            t
        }
    }
}

/// Four significant digits; scientific outside `[1e-3, 1e4)`.
pub fn format_sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor();
    if (-3.0..4.0).contains(&mag) {
        let decimals = (3.0 - mag).max(0.0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// A confidence level as a percentage without trailing zeros: "95", "99.5".
fn format_level(level: f64) -> String {
    let pct: f64 = format!("{:.4}", level * 100.0).parse().unwrap_or(level * 100.0);
    pct.to_string()
}

fn format_2dp(x: f64) -> String {
    let s = format!("{x:.2}");
    // avoid "-0.00"
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn effect_text(r: &ForestRow) -> String {
    format!(
        "{:>7} [{:>7}, {:>7}]",
        format_2dp(r.display_estimate),
        format_2dp(r.display_ci.lo),
        format_2dp(r.display_ci.hi)
    )
}

pub fn heterogeneity_footer(tag: &str, het: &HeterogeneityStats) -> String {
    format!(
        "{tag}: I² = {:.0}%, τ² = {}, Q = {} (df = {}, p = {})",
        het.i2,
        format_sig4(het.tau2),
        format_sig4(het.q),
        het.df,
        format_sig4(het.p_q.get())
    )
}

fn fit_label(label: &str, width: usize) -> String {
    let n = label.chars().count();
    if n <= width {
        format!("{label:<width$}")
    } else {
        let mut s: String = label.chars().take(width - 1).collect();
        s.push('~');
        s
    }
}

fn track(row: &ForestRow, axis: &Axis, cols: usize, null_col: usize) -> String {
    let mut cells = vec![' '; cols];
    let lo = axis.column(row.display_ci.lo, cols);
    let hi = axis.column(row.display_ci.hi, cols);
    let mid = axis.column(row.display_estimate, cols);
    let (fill, left, right, centre) = if row.is_pooled {
        ('=', '<', '>', '◆')
    } else {
        ('-', '[', ']', 'o')
    };
    for c in cells.iter_mut().take(hi + 1).skip(lo) {
        *c = fill;
    }
    if hi > lo {
        cells[lo] = left;
        cells[hi] = right;
    }
    if cells[null_col] == ' ' {
        cells[null_col] = '|';
    } else if cells[null_col] == fill {
        cells[null_col] = '+';
    }
    cells[mid] = centre;
    cells.into_iter().collect()
}

/// Fixed-width text forest plot. `width` counts characters.
pub fn render_forest_text(rows: &[ForestRow], width: usize) -> Result<String> {
    if width < MIN_TEXT_WIDTH {
        return Err(Error::Render(format!(
            "text width must be at least {MIN_TEXT_WIDTH}, got {width}"
        )));
    }
    let measure = common_measure(rows)?;
    let cols = width - LABEL_W - EFFECT_W - WEIGHT_W - 3 * GAP.len();
    let axis = Axis::new(rows, measure);
    let null = measure.display_null();
    let null_col = axis.column(null, cols);
    let level = rows[0].display_ci.level.get();

    let mut out = String::new();
    let effect_head = format!("{} [{}% CI]", measure.tag(), format_level(level));
    let _ = writeln!(
        out,
        "{}{GAP}{:<EFFECT_W$}{GAP}{:>WEIGHT_W$}{GAP}",
        fit_label("Study", LABEL_W),
        effect_head,
        "Wt"
    );
    for r in rows {
        if r.is_pooled {
            let _ = writeln!(out, "{}", "-".repeat(width));
        }
        let _ = writeln!(
            out,
            "{}{GAP}{}{GAP}{:>w$}{GAP}{}",
            fit_label(label_of(r), LABEL_W),
            effect_text(r),
            format!("{:.0}%", r.weight_percent),
            track(r, &axis, cols, null_col),
            w = WEIGHT_W
        );
    }

    // axis: min at left, null marked, max at right
    let pad = LABEL_W + EFFECT_W + WEIGHT_W + 3 * GAP.len();
    let mut rule: Vec<char> = vec!['-'; cols];
    rule[null_col] = '+';
    let _ = writeln!(out, "{}{}", " ".repeat(pad), rule.into_iter().collect::<String>());
    let mut ticks = vec![' '; cols];
    let mut place = |text: String, col: usize| {
        let chars: Vec<char> = text.chars().collect();
        let start = col.min(cols.saturating_sub(chars.len()));
        if ticks[start..].len() >= chars.len()
            && ticks[start..start + chars.len()].iter().all(|c| *c == ' ')
        {
            ticks[start..start + chars.len()].copy_from_slice(&chars);
        }
    };
    place(format_2dp(axis.display_min()), 0);
    let max_text = format_2dp(axis.display_max());
    let max_len = max_text.chars().count();
    place(max_text, cols.saturating_sub(max_len));
    let null_text = format_2dp(null);
    let null_len = null_text.chars().count();
    place(null_text, null_col.saturating_sub(null_len / 2));
    let tick_line: String = ticks.into_iter().collect();
    let _ = writeln!(out, "{}{}", " ".repeat(pad), tick_line.trim_end());
    if measure.is_log_scale() {
        let _ = writeln!(out, "{}(log scale; null at 1)", " ".repeat(pad));
    }

    for r in rows.iter().filter(|r| r.is_pooled) {
        if let Some(het) = &r.het {
            let _ = writeln!(out, "{}", heterogeneity_footer(&r.model_tag, het));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgOptions {
    pub width: u32,
    pub row_height: u32,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 800,
            row_height: 28,
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

/// Standalone SVG forest plot.
pub fn render_forest_svg(rows: &[ForestRow], options: &SvgOptions) -> Result<String> {
    if options.width < MIN_SVG_WIDTH {
        return Err(Error::Render(format!(
            "SVG width must be at least {MIN_SVG_WIDTH}, got {}",
            options.width
        )));
    }
    if options.row_height < 8 {
        return Err(Error::Render(format!(
            "row height must be at least 8, got {}",
            options.row_height
        )));
    }
    let measure = common_measure(rows)?;
    let axis = Axis::new(rows, measure);

    let w = f64::from(options.width);
    let rh = f64::from(options.row_height);
    let label_w = 160.0;
    let text_w = 230.0;
    let plot_x0 = label_w + 10.0;
    let plot_x1 = w - text_w - 10.0;
    let x_of = |v: f64| plot_x0 + axis.unit(v) * (plot_x1 - plot_x0);
    let top = rh * 1.5;
    let n = rows.len() as f64;
    let plot_bottom = top + n * rh;
    let footer_lines = rows.iter().filter(|r| r.het.is_some()).count() as f64;
    let height = plot_bottom + rh * (2.0 + footer_lines);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{:.0}" viewBox="0 0 {} {:.0}" font-family="sans-serif" font-size="12">"#,
        options.width, height, options.width, height
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{height:.0}" fill="white"/>"#, options.width);
    let level = format_level(rows[0].display_ci.level.get());
    let _ = writeln!(
        s,
        r#"<text x="10" y="{:.2}" font-weight="bold">Study</text><text x="{:.2}" y="{:.2}" font-weight="bold">{} [{}% CI]</text><text x="{:.2}" y="{:.2}" font-weight="bold" text-anchor="end">Weight</text>"#,
        rh, w - text_w, rh, measure.tag(), level, w - 10.0, rh
    );

    let max_weight = rows
        .iter()
        .filter(|r| !r.is_pooled)
        .map(|r| r.weight_percent)
        .fold(0.0, f64::max);
    for (i, r) in rows.iter().enumerate() {
        let yc = top + (i as f64 + 0.5) * rh;
        let (lo, hi, est) = (x_of(r.display_ci.lo), x_of(r.display_ci.hi), x_of(r.display_estimate));
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.2}" dominant-baseline="middle"{}>{}</text>"#,
            yc,
            if r.is_pooled { r#" font-weight="bold""# } else { "" },
            xml_escape(label_of(r))
        );
        if r.is_pooled {
            let half = rh * 0.35;
            let _ = writeln!(
                s,
                r#"<polygon points="{lo:.2},{yc:.2} {est:.2},{:.2} {hi:.2},{yc:.2} {est:.2},{:.2}" fill="black" class="pooled"/>"#,
                yc - half,
                yc + half
            );
        } else {
            let _ = writeln!(
                s,
                r#"<line x1="{lo:.2}" y1="{yc:.2}" x2="{hi:.2}" y2="{yc:.2}" stroke="black" stroke-width="1.5"/>"#
            );
            let frac = if max_weight > 0.0 { (r.weight_percent / max_weight).sqrt() } else { 1.0 };
            let side = (rh * 0.7 * frac).max(4.0);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="black" class="study"/>"#,
                est - side / 2.0,
                yc - side / 2.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{yc:.2}" dominant-baseline="middle" xml:space="preserve">{}</text><text x="{:.2}" y="{yc:.2}" dominant-baseline="middle" text-anchor="end">{:.0}%</text>"#,
            w - text_w,
            xml_escape(&format!(
                "{} [{}, {}]",
                format_2dp(r.display_estimate),
                format_2dp(r.display_ci.lo),
                format_2dp(r.display_ci.hi)
            )),
            w - 10.0,
            r.weight_percent
        );
    }

    let null_x = x_of(measure.display_null());
    let _ = writeln!(
        s,
        r#"<line x1="{null_x:.2}" y1="{top:.2}" x2="{null_x:.2}" y2="{plot_bottom:.2}" stroke="gray" stroke-dasharray="4,3" class="null"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{plot_x0:.2}" y1="{plot_bottom:.2}" x2="{plot_x1:.2}" y2="{plot_bottom:.2}" stroke="black"/>"#
    );
    let mut ticks = vec![axis.display_min(), measure.display_null(), axis.display_max()];
    ticks.dedup();
    for t in ticks {
        let x = x_of(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{plot_bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            plot_bottom + 5.0,
            plot_bottom + 18.0,
            format_2dp(t)
        );
    }
    let mut y = plot_bottom + rh * 1.5;
    if measure.is_log_scale() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">log scale</text>"#,
            plot_x1,
            plot_bottom + 30.0
        );
    }
    for r in rows.iter().filter(|r| r.is_pooled) {
        if let Some(het) = &r.het {
            let _ = writeln!(
                s,
                r#"<text x="10" y="{y:.2}">{}</text>"#,
                xml_escape(&heterogeneity_footer(&r.model_tag, het))
            );
            y += rh;
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effect::default_level;
    use crate::pooling::{meta_analyze, ModelKind};

    fn ci(lo: f64, hi: f64) -> ConfidenceInterval {
        ConfidenceInterval::new(lo, hi, default_level()).unwrap()
    }

    fn pooled_row_at_null() -> ForestRow {
        ForestRow {
            label: "RE model".into(),
            display_estimate: 0.0,
            display_ci: ci(-1.0, 1.0),
            weight_percent: 100.0,
            is_pooled: true,
            model_tag: "RE".into(),
            measure: EffectMeasure::MeanDifference,
            het: None,
        }
    }

    #[test]
    fn sig4_formatting() {
        assert_eq!(format_sig4(15.963156), "15.96");
        assert_eq!(format_sig4(0.79817), "0.7982");
        assert_eq!(format_sig4(6.4587e-5), "6.459e-5");
        assert_eq!(format_sig4(0.0), "0");
        assert_eq!(format_sig4(12345.0), "1.234e4");
        assert_eq!(format_sig4(95.0), "95.00");
    }

    #[test]
    fn diamond_straddles_null() {
        let text = render_forest_text(&[pooled_row_at_null()], 80).unwrap();
        let line = text.lines().find(|l| l.contains('◆')).unwrap();
        let lt = line.find('<').unwrap();
        let gt = line.find('>').unwrap();
        let diamond = line.find('◆').unwrap();
        assert!(lt < diamond && diamond < gt);
    }

    #[test]
    fn text_width_validation() {
        assert!(render_forest_text(&[pooled_row_at_null()], 59).is_err());
        assert!(render_forest_text(&[], 80).is_err());
    }

    #[test]
    fn text_lines_have_requested_width() {
        let text = render_forest_text(&[pooled_row_at_null()], 72).unwrap();
        let row = text.lines().find(|l| l.contains('◆')).unwrap();
        assert_eq!(row.chars().count(), 72);
    }

    #[test]
    fn empty_label_is_unnamed() {
        let mut r = pooled_row_at_null();
        r.label = String::new();
        assert!(render_forest_text(&[r.clone()], 80).unwrap().contains("(unnamed)"));
        assert!(render_forest_svg(&[r], &SvgOptions::default()).unwrap().contains("(unnamed)"));
    }

    #[test]
    fn svg_width_validation() {
        let opts = SvgOptions { width: 0, ..SvgOptions::default() };
        assert!(render_forest_svg(&[pooled_row_at_null()], &opts).is_err());
    }

    #[test]
    fn svg_escapes_labels() {
        let mut r = pooled_row_at_null();
        r.label = "A & <B>".into();
        let svg = render_forest_svg(&[r], &SvgOptions::default()).unwrap();
        assert!(svg.contains("A &amp; &lt;B&gt;"));
    }

    #[test]
    fn rows_from_pooled_result() {
        let studies = vec![
            StudyEffect::new("a", 0.2, 0.01, EffectMeasure::OddsRatio).unwrap(),
            StudyEffect::new("b", 0.6, 0.05, EffectMeasure::OddsRatio).unwrap(),
        ];
        let pooled = meta_analyze(&studies, default_level(), ModelKind::RandomEffects).unwrap();
        let rows = forest_rows(&studies, &pooled).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].display_estimate - 0.2f64.exp()).abs() < 1e-15);
        let total: f64 = rows[..2].iter().map(|r| r.weight_percent).sum();
        assert!((total - 100.0).abs() < 1e-10);
        assert!(rows[2].is_pooled && rows[2].het.is_some());
        let text = render_forest_text(&rows, 90).unwrap();
        assert!(text.contains("log scale"));
    }

    #[test]
    fn mixed_measures_rejected() {
        let mut r = pooled_row_at_null();
        r.measure = EffectMeasure::OddsRatio;
        r.display_ci = ci(0.5, 2.0);
        r.display_estimate = 1.0;
        assert!(render_forest_text(&[pooled_row_at_null(), r], 80).is_err());
    }
}
