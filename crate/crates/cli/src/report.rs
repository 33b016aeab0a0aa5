//! Output artifacts for optimization runs.

use std::fmt::Write as _;

use anyhow::Result;
use thumbaxis_core::manip::WidthInterval;
use thumbaxis_core::optimizer::{Evaluator, GridDim, OptimizationResult, Problem, RankedConfig};

pub const TOPK_COLUMNS: [&str; 12] = [
    "rank", "index", "x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg", "w_lo_mm", "w_hi_mm", "width_mm", "empty",
];

fn provenance(res: &OptimizationResult) -> Vec<String> {
    let d = res.metadata.discretization;
    vec![
        format!("problem_hash: {}", res.metadata.problem_hash),
        format!(
            "discretization: thumb={} index={} middle={} manipulation_index={}",
            d.thumb_steps, d.index_steps, d.middle_steps, d.manipulation_index_steps
        ),
        format!("grid_total: {}", res.metadata.grid_total),
    ]
}

/// Top-k table, best first, preceded by `#` comment lines identifying the run.
pub fn topk_csv(res: &OptimizationResult) -> Result<String> {
    let mut out = String::new();
    for line in provenance(res) {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TOPK_COLUMNS)?;
    for (rank, r) in res.top_k.iter().enumerate() {
        let mut row = vec![(rank + 1).to_string(), r.index.to_string()];
        row.extend(r.config_mm_deg.iter().map(|v| v.to_string()));
        let (lo, hi) = if r.interval.is_empty() { (String::new(), String::new()) } else { (r.interval.lo.to_string(), r.interval.hi.to_string()) };
        row.extend([lo, hi, r.width.to_string(), r.interval.is_empty().to_string()]);
        w.write_record(&row)?;
    }
    out.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(out)
}

/// |W| over two grid dimensions with the others held at the winner.
/// `None` marks an invalid configuration.
pub fn heatmap_values(problem: &Problem, winner: &RankedConfig, dims: [GridDim; 2]) -> Vec<Vec<Option<WidthInterval>>> {
    let eval = Evaluator::new(problem, true);
    let axes = problem.grid.axes();
    let (a, b) = (dims[0].position(), dims[1].position());
    let mut scratch = Vec::new();
    (0..axes[b].steps)
        .map(|j| {
            (0..axes[a].steps)
                .map(|i| {
                    let mut idx = winner.grid_indices;
                    idx[a] = i;
                    idx[b] = j;
                    eval.evaluate(&problem.grid.config_from_indices(idx), &mut scratch)
                })
                .collect()
        })
        .collect()
}

fn axis_label(dim: GridDim) -> String {
    format!("{} ({})", dim.name(), if dim.is_angle() { "deg" } else { "mm" })
}

fn display_value(dim: GridDim, v: f64) -> f64 {
    if dim.is_angle() {
        v.to_degrees()
    } else {
        v
    }
}

fn shade(t: f64) -> String {
    let lo = [255.0, 247.0, 188.0];
    let hi = [8.0, 48.0, 107.0];
    let c: Vec<u8> = (0..3).map(|k| (lo[k] + (hi[k] - lo[k]) * t.clamp(0.0, 1.0)).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn heatmap_svg(problem: &Problem, res: &OptimizationResult, winner: &RankedConfig, dims: [GridDim; 2]) -> String {
    let values = heatmap_values(problem, winner, dims);
    let axes = problem.grid.axes();
    let (ax, bx) = (axes[dims[0].position()], axes[dims[1].position()]);
    let cell = 24.0;
    let (left, top, right, bottom) = (90.0, 50.0, 150.0, 60.0);
    let (nx, ny) = (ax.steps, bx.steps);
    let width = left + cell * nx as f64 + right;
    let height = top + cell * ny as f64 + bottom;
    let w_max = values.iter().flatten().flatten().filter(|w| !w.is_empty()).map(|w| w.width()).fold(0.0, f64::max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, "<desc>{}</desc>", provenance(res).join("; "));
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="13">|W| (mm) over {} and {}, other axes at the optimum</text>"#,
        dims[0].name(),
        dims[1].name()
    );
    for (j, row) in values.iter().enumerate() {
        // first row of the second dimension at the bottom
        let y = top + cell * (ny - 1 - j) as f64;
        for (i, v) in row.iter().enumerate() {
            let x = left + cell * i as f64;
            let (fill, title) = match v {
                None => ("#d9d9d9".to_string(), "invalid".to_string()),
                Some(w) if w.is_empty() => ("#ffffff".to_string(), "valid, W empty".to_string()),
                Some(w) => (shade(if w_max > 0.0 { w.width() / w_max } else { 0.0 }), format!("|W| = {:.3} mm", w.width())),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#bdbdbd" stroke-width="0.5"><title>{title}</title></rect>"##
            );
        }
    }
    let (wi, wj) = (winner.grid_indices[dims[0].position()], winner.grid_indices[dims[1].position()]);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="none" stroke="black" stroke-width="2"/>"#,
        left + cell * wi as f64,
        top + cell * (ny - 1 - wj) as f64
    );
    let base = top + cell * ny as f64;
    for (i, anchor) in [(0, "start"), (nx - 1, "end")] {
        let x = left + cell * i as f64 + if anchor == "end" { cell } else { 0.0 };
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="{anchor}">{:.1}</text>"#, base + 15.0, display_value(dims[0], ax.value(i)));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + cell * nx as f64 / 2.0, base + 35.0, axis_label(dims[0]));
    for j in [0, ny - 1] {
        let y = top + cell * (ny - 1 - j) as f64 + cell / 2.0 + 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{:.1}</text>"#, left - 6.0, display_value(dims[1], bx.value(j)));
    }
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + cell * ny as f64 / 2.0,
        top + cell * ny as f64 / 2.0,
        axis_label(dims[1])
    );
    let lx = left + cell * nx as f64 + 30.0;
    for (k, (fill, label)) in [
        (shade(1.0), format!("{w_max:.3} mm")),
        (shade(0.0), "0 mm".to_string()),
        ("#ffffff".to_string(), "valid, W empty".to_string()),
        ("#d9d9d9".to_string(), "invalid".to_string()),
    ]
    .into_iter()
    .enumerate()
    {
        let y = top + 22.0 * k as f64;
        let _ = writeln!(s, r##"<rect x="{lx}" y="{y}" width="14" height="14" fill="{fill}" stroke="#bdbdbd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, lx + 20.0, y + 11.0);
    }
    s.push_str("</svg>\n");
    s
}
