use std::fmt::Write;

use super::sweep::{AblationResult, CellSummary, Speed};
use super::{PlanReport, SimulateSummary, Summary};

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

fn vec3(v: &[f64; 3]) -> String {
    format!("({:.4}, {:.4}, {:.4})", v[0] + 0.0, v[1] + 0.0, v[2] + 0.0)
}

pub fn render(summary: &Summary) -> String {
    match summary {
        Summary::Plan(p) => render_plan(p),
        Summary::Simulate(s) => render_simulate(s),
        Summary::Ablate(a) => render_ablation(a),
    }
}

fn render_plan(p: &PlanReport) -> String {
    let d = &p.diagnostics;
    let mut s = String::new();
    let _ = writeln!(s, "# plan {}\n", p.scenario);
    let _ = writeln!(s, "- duration: {:.4} s over {} segments", p.duration, p.segments.len());
    let _ = writeln!(s, "- stretch iterations: {}", d.stretch_count);
    let _ = writeln!(s, "- endpoint acceleration: {}", vec3(&p.endpoint_acceleration));
    let _ = writeln!(
        s,
        "- required endpoint acceleration: {}",
        vec3(&p.required_endpoint_acceleration)
    );
    let _ = writeln!(s, "- endpoint velocity: {}", vec3(&p.endpoint_velocity));
    let _ = writeln!(s, "- endpoint residual: {:.3e}", d.endpoint_residual);
    let _ = writeln!(s, "- pre-impact band violation: {:.3e}", d.band_violation);
    let _ = writeln!(s, "- continuity defect: {:.3e}", d.continuity_defect);
    let _ = writeln!(s, "- certified: {}\n", p.certified);
    let _ = writeln!(s, "| segment | duration | thrust max | thrust min | strict |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for c in &d.certificates {
        let strict = c.strict.map_or("-".to_string(), |x| x.passed().to_string());
        let _ = writeln!(
            s,
            "| {} | {:.4} | {} | {} | {} |",
            c.segment, c.duration, c.thrust_max, c.thrust_min, strict
        );
    }
    s
}

fn render_simulate(r: &SimulateSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# simulate {} ({})\n", r.scenario, r.mode);
    let _ = writeln!(
        s,
        "success rate: {:.1}% over {} seeds\n",
        100.0 * r.success_rate,
        r.runs.len()
    );
    let _ = writeln!(
        s,
        "| seed | outcome | success | e_s2 [m] | e_s3 [m] | temporal % | spatial % | tracking RMSE [m] |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for m in &r.runs {
        let _ = writeln!(
            s,
            "| {} | {:?} | {} | {} | {} | {:.1} | {:.1} | {:.4} |",
            m.seed,
            m.outcome,
            m.success,
            opt(m.e_s2, 4),
            opt(m.e_s3, 4),
            m.temporal_visibility,
            m.spatial_visibility,
            m.tracking_rmse
        );
    }
    s
}

fn axis_value(c: &CellSummary, axis: &str) -> String {
    let c = &c.cell;
    match axis {
        "mode" => c.mode.to_string(),
        "incline_deg" => format!("{}", c.incline_deg),
        "distance" => format!("{}", c.distance),
        "v_s3" => c.v_s3.to_string(),
        "v_s1" => c.v_s1.to_string(),
        "fov" => c.fov.to_string(),
        "boundary" => c.boundary.to_string(),
        "noise_std" => opt(c.noise_std, 3),
        _ => "?".into(),
    }
}

fn vis(c: &CellSummary) -> String {
    format!("{} / {}", opt(c.temporal_visibility, 1), opt(c.spatial_visibility, 1))
}

/// Contact speeds on rows and columns, as in an endpoint-velocity study.
fn render_speed_grid(a: &AblationResult, s: &mut String) {
    let mut cols: Vec<Speed> = Vec::new();
    let mut rows: Vec<Speed> = Vec::new();
    for c in &a.cells {
        if !cols.contains(&c.cell.v_s1) {
            cols.push(c.cell.v_s1);
        }
        if !rows.contains(&c.cell.v_s3) {
            rows.push(c.cell.v_s3);
        }
    }
    let _ = writeln!(s, "temporal % / spatial % of the path with the target in view\n");
    let _ = write!(s, "| |");
    for c in &cols {
        let _ = write!(s, " v_s1 = {c} |");
    }
    let _ = write!(s, "\n|---|");
    for _ in &cols {
        let _ = write!(s, "---|");
    }
    let _ = writeln!(s);
    for r in &rows {
        let _ = write!(s, "| v_s3 = {r} |");
        for c in &cols {
            let cell = a.cells.iter().find(|x| x.cell.v_s3 == *r && x.cell.v_s1 == *c);
            let _ = write!(s, " {} |", cell.map_or("-".into(), vis));
        }
        let _ = writeln!(s);
    }
}

fn render_ablation(a: &AblationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ablate {} ({:?}, {} seeds)\n", a.name, a.sweep_kind, a.seeds.len());
    if a.varying == ["v_s3", "v_s1"] {
        render_speed_grid(a, &mut s);
        return s;
    }
    let axes: Vec<&str> = if a.varying.is_empty() {
        vec!["mode"]
    } else {
        a.varying.iter().map(String::as_str).collect()
    };
    let _ = write!(s, "|");
    for ax in &axes {
        let _ = write!(s, " {ax} |");
    }
    let _ = writeln!(
        s,
        " runs | success % | temporal % | spatial % | tracking RMSE [m] | abs e_s2 [m] | abs e_s3 [m] |"
    );
    let _ = write!(s, "|");
    for _ in 0..axes.len() + 7 {
        let _ = write!(s, "---|");
    }
    let _ = writeln!(s);
    for c in &a.cells {
        let _ = write!(s, "|");
        for ax in &axes {
            let _ = write!(s, " {} |", axis_value(c, ax));
        }
        let _ = writeln!(
            s,
            " {} | {:.1} | {} | {} | {} | {} | {} |",
            c.runs,
            100.0 * c.success_rate,
            opt(c.temporal_visibility, 1),
            opt(c.spatial_visibility, 1),
            opt(c.tracking_rmse, 4),
            opt(c.abs_e_s2, 4),
            opt(c.abs_e_s3, 4)
        );
    }
    s
}
