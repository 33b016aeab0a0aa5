//! Built-in oracle comparisons behind the `verify` command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::geom::{solve_object_placement, solve_r_max, tangent_spheres, AxisConfig, Point3, SphereFingertip, Vec3};
use crate::grasp::is_valid_grasp;
use crate::kinematics::{four_bar_forward, Branch, FourBarLinkage, PlaneFrame};
use crate::manip::{delta_m, manipulation_range};
use crate::oracle::{oracle_contact_angle, oracle_four_bar, oracle_r_max, oracle_tripod_radii, oracle_validity, oracle_width_sweep};

/// Maximum fingertip deformation for 10 N on a 134.3 kPa pad.
pub const DELTA_M_REFERENCE_MM: f64 = 4.87;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case_id: String,
    pub inputs: String,
    pub oracle: f64,
    pub main: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(case_id: impl Into<String>, inputs: impl Into<String>, oracle: f64, main: f64, tolerance: f64) -> Self {
        let abs_dev = (oracle - main).abs();
        let rel_dev = if oracle != 0.0 { abs_dev / oracle.abs() } else { abs_dev };
        Self {
            case_id: case_id.into(),
            inputs: inputs.into(),
            oracle,
            main,
            abs_dev,
            rel_dev,
            tolerance,
            pass: abs_dev <= tolerance,
        }
    }

    /// A row where either side failed to produce a value.
    fn missing(case_id: impl Into<String>, inputs: impl Into<String>, oracle: Option<f64>, main: Option<f64>) -> Self {
        let both_missing = oracle.is_none() && main.is_none();
        Self {
            case_id: case_id.into(),
            inputs: inputs.into(),
            oracle: oracle.unwrap_or(f64::NAN),
            main: main.unwrap_or(f64::NAN),
            abs_dev: if both_missing { 0.0 } else { f64::INFINITY },
            rel_dev: if both_missing { 0.0 } else { f64::INFINITY },
            tolerance: 0.0,
            pass: both_missing,
        }
    }
}

pub fn reports_to_csv(reports: &[OracleReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r).expect("report rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn both(case: String, inputs: String, oracle: Option<f64>, main: Option<f64>, tol: f64) -> OracleReport {
    match (oracle, main) {
        (Some(o), Some(m)) => OracleReport::new(case, inputs, o, m, tol),
        (o, m) => OracleReport::missing(case, inputs, o, m),
    }
}

/// Runs every comparison. `perturb_mm` shifts the main-path geometry and
/// must make the run fail when non-zero.
pub fn run_verify(perturb_mm: f64) -> Vec<OracleReport> {
    let mut out = Vec::new();
    let shift = Vec3::new(perturb_mm, 0.0, 0.0);

    let dm = delta_m(10.0, 134.3e3).ok().map(|v| v + perturb_mm);
    out.push(both("delta_m".into(), "F=10 N, E=134.3 kPa".into(), Some(DELTA_M_REFERENCE_MM), dm, 0.005));

    for (k, (d, ra, rb, r)) in [
        (30.0, 8.0, 8.0, 10.0),
        (25.0, 9.0, 8.0, 0.0),
        (40.0, 9.0, 8.0, 30.0),
        (60.0, 10.0, 6.0, 25.0),
        (12.0, 8.0, 8.0, 3.0),
        (80.0, 9.0, 8.0, 60.0),
    ]
    .into_iter()
    .enumerate()
    {
        let a = Point3::new(1.0, -2.0, 0.5);
        let b = a + Vec3::new(0.6, 0.8, 0.0) * d;
        let oracle = oracle_contact_angle((a, ra), (b, rb), r, 4000).ok();
        let main = solve_object_placement(
            &SphereFingertip { center: a + shift, radius: ra },
            &SphereFingertip { center: b, radius: rb },
            r,
        )
        .ok();
        out.push(both(format!("contact_angle_{k}"), format!("d={d} ra={ra} rb={rb} R={r}"), oracle, main, 1e-5));
    }

    for (k, (d, ra, rb)) in [(30.0, 9.0, 8.0), (63.0, 9.0, 8.0), (112.0, 9.0, 8.0), (15.0, 8.0, 8.0)].into_iter().enumerate() {
        let theta = 110f64.to_radians();
        let oracle = oracle_r_max(d, ra, rb, theta);
        let main = solve_r_max(d + perturb_mm, ra, rb, theta).ok();
        out.push(both(format!("r_max_{k}"), format!("d={d} ra={ra} rb={rb} theta_min=110deg"), oracle, main, 1e-6));
    }

    let s = 60.0;
    let tips = [
        (Point3::new(0.0, 0.0, 0.0), 8.0),
        (Point3::new(s, 0.0, 0.0), 9.0),
        (Point3::new(0.4 * s, 0.8 * s, 0.0), 8.0),
    ];
    let oracle = oracle_tripod_radii(tips, 0.5).into_iter().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |v| v.max(r))));
    let main_tips = tips.map(|(c, r)| SphereFingertip { center: c, radius: r });
    let mut main_tips = main_tips;
    main_tips[0].center += shift;
    let main = tangent_spheres(&main_tips).into_iter().map(|t| t.radius.max(0.0)).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |v| v.max(r))));
    out.push(both("tripod_radius".into(), "triangle 60 mm".into(), oracle, main, 1e-6));

    let linkage = FourBarLinkage {
        ground: 12.0,
        ground_angle: (-100f64).to_radians(),
        input: 45.0,
        coupler: 12.0,
        output: 46.0,
        coupler_point: (0.0, 45.0),
        frame: PlaneFrame::new(Point3::new(25.0, 110.0, 0.0), Vec3::y(), Vec3::z()).expect("valid plane"),
    };
    let mut shifted = linkage;
    shifted.frame.origin += shift;
    for deg in [0.0, 30.0, 60.0, 90.0] {
        let a = f64::to_radians(deg);
        let o = oracle_four_bar(&linkage, a, Branch::Open, 20_000).ok();
        let m = four_bar_forward(&shifted, a, Branch::Open).ok();
        let dev = match (o, m) {
            (Some(o), Some(m)) => Some((o - m).norm()),
            _ => None,
        };
        out.push(both(format!("four_bar_{deg}"), format!("input={deg}deg"), Some(0.0), dev, 1e-9));
    }

    let mut cfg = RunConfig::reference();
    cfg.discretization.thumb_steps = 12;
    cfg.discretization.index_steps = 12;
    cfg.discretization.middle_steps = 12;
    let problem = cfg.build(Path::new(".")).expect("reference configuration builds");
    let full = RunConfig::reference().build(Path::new(".")).expect("reference configuration builds");
    let fixtures = [
        [0.0; 6],
        [85.714_285_714_285_72, 122.857_142_857_142_86, 65.714_285_714_285_72, -32.142_857_142_857_146, 8.571_428_571_428_573, 64.285_714_285_714_29],
        [90.0, 110.0, 60.0, -22.5, 15.0, 0.0],
    ];
    for (k, v) in fixtures.into_iter().enumerate() {
        let omega = AxisConfig::from_mm_deg(v);
        let mut main_omega = omega;
        main_omega.origin += shift;
        let o = oracle_validity(&omega, &problem.hand, &problem.req, 0.5);
        let m = is_valid_grasp(&main_omega, &problem.hand, &problem.req);
        let code = |p: bool, l: bool, t: bool| (p as u8 * 4 + l as u8 * 2 + t as u8) as f64;
        out.push(OracleReport::new(
            format!("validity_{k}"),
            format!("omega={v:?}"),
            code(o.precision, o.lateral, o.tripod),
            code(m.precision_ok, m.lateral_ok, m.tripod_ok),
            0.0,
        ));
        let ow = oracle_width_sweep(&omega, &full.hand, &full.req, full.delta_m, 0.05);
        let mw = manipulation_range(&main_omega, &full.hand, &full.req, full.delta_m).overall;
        out.extend(width_rows(&format!("width_{k}"), &format!("omega={v:?}"), &ow, &mw, 0.05));
    }
    out
}

/// Endpoint rows for a width comparison on a grid of `step`. An empty
/// oracle result matches a main interval narrower than one step.
pub fn width_rows(case: &str, inputs: &str, oracle: &crate::manip::WidthInterval, main: &crate::manip::WidthInterval, step: f64) -> Vec<OracleReport> {
    match (oracle.is_empty(), main.is_empty()) {
        (true, true) => vec![OracleReport::new(format!("{case}_empty"), inputs, 0.0, 0.0, 0.0)],
        (true, false) => vec![OracleReport::new(format!("{case}_width"), inputs, 0.0, main.width(), step)],
        (false, true) => vec![OracleReport::missing(format!("{case}_empty"), inputs, Some(oracle.lo), None)],
        (false, false) => vec![
            OracleReport::new(format!("{case}_lo"), inputs, oracle.lo, main.lo, step),
            OracleReport::new(format!("{case}_hi"), inputs, oracle.hi, main.hi, step),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_build_passes() {
        let reports = run_verify(0.0);
        let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn one_millimetre_error_is_caught() {
        let reports = run_verify(1.0);
        assert!(reports.iter().any(|r| !r.pass));
        assert!(reports.iter().filter(|r| r.case_id.starts_with("four_bar")).all(|r| !r.pass));
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let reports = vec![OracleReport::new("a", "x", 1.0, 1.5, 0.1)];
        let text = reports_to_csv(&reports);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("case_id,inputs,oracle,main,abs_dev,rel_dev,tolerance,pass"));
        assert_eq!(lines.next(), Some("a,x,1.0,1.5,0.5,0.5,0.1,false"));
    }
}
