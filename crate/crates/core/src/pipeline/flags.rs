//! Flag plots: each sampled pose is drawn as a pole along its z-axis with a
//! pennant pointing along its x-axis.

use std::fmt::Write;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::algebra::RigidMotion;
use crate::error::MpgError;
use crate::mixture::Mpg;

/// Stroke colors assigned to flag sets in order.
pub const PALETTE: [&str; 8] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub foot: [f64; 3],
    pub pole_tip: [f64; 3],
    pub pennant_tip: [f64; 3],
    pub color: String,
}

impl Flag {
    pub fn from_pose(m: &RigidMotion, scale: f64, color: &str) -> Flag {
        let r = m.rotation();
        let foot = m.translation();
        let pole_tip = foot + r.rotate(&Vector3::z()) * scale;
        let pennant_tip = (foot + pole_tip) * 0.5 + r.rotate(&Vector3::x()) * (0.5 * scale);
        Flag {
            foot: foot.into(),
            pole_tip: pole_tip.into(),
            pennant_tip: pennant_tip.into(),
            color: color.to_owned(),
        }
    }

    /// Pole midpoint, the pennant's attachment point.
    pub fn pole_mid(&self) -> [f64; 3] {
        std::array::from_fn(|i| 0.5 * (self.foot[i] + self.pole_tip[i]))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlagSet {
    pub flags: Vec<Flag>,
}

/// One flag per draw from `m`.
pub fn export_flags(m: &Mpg, n: usize, seed: u64, scale: f64, color: &str) -> FlagSet {
    FlagSet {
        flags: m
            .draw(n, seed)
            .iter()
            .map(|x| Flag::from_pose(x, scale, color))
            .collect(),
    }
}

/// Axis pair used for the orthographic projection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl View {
    fn axes(self) -> (usize, usize) {
        match self {
            View::Xy => (0, 1),
            View::Xz => (0, 2),
            View::Yz => (1, 2),
        }
    }
}

impl FromStr for View {
    type Err = MpgError;
    fn from_str(s: &str) -> Result<View, MpgError> {
        match s {
            "xy" => Ok(View::Xy),
            "xz" => Ok(View::Xz),
            "yz" => Ok(View::Yz),
            _ => Err(MpgError::field("view", format!("expected xy, xz or yz, got {s:?}"))),
        }
    }
}

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Renders all flags as SVG polylines: the pole from foot to tip, and the
/// pennant from tip to pennant point to pole midpoint.
pub fn render_svg(sets: &[FlagSet], view: View) -> String {
    let (ax, ay) = view.axes();
    let points = sets
        .iter()
        .flat_map(|s| &s.flags)
        .flat_map(|f| [f.foot, f.pole_tip, f.pennant_tip]);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for (k, a) in [ax, ay].into_iter().enumerate() {
            lo[k] = lo[k].min(p[a]);
            hi[k] = hi[k].max(p[a]);
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    if lo[0].is_finite() {
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let k = (CANVAS - 2.0 * MARGIN) / span;
        // svg y grows downwards
        let map = |p: &[f64; 3]| (MARGIN + (p[ax] - lo[0]) * k, CANVAS - MARGIN - (p[ay] - lo[1]) * k);
        for (i, set) in sets.iter().enumerate() {
            let _ = writeln!(out, r#"  <g id="set{i}" fill="none" stroke-width="1">"#);
            for f in &set.flags {
                let [a, b, c, d] = [f.foot, f.pole_tip, f.pennant_tip, f.pole_mid()].map(|p| map(&p));
                let color = escape(&f.color);
                let _ = writeln!(
                    out,
                    r#"    <polyline stroke="{color}" points="{:.3},{:.3} {:.3},{:.3}"/>"#,
                    a.0, a.1, b.0, b.1
                );
                let _ = writeln!(
                    out,
                    r#"    <polyline stroke="{color}" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}"/>"#,
                    b.0, b.1, c.0, c.1, d.0, d.1
                );
            }
            out.push_str("  </g>\n");
        }
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}
