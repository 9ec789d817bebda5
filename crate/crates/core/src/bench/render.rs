//! Frame rendering: self-contained SVG snapshots of a scene, optionally with
//! the push about to be applied drawn as an arrow.

use std::fmt::Write;

use crate::actions::{continuize, direction_vector, PushAction};
use crate::oracle::TrajectoryStep;
use crate::qa::class_name;
use crate::world::{apply_push, Scene};
use crate::{BIN_SIZE, N_CLASSES, PUSH_DISTANCE};

/// Render one scene. Objects are drawn bottom of the pile first so the
/// stacking order on screen matches the depth order; classes get fixed hues.
pub fn scene_svg(scene: &Scene, push: Option<&PushAction>) -> String {
    let mut svg = String::new();
    let side = BIN_SIZE;
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"448\" height=\"448\" \
         viewBox=\"0 0 {side} {side}\" font-family=\"monospace\">\n"
    );
    let _ = write!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{side}\" height=\"{side}\" fill=\"#f4f2ee\" \
         stroke=\"#333\" stroke-width=\"1\"/>\n"
    );

    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by_key(|&i| scene.objects[i].z);
    for i in order {
        let o = &scene.objects[i];
        let hue = o.class_id as usize * 360 / N_CLASSES;
        let b = o.bbox;
        let _ = write!(
            svg,
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" \
             fill=\"hsl({hue},65%,60%)\" fill-opacity=\"0.9\" stroke=\"hsl({hue},65%,30%)\" \
             stroke-width=\"0.7\"/>\n",
            b.x_min,
            b.y_min,
            b.width(),
            b.height()
        );
        let _ = write!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"6\" fill=\"#222\">{}{}</text>\n",
            b.x_min + 1,
            b.y_min + 7,
            class_name(o.class_id),
            o.instance_id
        );
    }

    if let Some(p) = push {
        let (dx, dy) = direction_vector::<f64>(p.direction_class);
        let (sx, sy) = p.start;
        let (ex, ey) = (sx + PUSH_DISTANCE as f64 * dx, sy + PUSH_DISTANCE as f64 * dy);
        // Arrowhead wings, swept back from the tip.
        let (wx, wy) = (-dy, dx);
        let (hx, hy) = (ex - 6.0 * dx, ey - 6.0 * dy);
        let _ = write!(
            svg,
            "  <circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"2.5\" fill=\"#c22\"/>\n  <line \
             x1=\"{sx:.1}\" y1=\"{sy:.1}\" x2=\"{ex:.1}\" y2=\"{ey:.1}\" stroke=\"#c22\" \
             stroke-width=\"1.5\"/>\n  <polygon points=\"{ex:.1},{ey:.1} {:.1},{:.1} {:.1},{:.1}\" \
             fill=\"#c22\"/>\n",
            hx + 3.0 * wx,
            hy + 3.0 * wy,
            hx - 3.0 * wx,
            hy - 3.0 * wy,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One frame per step of a demonstration or episode: the scene as observed,
/// with the action taken drawn on top. Pushes are applied between frames.
pub fn demonstration_frames(scene: &Scene, steps: &[TrajectoryStep]) -> Vec<String> {
    let mut cur = scene.clone();
    let mut frames = Vec::with_capacity(steps.len());
    for step in steps {
        let push = continuize(&step.action);
        frames.push(scene_svg(&cur, push.as_ref()));
        if let Some(p) = &push {
            apply_push(&mut cur, p).expect("recorded pushes replay cleanly");
        }
    }
    frames
}
