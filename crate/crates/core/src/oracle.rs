//! The demonstration expert: a least-pushes policy with full scene access.
//!
//! The expert answers the question of "which single push helps right now":
//!
//! - existence: stop once the class is absent or some instance is visible
//!   enough to detect; otherwise clear an occluder off the most visible
//!   instance.
//! - counting: stop once every instance of the class is detectable (or none
//!   exist); otherwise clear an occluder off the least visible hidden one.
//! - spatial: stop once the current view answers the question the same way
//!   the arrangement it was posed on does; otherwise uncover the worst
//!   covered queried object, members of truly related pairs first. Hidden
//!   members are missing graph nodes, and partially covered ones have
//!   clipped boxes that distort the pair geometry, so both need uncovering.
//!
//! Candidate pushes start at the chosen object's center (snapped to the
//! action grid) aimed along the canonical direction that best agrees with
//! "away from the thing being uncovered". Because a corridor push can grab a
//! different object than intended, every candidate is verified against the
//! simulator: the expert only emits pushes that strictly grow the visible
//! area of the queried classes, falling back to other directions and other
//! occluders, and stops when no push helps. Demonstrations of questions whose
//! answer is No or 0 get one canonical bin-center push before STOP so that
//! even "nothing to do" episodes contain a manipulation to imitate.

use crate::actions::{continuize, direction_vector, discretize, DiscreteAction, PushAction};
use crate::bench::ground_truth_answer;
use crate::graph::{build_graph, relate_boxes};
use crate::qa::{answer, Answer, Question, QuestionType};
use crate::world::{apply_push, observe, visibilities, Observation, Scene};
use crate::{N_DIRECTIONS, TAU_VIS};

/// The canonical push inserted into No/0 demonstrations: bin center, aimed
/// along +x.
pub const EXTRA_ACTION: DiscreteAction = DiscreteAction { x_bin: 14, y_bin: 14, o_class: 0 };

/// One demonstrated step: what was seen, then what was done.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub observation: Observation,
    pub action: DiscreteAction,
}

/// A full demonstration: observations paired with discretized expert actions,
/// always ending in STOP.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub question: Question,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    /// Number of pushes (steps excluding the terminal STOP).
    pub fn push_count(&self) -> usize {
        self.steps.iter().filter(|s| !s.action.is_stop()).count()
    }
}

/// A demonstration plus the scene it left behind.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    pub final_scene: Scene,
}

/// Decide the expert's next push for the current scene, or `None` to stop.
/// `truth` is the answer in the arrangement the question was posed on; pushes
/// move objects, so for spatial questions it cannot be recomputed from the
/// current scene. Every returned push is grid-snapped, starts inside the bin,
/// and strictly increases the visible area of the queried classes when
/// applied.
pub fn plan_step(scene: &Scene, question: &Question, truth: Answer) -> Option<PushAction> {
    let vis = visibilities(scene);
    match question.qtype {
        QuestionType::Existence => {
            let instances = class_instances(scene, question.class_a);
            if instances.is_empty() || instances.iter().any(|&i| vis[i] >= TAU_VIS) {
                return None;
            }
            // Most visible first: closest to crossing the detection threshold.
            let mut order = instances;
            order.sort_by(|&a, &b| {
                vis[b].partial_cmp(&vis[a]).unwrap().then(scene.objects[a].id.cmp(&scene.objects[b].id))
            });
            let metric = &[question.class_a][..];
            order.iter().find_map(|&t| reveal_push(scene, t, metric))
        }
        QuestionType::Counting => {
            let instances = class_instances(scene, question.class_a);
            if instances.iter().all(|&i| vis[i] >= TAU_VIS) {
                return None;
            }
            // Least visible hidden instance first.
            let mut order: Vec<usize> =
                instances.into_iter().filter(|&i| vis[i] < TAU_VIS).collect();
            order.sort_by(|&a, &b| {
                vis[a].partial_cmp(&vis[b]).unwrap().then(scene.objects[a].id.cmp(&scene.objects[b].id))
            });
            let metric = &[question.class_a][..];
            order.iter().find_map(|&t| reveal_push(scene, t, metric))
        }
        QuestionType::Spatial => {
            let class_b = question.class_b.expect("spatial question without class_b");
            // Stop as soon as the view agrees with the posed arrangement;
            // any further push risks shoving the witnessing pair apart.
            if answer(&build_graph(&observe(scene, 0)), question) == truth {
                return None;
            }
            // The view disagrees because queried objects are covered: hidden
            // ones are missing from the graph, and partially covered ones
            // have clipped boxes that distort the pair geometry. Uncover the
            // worst covered instance, pair members before bystanders.
            let related: std::collections::BTreeSet<usize> =
                related_pairs(scene, question.class_a, class_b)
                    .into_iter()
                    .flat_map(|(i, j)| [i, j])
                    .collect();
            let mut targets: Vec<usize> = class_instances(scene, question.class_a)
                .into_iter()
                .chain(class_instances(scene, class_b))
                .filter(|&i| vis[i] < 1.0)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            targets.sort_by(|&a, &b| {
                related
                    .contains(&b)
                    .cmp(&related.contains(&a))
                    .then(vis[a].partial_cmp(&vis[b]).unwrap())
                    .then(scene.objects[a].id.cmp(&scene.objects[b].id))
            });
            let metric = &[question.class_a, class_b][..];
            answer_seeking_push(scene, question, truth, &targets, metric)
        }
    }
}

/// Produce the full demonstration for one question.
pub fn demonstrate(scene: &Scene, question: &Question, max_steps: usize) -> Demonstration {
    let truth = ground_truth_answer(scene, question);
    let needs_extra = matches!(truth, Answer::No | Answer::Count(0));
    let mut cur = scene.clone();
    let mut steps = Vec::new();
    let mut extra_done = false;
    let mut t = 0usize;
    loop {
        let obs = observe(&cur, t as u32);
        let planned = if t < max_steps { plan_step(&cur, question, truth) } else { None };
        match planned {
            Some(push) => {
                apply_push(&mut cur, &push).expect("expert pushes start inside the bin");
                steps.push(TrajectoryStep { observation: obs, action: discretize(&push) });
                t += 1;
            }
            None if needs_extra && !extra_done && t < max_steps => {
                let push = continuize(&EXTRA_ACTION).unwrap();
                apply_push(&mut cur, &push).expect("center push starts inside the bin");
                steps.push(TrajectoryStep { observation: obs, action: EXTRA_ACTION });
                extra_done = true;
                t += 1;
            }
            None => {
                steps.push(TrajectoryStep { observation: obs, action: DiscreteAction::STOP });
                break;
            }
        }
    }
    Demonstration { trajectory: Trajectory { question: *question, steps }, final_scene: cur }
}

/// Indices of the instances of `class_id`.
fn class_instances(scene: &Scene, class_id: u8) -> Vec<usize> {
    (0..scene.objects.len()).filter(|&i| scene.objects[i].class_id == class_id).collect()
}

/// Object pairs `(a-instance, b-instance)` related under the true boxes,
/// ordered by id pair.
fn related_pairs(scene: &Scene, class_a: u8, class_b: u8) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in class_instances(scene, class_a) {
        for j in class_instances(scene, class_b) {
            if i == j {
                continue;
            }
            let rel = relate_boxes::<f64>(&scene.objects[i].bbox, &scene.objects[j].bbox)
                .expect("scene boxes are non-degenerate");
            if rel.is_some() {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Unit-ish vector from object `from` toward object `to` (zero when centers
/// coincide).
fn toward(scene: &Scene, from: usize, to: usize) -> (f64, f64) {
    let (fx, fy) = scene.objects[from].bbox.center();
    let (tx, ty) = scene.objects[to].bbox.center();
    (tx - fx, ty - fy)
}

/// Total visible raster area of the given classes, in cells.
fn visible_class_area(scene: &Scene, classes: &[u8]) -> f64 {
    let vis = visibilities(scene);
    scene
        .objects
        .iter()
        .zip(&vis)
        .filter(|(o, _)| classes.contains(&o.class_id))
        .map(|(o, v)| v * o.bbox.area() as f64)
        .sum()
}

/// Find a verified push that uncovers `target`: try its occluders from the
/// top of the pile down, aimed away from the target.
fn reveal_push(scene: &Scene, target: usize, metric_classes: &[u8]) -> Option<PushAction> {
    let tz = scene.objects[target].z;
    let tb = scene.objects[target].bbox;
    let mut occluders: Vec<usize> = (0..scene.objects.len())
        .filter(|&i| scene.objects[i].z > tz && scene.objects[i].bbox.overlaps(&tb))
        .collect();
    occluders.sort_by_key(|&i| std::cmp::Reverse(scene.objects[i].z));
    occluders.iter().find_map(|&occ| {
        let away = toward(scene, target, occ);
        verified_push(scene, scene.objects[occ].bbox.center(), away, metric_classes)
    })
}

/// Scan the verified candidate pushes for every target in order, preferring
/// one whose simulated outcome already makes the view answer `truth`; when no
/// single push settles the question, fall back to the first one that makes
/// visible-area progress. Uncovering often means moving the very object that
/// witnesses a spatial relation, so the push direction decides whether the
/// pair survives; simulating the answer picks a surviving direction whenever
/// one exists.
fn answer_seeking_push(
    scene: &Scene,
    question: &Question,
    truth: Answer,
    targets: &[usize],
    metric_classes: &[u8],
) -> Option<PushAction> {
    let before = visible_class_area(scene, metric_classes);
    let mut fallback: Option<PushAction> = None;
    for &target in targets {
        let tz = scene.objects[target].z;
        let tb = scene.objects[target].bbox;
        let mut occluders: Vec<usize> = (0..scene.objects.len())
            .filter(|&i| scene.objects[i].z > tz && scene.objects[i].bbox.overlaps(&tb))
            .collect();
        occluders.sort_by_key(|&i| std::cmp::Reverse(scene.objects[i].z));
        for occ in occluders {
            let away = toward(scene, target, occ);
            for o in directions_by_agreement(away.0, away.1) {
                let start = scene.objects[occ].bbox.center();
                let Some(push) = continuize(&discretize(&PushAction::new(start, o))) else {
                    continue;
                };
                let mut sim = scene.clone();
                if apply_push(&mut sim, &push).is_err() {
                    continue;
                }
                if visible_class_area(&sim, metric_classes) <= before {
                    continue;
                }
                if answer(&build_graph(&observe(&sim, 0)), question) == truth {
                    return Some(push);
                }
                if fallback.is_none() {
                    fallback = Some(push);
                }
            }
        }
    }
    fallback
}

/// Direction classes ordered by angular agreement with `(vx, vy)`, best
/// first; ties and the zero vector fall back to class order.
fn directions_by_agreement(vx: f64, vy: f64) -> Vec<u8> {
    let mut order: Vec<u8> = (0..N_DIRECTIONS as u8).collect();
    let norm = vx.hypot(vy);
    if norm > 0.0 {
        let score = |o: u8| {
            let (dx, dy) = direction_vector::<f64>(o);
            dx * vx / norm + dy * vy / norm
        };
        order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
    }
    order
}

/// Emit the first grid-snapped push from `start` whose simulated application
/// strictly grows the visible area of `metric_classes`, scanning directions
/// by agreement with the preferred heading.
fn verified_push(
    scene: &Scene,
    start: (f64, f64),
    preferred: (f64, f64),
    metric_classes: &[u8],
) -> Option<PushAction> {
    let before = visible_class_area(scene, metric_classes);
    for o in directions_by_agreement(preferred.0, preferred.1) {
        // Snap through the discrete grid so the executed push equals the
        // recorded one exactly.
        let Some(push) = continuize(&discretize(&PushAction::new(start, o))) else {
            continue;
        };
        let mut sim = scene.clone();
        if apply_push(&mut sim, &push).is_err() {
            continue;
        }
        if visible_class_area(&sim, metric_classes) > before {
            return Some(push);
        }
    }
    None
}
