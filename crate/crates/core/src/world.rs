//! The bin simulator: scene generation, push dynamics, and occlusion-aware
//! observation.
//!
//! A scene is a pile of axis-aligned boxes in a 224x224 pixel bin. Every box
//! carries a unique depth value `z`; higher z means closer to the camera.
//! Occlusion is resolved on the 1-pixel raster: a cell belongs to the highest
//! box covering it, which makes visibility fractions exact for integer boxes.
//!
//! Pushes are quasi-static. The pusher sweeps a 16-pixel-wide corridor from
//! the start point along one of 8 directions for 56 pixels; the topmost object
//! with visible surface in the corridor translates by the (integer-rounded)
//! push vector, and objects at or below its depth that it lands on are shoved
//! the minimal whole-pixel distance along the same direction. Boxes are
//! clamped to the bin, depth never changes, and nothing is ever created or
//! destroyed.

use crate::actions::{direction_displacement, direction_step, direction_vector, PushAction};
use crate::geom::PixelBox;
use crate::seeds;
use crate::{BIN_SIZE, MAX_INSTANCES, N_CLASSES, PUSH_DISTANCE, PUSH_WIDTH, TAU_VIS};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observation grid resolution per axis: one cell per 8x8 pixel block.
pub const OBS_GRID: usize = 28;

/// Scene density presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    /// Number of objects placed in the bin.
    pub fn object_count(self) -> usize {
        match self {
            Difficulty::Easy => 20,
            Difficulty::Hard => 35,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Difficulty::Easy => 1,
            Difficulty::Hard => 2,
        }
    }
}

/// One object in the bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    #[serde(rename = "class")]
    pub class_id: u8,
    #[serde(rename = "instance")]
    pub instance_id: u8,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    /// Depth; unique within a scene, higher is closer to the camera.
    pub z: u32,
}

/// A full bin state. `objects` is ordered by id and the order never changes;
/// pushes only rewrite boxes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub difficulty: Difficulty,
    pub objects: Vec<ObjectInstance>,
}

impl Scene {
    pub fn object_by_id(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn index_of(&self, id: u32) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }
}

/// One detected object: ground-truth identity plus the tight bounding box of
/// its unoccluded surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub id: u32,
    pub class_id: u8,
    pub visible_box: PixelBox,
    /// Fraction of the object's area left uncovered, in `[0, 1]`.
    pub visibility: f64,
}

/// What the agent sees at one timestep: detections of sufficiently visible
/// objects and a per-class coverage grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub timestep: u32,
    /// Detections of objects with visibility >= [`TAU_VIS`], ordered by id.
    pub detections: Vec<Detection>,
    /// `OBS_GRID x OBS_GRID x N_CLASSES` visible-coverage fractions, laid out
    /// row-major as `(gy * OBS_GRID + gx) * N_CLASSES + class`.
    pub class_grid: Vec<f64>,
}

impl Observation {
    /// Fraction of grid cell `(gy, gx)` covered by visible surface of `class`.
    pub fn grid_at(&self, gy: usize, gx: usize, class: usize) -> f64 {
        self.class_grid[(gy * OBS_GRID + gx) * N_CLASSES + class]
    }

    pub fn detection(&self, id: u32) -> Option<&Detection> {
        self.detections.iter().find(|d| d.id == id)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("push start ({x}, {y}) lies outside the bin")]
    StartOutsideBin { x: f64, y: f64 },
    #[error("unknown object id {0}")]
    UnknownObject(u32),
}

/// Fixed footprint of an object identity: side lengths in `[20, 60]` pixels
/// derived by hashing `(class_id, instance_id)`. Independent of the scene
/// seed, so the same identity always has the same size.
pub fn instance_size(class_id: u8, instance_id: u8) -> (i32, i32) {
    let key = class_id as u64 * MAX_INSTANCES as u64 + instance_id as u64;
    let w = 20 + (seeds::splitmix64(key ^ 0xA5A5_5A5A_0000_0001) % 41) as i32;
    let h = 20 + (seeds::splitmix64(key ^ 0xC3C3_3C3C_0000_0002) % 41) as i32;
    (w, h)
}

/// Generate a scene: sample distinct `(class, instance)` identities, place
/// each uniformly inside the bin, and assign depth in placement order (later
/// objects land on top). Deterministic in `(seed, difficulty)`.
pub fn generate_scene(seed: u64, difficulty: Difficulty) -> Scene {
    let n = difficulty.object_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, difficulty.tag()]));
    let mut slots: Vec<(u8, u8)> = (0..N_CLASSES * MAX_INSTANCES)
        .map(|i| ((i / MAX_INSTANCES) as u8, (i % MAX_INSTANCES) as u8))
        .collect();
    slots.shuffle(&mut rng);
    let objects = slots[..n]
        .iter()
        .enumerate()
        .map(|(i, &(class_id, instance_id))| {
            let (w, h) = instance_size(class_id, instance_id);
            let x0 = rng.random_range(0..=BIN_SIZE - w);
            let y0 = rng.random_range(0..=BIN_SIZE - h);
            ObjectInstance {
                id: i as u32,
                class_id,
                instance_id,
                bbox: PixelBox::new(x0, y0, x0 + w, y0 + h),
                z: i as u32,
            }
        })
        .collect();
    Scene { seed, difficulty, objects }
}

/// Raster of topmost-object indices: for each pixel cell the index (into
/// `scene.objects`) of the highest box covering it, or -1 when empty.
fn top_owner(scene: &Scene) -> Vec<i32> {
    let mut owner = vec![-1i32; (BIN_SIZE * BIN_SIZE) as usize];
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by_key(|&i| scene.objects[i].z);
    for idx in order {
        let b = scene.objects[idx].bbox;
        for y in b.y_min..b.y_max {
            let row = (y * BIN_SIZE) as usize;
            for x in b.x_min..b.x_max {
                owner[row + x as usize] = idx as i32;
            }
        }
    }
    owner
}

/// Visible fraction of every object, indexed like `scene.objects`.
pub fn visibilities(scene: &Scene) -> Vec<f64> {
    let owner = top_owner(scene);
    let mut visible = vec![0i64; scene.objects.len()];
    for &o in &owner {
        if o >= 0 {
            visible[o as usize] += 1;
        }
    }
    scene
        .objects
        .iter()
        .zip(&visible)
        .map(|(obj, &cells)| cells as f64 / obj.bbox.area() as f64)
        .collect()
}

/// Visible fraction of one object: unoccluded area over total area.
pub fn visibility(scene: &Scene, object_id: u32) -> Result<f64, WorldError> {
    let idx = scene.index_of(object_id).ok_or(WorldError::UnknownObject(object_id))?;
    Ok(visibilities(scene)[idx])
}

/// Render the agent's view of the scene: detections of every object with
/// visibility at least `tau_vis` plus the class coverage grid.
pub fn observe_with_threshold(scene: &Scene, timestep: u32, tau_vis: f64) -> Observation {
    let owner = top_owner(scene);
    let n = scene.objects.len();
    let mut visible = vec![0i64; n];
    let mut bounds = vec![(i32::MAX, i32::MAX, i32::MIN, i32::MIN); n];
    let mut class_grid = vec![0f64; OBS_GRID * OBS_GRID * N_CLASSES];
    let cell_area = (crate::GRID_STEP * crate::GRID_STEP) as f64;
    for y in 0..BIN_SIZE {
        for x in 0..BIN_SIZE {
            let o = owner[(y * BIN_SIZE + x) as usize];
            if o < 0 {
                continue;
            }
            let o = o as usize;
            visible[o] += 1;
            let b = &mut bounds[o];
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
            let gx = (x / crate::GRID_STEP) as usize;
            let gy = (y / crate::GRID_STEP) as usize;
            let class = scene.objects[o].class_id as usize;
            class_grid[(gy * OBS_GRID + gx) * N_CLASSES + class] += 1.0 / cell_area;
        }
    }
    let detections = scene
        .objects
        .iter()
        .enumerate()
        .filter_map(|(i, obj)| {
            let vis = visible[i] as f64 / obj.bbox.area() as f64;
            if vis < tau_vis || visible[i] == 0 {
                return None;
            }
            let (x0, y0, x1, y1) = bounds[i];
            Some(Detection {
                id: obj.id,
                class_id: obj.class_id,
                visible_box: PixelBox::new(x0, y0, x1 + 1, y1 + 1),
                visibility: vis,
            })
        })
        .collect();
    Observation { timestep, detections, class_grid }
}

/// [`observe_with_threshold`] at the default [`TAU_VIS`].
pub fn observe(scene: &Scene, timestep: u32) -> Observation {
    observe_with_threshold(scene, timestep, TAU_VIS)
}

/// Execute a push. The topmost object whose visible surface intersects the
/// swept corridor translates by the push vector; objects at or below its
/// depth that overlap a moved box afterwards are shoved the minimal number of
/// whole pixels along the push direction (each object moves at most once).
/// Returns the ids of every object that moved, ascending.
pub fn apply_push(scene: &mut Scene, push: &PushAction) -> Result<Vec<u32>, WorldError> {
    if !push.start_in_bin() {
        return Err(WorldError::StartOutsideBin { x: push.start.0, y: push.start.1 });
    }

    let pushed_idx = match corridor_target(scene, push) {
        Some(idx) => idx,
        None => return Ok(Vec::new()),
    };

    let (dx, dy) = direction_displacement(push.direction_class);
    let (step_x, step_y) = direction_step(push.direction_class);
    let z_cap = scene.objects[pushed_idx].z;

    scene.objects[pushed_idx].bbox =
        scene.objects[pushed_idx].bbox.translated(dx, dy).clamped_within(BIN_SIZE);
    let mut moved_idx = vec![pushed_idx];

    loop {
        // Next chain candidate: unmoved, depth at or below the pushed object,
        // overlapping something that already moved. Topmost first, then lowest
        // id, for a deterministic resolution order.
        let candidate = (0..scene.objects.len())
            .filter(|i| !moved_idx.contains(i))
            .filter(|&i| scene.objects[i].z <= z_cap)
            .filter(|&i| {
                moved_idx.iter().any(|&m| scene.objects[i].bbox.overlaps(&scene.objects[m].bbox))
            })
            .max_by_key(|&i| (scene.objects[i].z, std::cmp::Reverse(scene.objects[i].id)));
        let Some(idx) = candidate else { break };

        // Smallest step count that clears every moved box currently overlapped.
        let mut k = 0i32;
        for &m in &moved_idx {
            let mb = scene.objects[m].bbox;
            let qb = scene.objects[idx].bbox;
            if qb.overlaps(&mb) {
                k = k.max(min_separation(&qb, &mb, step_x, step_y));
            }
        }
        scene.objects[idx].bbox =
            scene.objects[idx].bbox.translated(k * step_x, k * step_y).clamped_within(BIN_SIZE);
        moved_idx.push(idx);
    }

    let mut ids: Vec<u32> = moved_idx.iter().map(|&i| scene.objects[i].id).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Index of the topmost object whose visible surface intersects the push
/// corridor, or `None` when the corridor sweeps only empty bin or hidden
/// surface.
fn corridor_target(scene: &Scene, push: &PushAction) -> Option<usize> {
    let owner = top_owner(scene);
    let (ux, uy) = direction_vector::<f64>(push.direction_class);
    let (sx, sy) = push.start;
    let half = PUSH_WIDTH as f64 / 2.0;
    let len = PUSH_DISTANCE as f64;

    // Scan only the corridor's bounding rectangle.
    let corners = [
        (sx - half * -uy, sy - half * ux),
        (sx + half * -uy, sy + half * ux),
        (sx + len * ux - half * -uy, sy + len * uy - half * ux),
        (sx + len * ux + half * -uy, sy + len * uy + half * ux),
    ];
    let fmin = |a: f64, b: f64| a.min(b);
    let fmax = |a: f64, b: f64| a.max(b);
    let x_lo = (corners.iter().map(|c| c.0).fold(f64::INFINITY, fmin).floor() as i32).max(0);
    let y_lo = (corners.iter().map(|c| c.1).fold(f64::INFINITY, fmin).floor() as i32).max(0);
    let x_hi = (corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, fmax).ceil() as i32)
        .min(BIN_SIZE - 1);
    let y_hi = (corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, fmax).ceil() as i32)
        .min(BIN_SIZE - 1);

    let mut best: Option<usize> = None;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let o = owner[(y * BIN_SIZE + x) as usize];
            if o < 0 {
                continue;
            }
            // Cell center in corridor coordinates: u along the push, v across.
            let cx = x as f64 + 0.5 - sx;
            let cy = y as f64 + 0.5 - sy;
            let u = cx * ux + cy * uy;
            let v = cx * -uy + cy * ux;
            if u < 0.0 || u > len || v.abs() > half {
                continue;
            }
            let o = o as usize;
            if best.is_none_or(|b| scene.objects[o].z > scene.objects[b].z) {
                best = Some(o);
            }
        }
    }
    best
}

/// Minimal k >= 0 such that `q` translated by `k * (step_x, step_y)` no longer
/// overlaps `m`. Requires a current overlap and a nonzero step.
fn min_separation(q: &PixelBox, m: &PixelBox, step_x: i32, step_y: i32) -> i32 {
    debug_assert!(q.overlaps(m));
    debug_assert!(step_x != 0 || step_y != 0);
    let kx = match step_x {
        1 => m.x_max - q.x_min,
        -1 => q.x_max - m.x_min,
        _ => i32::MAX,
    };
    let ky = match step_y {
        1 => m.y_max - q.y_min,
        -1 => q.y_max - m.y_min,
        _ => i32::MAX,
    };
    kx.min(ky)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(id: u32, class: u8, bbox: PixelBox, z: u32) -> ObjectInstance {
        ObjectInstance { id, class_id: class, instance_id: 0, bbox, z }
    }

    fn scene_of(objects: Vec<ObjectInstance>) -> Scene {
        Scene { seed: 0, difficulty: Difficulty::Easy, objects }
    }

    // ---- generation ----

    #[test]
    fn generation_counts_and_bounds() {
        for (difficulty, n) in [(Difficulty::Easy, 20), (Difficulty::Hard, 35)] {
            let scene = generate_scene(7, difficulty);
            assert_eq!(scene.objects.len(), n);
            for o in &scene.objects {
                assert!(o.bbox.x_min >= 0 && o.bbox.x_max <= BIN_SIZE);
                assert!(o.bbox.y_min >= 0 && o.bbox.y_max <= BIN_SIZE);
                assert!(o.bbox.width() >= 20 && o.bbox.width() <= 60);
                assert!(o.bbox.height() >= 20 && o.bbox.height() <= 60);
                assert!((o.class_id as usize) < N_CLASSES);
                assert!((o.instance_id as usize) < MAX_INSTANCES);
            }
            let mut zs: Vec<u32> = scene.objects.iter().map(|o| o.z).collect();
            zs.sort_unstable();
            zs.dedup();
            assert_eq!(zs.len(), n, "depths must be unique");
            let mut identities: Vec<(u8, u8)> =
                scene.objects.iter().map(|o| (o.class_id, o.instance_id)).collect();
            identities.sort_unstable();
            identities.dedup();
            assert_eq!(identities.len(), n, "identities must be distinct");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scene(42, Difficulty::Easy);
        let b = generate_scene(42, Difficulty::Easy);
        assert_eq!(a, b);
        let c = generate_scene(43, Difficulty::Easy);
        assert_ne!(a, c);
    }

    #[test]
    fn sizes_are_identity_fixed() {
        let (w, h) = instance_size(4, 1);
        assert_eq!(instance_size(4, 1), (w, h));
        let a = generate_scene(1, Difficulty::Easy);
        let b = generate_scene(999, Difficulty::Hard);
        for scene in [&a, &b] {
            for o in &scene.objects {
                assert_eq!(
                    (o.bbox.width(), o.bbox.height()),
                    instance_size(o.class_id, o.instance_id)
                );
            }
        }
    }

    // ---- visibility ----

    #[test]
    fn visibility_unoccluded_is_one() {
        let s = scene_of(vec![obj(0, 0, PixelBox::new(10, 10, 50, 50), 0)]);
        assert_eq!(visibility(&s, 0).unwrap(), 1.0);
    }

    #[test]
    fn visibility_half_covered() {
        let s = scene_of(vec![
            obj(0, 0, PixelBox::new(0, 0, 40, 40), 0),
            obj(1, 1, PixelBox::new(0, 0, 20, 40), 1),
        ]);
        assert_eq!(visibility(&s, 0).unwrap(), 0.5);
        assert_eq!(visibility(&s, 1).unwrap(), 1.0);
    }

    #[test]
    fn visibility_fully_buried_is_zero() {
        let s = scene_of(vec![
            obj(0, 0, PixelBox::new(10, 10, 30, 30), 0),
            obj(1, 1, PixelBox::new(0, 0, 60, 60), 1),
        ]);
        assert_eq!(visibility(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn visibility_unknown_object_errors() {
        let s = scene_of(vec![]);
        assert_eq!(visibility(&s, 9), Err(WorldError::UnknownObject(9)));
    }

    // ---- observe ----

    #[test]
    fn observe_reports_visible_objects_with_true_identity() {
        let s = scene_of(vec![obj(3, 7, PixelBox::new(16, 24, 56, 64), 0)]);
        let o = observe(&s, 5);
        assert_eq!(o.timestep, 5);
        assert_eq!(o.detections.len(), 1);
        let d = &o.detections[0];
        assert_eq!(d.id, 3);
        assert_eq!(d.class_id, 7);
        assert_eq!(d.visible_box, PixelBox::new(16, 24, 56, 64));
        assert_eq!(d.visibility, 1.0);
    }

    #[test]
    fn observe_drops_objects_below_threshold() {
        // Bottom object 90% covered: visibility 0.1 < 0.25, so only the top
        // is detected.
        let s = scene_of(vec![
            obj(0, 0, PixelBox::new(0, 0, 40, 40), 0),
            obj(1, 1, PixelBox::new(0, 0, 36, 40), 1),
        ]);
        assert_eq!(visibility(&s, 0).unwrap(), 0.1);
        let o = observe(&s, 0);
        assert_eq!(o.detections.len(), 1);
        assert_eq!(o.detections[0].id, 1);
        // A laxer threshold readmits it.
        let o2 = observe_with_threshold(&s, 0, 0.05);
        assert_eq!(o2.detections.len(), 2);
    }

    #[test]
    fn observe_visible_box_is_tight_over_unoccluded_cells() {
        // Left half of object 0 is covered, so its visible box is the right half.
        let s = scene_of(vec![
            obj(0, 0, PixelBox::new(0, 0, 40, 40), 0),
            obj(1, 1, PixelBox::new(0, 0, 20, 40), 1),
        ]);
        let o = observe(&s, 0);
        assert_eq!(o.detection(0).unwrap().visible_box, PixelBox::new(20, 0, 40, 40));
    }

    #[test]
    fn observe_grid_exact_cell_coverage() {
        // One 8x8-aligned object covering exactly grid cells (1..3, 2..4).
        let s = scene_of(vec![obj(0, 5, PixelBox::new(8, 16, 24, 32), 0)]);
        let o = observe(&s, 0);
        for gy in 0..OBS_GRID {
            for gx in 0..OBS_GRID {
                for c in 0..N_CLASSES {
                    let expected =
                        if (1..3).contains(&gx) && (2..4).contains(&gy) && c == 5 { 1.0 } else { 0.0 };
                    assert_eq!(o.grid_at(gy, gx, c), expected, "({gy},{gx},{c})");
                }
            }
        }
    }

    #[test]
    fn observe_grid_partial_coverage() {
        // A 4x8 sliver covers half of grid cell (0, 0).
        let s = scene_of(vec![obj(0, 2, PixelBox::new(0, 0, 4, 8), 0)]);
        let o = observe(&s, 0);
        assert_eq!(o.grid_at(0, 0, 2), 0.5);
    }

    #[test]
    fn observe_grid_tracks_occlusion() {
        // Cell (0,0) split between the top object's class and the remainder of
        // the bottom object's class.
        let s = scene_of(vec![
            obj(0, 0, PixelBox::new(0, 0, 8, 8), 0),
            obj(1, 1, PixelBox::new(0, 0, 8, 4), 1),
        ]);
        let o = observe(&s, 0);
        assert_eq!(o.grid_at(0, 0, 0), 0.5);
        assert_eq!(o.grid_at(0, 0, 1), 0.5);
    }

    // ---- pushes ----

    #[test]
    fn push_moves_corridor_object_by_push_vector() {
        let s0 = scene_of(vec![obj(0, 0, PixelBox::new(60, 60, 100, 100), 0)]);
        let mut s = s0.clone();
        // Start left of the object, aimed right through its middle.
        let moved = apply_push(&mut s, &PushAction::new((50.0, 80.0), 0)).unwrap();
        assert_eq!(moved, vec![0]);
        assert_eq!(s.objects[0].bbox, PixelBox::new(116, 60, 156, 100));
        assert_eq!(s.objects[0].z, 0);
    }

    #[test]
    fn push_clamps_at_bin_wall() {
        let mut s = scene_of(vec![obj(0, 0, PixelBox::new(174, 60, 214, 100), 0)]);
        let moved = apply_push(&mut s, &PushAction::new((180.0, 80.0), 0)).unwrap();
        assert_eq!(moved, vec![0]);
        assert_eq!(s.objects[0].bbox, PixelBox::new(184, 60, 224, 100));
    }

    #[test]
    fn push_through_empty_corridor_is_noop() {
        let s0 = scene_of(vec![obj(0, 0, PixelBox::new(150, 150, 190, 190), 0)]);
        let mut s = s0.clone();
        let moved = apply_push(&mut s, &PushAction::new((10.0, 10.0), 0)).unwrap();
        assert!(moved.is_empty());
        assert_eq!(s, s0);
    }

    #[test]
    fn push_start_outside_bin_errors() {
        let mut s = scene_of(vec![]);
        let err = apply_push(&mut s, &PushAction::new((224.0, 10.0), 0)).unwrap_err();
        assert!(matches!(err, WorldError::StartOutsideBin { .. }));
        assert!(apply_push(&mut s, &PushAction::new((-0.1, 10.0), 0)).is_err());
    }

    #[test]
    fn push_selects_topmost_visible_in_corridor() {
        // Two stacked objects; the corridor crosses both, the top one moves.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(60, 60, 100, 100), 0),
            obj(1, 1, PixelBox::new(60, 60, 100, 100), 1),
        ]);
        let moved = apply_push(&mut s, &PushAction::new((50.0, 80.0), 0)).unwrap();
        // The top translates onto empty space; the bottom stays: it was only
        // overlapped before the move, not after.
        assert_eq!(moved, vec![1]);
        assert_eq!(s.objects[1].bbox, PixelBox::new(116, 60, 156, 100));
        assert_eq!(s.objects[0].bbox, PixelBox::new(60, 60, 100, 100));
    }

    #[test]
    fn push_ignores_hidden_surface() {
        // The bottom object is fully buried under the top one, so a corridor
        // over the pile can only select the top object even where the bottom
        // box extends further: the corridor ends before reaching the bottom
        // object's exposed part.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(100, 104, 140, 120), 0),
            obj(1, 1, PixelBox::new(96, 96, 144, 144), 1),
        ]);
        let moved = apply_push(&mut s, &PushAction::new((98.0, 112.0), 0)).unwrap();
        assert_eq!(moved, vec![1]);
    }

    #[test]
    fn chain_push_shoves_minimally() {
        // A pushed right lands on B; B yields just enough to touch edges.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(60, 0, 100, 40), 0),
            obj(1, 1, PixelBox::new(0, 0, 40, 40), 1),
        ]);
        let moved = apply_push(&mut s, &PushAction::new((2.0, 20.0), 0)).unwrap();
        assert_eq!(moved, vec![0, 1]);
        assert_eq!(s.objects[1].bbox, PixelBox::new(56, 0, 96, 40)); // pushed
        assert_eq!(s.objects[0].bbox, PixelBox::new(96, 0, 136, 40)); // chained
    }

    #[test]
    fn chain_push_skips_higher_objects() {
        // The pushed object slides under a higher one; the higher one stays.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(0, 0, 40, 40), 0),
            obj(1, 1, PixelBox::new(60, 0, 100, 40), 1),
        ]);
        let moved = apply_push(&mut s, &PushAction::new((2.0, 20.0), 0)).unwrap();
        assert_eq!(moved, vec![0]);
        assert_eq!(s.objects[0].bbox, PixelBox::new(56, 0, 96, 40));
        assert_eq!(s.objects[1].bbox, PixelBox::new(60, 0, 100, 40));
    }

    #[test]
    fn chain_push_propagates() {
        // Three in a row: pushing the first shoves the second into the third.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(100, 0, 140, 40), 0),
            obj(1, 1, PixelBox::new(55, 0, 95, 40), 1),
            obj(2, 2, PixelBox::new(0, 0, 40, 40), 2),
        ]);
        let moved = apply_push(&mut s, &PushAction::new((2.0, 20.0), 0)).unwrap();
        assert_eq!(moved, vec![0, 1, 2]);
        assert_eq!(s.objects[2].bbox, PixelBox::new(56, 0, 96, 40));
        assert_eq!(s.objects[1].bbox, PixelBox::new(96, 0, 136, 40));
        assert_eq!(s.objects[0].bbox, PixelBox::new(136, 0, 176, 40));
    }

    #[test]
    fn diagonal_push_uses_rounded_displacement() {
        let mut s = scene_of(vec![obj(0, 0, PixelBox::new(60, 60, 100, 100), 0)]);
        let moved = apply_push(&mut s, &PushAction::new((70.0, 70.0), 1)).unwrap();
        assert_eq!(moved, vec![0]);
        assert_eq!(s.objects[0].bbox, PixelBox::new(100, 100, 140, 140));
    }

    #[test]
    fn revealing_push_increases_target_visibility() {
        // Single occluder pushed off the target: visibility strictly rises.
        let mut s = scene_of(vec![
            obj(0, 0, PixelBox::new(80, 80, 120, 120), 0),
            obj(1, 1, PixelBox::new(80, 80, 120, 120), 1),
        ]);
        let before = visibility(&s, 0).unwrap();
        assert_eq!(before, 0.0);
        apply_push(&mut s, &PushAction::new((100.0, 100.0), 0)).unwrap();
        let after = visibility(&s, 0).unwrap();
        assert_eq!(after, 1.0);
    }

    // ---- properties ----

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pushes_preserve_objects_and_containment(
            seed in 0u64..1000,
            pushes in proptest::collection::vec(
                (0.0f64..224.0, 0.0f64..224.0, 0u8..8), 1..6),
        ) {
            let mut scene = generate_scene(seed, Difficulty::Easy);
            let reference = scene.clone();
            for (x, y, o) in pushes {
                apply_push(&mut scene, &PushAction::new((x, y), o)).unwrap();
                prop_assert_eq!(scene.objects.len(), reference.objects.len());
                for (a, b) in scene.objects.iter().zip(&reference.objects) {
                    // Identity, depth, and size survive; only position changes.
                    prop_assert_eq!(a.id, b.id);
                    prop_assert_eq!(a.class_id, b.class_id);
                    prop_assert_eq!(a.instance_id, b.instance_id);
                    prop_assert_eq!(a.z, b.z);
                    prop_assert_eq!(a.bbox.width(), b.bbox.width());
                    prop_assert_eq!(a.bbox.height(), b.bbox.height());
                    prop_assert!(a.bbox.x_min >= 0 && a.bbox.x_max <= BIN_SIZE);
                    prop_assert!(a.bbox.y_min >= 0 && a.bbox.y_max <= BIN_SIZE);
                }
            }
        }

        #[test]
        fn pushes_are_deterministic(
            seed in 0u64..1000,
            x in 0.0f64..224.0,
            y in 0.0f64..224.0,
            o in 0u8..8,
        ) {
            let mut a = generate_scene(seed, Difficulty::Hard);
            let mut b = a.clone();
            let push = PushAction::new((x, y), o);
            let ma = apply_push(&mut a, &push).unwrap();
            let mb = apply_push(&mut b, &push).unwrap();
            prop_assert_eq!(ma, mb);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn observation_matches_visibility(seed in 0u64..500) {
            let scene = generate_scene(seed, Difficulty::Easy);
            let obs = observe(&scene, 0);
            let vis = visibilities(&scene);
            for (i, obj) in scene.objects.iter().enumerate() {
                let detected = obs.detection(obj.id).is_some();
                prop_assert_eq!(detected, vis[i] >= TAU_VIS, "object {}", obj.id);
                if let Some(d) = obs.detection(obj.id) {
                    prop_assert_eq!(d.visibility, vis[i]);
                    // The visible box is contained in the true box.
                    prop_assert!(d.visible_box.x_min >= obj.bbox.x_min);
                    prop_assert!(d.visible_box.y_min >= obj.bbox.y_min);
                    prop_assert!(d.visible_box.x_max <= obj.bbox.x_max);
                    prop_assert!(d.visible_box.y_max <= obj.bbox.y_max);
                }
            }
            // Grid mass equals total visible area.
            let total: f64 = obs.class_grid.iter().sum();
            let visible_cells: f64 = scene.objects.iter().zip(&vis)
                .map(|(o, v)| v * o.bbox.area() as f64)
                .sum();
            prop_assert!((total * 64.0 - visible_cells).abs() < 1e-6);
        }
    }
}
