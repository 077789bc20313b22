//! Moving-shapes videos with exact ground truth. Everything on the
//! rasterization path is integer or fixed-point arithmetic, so label maps,
//! boxes and pixels are identical on every platform for a given seed.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::davis::VideoSequence;
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, BoundingBox, Frame, LabelMap};
use crate::rng;

/// Fixed-point scale of positions and sizes.
const Q: i64 = 256;
/// Fixed-point scale of the scale curve.
const SCALE_ONE: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

/// Object center at a given frame; positions between keys are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub frame: usize,
    pub x: i32,
    pub y: i32,
}

/// Size multiplier at a given frame, linear between keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleKey {
    pub frame: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub color: [u8; 3],
    /// Colour reached on the last frame; the fill drifts linearly towards it.
    #[serde(default)]
    pub color_end: Option<[u8; 3]>,
    /// Base width and height in pixels.
    pub size: [u32; 2],
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub scale: Vec<ScaleKey>,
    /// Larger is nearer the camera.
    #[serde(default)]
    pub z: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u8,
    #[serde(flatten)]
    pub body: ShapeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundSpec {
    pub color: [u8; 3],
    /// Colour right of `split_x` (in scene coordinates), if any.
    pub right_color: Option<[u8; 3]>,
    pub split_x: i32,
    /// Blocky texture: each `texture_cell`-sized cell is offset by a hashed
    /// value in `[-texture_amplitude, texture_amplitude]`.
    pub texture_amplitude: u8,
    pub texture_cell: u32,
    pub texture_seed: u64,
    /// Camera motion in 1/256 pixel per frame; shifts the background.
    pub drift: [i32; 2],
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            color: [60, 60, 60],
            right_color: None,
            split_x: 0,
            texture_amplitude: 0,
            texture_cell: 8,
            texture_seed: 0,
            drift: [0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub seed: u64,
    /// Approximate standard deviation of the per-pixel noise, in grey levels.
    #[serde(default)]
    pub noise_sigma: u32,
    #[serde(default)]
    pub background: BackgroundSpec,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub occluders: Vec<ShapeSpec>,
}

/// A generated video: every frame annotated, plus the ground-truth box of
/// each object on each frame (`None` while fully hidden or off-canvas).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub sequence: VideoSequence,
    pub boxes: BTreeMap<u8, Vec<Option<BoundingBox>>>,
}

fn interpolate(keys: &[(usize, i64)], frame: usize) -> i64 {
    let first = keys[0];
    if frame <= first.0 {
        return first.1;
    }
    for pair in keys.windows(2) {
        let ((f0, v0), (f1, v1)) = (pair[0], pair[1]);
        if frame <= f1 {
            return v0 + (v1 - v0) * (frame - f0) as i64 / (f1 - f0) as i64;
        }
    }
    keys[keys.len() - 1].1
}

/// Shape footprint at one frame, in fixed point.
#[derive(Debug, Clone, Copy)]
struct Placement {
    shape: Shape,
    cx: i64,
    cy: i64,
    half_w: i64,
    half_h: i64,
    color: [u8; 3],
}

impl Placement {
    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as i64 * Q + Q / 2) - self.cx;
        let dy = (y as i64 * Q + Q / 2) - self.cy;
        match self.shape {
            Shape::Rectangle => -self.half_w <= dx && dx < self.half_w && -self.half_h <= dy && dy < self.half_h,
            Shape::Ellipse => {
                let (a, b) = (self.half_w as i128, self.half_h as i128);
                let (dx, dy) = (dx as i128, dy as i128);
                dx * dx * b * b + dy * dy * a * a <= a * a * b * b
            }
        }
    }

    /// Pixel range that can contain the shape, clipped to the canvas.
    fn pixel_span(&self, w: usize, h: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |c: i64, half: i64, n: usize| {
            let lo = ((c - half).div_euclid(Q) - 1).clamp(0, n as i64) as usize;
            let hi = ((c + half).div_euclid(Q) + 2).clamp(0, n as i64) as usize;
            lo..hi
        };
        (span(self.cx, self.half_w, w), span(self.cy, self.half_h, h))
    }
}

struct CompiledShape {
    shape: Shape,
    color: [u8; 3],
    color_end: [u8; 3],
    size: [i64; 2],
    path_x: Vec<(usize, i64)>,
    path_y: Vec<(usize, i64)>,
    scale: Vec<(usize, i64)>,
    z: i32,
}

impl CompiledShape {
    fn compile(spec: &ShapeSpec, what: &str) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("{what}: {m}")));
        if spec.waypoints.is_empty() {
            return bad("needs at least one waypoint".into());
        }
        if spec.size[0] == 0 || spec.size[1] == 0 {
            return bad("size must be positive".into());
        }
        let increasing = |frames: &mut dyn Iterator<Item = usize>| {
            let v: Vec<usize> = frames.collect();
            v.windows(2).all(|p| p[0] < p[1])
        };
        if !increasing(&mut spec.waypoints.iter().map(|w| w.frame)) || !increasing(&mut spec.scale.iter().map(|s| s.frame)) {
            return bad("waypoint and scale frames must be strictly increasing".into());
        }
        if spec.scale.iter().any(|s| !(s.scale > 0.0 && s.scale.is_finite())) {
            return bad("scale must be positive".into());
        }
        let mut scale: Vec<(usize, i64)> = spec
            .scale
            .iter()
            .map(|s| (s.frame, (s.scale * SCALE_ONE as f64).round() as i64))
            .collect();
        if scale.is_empty() {
            scale.push((1, SCALE_ONE));
        }
        Ok(Self {
            shape: spec.shape,
            color: spec.color,
            color_end: spec.color_end.unwrap_or(spec.color),
            size: [spec.size[0] as i64, spec.size[1] as i64],
            path_x: spec.waypoints.iter().map(|w| (w.frame, w.x as i64 * Q)).collect(),
            path_y: spec.waypoints.iter().map(|w| (w.frame, w.y as i64 * Q)).collect(),
            scale,
            z: spec.z,
        })
    }

    fn at(&self, frame: usize, n_frames: usize) -> Placement {
        let s = interpolate(&self.scale, frame).max(1);
        let t = (frame - 1) as i64;
        let span = (n_frames - 1).max(1) as i64;
        let mut color = [0u8; 3];
        for (c, (&a, &b)) in color.iter_mut().zip(self.color.iter().zip(&self.color_end)) {
            *c = (a as i64 + (b as i64 - a as i64) * t / span) as u8;
        }
        Placement {
            shape: self.shape,
            cx: interpolate(&self.path_x, frame),
            cy: interpolate(&self.path_y, frame),
            half_w: (self.size[0] * Q * s / (2 * SCALE_ONE)).max(1),
            half_h: (self.size[1] * Q * s / (2 * SCALE_ONE)).max(1),
            color,
        }
    }
}

fn cell_hash(seed: u64, cx: i64, cy: i64) -> u64 {
    rng::derive_seed(seed, &[cx as u64, cy as u64])
}

/// Smallest `m` whose 12-term Irwin-Hall sum of `U{0..=m}` has variance at
/// least `sigma²`; that sum has variance `m (m + 2)`.
fn noise_range(sigma: u32) -> u32 {
    let target = sigma as u64 * sigma as u64;
    (0..).find(|&m: &u32| m as u64 * (m as u64 + 2) >= target).unwrap_or(0)
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(format!("{}: canvas must be non-empty", self.name)));
        }
        if self.frames < 2 {
            return Err(Error::InvalidConfig(format!("{}: needs at least 2 frames", self.name)));
        }
        if self.objects.is_empty() {
            return Err(Error::InvalidConfig(format!("{}: needs at least one object", self.name)));
        }
        if self.background.texture_cell == 0 {
            return Err(Error::InvalidConfig(format!("{}: texture_cell must be positive", self.name)));
        }
        let mut seen = [false; 256];
        for o in &self.objects {
            if o.id == 0 {
                return Err(Error::InvalidConfig(format!("{}: object id 0 is background", self.name)));
            }
            if std::mem::replace(&mut seen[o.id as usize], true) {
                return Err(Error::DuplicateId(o.id));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs always serialize")
    }
}

/// Renders the scene. Nearer shapes win overlapping pixels; occluders erase
/// object labels beneath them.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticVideo> {
    spec.validate()?;
    let (w, h) = (spec.width as usize, spec.height as usize);
    let n = spec.frames;

    // Draw order: far to near; objects before occluders at equal depth.
    let mut layers: Vec<(i32, usize, Option<u8>, CompiledShape)> = Vec::new();
    for (k, o) in spec.objects.iter().enumerate() {
        let c = CompiledShape::compile(&o.body, &format!("object {}", o.id))?;
        layers.push((c.z, k, Some(o.id), c));
    }
    for (k, s) in spec.occluders.iter().enumerate() {
        let c = CompiledShape::compile(s, &format!("occluder {k}"))?;
        layers.push((c.z, spec.objects.len() + k, None, c));
    }
    layers.sort_by_key(|(z, order, _, _)| (*z, *order));

    for o in &spec.objects {
        let (_, _, _, c) = layers.iter().find(|l| l.2 == Some(o.id)).expect("object compiled");
        let on_canvas = (1..=n).any(|f| {
            let p = c.at(f, n);
            let (xs, ys) = p.pixel_span(w, h);
            ys.clone().any(|y| xs.clone().any(|x| p.contains(x, y)))
        });
        if !on_canvas {
            return Err(Error::DegenerateSpec(format!("{}: object {} never appears on the canvas", spec.name, o.id)));
        }
    }

    let bg = &spec.background;
    let m = noise_range(spec.noise_sigma) as i32;
    let mut frames = Vec::with_capacity(n);
    let mut annotations = BTreeMap::new();
    let mut boxes: BTreeMap<u8, Vec<Option<BoundingBox>>> = spec.objects.iter().map(|o| (o.id, Vec::new())).collect();

    for f in 1..=n {
        let t = (f - 1) as i64;
        let ox = (bg.drift[0] as i64 * t).div_euclid(Q);
        let oy = (bg.drift[1] as i64 * t).div_euclid(Q);
        let cell = bg.texture_cell as i64;
        let amp = bg.texture_amplitude as i64;
        let mut frame = Frame::from_fn(w, h, |x, y| {
            let sx = x as i64 + ox;
            let sy = y as i64 + oy;
            let base = match bg.right_color {
                Some(rc) if sx >= bg.split_x as i64 => rc,
                _ => bg.color,
            };
            if amp == 0 {
                return base;
            }
            let v = (cell_hash(bg.texture_seed, sx.div_euclid(cell), sy.div_euclid(cell)) % (2 * amp as u64 + 1)) as i64 - amp;
            base.map(|c| (c as i64 + v).clamp(0, 255) as u8)
        });
        let mut labels = LabelMap::new(w, h);
        for (_, _, id, shape) in &layers {
            let p = shape.at(f, n);
            let (xs, ys) = p.pixel_span(w, h);
            for y in ys {
                for x in xs.clone() {
                    if p.contains(x, y) {
                        frame.set_pixel(x, y, p.color);
                        labels.set(x, y, id.unwrap_or(0));
                    }
                }
            }
        }
        if m > 0 {
            let mut rng = rng::stream(spec.seed, &[rng::stable_hash("scene-noise"), f as u64]);
            let mut rgb = frame.into_rgb();
            for v in rgb.iter_mut() {
                let noise: i32 = (0..12).map(|_| rng.random_range(0..=m)).sum::<i32>() - 6 * m;
                *v = (*v as i32 + noise).clamp(0, 255) as u8;
            }
            frame = Frame::from_rgb(w, h, rgb)?;
        }
        for (id, list) in boxes.iter_mut() {
            list.push(labels.mask_of(*id).enclosing_box());
        }
        frames.push(frame);
        annotations.insert(f, labels);
    }

    for o in &spec.objects {
        if boxes[&o.id][0].is_none() {
            return Err(Error::DegenerateSpec(format!("{}: object {} is not visible on the first frame", spec.name, o.id)));
        }
    }
    let sequence = VideoSequence::new(spec.name.clone(), frames, annotations)?;
    Ok(SyntheticVideo { sequence, boxes })
}

/// Visible pixel count of an object on every frame.
pub fn visible_areas(video: &SyntheticVideo, id: u8) -> Vec<usize> {
    video
        .sequence
        .annotations
        .values()
        .map(|a| a.labels().iter().filter(|&&l| l == id).count())
        .collect()
}

/// Visible mask of an object on one frame (1-based).
pub fn visible_mask(video: &SyntheticVideo, id: u8, frame: usize) -> BinaryMask {
    video.sequence.annotations[&frame].mask_of(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(shape: Shape) -> SceneSpec {
        SceneSpec {
            name: "still".into(),
            width: 64,
            height: 48,
            frames: 4,
            seed: 1,
            noise_sigma: 0,
            background: BackgroundSpec::default(),
            objects: vec![ObjectSpec {
                id: 1,
                body: ShapeSpec {
                    shape,
                    color: [200, 30, 30],
                    color_end: None,
                    size: [20, 10],
                    waypoints: vec![Waypoint { frame: 1, x: 30, y: 20 }],
                    scale: vec![],
                    z: 0,
                },
            }],
            occluders: vec![],
        }
    }

    #[test]
    fn static_rectangle_is_identical_every_frame() {
        let v = generate_scene(&still(Shape::Rectangle)).unwrap();
        let first = &v.sequence.annotations[&1];
        assert!(v.sequence.annotations.values().all(|a| a == first));
        assert_eq!(visible_areas(&v, 1), vec![200; 4]);
        assert_eq!(v.boxes[&1][0], Some(BoundingBox::new(20.0, 15.0, 20.0, 10.0)));
    }

    #[test]
    fn ellipse_area_close_to_analytic() {
        let v = generate_scene(&still(Shape::Ellipse)).unwrap();
        let area = visible_areas(&v, 1)[0] as f64;
        let analytic = std::f64::consts::PI * 10.0 * 5.0;
        assert!((area / analytic - 1.0).abs() < 0.08, "{area}");
    }

    #[test]
    fn boxes_are_enclosing_boxes_of_visible_masks() {
        let mut spec = still(Shape::Ellipse);
        spec.objects[0].body.waypoints.push(Waypoint { frame: 4, x: 50, y: 30 });
        spec.noise_sigma = 5;
        let v = generate_scene(&spec).unwrap();
        for f in 1..=4 {
            assert_eq!(v.boxes[&1][f - 1], visible_mask(&v, 1, f).enclosing_box());
        }
    }

    #[test]
    fn occluder_hides_object_then_reveals() {
        let mut spec = still(Shape::Rectangle);
        spec.frames = 21;
        spec.objects[0].body.size = [10, 10];
        spec.objects[0].body.waypoints = vec![Waypoint { frame: 1, x: 8, y: 24 }, Waypoint { frame: 21, x: 56, y: 24 }];
        spec.occluders.push(ShapeSpec {
            shape: Shape::Rectangle,
            color: [10, 200, 10],
            color_end: None,
            size: [14, 40],
            waypoints: vec![Waypoint { frame: 1, x: 32, y: 24 }],
            scale: vec![],
            z: 1,
        });
        let v = generate_scene(&spec).unwrap();
        let areas = visible_areas(&v, 1);
        assert_eq!(areas[0], 100);
        assert_eq!(*areas.last().unwrap(), 100);
        assert_eq!(areas[10], 0);
        assert_eq!(v.boxes[&1][10], None);
    }

    #[test]
    fn scale_curve_quadruples_area() {
        let mut spec = still(Shape::Rectangle);
        spec.frames = 30;
        spec.objects[0].body.scale = vec![ScaleKey { frame: 1, scale: 1.0 }, ScaleKey { frame: 30, scale: 2.0 }];
        let v = generate_scene(&spec).unwrap();
        let b = &v.boxes[&1];
        let ratio = b[29].unwrap().area() / b[0].unwrap().area();
        assert!((ratio / 4.0 - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn degenerate_and_invalid_specs() {
        let mut spec = still(Shape::Rectangle);
        spec.objects[0].body.waypoints = vec![Waypoint { frame: 1, x: -100, y: -100 }];
        assert!(matches!(generate_scene(&spec), Err(Error::DegenerateSpec(_))));
        let mut spec = still(Shape::Rectangle);
        spec.frames = 1;
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn deterministic_and_toml_round_trip() {
        let mut spec = still(Shape::Ellipse);
        spec.noise_sigma = 6;
        spec.background.texture_amplitude = 20;
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&SceneSpec::from_toml(&spec.to_toml()).unwrap()).unwrap();
        assert_eq!(a, b);
        spec.seed = 2;
        assert_ne!(generate_scene(&spec).unwrap().sequence.frames, a.sequence.frames);
    }

    #[test]
    fn noise_range_matches_variance() {
        assert_eq!(noise_range(0), 0);
        assert_eq!(noise_range(4), 4);
        assert_eq!(noise_range(3), 3);
        assert_eq!(noise_range(1), 1);
    }
}
