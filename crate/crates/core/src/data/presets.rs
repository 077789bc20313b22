//! Named scenes, each stressing one tracking difficulty. All use a
//! 160×120 canvas and fixed seeds.

use super::synth::{BackgroundSpec, ObjectSpec, SceneSpec, ScaleKey, Shape, ShapeSpec, Waypoint};

pub const PRESET_NAMES: [&str; 6] = ["easy", "occlusion", "scale-change", "camera-drift", "multi-object", "hue-drift"];

const W: u32 = 160;
const H: u32 = 120;

fn wp(frame: usize, x: i32, y: i32) -> Waypoint {
    Waypoint { frame, x, y }
}

fn body(shape: Shape, color: [u8; 3], size: [u32; 2], waypoints: Vec<Waypoint>) -> ShapeSpec {
    ShapeSpec {
        shape,
        color,
        color_end: None,
        size,
        waypoints,
        scale: vec![],
        z: 0,
    }
}

fn textured(color: [u8; 3], amplitude: u8, seed: u64) -> BackgroundSpec {
    BackgroundSpec {
        color,
        texture_amplitude: amplitude,
        texture_cell: 8,
        texture_seed: seed,
        ..BackgroundSpec::default()
    }
}

fn scene(name: &str, frames: usize, seed: u64, background: BackgroundSpec, objects: Vec<ObjectSpec>) -> SceneSpec {
    SceneSpec {
        name: name.into(),
        width: W,
        height: H,
        frames,
        seed,
        noise_sigma: 3,
        background,
        objects,
        occluders: vec![],
    }
}

/// One red ellipse wandering over a grey-green textured background.
pub fn easy() -> SceneSpec {
    let obj = body(Shape::Ellipse, [230, 30, 30], [36, 28], vec![wp(1, 40, 50), wp(20, 110, 40), wp(40, 120, 80), wp(60, 50, 75)]);
    scene("easy", 60, 11, textured([90, 100, 90], 8, 1), vec![ObjectSpec { id: 1, body: obj }])
}

/// An ellipse crossing behind a wider pillar, fully hidden for a few frames.
pub fn occlusion() -> SceneSpec {
    let obj = body(Shape::Ellipse, [230, 40, 40], [30, 30], vec![wp(1, 25, 60), wp(60, 135, 60)]);
    let mut s = scene("occlusion", 60, 12, textured([90, 100, 90], 8, 2), vec![ObjectSpec { id: 1, body: obj }]);
    let mut pillar = body(Shape::Rectangle, [40, 40, 170], [36, 120], vec![wp(1, 80, 60)]);
    pillar.z = 1;
    s.occluders.push(pillar);
    s
}

/// A rectangle that doubles in size while drifting.
pub fn scale_change() -> SceneSpec {
    let mut obj = body(Shape::Rectangle, [230, 200, 30], [28, 20], vec![wp(1, 50, 50), wp(50, 95, 65)]);
    obj.scale = vec![ScaleKey { frame: 1, scale: 1.0 }, ScaleKey { frame: 50, scale: 2.0 }];
    scene("scale-change", 50, 13, textured([60, 70, 120], 8, 3), vec![ObjectSpec { id: 1, body: obj }])
}

/// Strong background texture panning under a moving object.
pub fn camera_drift() -> SceneSpec {
    let obj = body(Shape::Ellipse, [240, 60, 200], [32, 26], vec![wp(1, 50, 60), wp(50, 110, 55)]);
    let mut bg = textured([80, 110, 80], 30, 4);
    bg.texture_cell = 6;
    bg.drift = [384, 128];
    scene("camera-drift", 50, 14, bg, vec![ObjectSpec { id: 1, body: obj }])
}

/// Three objects; the two upper ones cross and the nearer half-hides the
/// farther.
pub fn multi_object() -> SceneSpec {
    let a = body(Shape::Ellipse, [230, 40, 40], [30, 24], vec![wp(1, 25, 100), wp(50, 130, 95)]);
    let mut b = body(Shape::Rectangle, [40, 200, 230], [26, 26], vec![wp(1, 130, 35), wp(50, 35, 85)]);
    b.z = 1;
    let mut c = body(Shape::Ellipse, [240, 220, 60], [22, 30], vec![wp(1, 95, 95), wp(25, 95, 60), wp(50, 85, 25)]);
    c.z = 2;
    scene(
        "multi-object",
        50,
        15,
        textured([90, 90, 110], 8, 5),
        vec![ObjectSpec { id: 1, body: a }, ObjectSpec { id: 2, body: b }, ObjectSpec { id: 3, body: c }],
    )
}

/// A red object on an olive left half crosses into a blue right half while
/// its colour drifts to olive: the first-frame appearance ends up describing
/// the background.
pub fn hue_drift() -> SceneSpec {
    let mut obj = body(Shape::Ellipse, [210, 40, 40], [34, 30], vec![wp(1, 35, 60), wp(60, 125, 60)]);
    obj.color_end = Some([130, 130, 40]);
    let bg = BackgroundSpec {
        color: [130, 130, 40],
        right_color: Some([40, 60, 170]),
        split_x: 80,
        texture_amplitude: 6,
        texture_cell: 8,
        texture_seed: 6,
        drift: [0, 0],
    };
    scene("hue-drift", 60, 16, bg, vec![ObjectSpec { id: 1, body: obj }])
}

pub fn preset(name: &str) -> Option<SceneSpec> {
    Some(match name {
        "easy" => easy(),
        "occlusion" => occlusion(),
        "scale-change" => scale_change(),
        "camera-drift" => camera_drift(),
        "multi-object" => multi_object(),
        "hue-drift" => hue_drift(),
        _ => return None,
    })
}

pub fn presets() -> Vec<SceneSpec> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("listed preset exists")).collect()
}
