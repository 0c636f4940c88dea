//! Procedural multi-modal sequences: RGB video plus a co-registered depth
//! plane, seen by a camera translating at a constant rate.
//!
//! The scene is a sky band with no depth return, a textured ground plane and
//! a set of rectangles and ellipses at random depths. Nearer objects are
//! drawn over farther ones and are brighter in both the depth plane and, on
//! average, the video. Edges are anti-aliased over one pixel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{ChannelId, Frame, Plane, DEFAULT_HEIGHT, DEFAULT_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKinds {
    Rectangles,
    Ellipses,
    Mixed,
}

impl std::str::FromStr for ObjectKinds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangles" => Ok(Self::Rectangles),
            "ellipse" | "ellipses" => Ok(Self::Ellipses),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::Parse(format!(
                "unknown object kinds {s:?} (rect, ellipse, mixed)"
            ))),
        }
    }
}

impl std::fmt::Display for ObjectKinds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rectangles => "rect",
            Self::Ellipses => "ellipse",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub objects: usize,
    pub kinds: ObjectKinds,
    /// Nearest and farthest object depth, metres.
    pub depth_range: (f32, f32),
    /// Camera motion in pixels per frame; content moves the opposite way.
    pub translation: (f32, f32),
    /// Extra image motion of near objects relative to far ones: an object
    /// moves at `translation × (1 + parallax × (nearness − 0.5))`.
    pub parallax: f32,
    /// Per-object positional jitter amplitude, pixels.
    pub jitter: f32,
    /// Uniform video noise amplitude.
    pub noise: f32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            frames: 8,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            objects: 48,
            kinds: ObjectKinds::Mixed,
            depth_range: (2.0, 40.0),
            translation: (2.0, 0.0),
            parallax: 1.0,
            jitter: 0.5,
            noise: 0.02,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "frames, width and height must be positive (got {}, {}, {})",
                self.frames, self.width, self.height
            )));
        }
        if self.objects == 0 {
            return Err(Error::invalid("scene needs at least one object"));
        }
        if !(0.0..=0.2).contains(&self.noise) {
            return Err(Error::invalid(format!(
                "noise amplitude {} outside [0, 0.2]",
                self.noise
            )));
        }
        let (near, far) = self.depth_range;
        if !(near > 0.0 && far > near) {
            return Err(Error::invalid(format!("bad depth range ({near}, {far})")));
        }
        if !(0.0..=2.0).contains(&self.parallax) {
            return Err(Error::invalid(format!("parallax {} outside [0, 2]", self.parallax)));
        }
        if !(self.jitter >= 0.0) || !self.translation.0.is_finite() || !self.translation.1.is_finite() {
            return Err(Error::invalid(
                "jitter and translation must be finite, jitter non-negative",
            ));
        }
        Ok(())
    }

    fn horizon(&self) -> f32 {
        self.height as f32 * 0.3
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone)]
struct Object {
    shape: Shape,
    /// World-space centre at frame 0.
    cx: f32,
    cy: f32,
    half_w: f32,
    half_h: f32,
    depth_value: f32,
    speed: f32,
    rgb: [f32; 3],
    /// Stripe texture amplitude and period.
    stripe: (f32, f32),
}

/// Depth-plane value of an object: `1 − normalized depth`, near = bright.
fn depth_to_l(depth: f32, (near, far): (f32, f32)) -> f32 {
    (1.0 - (depth - near) / (far - near)).clamp(0.0, 1.0)
}

fn build_objects(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Object> {
    let (tx, ty) = cfg.translation;
    let reach = 1.0 + 0.5 * cfg.parallax;
    let span_x = cfg.width as f32 + (cfg.frames as f32 * tx * reach).abs() + 160.0;
    let x0 = if tx < 0.0 {
        cfg.frames as f32 * tx * reach - 80.0
    } else {
        -80.0
    };
    let drift_y = cfg.frames as f32 * ty * reach;
    let y_min = cfg.horizon() - 30.0 + drift_y.min(0.0);
    let y_max = cfg.height as f32 - 10.0 + drift_y.max(0.0);
    let (near, far) = cfg.depth_range;
    let mut objects: Vec<Object> = (0..cfg.objects)
        .map(|_| {
            let shape = match cfg.kinds {
                ObjectKinds::Rectangles => Shape::Rect,
                ObjectKinds::Ellipses => Shape::Ellipse,
                ObjectKinds::Mixed => {
                    if rng.random_bool(0.5) {
                        Shape::Rect
                    } else {
                        Shape::Ellipse
                    }
                }
            };
            let depth = rng.random_range(near..far);
            let l = depth_to_l(depth, cfg.depth_range);
            let brightness = (0.15 + 0.75 * l + rng.random_range(-0.1..0.1)).clamp(0.05, 1.0);
            let rgb = [0, 1, 2].map(|_| (brightness * rng.random_range(0.75..1.25)).clamp(0.0, 1.0));
            Object {
                shape,
                cx: x0 + rng.random_range(0.0..span_x),
                cy: rng.random_range(y_min..y_max.max(y_min + 1.0)),
                half_w: rng.random_range(12.0..60.0),
                half_h: rng.random_range(12.0..50.0),
                depth_value: 0.6 + 0.4 * l,
                speed: 1.0 + cfg.parallax * (l - 0.5),
                rgb,
                stripe: (rng.random_range(0.0..0.12), rng.random_range(4.0..12.0)),
            }
        })
        .collect();
    // Painter's order: far first.
    objects.sort_by(|a, b| a.depth_value.total_cmp(&b.depth_value));
    objects
}

/// Integer lattice hash to `[0, 1)`.
fn lattice(seed: u64, x: i64, y: i64) -> f32 {
    let mut h = seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 40) as f32 / (1u64 << 24) as f32
}

/// Smooth value noise with the given cell size.
fn value_noise(seed: u64, x: f32, y: f32, cell: f32) -> f32 {
    let (gx, gy) = (x / cell, y / cell);
    let (ix, iy) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - ix, gy - iy);
    let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
    let (ix, iy) = (ix as i64, iy as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

/// Coverage in `[0, 1]` of an object at screen offset `(dx, dy)` from its
/// centre, anti-aliased over one pixel.
fn coverage(obj: &Object, dx: f32, dy: f32) -> f32 {
    let sd = match obj.shape {
        Shape::Rect => (dx.abs() - obj.half_w).max(dy.abs() - obj.half_h),
        Shape::Ellipse => {
            let r = ((dx / obj.half_w).powi(2) + (dy / obj.half_h).powi(2)).sqrt();
            (r - 1.0) * obj.half_w.min(obj.half_h)
        }
    };
    (0.5 - sd).clamp(0.0, 1.0)
}

fn jitter_for(seed: u64, object: usize, frame: usize, amplitude: f32) -> (f32, f32) {
    if amplitude == 0.0 {
        return (0.0, 0.0);
    }
    let jx = lattice(seed ^ 0x5151, object as i64, frame as i64 * 2);
    let jy = lattice(seed ^ 0x5151, object as i64, frame as i64 * 2 + 1);
    ((2.0 * jx - 1.0) * amplitude, (2.0 * jy - 1.0) * amplitude)
}

fn render_frame(cfg: &SceneConfig, objects: &[Object], t: usize) -> Result<Frame> {
    let (w, h) = (cfg.width, cfg.height);
    let (cam_x, cam_y) = (t as f32 * cfg.translation.0, t as f32 * cfg.translation.1);
    let horizon = cfg.horizon();
    let tex_seed = cfg.seed.wrapping_mul(31).wrapping_add(7);
    let mut rgb = [vec![0.0f32; w * h], vec![0.0f32; w * h], vec![0.0f32; w * h]];
    let mut depth = vec![0.0f32; w * h];

    for row in 0..h {
        for col in 0..w {
            let (wx, wy) = (col as f32 + cam_x, row as f32 + cam_y);
            let i = row * w + col;
            if wy < horizon {
                let s = wy / horizon;
                rgb[0][i] = 0.45 + 0.15 * s;
                rgb[1][i] = 0.6 + 0.1 * s;
                rgb[2][i] = 0.85;
                depth[i] = 0.0;
            } else {
                let g = 0.25 + 0.25 * value_noise(tex_seed, wx, wy, 9.0) + 0.1 * value_noise(tex_seed ^ 1, wx, wy, 3.0);
                rgb[0][i] = g * 0.95;
                rgb[1][i] = g;
                rgb[2][i] = g * 0.9;
                let s = ((wy - horizon) / (h as f32 - horizon)).clamp(0.0, 1.0);
                depth[i] = 0.05 + 0.2 * s;
            }
        }
    }

    for (k, obj) in objects.iter().enumerate() {
        let (jx, jy) = jitter_for(cfg.seed, k, t, cfg.jitter);
        let sx = obj.cx - cam_x * obj.speed + jx;
        let sy = obj.cy - cam_y * obj.speed + jy;
        let c0 = ((sx - obj.half_w - 2.0).floor().max(0.0)) as usize;
        let c1 = ((sx + obj.half_w + 2.0).ceil().min(w as f32)).max(0.0) as usize;
        let r0 = ((sy - obj.half_h - 2.0).floor().max(0.0)) as usize;
        let r1 = ((sy + obj.half_h + 2.0).ceil().min(h as f32)).max(0.0) as usize;
        for row in r0..r1 {
            for col in c0..c1 {
                let (dx, dy) = (col as f32 - sx, row as f32 - sy);
                let a = coverage(obj, dx, dy);
                if a == 0.0 {
                    continue;
                }
                let i = row * w + col;
                let shade = 1.0 + obj.stripe.0 * (std::f32::consts::TAU * dy / obj.stripe.1).sin();
                for (ch, plane) in rgb.iter_mut().enumerate() {
                    let c = (obj.rgb[ch] * shade).clamp(0.0, 1.0);
                    plane[i] = a * c + (1.0 - a) * plane[i];
                }
                depth[i] = a * obj.depth_value + (1.0 - a) * depth[i];
            }
        }
    }

    if cfg.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((t as u64 + 1) << 32));
        for plane in &mut rgb {
            for v in plane.iter_mut() {
                *v = (*v + rng.random_range(-cfg.noise..=cfg.noise)).clamp(0.0, 1.0);
            }
        }
    }

    let [r, g, b] = rgb;
    Frame::new(w, h)
        .with(ChannelId::R, Plane::new(w, h, r)?)?
        .with(ChannelId::G, Plane::new(w, h, g)?)?
        .with(ChannelId::B, Plane::new(w, h, b)?)?
        .with(ChannelId::L, Plane::new(w, h, depth)?)
}

/// Renders `frames` consecutive frames with R, G, B and L planes.
pub fn generate_sequence(config: &SceneConfig) -> Result<Vec<Frame>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let objects = build_objects(config, &mut rng);
    (0..config.frames)
        .into_par_iter()
        .map(|t| render_frame(config, &objects, t))
        .collect()
}
