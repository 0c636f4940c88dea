//! Dense optical flow by Horn–Schunck iteration.
//!
//! Spatial derivatives are central differences averaged over both frames,
//! with replicated edges; the temporal derivative is the frame difference.
//! Brightness is measured in 8-bit grey levels (plane value × 255), so
//! `alpha` is on the usual grey-level scale.
//! Each Jacobi sweep replaces the flow by its weighted neighbourhood mean
//! projected toward the brightness-constancy line:
//!
//! `u ← ū − Ix (Ix ū + Iy v̄ + It) / (α² + Ix² + Iy²)`, likewise for `v`.

use crate::error::{Error, Result};
use crate::frame::Plane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Smoothness weight.
    pub alpha: f32,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            iterations: 200,
        }
    }
}

/// Per-pixel velocity in pixels per frame; `v` grows downward.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Plane,
    pub v: Plane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Plane::filled(width, height, 0.0),
            v: Plane::filled(width, height, 0.0),
        }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }
}

#[inline]
fn at(p: &[f32], w: usize, h: usize, r: isize, c: isize) -> f32 {
    let r = r.clamp(0, h as isize - 1) as usize;
    let c = c.clamp(0, w as isize - 1) as usize;
    p[r * w + c]
}

/// Classic Horn–Schunck neighbourhood mean: 1/6 on the 4-neighbours,
/// 1/12 on the diagonals.
fn local_mean(src: &[f32], w: usize, h: usize, dst: &mut [f32]) {
    for (r, out) in dst.chunks_mut(w).enumerate() {
        let up = &src[r.saturating_sub(1) * w..][..w];
        let mid = &src[r * w..][..w];
        let down = &src[(r + 1).min(h - 1) * w..][..w];
        for c in 0..w {
            let (l, rr) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let edge = up[c] + down[c] + mid[l] + mid[rr];
            let diag = up[l] + up[rr] + down[l] + down[rr];
            out[c] = edge / 6.0 + diag / 12.0;
        }
    }
}

pub fn estimate_flow(prev: &Plane, next: &Plane, params: &FlowParams) -> Result<FlowField> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::shape(
            "estimate_flow",
            &[prev.height(), prev.width()],
            &[next.height(), next.width()],
        ));
    }
    if !(params.alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {}", params.alpha)));
    }
    if params.iterations == 0 {
        return Err(Error::invalid("flow needs at least one iteration"));
    }
    let (w, h) = (prev.width(), prev.height());
    let (a, b) = (prev.data(), next.data());
    let n = w * h;
    const GREY_LEVELS: f32 = 255.0;
    let mut ix = vec![0.0f32; n];
    let mut iy = vec![0.0f32; n];
    let mut it = vec![0.0f32; n];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            let dx = |p: &[f32]| 0.5 * (at(p, w, h, r, c + 1) - at(p, w, h, r, c - 1));
            let dy = |p: &[f32]| 0.5 * (at(p, w, h, r + 1, c) - at(p, w, h, r - 1, c));
            ix[i] = GREY_LEVELS * 0.5 * (dx(a) + dx(b));
            iy[i] = GREY_LEVELS * 0.5 * (dy(a) + dy(b));
            it[i] = GREY_LEVELS * (b[i] - a[i]);
        }
    }
    let alpha2 = params.alpha * params.alpha;
    let denom: Vec<f32> = ix.iter().zip(&iy).map(|(x, y)| alpha2 + x * x + y * y).collect();

    let mut u = vec![0.0f32; n];
    let mut v = vec![0.0f32; n];
    let mut ubar = vec![0.0f32; n];
    let mut vbar = vec![0.0f32; n];
    for _ in 0..params.iterations {
        local_mean(&u, w, h, &mut ubar);
        local_mean(&v, w, h, &mut vbar);
        for i in 0..n {
            let t = (ix[i] * ubar[i] + iy[i] * vbar[i] + it[i]) / denom[i];
            u[i] = ubar[i] - ix[i] * t;
            v[i] = vbar[i] - iy[i] * t;
        }
    }
    Ok(FlowField {
        u: Plane::new(w, h, u)?,
        v: Plane::new(w, h, v)?,
    })
}

/// Maps a velocity to `[0, 1]` as `clamp(x, -F, F) / (2F) + 0.5`.
pub fn flow_to_unit(x: f32, clamp: f32) -> f32 {
    x.clamp(-clamp, clamp) / (2.0 * clamp) + 0.5
}

/// Network-ready `(U, V)` planes for a flow field.
pub fn flow_to_channels(flow: &FlowField, clamp: f32) -> Result<(Plane, Plane)> {
    if !(clamp > 0.0) {
        return Err(Error::invalid(format!("flow clamp must be positive, got {clamp}")));
    }
    let map = |p: &Plane| {
        Plane::new(
            p.width(),
            p.height(),
            p.data().iter().map(|&x| flow_to_unit(x, clamp)).collect(),
        )
    };
    Ok((map(&flow.u)?, map(&flow.v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_have_zero_flow() {
        let p = Plane::new(16, 12, (0..192).map(|i| ((i * 37) % 101) as f32 / 100.0).collect()).unwrap();
        let f = estimate_flow(&p, &p, &FlowParams::default()).unwrap();
        assert!(f.u.data().iter().chain(f.v.data()).all(|x| x.abs() <= 1e-6));
    }

    #[test]
    fn textureless_pair_has_zero_flow() {
        let a = Plane::filled(10, 10, 0.3);
        let b = Plane::filled(10, 10, 0.7);
        let f = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
        assert!(f.u.data().iter().chain(f.v.data()).all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = Plane::filled(10, 10, 0.3);
        let b = Plane::filled(10, 9, 0.3);
        assert!(estimate_flow(&a, &b, &FlowParams::default()).is_err());
        let zero_alpha = FlowParams {
            alpha: 0.0,
            ..FlowParams::default()
        };
        assert!(estimate_flow(&a, &a, &zero_alpha).is_err());
        let no_iters = FlowParams {
            iterations: 0,
            ..FlowParams::default()
        };
        assert!(estimate_flow(&a, &a, &no_iters).is_err());
    }

    #[test]
    fn channel_mapping() {
        assert_eq!(flow_to_unit(0.0, 8.0), 0.5);
        assert_eq!(flow_to_unit(8.0, 8.0), 1.0);
        assert_eq!(flow_to_unit(-8.0, 8.0), 0.0);
        assert_eq!(flow_to_unit(16.0, 8.0), 1.0);
        assert!(flow_to_channels(&FlowField::zeros(2, 2), 0.0).is_err());
    }
}
