use rand::Rng;

use super::SimConfig;
use crate::math::hypot;

/// Random-waypoint walker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walker {
    pub pos: [f64; 2],
    pub waypoint: [f64; 2],
    pub speed: f64,
    /// Slots left to wait at the current waypoint.
    pub pause: u32,
}

fn uniform_point<R: Rng>(rng: &mut R, side: f64) -> [f64; 2] {
    [rng.gen::<f64>() * side, rng.gen::<f64>() * side]
}

/// Uniform on (v_min, v_max]; never zero, so every leg ends.
fn draw_speed<R: Rng>(rng: &mut R, cfg: &SimConfig) -> f64 {
    if cfg.v_min >= cfg.v_max {
        cfg.v_max
    } else {
        cfg.v_max - (cfg.v_max - cfg.v_min) * rng.gen::<f64>()
    }
}

impl Walker {
    pub fn spawn<R: Rng>(rng: &mut R, cfg: &SimConfig) -> Self {
        Walker {
            pos: uniform_point(rng, cfg.area),
            waypoint: uniform_point(rng, cfg.area),
            speed: draw_speed(rng, cfg),
            pause: 0,
        }
    }

    fn next_leg<R: Rng>(&mut self, rng: &mut R, cfg: &SimConfig) {
        self.waypoint = uniform_point(rng, cfg.area);
        self.speed = draw_speed(rng, cfg);
    }

    /// One slot of movement. Waypoints are drawn inside the area, so the
    /// walker never leaves it.
    pub fn advance<R: Rng>(&mut self, rng: &mut R, cfg: &SimConfig) {
        if self.pause > 0 {
            self.pause -= 1;
            if self.pause == 0 {
                self.next_leg(rng, cfg);
            }
            return;
        }
        let dx = self.waypoint[0] - self.pos[0];
        let dy = self.waypoint[1] - self.pos[1];
        let dist = hypot(dx, dy);
        if dist <= self.speed {
            self.pos = self.waypoint;
            self.pause = rng.gen_range(0..=cfg.m_max);
            if self.pause == 0 {
                self.next_leg(rng, cfg);
            }
        } else {
            let s = self.speed / dist;
            self.pos = [self.pos[0] + dx * s, self.pos[1] + dy * s];
        }
    }

    #[inline]
    pub fn within(&self, other: &Walker, range_sq: f64) -> bool {
        let dx = self.pos[0] - other.pos[0];
        let dy = self.pos[1] - other.pos[1];
        dx * dx + dy * dy <= range_sq
    }
}
