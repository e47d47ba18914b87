/// A rigid wall: a segment thickened into an axis-aligned box.
///
/// The box extends `half_thickness` beyond the segment on every side, so the
/// segment lies strictly inside it and no motion that stays outside the box
/// can touch the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub half_thickness: f64,
}

impl Wall {
    pub fn desk_default() -> Self {
        Self {
            from: [-0.3, 0.0],
            to: [0.0, 0.0],
            half_thickness: 0.01,
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let h = self.half_thickness;
        let lo = [self.from[0].min(self.to[0]) - h, self.from[1].min(self.to[1]) - h];
        let hi = [self.from[0].max(self.to[0]) + h, self.from[1].max(self.to[1]) + h];
        (lo, hi)
    }

    /// Strictly inside the wall box.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.bounds();
        (0..2).all(|k| p[k] > lo[k] && p[k] < hi[k])
    }

    /// Where a body moving from `from` towards `to` comes to rest. Motion is
    /// truncated at the face it would enter; sliding is not modelled.
    pub fn block(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let (lo, hi) = self.bounds();
        let d = [to[0] - from[0], to[1] - from[1]];
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut entry_axis = None;
        let mut entry_face = 0.0;
        for k in 0..2 {
            if d[k] == 0.0 {
                if from[k] <= lo[k] || from[k] >= hi[k] {
                    return to;
                }
                continue;
            }
            let (near, far) = if d[k] > 0.0 { (lo[k], hi[k]) } else { (hi[k], lo[k]) };
            let t_near = (near - from[k]) / d[k];
            let t_far = (far - from[k]) / d[k];
            if t_near > t_enter {
                t_enter = t_near;
                entry_axis = Some(k);
                entry_face = near;
            }
            t_exit = t_exit.min(t_far);
        }
        if t_enter.max(0.0) >= t_exit.min(1.0) {
            return to;
        }
        match entry_axis {
            Some(k) if t_enter >= 0.0 => {
                let mut p = [from[0] + t_enter * d[0], from[1] + t_enter * d[1]];
                p[k] = entry_face;
                p
            }
            // Already inside: refuse to move.
            _ => from,
        }
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}
