use serde::{Deserialize, Serialize};

/// Plane rotation `[c s; -s c]` chosen to annihilate the second component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GivensRotation {
    pub c: f64,
    pub s: f64,
}

impl GivensRotation {
    /// Returns the rotation and `r` with `[c s; -s c] (a, b)ᵀ = (r, 0)ᵀ`, `r ≥ 0`.
    pub fn annihilate(a: f64, b: f64) -> (Self, f64) {
        if b == 0.0 {
            if a == 0.0 {
                return (GivensRotation { c: 1.0, s: 0.0 }, 0.0);
            }
            return (GivensRotation { c: a.signum(), s: 0.0 }, a.abs());
        }
        let r = a.hypot(b);
        (GivensRotation { c: a / r, s: b / r }, r)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.c * x + self.s * y, -self.s * x + self.c * y)
    }
}
