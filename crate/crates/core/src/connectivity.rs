//! Shared neighborhood geometry for the connectivity flags: the 8-neighbor
//! ring and the Euclidean disc, both excluding the center pixel.

pub const IMMEDIATE_OFFSETS: [(i32, i32); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// All offsets with 0 < dx^2 + dy^2 <= radius^2.
pub fn disc_offsets(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx != 0 || dy != 0) && dx * dx + dy * dy <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Evaluate (immediate, radial) connectivity at (x, y) against an arbitrary
/// vessel predicate. Out-of-bounds neighbors count as non-vessel; the center
/// pixel is never consulted.
pub fn connectivity_at(
    width: usize,
    height: usize,
    x: usize,
    y: usize,
    disc: &[(i32, i32)],
    is_vessel: impl Fn(usize, usize) -> bool,
) -> (bool, bool) {
    let probe = |dx: i32, dy: i32| -> bool {
        let nx = x as i64 + dx as i64;
        let ny = y as i64 + dy as i64;
        nx >= 0
            && ny >= 0
            && (nx as usize) < width
            && (ny as usize) < height
            && is_vessel(nx as usize, ny as usize)
    };

    let immediate = IMMEDIATE_OFFSETS.iter().any(|&(dx, dy)| probe(dx, dy));
    // The 8-ring lies inside any disc of radius >= 2, so skip the rescan.
    let radial = immediate || disc.iter().any(|&(dx, dy)| probe(dx, dy));
    (immediate, radial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_excludes_center_and_respects_radius() {
        let disc = disc_offsets(7);
        assert!(!disc.contains(&(0, 0)));
        for &(dx, dy) in &disc {
            assert!(dx * dx + dy * dy <= 49);
        }
        // Brute-force count over the bounding square.
        let mut expect = 0;
        for dy in -7i32..=7 {
            for dx in -7i32..=7 {
                if (dx != 0 || dy != 0) && dx * dx + dy * dy <= 49 {
                    expect += 1;
                }
            }
        }
        assert_eq!(disc.len(), expect);
    }

    #[test]
    fn immediate_ring_is_within_radius_two_disc() {
        let disc = disc_offsets(2);
        for off in IMMEDIATE_OFFSETS {
            assert!(disc.contains(&off));
        }
    }
}
