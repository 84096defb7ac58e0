//! Synthetic angiogram-style phantoms.
//!
//! Deterministic generator for test and benchmark imagery: dark tubular
//! trees over a bright, structured background. Trunks taper and branch;
//! some branches fade to near-background contrast so that parts of the
//! tree are only recoverable through spatial continuity, mirroring the
//! faint distal segments of real contrast imagery. The ground truth is
//! derived from the stamped geometry, not from the rendered intensities.

use crate::imaging::{BinaryMask, DatasetEntry, GrayImage};
use crate::rng::{substream, SplitMix64};

/// Generator knobs. The defaults produce a corpus on which grey-level
/// evidence alone leaves a visible recall gap for connectivity to close.
#[derive(Debug, Clone)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    /// Vessel trees per image.
    pub trunks: usize,
    /// Starting contrast depth below background, sampled per trunk.
    pub depth_range: (f64, f64),
    /// Starting half-width profile, sampled per trunk.
    pub width_range: (f64, f64),
    /// Fraction of walkers whose contrast fades along the path.
    pub fade_probability: f64,
    /// Absolute contrast depth a fading walker settles at; the faint
    /// plateau where only spatial continuity can confirm a vessel.
    pub fade_plateau_range: (f64, f64),
    /// Fraction of a fading walker's length spent ramping down before the
    /// plateau.
    pub fade_ramp: f64,
    /// Width multiplier a walker tapers to at its end.
    pub taper_floor: f64,
    /// Standard deviation of the per-pixel noise.
    pub noise_sigma: f64,
    /// Amplitude of the mid-scale background blobs.
    pub blob_amplitude: f64,
    /// Geometry below this rendered depth is left out of the truth.
    pub truth_min_depth: f64,
    /// Stamp coverage at or above which a pixel joins the truth; lower
    /// values trace the tube out to its anti-aliased flanks the way a
    /// human annotation does.
    pub truth_min_coverage: f64,
    /// Faint vessel-like trees that are not part of the truth: stand-ins
    /// for the rib edges, catheters, and out-of-plane vasculature of real
    /// frames. They are generated by the same walker as the vessel tree but
    /// capped to an ambiguous contrast band and kept clear of the true
    /// tree, so spatial continuity is the only reliable way to tell the
    /// two apart.
    pub ghost_trunks: usize,
    /// Contrast depth of the ghost structures.
    pub ghost_depth_range: (f64, f64),
    /// Width multiplier for ghost structures relative to `width_range`,
    /// matching them to the faint distal segments they imitate.
    pub ghost_width_scale: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            width: 512,
            height: 512,
            trunks: 3,
            depth_range: (55.0, 90.0),
            width_range: (2.2, 4.2),
            fade_probability: 0.55,
            fade_plateau_range: (18.0, 30.0),
            fade_ramp: 0.35,
            taper_floor: 0.35,
            noise_sigma: 5.5,
            blob_amplitude: 11.0,
            truth_min_depth: 3.0,
            truth_min_coverage: 0.35,
            ghost_trunks: 24,
            ghost_depth_range: (22.0, 34.0),
            ghost_width_scale: 0.9,
        }
    }
}

struct Walker {
    x: f64,
    y: f64,
    angle: f64,
    half_width: f64,
    depth: f64,
    fade_floor: f64,
    steps_left: usize,
    total_steps: usize,
    generation: u8,
}

/// One rendered frame with the generator's internal layers exposed, for
/// corpus diagnostics.
pub struct PhantomParts {
    pub image: GrayImage,
    pub truth: BinaryMask,
    /// Pixels covered by ghost structures (never part of the truth).
    pub ghost: BinaryMask,
    /// Pixels of the truth lying on a faded (plateau) stretch.
    pub faint_truth: BinaryMask,
}

/// Render one phantom frame with layer masks.
pub fn generate_parts(params: &PhantomParams, seed: u64) -> PhantomParts {
    let (w, h) = (params.width, params.height);
    let mut rng = SplitMix64::new(seed);

    let mut background = render_background(params, &mut rng);
    let (depth_map, coverage) =
        render_tree(params, &mut rng, params.trunks, params.depth_range, 1.0, None);
    let (ghost_depth, ghost_coverage) = render_tree(
        params,
        &mut rng,
        params.ghost_trunks,
        params.ghost_depth_range,
        params.ghost_width_scale,
        Some(&coverage),
    );

    let combined: Vec<f64> = depth_map
        .iter()
        .zip(&ghost_depth)
        .map(|(&v, &d)| v.max(d))
        .collect();
    let depth_blurred = binomial_blur(&combined, w, h);
    let mut data = vec![0.0f64; w * h];
    for i in 0..w * h {
        let v = background[i] - depth_blurred[i] + params.noise_sigma * rng.next_gaussian();
        data[i] = v.clamp(0.0, 255.0);
    }
    background.clear();

    let in_truth = |i: usize| {
        coverage[i] >= params.truth_min_coverage && depth_map[i] >= params.truth_min_depth
    };
    let truth = BinaryMask::from_data(w, h, (0..w * h).map(in_truth).collect()).expect("dims");
    let ghost = BinaryMask::from_data(
        w,
        h,
        (0..w * h)
            .map(|i| ghost_coverage[i] >= params.truth_min_coverage)
            .collect(),
    )
    .expect("dims");
    let plateau_cut = params.fade_plateau_range.1 + 6.0;
    let faint_truth = BinaryMask::from_data(
        w,
        h,
        (0..w * h)
            .map(|i| in_truth(i) && depth_map[i] <= plateau_cut)
            .collect(),
    )
    .expect("dims");

    PhantomParts {
        image: GrayImage::from_data(w, h, data).expect("clamped"),
        truth,
        ghost,
        faint_truth,
    }
}

/// Render one phantom frame and its ground truth.
pub fn generate(params: &PhantomParams, seed: u64) -> (GrayImage, BinaryMask) {
    let parts = generate_parts(params, seed);
    (parts.image, parts.truth)
}

/// A corpus of `count` phantoms with ids `phantom1..phantomN`, all derived
/// from one master seed.
pub fn generate_corpus(params: &PhantomParams, count: usize, seed: u64) -> Vec<DatasetEntry> {
    (0..count)
        .map(|i| {
            let (image, truth) = generate(params, substream(seed, i as u64));
            DatasetEntry {
                image_id: format!("phantom{}", i + 1),
                image,
                truth,
            }
        })
        .collect()
}

/// Write a corpus to `dir` in the dataset layout (`<id>.png` + `<id>_gt.png`).
pub fn write_corpus(entries: &[DatasetEntry], dir: &std::path::Path) -> crate::error::Result<()> {
    for entry in entries {
        let quantized: Vec<u8> = entry
            .image
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        crate::imaging::save_gray_u8(
            &quantized,
            entry.image.width(),
            entry.image.height(),
            dir.join(format!("{}.png", entry.image_id)),
        )?;
        crate::imaging::save_mask(&entry.truth, dir.join(format!("{}_gt.png", entry.image_id)))?;
    }
    Ok(())
}

fn render_background(params: &PhantomParams, rng: &mut SplitMix64) -> Vec<f64> {
    let (w, h) = (params.width, params.height);
    let mut field = vec![185.0f64; w * h];

    // Two low-frequency illumination waves.
    for _ in 0..2 {
        let fx = (rng.next_f64() - 0.5) * 2.0 / w as f64;
        let fy = (rng.next_f64() - 0.5) * 2.0 / h as f64;
        let phase = rng.next_f64() * std::f64::consts::TAU;
        let amp = 7.0 + rng.next_f64() * 6.0;
        for y in 0..h {
            for x in 0..w {
                field[y * w + x] += amp
                    * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).cos();
            }
        }
    }

    // Mid-scale soft blobs: tissue shadows that confound local statistics.
    let blob_count = (w * h) / 6000;
    for _ in 0..blob_count {
        let cx = rng.next_f64() * w as f64;
        let cy = rng.next_f64() * h as f64;
        let sigma = 12.0 + rng.next_f64() * 30.0;
        let amp = (rng.next_f64() * 2.0 - 1.0) * params.blob_amplitude;
        let reach = (3.0 * sigma) as i64;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let x0 = ((cx as i64) - reach).max(0) as usize;
        let x1 = (((cx as i64) + reach) as usize).min(w - 1);
        let y0 = ((cy as i64) - reach).max(0) as usize;
        let y1 = (((cy as i64) + reach) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                field[y * w + x] += amp * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    field
}

fn render_tree(
    params: &PhantomParams,
    rng: &mut SplitMix64,
    trunks: usize,
    depth_range: (f64, f64),
    width_scale: f64,
    avoid: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (params.width, params.height);
    let mut depth_map = vec![0.0f64; w * h];
    let mut coverage = vec![0.0f64; w * h];
    let span = w.max(h) as f64;

    // Stay clear of already-rendered geometry: growth must never be able
    // to step from the true tree onto these structures.
    let too_close = |x: f64, y: f64| -> bool {
        let Some(field) = avoid else { return false };
        let r = 3i64;
        let (cx, cy) = (x as i64, y as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                let (nx, ny) = (cx + dx, cy + dy);
                if nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && field[ny as usize * w + nx as usize] > 0.2
                {
                    return true;
                }
            }
        }
        false
    };

    let mut walkers: Vec<Walker> = Vec::new();
    for _ in 0..trunks {
        // Enter from a random border point, heading inward.
        let (x, y, inward) = match rng.next_below(4) {
            0 => (rng.next_f64() * w as f64, 2.0, std::f64::consts::FRAC_PI_2),
            1 => (rng.next_f64() * w as f64, h as f64 - 3.0, -std::f64::consts::FRAC_PI_2),
            2 => (2.0, rng.next_f64() * h as f64, 0.0),
            _ => (w as f64 - 3.0, rng.next_f64() * h as f64, std::f64::consts::PI),
        };
        let steps = ((0.8 + rng.next_f64() * 0.6) * span) as usize;
        let fades = rng.next_f64() < params.fade_probability;
        let depth = sample(rng, depth_range);
        walkers.push(Walker {
            x,
            y,
            angle: inward + (rng.next_f64() - 0.5) * 0.9,
            half_width: width_scale * sample(rng, params.width_range) / 2.0,
            depth,
            fade_floor: if fades {
                (sample(rng, params.fade_plateau_range) / depth).min(1.0)
            } else {
                0.75 + rng.next_f64() * 0.25
            },
            steps_left: steps,
            total_steps: steps,
            generation: 0,
        });
    }

    while let Some(mut walker) = walkers.pop() {
        while walker.steps_left > 0 {
            walker.steps_left -= 1;
            if too_close(walker.x, walker.y) {
                break;
            }
            let t = 1.0 - walker.steps_left as f64 / walker.total_steps as f64;
            let ramp = (t / params.fade_ramp).min(1.0);
            let fade = 1.0 - ramp * (1.0 - walker.fade_floor);
            let taper = 1.0 - (1.0 - params.taper_floor) * t;
            stamp(
                &mut depth_map,
                &mut coverage,
                w,
                h,
                walker.x,
                walker.y,
                (walker.half_width * taper).max(0.55),
                walker.depth * fade,
            );

            walker.angle += (rng.next_f64() - 0.5) * 0.24;
            walker.x += walker.angle.cos();
            walker.y += walker.angle.sin();
            if walker.x < -8.0
                || walker.y < -8.0
                || walker.x > w as f64 + 8.0
                || walker.y > h as f64 + 8.0
            {
                break;
            }

            // Occasional branching, two generations deep.
            if walker.generation < 2 && walker.steps_left > 40 && rng.next_f64() < 0.012 {
                let sign = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
                let child_steps = walker.steps_left / 2 + rng.next_below(walker.steps_left / 2 + 1);
                let child_fades = rng.next_f64() < params.fade_probability;
                let child_depth = walker.depth * fade * 0.95;
                walkers.push(Walker {
                    x: walker.x,
                    y: walker.y,
                    angle: walker.angle + sign * (0.35 + rng.next_f64() * 0.55),
                    half_width: (walker.half_width * taper * 0.8).max(0.55),
                    depth: child_depth,
                    fade_floor: if child_fades {
                        (sample(rng, params.fade_plateau_range) / child_depth).min(1.0)
                    } else {
                        0.7 + rng.next_f64() * 0.3
                    },
                    steps_left: child_steps,
                    total_steps: child_steps,
                    generation: walker.generation + 1,
                });
            }
        }
    }
    (depth_map, coverage)
}

fn sample(rng: &mut SplitMix64, range: (f64, f64)) -> f64 {
    range.0 + rng.next_f64() * (range.1 - range.0)
}

/// Stamp an anti-aliased disc: coverage ramps from 1 inside the radius to 0
/// one pixel outside it. Depth and coverage keep per-pixel maxima.
fn stamp(
    depth_map: &mut [f64],
    coverage: &mut [f64],
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    radius: f64,
    depth: f64,
) {
    let reach = (radius + 1.5) as i64;
    let x0 = (cx as i64 - reach).max(0);
    let x1 = (cx as i64 + reach).min(w as i64 - 1);
    let y0 = (cy as i64 - reach).max(0);
    let y1 = (cy as i64 + reach).min(h as i64 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let dist = (dx * dx + dy * dy).sqrt();
            let c = (radius + 0.5 - dist).clamp(0.0, 1.0);
            if c > 0.0 {
                let idx = y as usize * w + x as usize;
                coverage[idx] = coverage[idx].max(c);
                depth_map[idx] = depth_map[idx].max(c * depth);
            }
        }
    }
}

fn binomial_blur(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut tmp = vec![0.0f64; w * h];
    let mut out = vec![0.0f64; w * h];
    let at = |v: &[f64], x: i64, y: i64| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        v[y * w + x]
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            tmp[y as usize * w + x as usize] =
                0.25 * (at(src, x - 1, y) + 2.0 * at(src, x, y) + at(src, x + 1, y));
        }
    }
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            out[y as usize * w + x as usize] =
                0.25 * (at(&tmp, x, y - 1) + 2.0 * at(&tmp, x, y) + at(&tmp, x, y + 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let params = PhantomParams {
            width: 64,
            height: 64,
            ..PhantomParams::default()
        };
        let (a_img, a_truth) = generate(&params, 5);
        let (b_img, b_truth) = generate(&params, 5);
        assert_eq!(a_img, b_img);
        assert_eq!(a_truth, b_truth);
        let (c_img, _) = generate(&params, 6);
        assert_ne!(a_img, c_img);
    }

    #[test]
    fn corpus_has_vessels_and_background() {
        let params = PhantomParams {
            width: 128,
            height: 128,
            ..PhantomParams::default()
        };
        for entry in generate_corpus(&params, 3, 11) {
            let vessels = entry.truth.count_true();
            let total = 128 * 128;
            assert!(vessels > total / 100, "{}: too few vessels", entry.image_id);
            assert!(vessels < total / 3, "{}: too many vessels", entry.image_id);
        }
    }

    #[test]
    fn roundtrips_through_dataset_layout() {
        let dir = tempfile::tempdir().unwrap();
        let params = PhantomParams {
            width: 48,
            height: 48,
            ..PhantomParams::default()
        };
        let corpus = generate_corpus(&params, 2, 3);
        write_corpus(&corpus, dir.path()).unwrap();
        let loaded = crate::imaging::load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].image_id, "phantom1");
        assert_eq!(loaded[0].truth, corpus[0].truth);
    }
}
