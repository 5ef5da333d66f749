//! Binary morphology with square structuring elements.
//!
//! Borders use edge replication, which for a square element is the same as
//! clipping the neighborhood to the image.

use super::image::BinaryMask;

fn separable(mask: &BinaryMask, radius: usize, want: bool) -> BinaryMask {
    // `want = true` computes dilation (any set), `false` erosion (all set).
    let (w, h) = (mask.width(), mask.height());
    let src = mask.bits();
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            let hit = row[lo..=hi].contains(&want);
            rows[y * w + x] = if hit { want } else { !want };
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            let hit = (lo..=hi).any(|yy| rows[yy * w + x] == want);
            out[y * w + x] = if hit { want } else { !want };
        }
    }
    BinaryMask::from_bits(w, h, out).expect("dimensions preserved")
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    separable(mask, radius, true)
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    separable(mask, radius, false)
}

pub fn opening(mask: &BinaryMask, radius: usize) -> BinaryMask {
    dilate(&erode(mask, radius), radius)
}

/// `dilate XOR erode`: true exactly where the `(2r+1)²` neighborhood is
/// not constant.
pub fn morphological_gradient(mask: &BinaryMask, se_radius: usize) -> BinaryMask {
    let d = dilate(mask, se_radius);
    let e = erode(mask, se_radius);
    let bits = d.bits().iter().zip(e.bits()).map(|(a, b)| a ^ b).collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("dimensions preserved")
}

/// Drops 8-connected components with fewer than `min_area` pixels.
pub(crate) fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if seen[start] || !mask.bits()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask.bits()[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() < min_area {
            for &i in &component {
                out.set(i % w, i / w, false);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_gradient(mask: &BinaryMask, r: usize) -> BinaryMask {
        let (w, h) = (mask.width(), mask.height());
        let mut out = BinaryMask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut any = false;
                let mut all = true;
                for dy in -(r as isize)..=r as isize {
                    for dx in -(r as isize)..=r as isize {
                        let nx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let ny = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        let v = mask.get(nx, ny);
                        any |= v;
                        all &= v;
                    }
                }
                out.set(x, y, any && !all);
            }
        }
        out
    }

    #[test]
    fn constant_masks_have_no_gradient() {
        for v in [false, true] {
            let m = BinaryMask::from_bits(7, 5, vec![v; 35]).unwrap();
            assert_eq!(morphological_gradient(&m, 1).count(), 0);
            assert_eq!(morphological_gradient(&m, 3).count(), 0);
        }
    }

    #[test]
    fn single_pixel_gives_three_by_three_block() {
        let mut m = BinaryMask::new(9, 9);
        m.set(4, 4, true);
        let g = morphological_gradient(&m, 1);
        for y in 0..9 {
            for x in 0..9 {
                assert_eq!(g.get(x, y), (3..=5).contains(&x) && (3..=5).contains(&y));
            }
        }
    }

    #[test]
    fn square_gives_two_pixel_ring() {
        let mut m = BinaryMask::new(30, 30);
        for y in 10..20 {
            for x in 10..20 {
                m.set(x, y, true);
            }
        }
        let g = morphological_gradient(&m, 1);
        assert_eq!(g, brute_gradient(&m, 1));
        // Outer ring (12x12 perimeter) plus the square's own boundary.
        assert_eq!(g.count(), (12 * 12 - 10 * 10) + (10 * 10 - 8 * 8));
        assert!(g.get(9, 9) && g.get(10, 10) && !g.get(11, 11) && !g.get(8, 8));
    }

    #[test]
    fn opening_removes_specks_keeps_blocks() {
        let mut m = BinaryMask::new(20, 20);
        m.set(2, 2, true);
        for y in 8..14 {
            for x in 8..14 {
                m.set(x, y, true);
            }
        }
        let o = opening(&m, 1);
        assert!(!o.get(2, 2));
        assert_eq!(o.count(), 36);
    }

    #[test]
    fn small_components_removed() {
        let mut m = BinaryMask::new(20, 20);
        for x in 0..5 {
            m.set(x, 0, true);
        }
        for y in 10..19 {
            for x in 10..19 {
                m.set(x, y, true);
            }
        }
        let cleaned = remove_small_components(&m, 64);
        assert_eq!(cleaned.count(), 81);
        assert!(!cleaned.get(0, 0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn matches_brute_force(
                w in 1usize..24, h in 1usize..24, r in 1usize..4, seed in any::<u64>()
            ) {
                let mut s = seed | 1;
                let bits = (0..w * h).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s % 3 == 0 }).collect();
                let m = BinaryMask::from_bits(w, h, bits).unwrap();
                prop_assert_eq!(morphological_gradient(&m, r), brute_gradient(&m, r));
            }
        }
    }
}
